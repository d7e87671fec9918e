//! Router softmax and top-k selection.

use crate::error::{Error, Result};
use crate::linalg::softmax_into;

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingDecision {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    /// Top-k expert indices, descending by probability, ties to the lower index.
    pub selected: Vec<usize>,
}

impl RoutingDecision {
    /// Probabilities of the selected experts in rank order.
    pub fn selected_probs(&self) -> Vec<f64> {
        self.selected.iter().map(|&m| self.probs[m]).collect()
    }
}

pub fn route_probs(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::InvalidInput("no router logits".into()));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite router logit {bad}")));
    }
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    Ok(out)
}

pub fn select_topk(probs: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > probs.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", probs.len())));
    }
    let mut out = Vec::with_capacity(k);
    select_topk_into(probs, k, &mut out);
    Ok(out)
}

/// Partial insertion selection; `k` is small relative to the expert count.
pub(crate) fn select_topk_into(probs: &[f64], k: usize, out: &mut Vec<usize>) {
    out.clear();
    for (m, &p) in probs.iter().enumerate() {
        // Strict `>` keeps earlier (lower) indices ahead on ties.
        let pos = out.iter().position(|&s| p > probs[s]).unwrap_or(out.len());
        if pos < k {
            if out.len() == k {
                out.pop();
            }
            out.insert(pos, m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_uniform_probs() {
        let p = route_probs(&[0.0; 4]).unwrap();
        assert!(p.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn non_finite_logits_rejected() {
        assert!(matches!(route_probs(&[0.0, f64::NAN]), Err(Error::InvalidInput(_))));
        assert!(matches!(route_probs(&[f64::INFINITY]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn tie_goes_to_lower_index() {
        assert_eq!(select_topk(&[0.3, 0.3, 0.4], 2).unwrap(), vec![2, 0]);
    }

    #[test]
    fn select_all_sorts() {
        assert_eq!(select_topk(&[0.1, 0.5, 0.2, 0.2], 4).unwrap(), vec![1, 2, 3, 0]);
    }

    #[test]
    fn k_out_of_range() {
        assert!(select_topk(&[0.5, 0.5], 0).is_err());
        assert!(select_topk(&[0.5, 0.5], 3).is_err());
    }
}
