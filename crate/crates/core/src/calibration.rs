//! Layer-level global importance factors and the combined gating score.
//!
//! A layer's factor is the mean KL divergence, over the calibration set,
//! between the model's final-position distribution and the distribution
//! obtained when every routed expert of that layer is dropped. Factors are
//! normalised to sum to one, so a score `alpha_norm[l] · π` stays in (0, 1).

use serde::{Deserialize, Serialize};

use crate::data::CalibrationSet;
use crate::engine::{SkipPolicy, SyntheticMoeModel};
use crate::error::{Error, Result};
use crate::parallel::map_ordered;

/// Floor applied to `q` inside the logarithm.
pub const KL_EPSILON: f64 = 1e-12;

const PROB_SUM_TOLERANCE: f64 = 1e-9;

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput(format!("{name} has negative or non-finite entries")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(Error::InvalidInput(format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

/// `D_KL(p ‖ q)` in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::InvalidInput(format!(
            "distribution lengths differ or are empty ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    check_distribution("p", p)?;
    check_distribution("q", q)?;
    Ok(kl_unchecked(p, q))
}

pub(crate) fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&pv, &qv) in p.iter().zip(q) {
        if pv > 0.0 {
            sum += pv * (pv / qv.max(KL_EPSILON)).ln();
        }
    }
    sum.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFactors {
    pub alpha: Vec<f64>,
    pub alpha_norm: Vec<f64>,
}

impl GlobalFactors {
    /// Normalise raw per-layer factors. An all-zero vector maps to uniform weights.
    pub fn from_alpha(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidInput("no layers".into()));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidInput("alpha must be finite and non-negative".into()));
        }
        let total: f64 = alpha.iter().sum();
        let alpha_norm = if total > 0.0 {
            alpha.iter().map(|a| a / total).collect()
        } else {
            log::warn!("all layer factors are zero; falling back to uniform weights");
            vec![1.0 / alpha.len() as f64; alpha.len()]
        };
        Ok(Self { alpha, alpha_norm })
    }

    pub fn num_layers(&self) -> usize {
        self.alpha.len()
    }
}

/// Final-position distributions of the unmodified model, one per sample.
pub fn reference_distributions(model: &SyntheticMoeModel, calib: &CalibrationSet) -> Result<Vec<Vec<f64>>> {
    map_ordered(calib.samples(), |s| model.forward(s, &SkipPolicy::None).map(|o| o.distribution)).into_iter().collect()
}

/// Mean KL between `reference[j]` and the distribution under `policy`.
pub(crate) fn mean_kl_under(
    model: &SyntheticMoeModel,
    calib: &CalibrationSet,
    reference: &[Vec<f64>],
    policy: &SkipPolicy<'_>,
) -> Result<f64> {
    let idx: Vec<usize> = (0..calib.len()).collect();
    let terms = map_ordered(&idx, |&j| {
        model.forward(&calib.samples()[j], policy).map(|o| kl_unchecked(&reference[j], &o.distribution))
    });
    let mut sum = 0.0;
    for t in terms {
        sum += t?;
    }
    Ok(sum / calib.len() as f64)
}

pub fn calibrate_alpha(model: &SyntheticMoeModel, calib: &CalibrationSet) -> Result<GlobalFactors> {
    let reference = reference_distributions(model, calib)?;
    let alpha = (0..model.num_layers())
        .map(|l| mean_kl_under(model, calib, &reference, &SkipPolicy::AblateLayer(l)))
        .collect::<Result<Vec<_>>>()?;
    GlobalFactors::from_alpha(alpha)
}

/// Gating score `alpha_norm[layer] · pi`.
pub fn importance_score(factors: &GlobalFactors, layer: usize, pi: f64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InvalidInput(format!("routing probability {pi} outside (0, 1)")));
    }
    let weight =
        factors.alpha_norm.get(layer).ok_or_else(|| Error::InvalidArgument(format!("layer {layer} out of range")))?;
    Ok(weight * pi)
}
