//! Reference skipping strategies: truncated top-k and the probability-mass
//! tail rule with a per-layer β.

use serde::{Deserialize, Serialize};

use crate::data::CalibrationSet;
use crate::dmt::{DmtObjective, FgValue};
use crate::engine::{SkipPolicy, SkipStats, SyntheticMoeModel};
use crate::error::{Error, Result};
use crate::parallel::map_ordered;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    pub beta: Vec<f64>,
}

impl BetaSchedule {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::InvalidArgument("beta values must lie in [0, 1]".into()));
        }
        Ok(Self { beta })
    }

    pub fn zeros(num_layers: usize) -> Self {
        Self { beta: vec![0.0; num_layers] }
    }
}

/// Keep only the first `k_prime` of the `k` routed ranks.
pub fn reduced_k_policy(model: &SyntheticMoeModel, k_prime: usize) -> Result<SkipPolicy<'static>> {
    let k = model.spec().top_k;
    if k_prime == 0 || k_prime > k {
        return Err(Error::InvalidArgument(format!("k' = {k_prime} outside 1..={k}")));
    }
    Ok(SkipPolicy::ReducedK { k_prime })
}

/// First skipped rank (0-based) under the tail-mass rule, if any.
///
/// Ranks `i..k` are dropped for the smallest `i ≥ 1` with
/// `Σ_{u ≥ i} π_u < β · Σ_u π_u`. Rank 0 is always kept. `sorted` must be in
/// descending order.
pub fn mass_rule_first_skipped(sorted: &[f64], beta: f64) -> Option<usize> {
    let total: f64 = sorted.iter().sum();
    let bound = beta * total;
    // Tail sums shrink as `i` grows, so the rule holds on a suffix of ranks.
    let mut tail = 0.0;
    let mut first = None;
    for i in (1..sorted.len()).rev() {
        tail += sorted[i];
        if tail < bound {
            first = Some(i);
        } else {
            break;
        }
    }
    first
}

/// Ranks (0-based) skipped by the tail-mass rule.
pub fn mass_rule_skip(sorted: &[f64], beta: f64) -> Vec<usize> {
    match mass_rule_first_skipped(sorted, beta) {
        Some(i) => (i..sorted.len()).collect(),
        None => Vec::new(),
    }
}

/// 101 evenly spaced values over `[0, 1]`.
pub fn beta_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

fn stats_under(model: &SyntheticMoeModel, calib: &CalibrationSet, schedule: &BetaSchedule) -> Result<SkipStats> {
    let policy = SkipPolicy::MassRule(schedule);
    let per_sample = map_ordered(calib.samples(), |s| model.forward(s, &policy).map(|o| o.stats));
    let mut stats = SkipStats::new(model.num_layers());
    for s in per_sample {
        stats.merge(&s?);
    }
    Ok(stats)
}

/// Layer-by-layer β search: layer `l` takes the grid β whose cumulative skip
/// ratio over layers `0..=l` comes closest to `rho` without exceeding it,
/// with earlier layers held at their chosen β and later ones at 0.
pub fn calibrate_beta(model: &SyntheticMoeModel, calib: &CalibrationSet, rho: f64) -> Result<BetaSchedule> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("target ratio {rho} outside (0, 1)")));
    }
    let grid = beta_grid();
    let mut schedule = BetaSchedule::zeros(model.num_layers());
    for l in 0..model.num_layers() {
        let mut chosen = 0.0;
        for &beta in &grid {
            schedule.beta[l] = beta;
            let ratio = stats_under(model, calib, &schedule)?.cumulative_skip_ratio(l);
            // The layer's skip count is monotone in β, so the first overshoot ends the scan.
            if ratio > rho {
                break;
            }
            chosen = beta;
        }
        schedule.beta[l] = chosen;
        log::debug!("layer {l}: beta = {chosen}");
    }
    Ok(schedule)
}

/// `(f, g)` of a β schedule against the objective's reference outputs.
pub fn evaluate_mass_rule(objective: &DmtObjective<'_>, schedule: &BetaSchedule) -> Result<FgValue> {
    Ok(objective.evaluate_policy(&SkipPolicy::MassRule(schedule))?.value)
}
