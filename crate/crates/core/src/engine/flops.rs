//! Multiply-add accounting (one multiply-add = 2 FLOPs) for the synthetic model.

use serde::Serialize;

use super::spec::ModelSpec;
use super::stats::SkipStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlopReport {
    /// Mixing, router and head FLOPs; unaffected by skipping.
    pub dense: u64,
    /// Expert FLOPs if every routed slot were executed.
    pub expert_baseline: u64,
    /// Expert FLOPs for the slots actually executed.
    pub expert_executed: u64,
}

impl FlopReport {
    pub fn baseline_total(&self) -> u64 {
        self.dense + self.expert_baseline
    }

    pub fn skipped_total(&self) -> u64 {
        self.dense + self.expert_executed
    }

    pub fn expert_savings(&self) -> u64 {
        self.expert_baseline - self.expert_executed
    }

    /// Fraction of total FLOPs removed by skipping.
    pub fn savings_fraction(&self) -> f64 {
        let base = self.baseline_total();
        if base == 0 {
            0.0
        } else {
            self.expert_savings() as f64 / base as f64
        }
    }
}

/// FLOPs of one expert MLP on one token.
pub fn expert_flops(spec: &ModelSpec) -> u64 {
    4 * (spec.hidden_dim as u64) * (spec.ffn_dim as u64)
}

pub fn flop_count(spec: &ModelSpec, stats: &SkipStats) -> FlopReport {
    let (d, m, v) = (spec.hidden_dim as u64, spec.experts_per_layer as u64, spec.vocab_size as u64);
    let layers = spec.num_layers as u64;
    let per_token_layer = 2 * d * d + 2 * m * d;
    let dense = stats.tokens * layers * per_token_layer + stats.sequences * 2 * v * d;
    let per_expert = expert_flops(spec);
    let routed = stats.routed();
    let executed = routed - stats.skipped();
    FlopReport { dense, expert_baseline: routed * per_expert, expert_executed: executed * per_expert }
}
