//! Skip policies: which of a token's routed experts are dropped.

use super::token::Modality;
use crate::baselines::{mass_rule_first_skipped, BetaSchedule};
use crate::calibration::GlobalFactors;
use crate::dmt::ThresholdPair;
use crate::error::{Error, Result};

/// Per-(layer, position, rank) skip flags for a single sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipMask {
    layers: usize,
    positions: usize,
    slots: usize,
    bits: Vec<bool>,
}

impl SkipMask {
    pub fn new(layers: usize, positions: usize, slots: usize) -> Self {
        Self { layers, positions, slots, bits: vec![false; layers * positions * slots] }
    }

    fn offset(&self, layer: usize, position: usize, slot: usize) -> usize {
        assert!(layer < self.layers && position < self.positions && slot < self.slots);
        (layer * self.positions + position) * self.slots + slot
    }

    pub fn set(&mut self, layer: usize, position: usize, slot: usize, skip: bool) {
        let i = self.offset(layer, position, slot);
        self.bits[i] = skip;
    }

    pub fn get(&self, layer: usize, position: usize, slot: usize) -> bool {
        self.bits[self.offset(layer, position, slot)]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.layers, self.positions, self.slots)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SkipPolicy<'a> {
    /// Plain top-k routing.
    None,
    /// Explicit mask over top-k ranks; `slot` is the rank within the selection.
    FixedMask(&'a SkipMask),
    /// Skip a routed expert when `alpha_norm[l] · π < τ(modality)`.
    Dmt { thresholds: ThresholdPair, factors: &'a GlobalFactors },
    /// Keep the first `k_prime` ranks.
    ReducedK { k_prime: usize },
    /// Probability-mass tail rule with one β per layer.
    MassRule(&'a BetaSchedule),
    /// Drop every routed expert of a single layer.
    AblateLayer(usize),
}

impl SkipPolicy<'_> {
    pub(crate) fn validate(&self, num_layers: usize, top_k: usize, positions: usize) -> Result<()> {
        match *self {
            SkipPolicy::None => Ok(()),
            SkipPolicy::FixedMask(mask) => {
                if mask.dims() != (num_layers, positions, top_k) {
                    return Err(Error::ContractViolation(format!(
                        "skip mask dims {:?} do not match (layers, positions, k) = {:?}",
                        mask.dims(),
                        (num_layers, positions, top_k)
                    )));
                }
                Ok(())
            }
            SkipPolicy::Dmt { factors, .. } => {
                if factors.num_layers() != num_layers {
                    return Err(Error::InvalidArgument(format!(
                        "global factors cover {} layers, model has {num_layers}",
                        factors.num_layers()
                    )));
                }
                Ok(())
            }
            SkipPolicy::ReducedK { k_prime } => {
                if k_prime == 0 || k_prime > top_k {
                    return Err(Error::InvalidArgument(format!("k' = {k_prime} outside 1..={top_k}")));
                }
                Ok(())
            }
            SkipPolicy::MassRule(schedule) => {
                if schedule.beta.len() != num_layers {
                    return Err(Error::InvalidArgument(format!(
                        "beta schedule covers {} layers, model has {num_layers}",
                        schedule.beta.len()
                    )));
                }
                Ok(())
            }
            SkipPolicy::AblateLayer(l) => {
                if l >= num_layers {
                    return Err(Error::InvalidArgument(format!("layer {l} out of range")));
                }
                Ok(())
            }
        }
    }

    /// Fill `skip[r]` for each rank `r` of `selected`.
    pub(crate) fn decide(
        &self,
        layer: usize,
        position: usize,
        modality: Modality,
        probs: &[f64],
        selected: &[usize],
        skip: &mut [bool],
    ) {
        match *self {
            SkipPolicy::None => skip.fill(false),
            SkipPolicy::FixedMask(mask) => {
                for (r, s) in skip.iter_mut().enumerate() {
                    *s = mask.get(layer, position, r);
                }
            }
            SkipPolicy::Dmt { thresholds, factors } => {
                let weight = factors.alpha_norm[layer];
                let tau = thresholds.for_modality(modality);
                for (s, &m) in skip.iter_mut().zip(selected) {
                    *s = weight * probs[m] < tau;
                }
            }
            SkipPolicy::ReducedK { k_prime } => {
                for (r, s) in skip.iter_mut().enumerate() {
                    *s = r >= k_prime;
                }
            }
            SkipPolicy::MassRule(schedule) => {
                let mut sorted = [0.0f64; 64];
                let ranked: Vec<f64>;
                let view: &[f64] = if selected.len() <= sorted.len() {
                    for (dst, &m) in sorted.iter_mut().zip(selected) {
                        *dst = probs[m];
                    }
                    &sorted[..selected.len()]
                } else {
                    ranked = selected.iter().map(|&m| probs[m]).collect();
                    &ranked
                };
                let first = mass_rule_first_skipped(view, schedule.beta[layer]).unwrap_or(view.len());
                for (r, s) in skip.iter_mut().enumerate() {
                    *s = r >= first;
                }
            }
            SkipPolicy::AblateLayer(l) => skip.fill(layer == l),
        }
    }
}
