//! Per-modality thresholding of gating scores, and the fidelity/savings pair
//! `(f, g)` it induces on a calibration set.

use std::io::Write;

use serde::Serialize;

use crate::calibration::{kl_unchecked, reference_distributions, GlobalFactors};
use crate::data::CalibrationSet;
use crate::engine::{Modality, SkipPolicy, SkipStats, SyntheticMoeModel};
use crate::error::{Error, Result};
use crate::parallel::map_ordered;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdPair {
    pub tau_text: f64,
    pub tau_vision: f64,
}

impl ThresholdPair {
    /// Both thresholds must lie in `[0, 1]`.
    pub fn new(tau_text: f64, tau_vision: f64) -> Result<Self> {
        for (name, v) in [("tau_text", tau_text), ("tau_vision", tau_vision)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(Self { tau_text, tau_vision })
    }

    /// Thresholds no score can fall below.
    pub fn skip_nothing() -> Self {
        Self { tau_text: 0.0, tau_vision: 0.0 }
    }

    /// Thresholds every score falls below.
    pub fn skip_all() -> Self {
        Self { tau_text: 1.0, tau_vision: 1.0 }
    }

    pub fn uniform(tau: f64) -> Result<Self> {
        Self::new(tau, tau)
    }

    pub fn for_modality(&self, modality: Modality) -> f64 {
        match modality {
            Modality::Text => self.tau_text,
            Modality::Vision => self.tau_vision,
        }
    }
}

/// Skip iff the score is strictly below the token's modality threshold.
pub fn skip_decision(score: f64, modality: Modality, thresholds: &ThresholdPair) -> bool {
    score < thresholds.for_modality(modality)
}

/// Mean KL to the unmodified model (`f`, nats) and skipped fraction (`g`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FgValue {
    pub f: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmtEvaluation {
    pub value: FgValue,
    pub stats: SkipStats,
}

/// Model, factors and calibration set bound together with the cached
/// reference distributions, so repeated threshold evaluations only pay for
/// the skipped forward passes.
pub struct DmtObjective<'a> {
    model: &'a SyntheticMoeModel,
    factors: &'a GlobalFactors,
    calib: &'a CalibrationSet,
    reference: Vec<Vec<f64>>,
}

impl<'a> DmtObjective<'a> {
    pub fn new(model: &'a SyntheticMoeModel, factors: &'a GlobalFactors, calib: &'a CalibrationSet) -> Result<Self> {
        if factors.num_layers() != model.num_layers() {
            return Err(Error::InvalidArgument(format!(
                "factors cover {} layers, model has {}",
                factors.num_layers(),
                model.num_layers()
            )));
        }
        let reference = reference_distributions(model, calib)?;
        Ok(Self { model, factors, calib, reference })
    }

    pub fn model(&self) -> &SyntheticMoeModel {
        self.model
    }

    pub fn factors(&self) -> &GlobalFactors {
        self.factors
    }

    pub fn calibration(&self) -> &CalibrationSet {
        self.calib
    }

    pub fn evaluate(&self, thresholds: ThresholdPair) -> Result<DmtEvaluation> {
        let policy = SkipPolicy::Dmt { thresholds, factors: self.factors };
        self.evaluate_policy(&policy)
    }

    /// `(f, g)` for an arbitrary skip policy against the cached reference.
    pub fn evaluate_policy(&self, policy: &SkipPolicy<'_>) -> Result<DmtEvaluation> {
        let idx: Vec<usize> = (0..self.calib.len()).collect();
        let per_sample = map_ordered(&idx, |&j| {
            self.model
                .forward(&self.calib.samples()[j], policy)
                .map(|o| (kl_unchecked(&self.reference[j], &o.distribution), o.stats))
        });
        let mut stats = SkipStats::new(self.model.num_layers());
        let mut kl_sum = 0.0;
        for r in per_sample {
            let (kl, s) = r?;
            kl_sum += kl;
            stats.merge(&s);
        }
        let value = FgValue { f: kl_sum / self.calib.len() as f64, g: stats.skip_ratio() };
        Ok(DmtEvaluation { value, stats })
    }
}

pub fn evaluate_fg(
    model: &SyntheticMoeModel,
    factors: &GlobalFactors,
    calib: &CalibrationSet,
    thresholds: ThresholdPair,
) -> Result<FgValue> {
    Ok(DmtObjective::new(model, factors, calib)?.evaluate(thresholds)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub layer: usize,
    pub modality: Modality,
    pub routed: u64,
    pub skipped: u64,
    pub ratio: f64,
}

/// Skipped/routed table per (layer, modality).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipProfile {
    pub rows: Vec<ProfileRow>,
    pub routed: u64,
    pub skipped: u64,
}

fn ratio(skipped: u64, routed: u64) -> f64 {
    if routed == 0 {
        0.0
    } else {
        skipped as f64 / routed as f64
    }
}

impl SkipProfile {
    pub fn from_stats(stats: &SkipStats) -> Self {
        let mut rows = Vec::with_capacity(stats.layers.len() * 2);
        for (layer, c) in stats.layers.iter().enumerate() {
            for m in Modality::ALL {
                let (routed, skipped) = (c.routed(m), c.skipped(m));
                rows.push(ProfileRow { layer, modality: m, routed, skipped, ratio: ratio(skipped, routed) });
            }
        }
        Self { rows, routed: stats.routed(), skipped: stats.skipped() }
    }

    pub fn overall(&self) -> f64 {
        ratio(self.skipped, self.routed)
    }

    pub fn cell(&self, layer: usize, modality: Modality) -> Option<&ProfileRow> {
        self.rows.iter().find(|r| r.layer == layer && r.modality == modality)
    }

    /// `layer,modality,routed,skipped,ratio`, then an `OVERALL` row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = crate::io::csv_writer(w);
        out.write_record(["layer", "modality", "routed", "skipped", "ratio"])?;
        for r in &self.rows {
            out.write_record([
                r.layer.to_string(),
                r.modality.to_string(),
                r.routed.to_string(),
                r.skipped.to_string(),
                r.ratio.to_string(),
            ])?;
        }
        out.write_record([
            "OVERALL".to_string(),
            "all".to_string(),
            self.routed.to_string(),
            self.skipped.to_string(),
            self.overall().to_string(),
        ])?;
        out.flush()?;
        Ok(())
    }
}

pub fn skip_profile(
    model: &SyntheticMoeModel,
    factors: &GlobalFactors,
    calib: &CalibrationSet,
    thresholds: ThresholdPair,
) -> Result<SkipProfile> {
    let eval = DmtObjective::new(model, factors, calib)?.evaluate(thresholds)?;
    Ok(SkipProfile::from_stats(&eval.stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_inequality_at_boundary() {
        let t = ThresholdPair::new(0.3, 0.9).unwrap();
        assert!(!skip_decision(0.3, Modality::Text, &t));
        assert!(skip_decision(0.3, Modality::Vision, &t));
        assert!(skip_decision(0.299_999, Modality::Text, &t));
    }

    #[test]
    fn skip_nothing_never_skips() {
        let t = ThresholdPair::skip_nothing();
        for s in [f64::MIN_POSITIVE, 1e-300, 0.5, 0.999_999] {
            assert!(!skip_decision(s, Modality::Text, &t));
            assert!(!skip_decision(s, Modality::Vision, &t));
        }
    }

    #[test]
    fn thresholds_validated() {
        assert!(ThresholdPair::new(-0.1, 0.5).is_err());
        assert!(ThresholdPair::new(0.5, 1.1).is_err());
        assert!(ThresholdPair::new(f64::NAN, 0.5).is_err());
    }
}
