use serde::Serialize;

use super::token::Modality;

/// Routed and skipped expert-slot counts for one layer, split by modality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LayerCounts {
    pub routed: [u64; 2],
    pub skipped: [u64; 2],
}

impl LayerCounts {
    pub fn routed(&self, modality: Modality) -> u64 {
        self.routed[modality.index()]
    }

    pub fn skipped(&self, modality: Modality) -> u64 {
        self.skipped[modality.index()]
    }

    pub fn total_routed(&self) -> u64 {
        self.routed[0] + self.routed[1]
    }

    pub fn total_skipped(&self) -> u64 {
        self.skipped[0] + self.skipped[1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipStats {
    pub layers: Vec<LayerCounts>,
    /// Expert MLPs actually executed. Always `routed - skipped`.
    pub expert_evals: u64,
    /// Token positions processed (summed over sequences).
    pub tokens: u64,
    pub sequences: u64,
}

impl SkipStats {
    pub fn new(num_layers: usize) -> Self {
        Self { layers: vec![LayerCounts::default(); num_layers], expert_evals: 0, tokens: 0, sequences: 0 }
    }

    pub fn routed(&self) -> u64 {
        self.layers.iter().map(LayerCounts::total_routed).sum()
    }

    pub fn skipped(&self) -> u64 {
        self.layers.iter().map(LayerCounts::total_skipped).sum()
    }

    /// Skipped fraction over all routed slots; 0 when nothing was routed.
    pub fn skip_ratio(&self) -> f64 {
        let routed = self.routed();
        if routed == 0 {
            0.0
        } else {
            self.skipped() as f64 / routed as f64
        }
    }

    /// Skipped fraction over layers `0..=last`.
    pub fn cumulative_skip_ratio(&self, last: usize) -> f64 {
        let (r, s) =
            self.layers[..=last].iter().fold((0u64, 0u64), |(r, s), c| (r + c.total_routed(), s + c.total_skipped()));
        if r == 0 {
            0.0
        } else {
            s as f64 / r as f64
        }
    }

    pub fn merge(&mut self, other: &SkipStats) {
        assert_eq!(self.layers.len(), other.layers.len(), "layer count mismatch");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for i in 0..2 {
                a.routed[i] += b.routed[i];
                a.skipped[i] += b.skipped[i];
            }
        }
        self.expert_evals += other.expert_evals;
        self.tokens += other.tokens;
        self.sequences += other.sequences;
    }
}
