use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Router shaping knobs for the synthetic model.
///
/// Logits are `gain · W_r · norm(x) / temperature[modality]`. A higher vision
/// temperature yields flatter routing for vision tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouterTuning {
    pub gain: f64,
    pub text_temperature: f64,
    pub vision_temperature: f64,
}

impl Default for RouterTuning {
    fn default() -> Self {
        Self { gain: 4.0, text_temperature: 1.0, vision_temperature: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub num_layers: usize,
    pub experts_per_layer: usize,
    pub top_k: usize,
    pub hidden_dim: usize,
    pub ffn_dim: usize,
    pub vocab_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub router: RouterTuning,
}

impl ModelSpec {
    pub fn new(
        num_layers: usize,
        experts_per_layer: usize,
        top_k: usize,
        hidden_dim: usize,
        ffn_dim: usize,
        vocab_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = Self {
            num_layers,
            experts_per_layer,
            top_k,
            hidden_dim,
            ffn_dim,
            vocab_size,
            seed,
            router: RouterTuning::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_router(mut self, router: RouterTuning) -> Self {
        self.router = router;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("num_layers", self.num_layers),
            ("experts_per_layer", self.experts_per_layer),
            ("top_k", self.top_k),
            ("hidden_dim", self.hidden_dim),
            ("ffn_dim", self.ffn_dim),
            ("vocab_size", self.vocab_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
            if v > u32::MAX as usize {
                return Err(Error::InvalidArgument(format!("{name} does not fit in u32")));
            }
        }
        if self.top_k > self.experts_per_layer {
            return Err(Error::InvalidArgument(format!(
                "top_k ({}) exceeds experts_per_layer ({})",
                self.top_k, self.experts_per_layer
            )));
        }
        let r = &self.router;
        for (name, v) in [
            ("router.gain", r.gain),
            ("router.text_temperature", r.text_temperature),
            ("router.vision_temperature", r.vision_temperature),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be finite and positive")));
            }
        }
        Ok(())
    }
}
