use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse_error;
use crate::data::CalibrationSet;
use crate::engine::{ModelSpec, RouterTuning};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const CONFIG_VERSION: u32 = 1;

/// Model dimensions as written in a config file; the seed comes from the
/// experiment seed's `model` substream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelShape {
    pub num_layers: usize,
    pub experts_per_layer: usize,
    pub top_k: usize,
    pub hidden_dim: usize,
    pub ffn_dim: usize,
    pub vocab_size: usize,
    #[serde(default)]
    pub router: RouterTuning,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    None,
    Dmt { tau_text: f64, tau_vision: f64 },
    ReducedK { k_prime: usize },
    MassRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub seed: u64,
    /// Calibration samples `N`.
    pub samples: usize,
    /// Threshold grid size `D`.
    pub grid_points: usize,
    /// Target skipped fraction.
    pub rho: f64,
    pub text_fraction: f64,
    pub sequence_length: usize,
    pub model: ModelShape,
    pub policy: PolicyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_VERSION,
            seed: 42,
            samples: 1024,
            grid_points: 100,
            rho: 0.8,
            text_fraction: 0.3,
            sequence_length: 8,
            model: ModelShape {
                num_layers: 4,
                experts_per_layer: 8,
                top_k: 2,
                hidden_dim: 16,
                ffn_dim: 32,
                vocab_size: 64,
                router: RouterTuning { gain: 4.0, text_temperature: 1.0, vision_temperature: 2.0 },
            },
            policy: PolicyConfig::Dmt { tau_text: 0.1, tau_vision: 0.2 },
        }
    }
}

impl ExperimentConfig {
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let spec = ModelSpec {
            num_layers: m.num_layers,
            experts_per_layer: m.experts_per_layer,
            top_k: m.top_k,
            hidden_dim: m.hidden_dim,
            ffn_dim: m.ffn_dim,
            vocab_size: m.vocab_size,
            seed: derive_seed(self.seed, "model"),
            router: m.router,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn data_seed(&self) -> u64 {
        derive_seed(self.seed, "data")
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_VERSION {
            return Err(Error::InvalidArgument(format!(
                "config format_version {} not supported (expected {CONFIG_VERSION})",
                self.format_version
            )));
        }
        self.model_spec()?;
        if self.samples == 0 {
            return Err(Error::InvalidArgument("samples must be at least 1".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidArgument("grid_points must be at least 2".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho {} outside (0, 1)", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.text_fraction) {
            return Err(Error::InvalidArgument(format!("text_fraction {} outside [0, 1]", self.text_fraction)));
        }
        if self.sequence_length == 0 {
            return Err(Error::InvalidArgument("sequence_length must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str, context: &str) -> Result<Self> {
        // Read the version alone first; a generic table would cap integers at i64.
        #[derive(Deserialize)]
        struct VersionProbe {
            format_version: Option<toml::Value>,
        }
        let probe: VersionProbe = toml::from_str(text).map_err(|e| parse_error(context, e))?;
        match probe.format_version {
            None => return Err(parse_error(context, "missing field `format_version`")),
            Some(toml::Value::Integer(v)) if v == i64::from(CONFIG_VERSION) => {}
            Some(other) => {
                return Err(parse_error(
                    context,
                    format!("version mismatch: format_version = {other}, expected {CONFIG_VERSION}"),
                ))
            }
        }
        let cfg: Self = toml::from_str(text).map_err(|e| parse_error(context, e))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    ExperimentConfig::from_toml(&text, &path.display().to_string())
}

pub fn save_config(config: &ExperimentConfig, path: &Path) -> Result<()> {
    fs::write(path, config.to_toml()?)?;
    Ok(())
}

pub fn generate_calibration_set(config: &ExperimentConfig) -> Result<CalibrationSet> {
    CalibrationSet::generate(
        config.samples,
        config.sequence_length,
        config.text_fraction,
        config.model.vocab_size,
        config.data_seed(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_byte_identical() {
        let cfg = ExperimentConfig::default();
        let a = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&a, "mem").unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), a);
    }

    #[test]
    fn missing_field_is_named() {
        let text = ExperimentConfig::default().to_toml().unwrap().replace("rho = 0.8\n", "");
        let err = ExperimentConfig::from_toml(&text, "cfg.toml").unwrap_err().to_string();
        assert!(err.contains("rho"), "{err}");
        assert!(err.contains("cfg.toml"), "{err}");
    }

    #[test]
    fn version_mismatch_rejected() {
        let text = ExperimentConfig::default().to_toml().unwrap().replace("format_version = 1", "format_version = 7");
        let err = ExperimentConfig::from_toml(&text, "cfg.toml").unwrap_err().to_string();
        assert!(err.contains("version mismatch"), "{err}");
    }

    #[test]
    fn malformed_value_reports_location() {
        let text = ExperimentConfig::default().to_toml().unwrap().replace("samples = 1024", "samples = \"many\"");
        let err = ExperimentConfig::from_toml(&text, "cfg.toml").unwrap_err().to_string();
        assert!(err.contains("samples"), "{err}");
    }

    #[test]
    fn all_text_has_no_vision() {
        let cfg = ExperimentConfig { samples: 16, text_fraction: 1.0, ..Default::default() };
        let set = generate_calibration_set(&cfg).unwrap();
        assert!(set.samples().iter().all(|s| s.tokens().iter().all(|t| t.modality == crate::engine::Modality::Text)));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ExperimentConfig { samples: 32, ..Default::default() };
        let a = generate_calibration_set(&cfg).unwrap();
        let b = generate_calibration_set(&cfg).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(a.len(), 32);
    }
}
