//! Global factors and β schedules as small TOML documents.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse_error;
use crate::baselines::BetaSchedule;
use crate::calibration::GlobalFactors;
use crate::error::{Error, Result};

pub const FACTORS_VERSION: u32 = 1;
const FACTORS_KIND: &str = "global_factors";
const BETA_KIND: &str = "beta_schedule";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorRecord {
    layer_index: usize,
    alpha: f64,
    alpha_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorsDoc {
    format_version: u32,
    kind: String,
    model_hash: String,
    samples: usize,
    seed: u64,
    layers: Vec<FactorRecord>,
}

/// Global factors with their provenance header.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorsFile {
    pub model_hash: String,
    pub samples: usize,
    pub seed: u64,
    pub factors: GlobalFactors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaRecord {
    layer_index: usize,
    beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaDoc {
    format_version: u32,
    kind: String,
    model_hash: String,
    samples: usize,
    seed: u64,
    rho: f64,
    layers: Vec<BetaRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaFile {
    pub model_hash: String,
    pub samples: usize,
    pub seed: u64,
    pub rho: f64,
    pub schedule: BetaSchedule,
}

fn check_header(context: &str, version: u32, kind: &str, expected_kind: &str) -> Result<()> {
    if version != FACTORS_VERSION {
        return Err(parse_error(
            context,
            format!("version mismatch: format_version = {version}, expected {FACTORS_VERSION}"),
        ));
    }
    if kind != expected_kind {
        return Err(parse_error(context, format!("field `kind` is `{kind}`, expected `{expected_kind}`")));
    }
    Ok(())
}

fn check_indices(context: &str, indices: impl Iterator<Item = usize>) -> Result<()> {
    for (i, idx) in indices.enumerate() {
        if i != idx {
            return Err(parse_error(context, format!("layer record {i} has layer_index {idx}")));
        }
    }
    Ok(())
}

pub fn render_factors(file: &FactorsFile) -> Result<String> {
    let f = &file.factors;
    let doc = FactorsDoc {
        format_version: FACTORS_VERSION,
        kind: FACTORS_KIND.into(),
        model_hash: file.model_hash.clone(),
        samples: file.samples,
        seed: file.seed,
        layers: f
            .alpha
            .iter()
            .zip(&f.alpha_norm)
            .enumerate()
            .map(|(layer_index, (&alpha, &alpha_norm))| FactorRecord { layer_index, alpha, alpha_norm })
            .collect(),
    };
    toml::to_string(&doc).map_err(|e| Error::Format(e.to_string()))
}

pub fn parse_factors(text: &str, context: &str) -> Result<FactorsFile> {
    let doc: FactorsDoc = toml::from_str(text).map_err(|e| parse_error(context, e))?;
    check_header(context, doc.format_version, &doc.kind, FACTORS_KIND)?;
    check_indices(context, doc.layers.iter().map(|r| r.layer_index))?;
    if doc.layers.is_empty() {
        return Err(parse_error(context, "no layer records"));
    }
    if doc.layers.iter().any(|r| !(r.alpha.is_finite() && r.alpha >= 0.0 && r.alpha_norm.is_finite())) {
        return Err(parse_error(context, "alpha values must be finite and non-negative"));
    }
    Ok(FactorsFile {
        model_hash: doc.model_hash,
        samples: doc.samples,
        seed: doc.seed,
        factors: GlobalFactors {
            alpha: doc.layers.iter().map(|r| r.alpha).collect(),
            alpha_norm: doc.layers.iter().map(|r| r.alpha_norm).collect(),
        },
    })
}

pub fn save_factors(file: &FactorsFile, path: &Path) -> Result<()> {
    fs::write(path, render_factors(file)?)?;
    Ok(())
}

pub fn load_factors(path: &Path) -> Result<FactorsFile> {
    parse_factors(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn render_beta(file: &BetaFile) -> Result<String> {
    let doc = BetaDoc {
        format_version: FACTORS_VERSION,
        kind: BETA_KIND.into(),
        model_hash: file.model_hash.clone(),
        samples: file.samples,
        seed: file.seed,
        rho: file.rho,
        layers: file
            .schedule
            .beta
            .iter()
            .enumerate()
            .map(|(layer_index, &beta)| BetaRecord { layer_index, beta })
            .collect(),
    };
    toml::to_string(&doc).map_err(|e| Error::Format(e.to_string()))
}

pub fn parse_beta(text: &str, context: &str) -> Result<BetaFile> {
    let doc: BetaDoc = toml::from_str(text).map_err(|e| parse_error(context, e))?;
    check_header(context, doc.format_version, &doc.kind, BETA_KIND)?;
    check_indices(context, doc.layers.iter().map(|r| r.layer_index))?;
    let schedule =
        BetaSchedule::new(doc.layers.iter().map(|r| r.beta).collect()).map_err(|e| parse_error(context, e))?;
    Ok(BetaFile { model_hash: doc.model_hash, samples: doc.samples, seed: doc.seed, rho: doc.rho, schedule })
}

pub fn save_beta(file: &BetaFile, path: &Path) -> Result<()> {
    fs::write(path, render_beta(file)?)?;
    Ok(())
}

pub fn load_beta(path: &Path) -> Result<BetaFile> {
    parse_beta(&fs::read_to_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factors_round_trip() {
        let file = FactorsFile {
            model_hash: "abc".into(),
            samples: 8,
            seed: 1,
            factors: GlobalFactors::from_alpha(vec![0.1, 3.0e-17, 0.25]).unwrap(),
        };
        let text = render_factors(&file).unwrap();
        let back = parse_factors(&text, "mem").unwrap();
        assert_eq!(back, file);
        assert_eq!(render_factors(&back).unwrap(), text);
    }

    #[test]
    fn factors_missing_field_named() {
        let file = FactorsFile {
            model_hash: "abc".into(),
            samples: 8,
            seed: 1,
            factors: GlobalFactors::from_alpha(vec![0.5]).unwrap(),
        };
        let text = render_factors(&file).unwrap().replace("samples = 8\n", "");
        let err = parse_factors(&text, "f.toml").unwrap_err().to_string();
        assert!(err.contains("samples"), "{err}");
    }

    #[test]
    fn beta_round_trip_and_kind_check() {
        let file = BetaFile {
            model_hash: "h".into(),
            samples: 4,
            seed: 9,
            rho: 0.48,
            schedule: BetaSchedule::new(vec![0.0, 0.37, 1.0]).unwrap(),
        };
        let text = render_beta(&file).unwrap();
        assert_eq!(parse_beta(&text, "mem").unwrap(), file);
        assert!(parse_factors(&text, "mem").is_err());
    }
}
