//! Configuration and every persistent artifact format.

mod config;
mod dataset;
mod factors;
mod model_file;

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use config::{
    generate_calibration_set, load_config, save_config, ExperimentConfig, ModelShape, PolicyConfig, CONFIG_VERSION,
};
pub use dataset::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use factors::{
    load_beta, load_factors, parse_beta, parse_factors, render_beta, render_factors, save_beta, save_factors, BetaFile,
    FactorsFile, FACTORS_VERSION,
};
pub use model_file::{decode_model, encode_model, load_model, model_hash, save_model, MODEL_MAGIC, MODEL_VERSION};

use crate::error::Result;

/// CSV writer with a header-friendly, LF-terminated configuration.
pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

pub(crate) fn parse_error(context: impl Into<String>, message: impl ToString) -> crate::error::Error {
    crate::error::Error::Parse { context: context.into(), message: message.to_string() }
}
