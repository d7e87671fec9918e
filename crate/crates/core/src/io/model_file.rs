//! Binary model container.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "MDES"                      4 bytes
//! format version              u32
//! num_layers, experts_per_layer, top_k, hidden_dim, ffn_dim, vocab_size   u32 × 6
//! seed                        u64
//! router gain, text temperature, vision temperature                        f64 × 3
//! embedding                   vocab × hidden
//! per layer:
//!   mix                       hidden × hidden
//!   router                    experts × hidden
//!   per expert: up (ffn × hidden), down (hidden × ffn)
//! head                        vocab × hidden
//! ```
//!
//! Weight blocks are row-major `f64`.

use std::fs;
use std::path::Path;

use super::sha256_hex;
use crate::engine::{ExpertWeights, LayerWeights, ModelSpec, RouterTuning, SyntheticMoeModel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MODEL_MAGIC: [u8; 4] = *b"MDES";
pub const MODEL_VERSION: u32 = 1;

fn put_matrix(out: &mut Vec<u8>, m: &Matrix) {
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_model(model: &SyntheticMoeModel) -> Vec<u8> {
    let spec = model.spec();
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for v in [spec.num_layers, spec.experts_per_layer, spec.top_k, spec.hidden_dim, spec.ffn_dim, spec.vocab_size] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&spec.seed.to_le_bytes());
    for v in [spec.router.gain, spec.router.text_temperature, spec.router.vision_temperature] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_matrix(&mut out, &model.embedding);
    for layer in &model.layers {
        put_matrix(&mut out, &layer.mix);
        put_matrix(&mut out, &layer.router);
        for e in &layer.experts {
            put_matrix(&mut out, &e.up);
            put_matrix(&mut out, &e.down);
        }
    }
    put_matrix(&mut out, &model.head);
    out
}

struct Cursor<'b> {
    bytes: &'b [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!("model file truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Matrix> {
        let raw = self.take(rows * cols * 8, what)?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite weight in {what}")));
        }
        Ok(Matrix { rows, cols, data })
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<SyntheticMoeModel> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != MODEL_MAGIC {
        return Err(Error::Format("bad magic bytes; not a model file".into()));
    }
    let version = c.u32("version")?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model format version {version}")));
    }
    let mut dims = [0usize; 6];
    for (d, name) in
        dims.iter_mut().zip(["num_layers", "experts_per_layer", "top_k", "hidden_dim", "ffn_dim", "vocab_size"])
    {
        *d = c.u32(name)? as usize;
    }
    let seed = c.u64("seed")?;
    let router = RouterTuning {
        gain: c.f64("router gain")?,
        text_temperature: c.f64("text temperature")?,
        vision_temperature: c.f64("vision temperature")?,
    };
    let spec = ModelSpec {
        num_layers: dims[0],
        experts_per_layer: dims[1],
        top_k: dims[2],
        hidden_dim: dims[3],
        ffn_dim: dims[4],
        vocab_size: dims[5],
        seed,
        router,
    };
    spec.validate().map_err(|e| Error::Format(format!("invalid model header: {e}")))?;

    // Check the declared size before allocating anything proportional to it.
    let (l, m, d, f, v) = (
        spec.num_layers as u128,
        spec.experts_per_layer as u128,
        spec.hidden_dim as u128,
        spec.ffn_dim as u128,
        spec.vocab_size as u128,
    );
    let weights = 2 * v * d + l * (d * d + m * d + m * 2 * d * f);
    let expected = c.pos as u128 + weights * 8;
    if expected != bytes.len() as u128 {
        return Err(Error::Format(format!("model file is {} bytes, header implies {expected}", bytes.len())));
    }

    let (d, f) = (spec.hidden_dim, spec.ffn_dim);
    let embedding = c.matrix(spec.vocab_size, d, "embedding")?;
    let mut layers = Vec::with_capacity(spec.num_layers);
    for _ in 0..spec.num_layers {
        let mix = c.matrix(d, d, "mixing")?;
        let router = c.matrix(spec.experts_per_layer, d, "router")?;
        let experts = (0..spec.experts_per_layer)
            .map(|_| Ok(ExpertWeights { up: c.matrix(f, d, "expert up")?, down: c.matrix(d, f, "expert down")? }))
            .collect::<Result<Vec<_>>>()?;
        layers.push(LayerWeights { mix, router, experts });
    }
    let head = c.matrix(spec.vocab_size, d, "head")?;
    Ok(SyntheticMoeModel::from_parts(spec, embedding, layers, head))
}

pub fn save_model(model: &SyntheticMoeModel, path: &Path) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SyntheticMoeModel> {
    decode_model(&fs::read(path)?)
}

/// Hex SHA-256 of the encoded model.
pub fn model_hash(model: &SyntheticMoeModel) -> String {
    sha256_hex(&encode_model(model))
}
