//! Calibration sets of synthetic mixed-modality token sequences.

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::engine::{Modality, Token, TokenSequence};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibrationSet {
    samples: Vec<TokenSequence>,
}

impl CalibrationSet {
    pub fn new(samples: Vec<TokenSequence>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("calibration set needs at least one sample".into()));
        }
        Ok(Self { samples })
    }

    /// `n` sequences of `len` tokens. Each token is text with probability
    /// `text_fraction`, otherwise vision; embedding indices are uniform.
    pub fn generate(n: usize, len: usize, text_fraction: f64, vocab_size: usize, seed: u64) -> Result<Self> {
        if n == 0 || len == 0 || vocab_size == 0 {
            return Err(Error::InvalidArgument("samples, sequence length and vocabulary must be positive".into()));
        }
        if !(0.0..=1.0).contains(&text_fraction) {
            return Err(Error::InvalidArgument(format!("text_fraction {text_fraction} outside [0, 1]")));
        }
        let mut rng = substream(seed, "data");
        let samples = (0..n)
            .map(|_| {
                let tokens = (0..len)
                    .map(|_| {
                        // `random::<f64>()` lies in [0, 1), so fraction 1 means all text.
                        let modality =
                            if rng.random::<f64>() < text_fraction { Modality::Text } else { Modality::Vision };
                        let embed_index = rng.random_range(0..vocab_size as u32);
                        Token { modality, embed_index }
                    })
                    .collect();
                TokenSequence::new(tokens)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub fn samples(&self) -> &[TokenSequence] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Hex SHA-256 over the token stream.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (i, s) in self.samples.iter().enumerate() {
            hasher.update((i as u64).to_le_bytes());
            hasher.update((s.len() as u64).to_le_bytes());
            for t in s.tokens() {
                hasher.update([t.modality.index() as u8]);
                hasher.update(t.embed_index.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}
