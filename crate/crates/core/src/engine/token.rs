use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Vision,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Text, Modality::Vision];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Vision => "vision",
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Modality::Text => 0,
            Modality::Vision => 1,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Modality::Text),
            "vision" => Ok(Modality::Vision),
            other => Err(Error::InvalidInput(format!("unknown modality `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub modality: Modality,
    pub embed_index: u32,
}

impl Token {
    pub fn text(embed_index: u32) -> Self {
        Self { modality: Modality::Text, embed_index }
    }

    pub fn vision(embed_index: u32) -> Self {
        Self { modality: Modality::Vision, embed_index }
    }
}

/// A non-empty ordered list of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<Token>);

impl TokenSequence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("token sequence is empty".into()));
        }
        Ok(Self(tokens))
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
