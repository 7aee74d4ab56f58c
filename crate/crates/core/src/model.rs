//! Versioned model files.
//!
//! A model file is a JSON document:
//!
//! ```text
//! {
//!   "format": "mldcc-model",
//!   "version": 1,
//!   "algorithm": "<name>",
//!   "config": { ... },
//!   "model": { "kind": "rdt" | "boost" | "chain" | "binary-relevance" | "static-chain", ... }
//! }
//! ```
//!
//! `config` is opaque to the library; the command-line tool stores its run
//! configuration there. Floats round-trip exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mlboost::MlBoostModel;
use crate::rdt::RdtEnsemble;
use crate::xdcc::{BinaryRelevance, ChainModel, StaticChain};

pub const MODEL_FORMAT: &str = "mldcc-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file not found: {0}")]
    NotFound(String),
    #[error("not a model file: {0}")]
    Format(String),
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    Rdt(RdtEnsemble),
    Boost(MlBoostModel),
    Chain(ChainModel),
    BinaryRelevance(BinaryRelevance),
    StaticChain(StaticChain),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub algorithm: String,
    pub config: serde_json::Value,
    /// Wall-clock training time, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_seconds: Option<f64>,
    pub model: Model,
}

impl ModelFile {
    pub fn new(algorithm: impl Into<String>, config: serde_json::Value, model: Model) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            algorithm: algorithm.into(),
            config,
            train_seconds: None,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let head: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if head.get("format").and_then(|v| v.as_str()) != Some(MODEL_FORMAT) {
            return Err(ModelError::Format("missing format tag".into()));
        }
        let version = head.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_VERSION {
            return Err(ModelError::Version(version));
        }
        serde_json::from_value(head).map_err(|e| ModelError::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(ModelError::NotFound(path.display().to_string()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
