//! Pipeline configuration file (TOML) and its content hash.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chunking::ChunkConfig;
use crate::error::{Error, Result};
use crate::features::BackendSpec;
use crate::fragmentation::FragConfig;
use crate::metrics::DEFAULT_REPEATS;
use crate::regressor::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub repeats: usize,
    /// Fraction of videos used for training in each repeat; the rest are test.
    pub train_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            repeats: DEFAULT_REPEATS,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub frag: FragConfig,
    pub chunk: ChunkConfig,
    pub backend: BackendSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.frag.validate()?;
        self.chunk.validate()?;
        self.backend.validate()?;
        self.train.validate()?;
        if self.backend.input_size != self.frag.target_size {
            return Err(Error::Config(format!(
                "backend input size {} must equal fragment target size {}",
                self.backend.input_size, self.frag.target_size
            )));
        }
        if self.eval.repeats == 0 {
            return Err(Error::Config("repeats must be ≥ 1".into()));
        }
        if !(self.eval.train_fraction > 0.0 && self.eval.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie strictly between 0 and 1".into()));
        }
        Ok(())
    }

    /// Hash of everything that shapes extracted features. The model
    /// directory path is left out so moving the models does not change it.
    pub fn feature_hash(&self) -> String {
        let mut backend = self.backend.clone();
        backend.model_dir = None;
        let doc = serde_json::json!({ "frag": self.frag, "chunk": self.chunk, "backend": backend });
        hex(&Sha256::digest(doc.to_string().as_bytes()))[..16].to_string()
    }

    /// Hash of the feature settings plus training settings.
    pub fn train_hash(&self) -> String {
        let doc = serde_json::json!({ "features": self.feature_hash(), "train": self.train });
        hex(&Sha256::digest(doc.to_string().as_bytes()))[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::BackendKind;

    #[test]
    fn empty_document_is_defaults() {
        let cfg = PipelineConfig::from_toml("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.frag.patch_size = 32;
        cfg.chunk.stride = Some(12);
        cfg.backend.kind = BackendKind::Neural;
        cfg.train.hidden = (64, 32);
        let back = PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_sections() {
        let cfg = PipelineConfig::from_toml("[frag]\npatch_size = 8\n[train]\nepochs = 5\n").unwrap();
        assert_eq!(cfg.frag.patch_size, 8);
        assert_eq!(cfg.frag.target_size, 224);
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.lr0, 1e-2);
    }

    #[test]
    fn cross_field_violation() {
        let cfg = PipelineConfig::from_toml("[frag]\ntarget_size = 112\n").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("[fragg]\n").is_err());
        assert!(PipelineConfig::from_toml("frag = 3").is_err());
    }

    #[test]
    fn hashes() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.backend.model_dir = Some("/elsewhere".into());
        assert_eq!(a.feature_hash(), b.feature_hash());
        b.train.epochs = 3;
        assert_eq!(a.feature_hash(), b.feature_hash());
        assert_ne!(a.train_hash(), b.train_hash());
        b.frag.patch_size = 8;
        assert_ne!(a.feature_hash(), b.feature_hash());
        assert_eq!(a.feature_hash().len(), 16);
    }
}
