use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use issuebert::baseline::BowConfig;
use issuebert::model::EncoderConfig;
use issuebert::nn::GeluKind;
use issuebert::rng::DEFAULT_SEED;
use issuebert::tokenizer::MAX_LEN;
use issuebert::train::TrainConfig;
use serde::{Deserialize, Serialize};

/// File locations. Relative paths are resolved against the directory of the
/// config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub train: PathBuf,
    pub validation: PathBuf,
    pub vocab: PathBuf,
    /// Checkpoints and epoch logs are written here as `<model>.ckpt` and
    /// `<model>_epochs.csv`.
    pub output_dir: PathBuf,
}

/// Encoder shape; the vocabulary size comes from the vocabulary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSettings {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub gelu: GeluKind,
    pub init_seed: u64,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        let t = EncoderConfig::tiny(1);
        Self {
            layers: t.layers,
            hidden: t.hidden,
            heads: t.heads,
            ff_dim: t.ff_dim,
            gelu: t.gelu,
            init_seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default)]
    pub encoder: EncoderSettings,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub baseline: BowConfig,
}

fn default_max_len() -> usize {
    MAX_LEN
}

impl RunConfig {
    pub fn parse(json: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    /// Reads the config and makes its relative paths absolute.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.paths.train,
            &mut cfg.paths.validation,
            &mut cfg.paths.vocab,
            &mut cfg.paths.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            layers: self.encoder.layers,
            hidden: self.encoder.hidden,
            heads: self.encoder.heads,
            ff_dim: self.encoder.ff_dim,
            vocab_size,
            max_positions: self.max_len,
            num_labels: 3,
            gelu: self.encoder.gelu,
        }
    }
}
