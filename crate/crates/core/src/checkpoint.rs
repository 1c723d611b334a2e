//! Checkpoint files: an 8-byte magic, the little-endian `u64` length of a JSON
//! manifest, the manifest itself, then every parameter's values as raw
//! little-endian floats concatenated in manifest order. The manifest records
//! the model type, element type, model config, vocabulary, tensor names and
//! shapes, and a SHA-256 of the payload.

use std::fs;
use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baseline::{BowConfig, BowModel};
use crate::model::{ClassifierModel, EncoderConfig, ModelError};
use crate::nn::Parameter;
use crate::tokenizer::{TokenizerError, Vocabulary};
use crate::Scalar;

pub const MAGIC: &[u8; 8] = b"ISBTCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint integrity check failed: {0}")]
    Integrity(String),
    #[error("incompatible checkpoint: {0}")]
    Version(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint vocabulary: {0}")]
    Vocabulary(#[from] TokenizerError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Transformer,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub model_type: ModelKind,
    pub dtype: String,
    pub config: serde_json::Value,
    pub vocab: Vec<String>,
    pub tensors: Vec<TensorEntry>,
    pub payload_bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub payload: Vec<u8>,
}

pub fn encode<T: Scalar, C: Serialize>(
    model_type: ModelKind,
    config: &C,
    vocab: Vec<String>,
    params: &[&Parameter<T>],
) -> Vec<u8> {
    let mut payload = Vec::with_capacity(params.iter().map(|p| p.len() * T::BYTES).sum());
    for p in params {
        for &v in p.value.data() {
            v.write_le(&mut payload);
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        model_type,
        dtype: T::DTYPE.to_string(),
        config: serde_json::to_value(config).expect("config serializes"),
        vocab,
        tensors: params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                shape: p.shape().to_vec(),
            })
            .collect(),
        payload_bytes: payload.len() as u64,
        sha256: hex::encode(Sha256::digest(&payload)),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let integrity = |m: &str| CheckpointError::Integrity(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(integrity("missing checkpoint header"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if len > body.len() {
        return Err(integrity("manifest truncated"));
    }
    let value: serde_json::Value =
        serde_json::from_slice(&body[..len]).map_err(|e| integrity(&format!("manifest unreadable: {e}")))?;
    let manifest: Manifest =
        serde_json::from_value(value).map_err(|e| CheckpointError::Version(format!("manifest schema: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(CheckpointError::Version(format!(
            "format version {} (supported: {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let payload = &body[len..];
    if payload.len() as u64 != manifest.payload_bytes {
        return Err(integrity(&format!(
            "payload has {} bytes, manifest declares {}",
            payload.len(),
            manifest.payload_bytes
        )));
    }
    if hex::encode(Sha256::digest(payload)) != manifest.sha256 {
        return Err(integrity("payload checksum mismatch"));
    }
    Ok(Checkpoint {
        manifest,
        payload: payload.to_vec(),
    })
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    decode(&fs::read(path)?)
}

impl Checkpoint {
    pub fn expect_kind(&self, kind: ModelKind) -> Result<(), CheckpointError> {
        if self.manifest.model_type != kind {
            return Err(CheckpointError::Version(format!(
                "expected a {kind:?} checkpoint, found {:?}",
                self.manifest.model_type
            )));
        }
        Ok(())
    }

    pub fn config<C: DeserializeOwned>(&self) -> Result<C, CheckpointError> {
        serde_json::from_value(self.manifest.config.clone())
            .map_err(|e| CheckpointError::Version(format!("config schema: {e}")))
    }

    /// Copies stored values into `params`, which must match the manifest's
    /// names and shapes in order.
    pub fn load_into<T: Scalar>(&self, params: Vec<&mut Parameter<T>>) -> Result<(), CheckpointError> {
        if self.manifest.dtype != T::DTYPE {
            return Err(CheckpointError::Version(format!(
                "element type {} cannot be loaded as {}",
                self.manifest.dtype,
                T::DTYPE
            )));
        }
        if params.len() != self.manifest.tensors.len() {
            return Err(CheckpointError::Version(format!(
                "{} tensors stored, model expects {}",
                self.manifest.tensors.len(),
                params.len()
            )));
        }
        let mut offset = 0;
        for (p, entry) in params.into_iter().zip(&self.manifest.tensors) {
            if p.name != entry.name || p.shape() != entry.shape.as_slice() {
                return Err(CheckpointError::Version(format!(
                    "tensor {} {:?} does not match model tensor {} {:?}",
                    entry.name,
                    entry.shape,
                    p.name,
                    p.shape()
                )));
            }
            let bytes = p.len() * T::BYTES;
            let chunk = self
                .payload
                .get(offset..offset + bytes)
                .ok_or_else(|| CheckpointError::Integrity("payload shorter than tensor list".into()))?;
            for (v, b) in p.value.data_mut().iter_mut().zip(chunk.chunks_exact(T::BYTES)) {
                *v = T::read_le(b);
            }
            offset += bytes;
        }
        if offset != self.payload.len() {
            return Err(CheckpointError::Integrity("payload longer than tensor list".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> ClassifierModel<T> {
    pub fn to_checkpoint_bytes(&self, vocab: &Vocabulary) -> Vec<u8> {
        encode(ModelKind::Transformer, &self.config, vocab.tokens().to_vec(), &self.parameters())
    }

    pub fn save_checkpoint(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        fs::write(path, self.to_checkpoint_bytes(vocab))?;
        Ok(())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, Vocabulary), CheckpointError> {
        ckpt.expect_kind(ModelKind::Transformer)?;
        let config: EncoderConfig = ckpt.config()?;
        let vocab = Vocabulary::from_tokens(ckpt.manifest.vocab.clone())?;
        if vocab.len() != config.vocab_size {
            return Err(CheckpointError::Version(format!(
                "vocabulary has {} tokens but the encoder expects {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        let mut model = Self::zeros(config)?;
        ckpt.load_into(model.parameters_mut())?;
        Ok((model, vocab))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Self, Vocabulary), CheckpointError> {
        Self::from_checkpoint(&read_file(path)?)
    }
}

impl<T: Scalar> BowModel<T> {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        encode(ModelKind::Baseline, &self.config, self.words().to_vec(), &self.parameters())
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        fs::write(path, self.to_checkpoint_bytes())?;
        Ok(())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, CheckpointError> {
        ckpt.expect_kind(ModelKind::Baseline)?;
        let config: BowConfig = ckpt.config()?;
        let mut model = Self::zeros(config, ckpt.manifest.vocab.clone())
            .map_err(|e| CheckpointError::Version(e.to_string()))?;
        ckpt.load_into(model.parameters_mut())?;
        Ok(model)
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Self::from_checkpoint(&read_file(path)?)
    }
}
