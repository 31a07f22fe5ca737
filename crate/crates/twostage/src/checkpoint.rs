//! Self-contained binary checkpoint.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "TWOSTGCK"
//! version    u32
//! digest     32 bytes sha256 of the training config JSON
//! meta_len   u64, then meta_len bytes of JSON metadata
//! count      u32, then per tensor: name_len u16, name, rank u8, rank × u64 dims
//! values     per tensor, numel × f32
//! checksum   32 bytes sha256 of everything above
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use twostage_core::data::Vocabulary;
use twostage_core::metrics::Thresholds;
use twostage_core::model::{ModelDims, ModelParams, PARAM_NAMES};
use twostage_core::training::TrainingConfig;
use twostage_core::{LabelHierarchy, Tensor};

pub const MAGIC: &[u8; 8] = b"TWOSTGCK";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;
const HEADER_LEN: usize = MAGIC.len() + 4;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint is truncated or corrupted (checksum mismatch)")]
    Checksum,
    #[error("tensor {tensor}: checkpoint shape {found:?} does not match expected {expected:?}")]
    Shape {
        tensor: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// Everything needed for inference and for resuming evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub hierarchy: LabelHierarchy,
    pub vocab: Vocabulary,
    pub config: TrainingConfig,
    pub thresholds: Thresholds,
    pub best_epoch: Option<usize>,
    /// Train-split document frequency of each child label.
    pub train_label_frequencies: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    engine_version: String,
    config: TrainingConfig,
    hierarchy: LabelHierarchy,
    vocabulary: Vocabulary,
    thresholds: Thresholds,
    best_epoch: Option<usize>,
    train_label_frequencies: Vec<usize>,
}

pub fn config_digest(config: &TrainingConfig) -> [u8; DIGEST_LEN] {
    Sha256::digest(serde_json::to_vec(config).expect("config serializes")).into()
}

impl Checkpoint {
    pub fn dims(&self) -> ModelDims {
        self.config.model_dims(self.vocab.len(), &self.hierarchy)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = Metadata {
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config.clone(),
            hierarchy: self.hierarchy.clone(),
            vocabulary: self.vocab.clone(),
            thresholds: self.thresholds,
            best_epoch: self.best_epoch,
            train_label_frequencies: self.train_label_frequencies.clone(),
        };
        let meta = serde_json::to_vec(&meta).expect("metadata serializes");
        let tensors = self.params.tensors();

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&config_digest(&self.config));
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, t) in PARAM_NAMES.iter().zip(tensors.iter()) {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.rank() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
        }
        for t in tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let checksum = Sha256::digest(&out);
        out.extend_from_slice(&checksum);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(CheckpointError::Checksum);
        }
        let version = u32::from_le_bytes(bytes[MAGIC.len()..HEADER_LEN].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < HEADER_LEN + 2 * DIGEST_LEN {
            return Err(CheckpointError::Checksum);
        }
        let (body, checksum) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(CheckpointError::Checksum);
        }

        let mut r = Reader { bytes: body, pos: HEADER_LEN };
        let digest = r.take(DIGEST_LEN)?.to_vec();
        let meta_len = r.u64()? as usize;
        let meta: Metadata = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| CheckpointError::Malformed(format!("metadata: {e}")))?;
        if digest != config_digest(&meta.config) {
            return Err(CheckpointError::Malformed("config digest does not match the stored config".into()));
        }

        let count = r.u32()? as usize;
        if count != PARAM_NAMES.len() {
            return Err(CheckpointError::Malformed(format!(
                "expected {} tensors, found {count}",
                PARAM_NAMES.len()
            )));
        }
        let mut table = Vec::with_capacity(count);
        for expected_name in PARAM_NAMES {
            let len = r.u16()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
            if name != expected_name {
                return Err(CheckpointError::Malformed(format!(
                    "expected tensor {expected_name}, found {name}"
                )));
            }
            let rank = r.take(1)?[0] as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            table.push((name, shape));
        }

        let dims = meta.config.model_dims(meta.vocabulary.len(), &meta.hierarchy);
        for ((name, found), expected) in table.iter().zip(dims.shapes()) {
            if *found != expected {
                return Err(CheckpointError::Shape {
                    tensor: name.clone(),
                    expected,
                    found: found.clone(),
                });
            }
        }
        let mut tensors = Vec::with_capacity(count);
        for (_, shape) in &table {
            let numel: usize = shape.iter().product();
            let raw = r.take(numel * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push(Tensor::new(shape.clone(), data).map_err(|e| CheckpointError::Malformed(e.to_string()))?);
        }
        if r.pos != body.len() {
            return Err(CheckpointError::Malformed("trailing bytes after tensor data".into()));
        }
        let params = ModelParams::from_tensors(tensors).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        if meta.train_label_frequencies.len() != meta.hierarchy.num_children() {
            return Err(CheckpointError::Malformed("label frequency table does not match the hierarchy".into()));
        }
        Ok(Checkpoint {
            params,
            hierarchy: meta.hierarchy,
            vocab: meta.vocabulary,
            config: meta.config,
            thresholds: meta.thresholds,
            best_epoch: meta.best_epoch,
            train_label_frequencies: meta.train_label_frequencies,
        })
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        };
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Loads and checks every tensor against `dims`, naming the first
    /// tensor that differs.
    pub fn load_expecting(path: &Path, dims: &ModelDims) -> Result<Self, CheckpointError> {
        let ckpt = Self::load(path)?;
        for ((name, t), expected) in PARAM_NAMES.iter().zip(ckpt.params.tensors()).zip(dims.shapes()) {
            if t.shape() != expected.as_slice() {
                return Err(CheckpointError::Shape {
                    tensor: name.to_string(),
                    expected,
                    found: t.shape().to_vec(),
                });
            }
        }
        Ok(ckpt)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Malformed("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
