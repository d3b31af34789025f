//! Versioned JSON checkpoints with a content checksum.
//!
//! Floats are stored as f64 with shortest round-trip formatting, so saving the
//! same parameters twice gives byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &str = "docread-ckpt";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredParam {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    magic: String,
    version: u32,
    /// Free-form metadata (model config, vocabularies, training state).
    pub meta: serde_json::Value,
    params: Vec<StoredParam>,
    checksum: String,
}

fn digest(meta: &serde_json::Value, params: &[StoredParam]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(meta)?);
    for p in params {
        h.update(p.name.as_bytes());
        h.update([0u8, p.trainable as u8]);
        for d in &p.shape {
            h.update((*d as u64).to_le_bytes());
        }
        for v in &p.data {
            h.update(v.to_le_bytes());
        }
    }
    Ok(format!("{:x}", h.finalize()))
}

impl Checkpoint {
    pub fn new<S: Scalar>(params: &ParamStore<S>, meta: serde_json::Value) -> Result<Self> {
        let stored: Vec<StoredParam> = params
            .iter()
            .map(|(_, p)| StoredParam {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                trainable: p.trainable,
                data: p.value.data().iter().map(|v| v.to_f64_lossy()).collect(),
            })
            .collect();
        let checksum = digest(&meta, &stored)?;
        Ok(Checkpoint {
            magic: CHECKPOINT_MAGIC.into(),
            version: CHECKPOINT_VERSION,
            meta,
            params: stored,
            checksum,
        })
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn params<S: Scalar>(&self) -> Result<ParamStore<S>> {
        let mut store = ParamStore::new();
        for p in &self.params {
            let data = p.data.iter().map(|&v| S::from_f64_lossy(v)).collect();
            let id = store.add(&p.name, Tensor::from_vec(&p.shape, data)?)?;
            store.get_mut(id).trainable = p.trainable;
        }
        Ok(store)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.magic != CHECKPOINT_MAGIC {
            return Err(Error::Format(format!("not a checkpoint (magic {:?})", ckpt.magic)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {} unsupported (expected {})",
                ckpt.version, CHECKPOINT_VERSION
            )));
        }
        let found = digest(&ckpt.meta, &ckpt.params)?;
        if found != ckpt.checksum {
            return Err(Error::Checksum {
                expected: ckpt.checksum,
                found,
            });
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
