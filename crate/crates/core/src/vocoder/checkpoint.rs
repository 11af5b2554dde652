//! Checkpoint file: `MBGV`, u32 version, length-prefixed JSON metadata, then
//! little-endian f32 tensors (parameters, Adam first moments, Adam second
//! moments) in the order of the metadata's shape table.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::AdamState;
use super::config::NetConfig;
use super::params::ModelParams;
use super::train::{Provenance, TrainHyper};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::features::NormStats;

const MAGIC: &[u8; 4] = b"MBGV";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ShapeEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Metadata {
    config: NetConfig,
    provenance: Provenance,
    hyper: TrainHyper,
    norm: NormStats,
    steps_done: u64,
    adam_step: u64,
    tensors: Vec<ShapeEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub params: ModelParams<f32>,
    pub adam: AdamState<f32>,
    pub provenance: Provenance,
    pub hyper: TrainHyper,
    /// Condition normalization the model was trained with.
    pub norm: NormStats,
    pub steps_done: u64,
}

impl ModelCheckpoint {
    pub fn config(&self) -> &NetConfig {
        self.params.config()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let layout = &self.params.layout;
        let meta = Metadata {
            config: *self.config(),
            provenance: self.provenance.clone(),
            hyper: self.hyper,
            norm: self.norm.clone(),
            steps_done: self.steps_done,
            adam_step: self.adam.step,
            tensors: layout
                .tensors
                .iter()
                .map(|t| ShapeEntry {
                    name: t.name.clone(),
                    rows: t.rows,
                    cols: t.cols,
                })
                .collect(),
        };
        let json = serde_json::to_vec(&meta).expect("metadata serializes");
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.block(&json);
        for buf in [&self.params.data, &self.adam.m, &self.adam.v] {
            w.f32s(buf.iter().copied());
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, Error::Checkpoint);
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let meta: Metadata = serde_json::from_slice(r.block()?)
            .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        let mut params = ModelParams::<f32>::zeros(&meta.config)?;
        let expected: Vec<ShapeEntry> = params
            .layout
            .tensors
            .iter()
            .map(|t| ShapeEntry {
                name: t.name.clone(),
                rows: t.rows,
                cols: t.cols,
            })
            .collect();
        if expected != meta.tensors {
            return Err(Error::Checkpoint("shape table does not match the config".into()));
        }
        let n = params.layout.total;
        params.data = r.f32s(n)?;
        let m = r.f32s(n)?;
        let v = r.f32s(n)?;
        r.finish()?;
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        Ok(Self {
            params,
            adam: AdamState {
                m,
                v,
                step: meta.adam_step,
            },
            provenance: meta.provenance,
            hyper: meta.hyper,
            norm: meta.norm,
            steps_done: meta.steps_done,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}
