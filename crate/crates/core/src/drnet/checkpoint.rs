//! `DRNET1` checkpoint files: magic, `u32` header length, JSON header, then
//! little-endian `f32` parameters in block order (optionally followed by the
//! Adam moments, first `m` then `v`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::model::{Model, ModelSpec};
use super::train::TrainConfig;
use crate::binio::{bytes_to_f32s, decode_container, encode_container, read_file, write_file};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 6] = b"DRNET1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub config: Option<TrainConfig>,
    pub seed: u64,
    /// Optimizer steps taken.
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub spec: ModelSpec,
    pub blocks: Vec<BlockInfo>,
    pub param_count: usize,
    pub optimizer_state: bool,
    pub adam: Option<AdamConfig>,
    pub adam_step: u64,
    pub train: TrainState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub optimizer: Option<Adam<f32>>,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn header(&self) -> CheckpointHeader {
        let spec = self.model.spec.clone();
        CheckpointHeader {
            version: CHECKPOINT_VERSION,
            blocks: spec
                .blocks()
                .into_iter()
                .map(|(name, shape)| BlockInfo { name, shape })
                .collect(),
            param_count: spec.param_count(),
            spec,
            optimizer_state: self.optimizer.is_some(),
            adam: self.optimizer.as_ref().map(|o| o.config),
            adam_step: self.optimizer.as_ref().map_or(0, |o| o.step),
            train: self.state.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let mut payload = self.model.flat_params();
        if let Some(opt) = &self.optimizer {
            for t in opt.m.iter().chain(&opt.v) {
                payload.extend_from_slice(t.data());
            }
        }
        Ok(encode_container(MAGIC, &header, &payload))
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let (body, payload) = decode_container(bytes, MAGIC, path)?;
        let header: CheckpointHeader =
            serde_json::from_slice(body).map_err(|e| Error::format(path, format!("bad header: {e}")))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported checkpoint version {}", header.version),
            ));
        }
        header.spec.validate()?;
        let n = header.spec.param_count();
        if header.param_count != n {
            return Err(Error::format(
                path,
                format!("header declares {} parameters, spec implies {n}", header.param_count),
            ));
        }
        let copies = if header.optimizer_state { 3 } else { 1 };
        let flat = bytes_to_f32s(payload, copies * n, path)?;
        let blocks = header.spec.blocks();
        let mut chunks = flat.chunks(n);
        let mut unflatten = || -> Result<Vec<Tensor<f32>>> {
            let chunk = chunks.next().expect("payload split into validated chunks");
            let mut off = 0;
            blocks
                .iter()
                .map(|(_, shape)| {
                    let len: usize = shape.iter().product();
                    let t = Tensor::from_vec(shape.clone(), chunk[off..off + len].to_vec());
                    off += len;
                    t
                })
                .collect()
        };
        let model = Model::from_params(&header.spec, unflatten()?)?;
        let optimizer = if header.optimizer_state {
            Some(Adam {
                config: header.adam.unwrap_or_default(),
                step: header.adam_step,
                m: unflatten()?,
                v: unflatten()?,
            })
        } else {
            None
        };
        Ok(Checkpoint {
            model,
            optimizer,
            state: header.train,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_file(path, &ckpt.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&read_file(path)?, path)
}

/// Loads a checkpoint and insists its architecture equals `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelSpec) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    if let Some((field, want, found)) = expected.first_difference(&ckpt.model.spec) {
        return Err(Error::SpecMismatch {
            field,
            expected: want,
            found,
        });
    }
    Ok(ckpt)
}
