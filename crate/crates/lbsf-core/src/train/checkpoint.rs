//! Binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "LBSF"
//! version    u32
//! spec_len   u64      followed by the ModelSpec JSON
//! meta_len   u64      followed by the TrainMeta JSON
//! n_params   u32
//! per parameter, in registration order:
//!   name_len u16, name bytes (UTF-8)
//!   trainable u8
//!   ndim     u8, dims u32 each
//!   payload  f32 * product(dims)
//! ```
//!
//! Loading rebuilds the model from the spec and refuses unknown names,
//! missing names, shape mismatches, version mismatches, and truncation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{LbsfModel, ModelSpec};
use crate::nn::Tensor;

use super::TrainError;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LBSF";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Training metadata carried alongside the weights.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct TrainMeta {
    pub epochs_trained: usize,
    pub seed: u64,
    pub loss_history: Vec<f64>,
    pub val_auc_history: Vec<Option<f64>>,
}

pub fn save_checkpoint(model: &LbsfModel<f32>, meta: &TrainMeta, path: &Path) -> Result<(), TrainError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;

    let spec_json = serde_json::to_vec(model.spec()).expect("spec serializes");
    w.write_all(&(spec_json.len() as u64).to_le_bytes())?;
    w.write_all(&spec_json)?;

    let meta_json = serde_json::to_vec(meta).expect("meta serializes");
    w.write_all(&(meta_json.len() as u64).to_le_bytes())?;
    w.write_all(&meta_json)?;

    let n = model.params().len() as u32;
    w.write_all(&n.to_le_bytes())?;
    for (_, p) in model.params().iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&[u8::from(p.trainable)])?;
        let shape = p.value.shape();
        w.write_all(&[shape.len() as u8])?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn corrupt(reason: impl Into<String>) -> TrainError {
    TrainError::CorruptCheckpoint { reason: reason.into() }
}

fn read_exact_or_corrupt(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), TrainError> {
    r.read_exact(buf).map_err(|_| corrupt(format!("truncated while reading {what}")))
}

pub fn load_checkpoint(path: &Path) -> Result<(LbsfModel<f32>, TrainMeta), TrainError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact_or_corrupt(&mut r, &mut magic, "magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(corrupt(format!("bad magic {magic:?}")));
    }
    let mut v = [0u8; 4];
    read_exact_or_corrupt(&mut r, &mut v, "version")?;
    let version = u32::from_le_bytes(v);
    if version != CHECKPOINT_VERSION {
        return Err(TrainError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }

    let mut len8 = [0u8; 8];
    read_exact_or_corrupt(&mut r, &mut len8, "spec length")?;
    let mut spec_json = vec![0u8; u64::from_le_bytes(len8) as usize];
    read_exact_or_corrupt(&mut r, &mut spec_json, "spec")?;
    let spec: ModelSpec =
        serde_json::from_slice(&spec_json).map_err(|e| corrupt(format!("spec JSON: {e}")))?;

    read_exact_or_corrupt(&mut r, &mut len8, "meta length")?;
    let mut meta_json = vec![0u8; u64::from_le_bytes(len8) as usize];
    read_exact_or_corrupt(&mut r, &mut meta_json, "meta")?;
    let meta: TrainMeta =
        serde_json::from_slice(&meta_json).map_err(|e| corrupt(format!("meta JSON: {e}")))?;

    let mut n4 = [0u8; 4];
    read_exact_or_corrupt(&mut r, &mut n4, "parameter count")?;
    let n = u32::from_le_bytes(n4) as usize;

    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let mut len2 = [0u8; 2];
        read_exact_or_corrupt(&mut r, &mut len2, "name length")?;
        let mut name = vec![0u8; u16::from_le_bytes(len2) as usize];
        read_exact_or_corrupt(&mut r, &mut name, "name")?;
        let name = String::from_utf8(name).map_err(|_| corrupt(format!("parameter {i} name")))?;
        let mut flag = [0u8; 1];
        read_exact_or_corrupt(&mut r, &mut flag, "trainable flag")?;
        let mut ndim = [0u8; 1];
        read_exact_or_corrupt(&mut r, &mut ndim, "rank")?;
        let mut shape = Vec::with_capacity(ndim[0] as usize);
        for _ in 0..ndim[0] {
            let mut d4 = [0u8; 4];
            read_exact_or_corrupt(&mut r, &mut d4, "dimension")?;
            shape.push(u32::from_le_bytes(d4) as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = vec![0f32; numel];
        for v in data.iter_mut() {
            let mut b = [0u8; 4];
            read_exact_or_corrupt(&mut r, &mut b, &format!("payload of `{name}`"))?;
            *v = f32::from_le_bytes(b);
        }
        values.push((name, Tensor::new(shape, data)));
    }

    let mut model = LbsfModel::<f32>::new(spec, 0)?;
    model.load_params(values)?;
    Ok((model, meta))
}
