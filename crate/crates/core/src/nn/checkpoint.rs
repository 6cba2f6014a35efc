//! Checkpoint directories: `weights.bin` (flat little-endian tensor blobs),
//! `index.json` (name, shape, dtype, byte offset per tensor) and the model
//! configuration under `config.json`.

use std::fs;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{config, Result};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckpointIndex {
    pub format_version: u32,
    /// `"doa_net"` or `"def_transformer"`.
    pub kind: String,
    pub tensors: Vec<TensorEntry>,
}

fn dtype_name(dtype: DType) -> Result<&'static str> {
    match dtype {
        DType::F32 => Ok("float32"),
        DType::F64 => Ok("float64"),
        other => Err(config(format!("unsupported checkpoint dtype {other:?}"))),
    }
}

pub fn save_checkpoint<C: Serialize>(
    dir: &Path,
    kind: &str,
    store: &ParamStore,
    cfg: &C,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut blob = Vec::new();
    let mut tensors = Vec::with_capacity(store.len());
    for (name, var) in store.iter() {
        let t = var.as_tensor();
        let offset = blob.len() as u64;
        match t.dtype() {
            DType::F32 => {
                for v in t.flatten_all()?.to_vec1::<f32>()? {
                    blob.extend_from_slice(&v.to_le_bytes());
                }
            }
            DType::F64 => {
                for v in t.flatten_all()?.to_vec1::<f64>()? {
                    blob.extend_from_slice(&v.to_le_bytes());
                }
            }
            other => return Err(config(format!("unsupported checkpoint dtype {other:?}"))),
        }
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.dims().to_vec(),
            dtype: dtype_name(t.dtype())?.to_string(),
            offset,
            bytes: blob.len() as u64 - offset,
        });
    }
    let index = CheckpointIndex {
        format_version: 1,
        kind: kind.to_string(),
        tensors,
    };
    fs::write(dir.join("weights.bin"), blob)?;
    fs::write(dir.join("index.json"), serde_json::to_vec_pretty(&index)?)?;
    fs::write(dir.join("config.json"), serde_json::to_vec_pretty(cfg)?)?;
    Ok(())
}

pub fn read_checkpoint_config<C: DeserializeOwned>(dir: &Path, kind: &str) -> Result<C> {
    let index = read_index(dir)?;
    if index.kind != kind {
        return Err(config(format!(
            "checkpoint at {} holds a {} model, expected {kind}",
            dir.display(),
            index.kind
        )));
    }
    Ok(serde_json::from_slice(&fs::read(dir.join("config.json"))?)?)
}

fn read_index(dir: &Path) -> Result<CheckpointIndex> {
    let path = dir.join("index.json");
    let bytes = fs::read(&path)
        .map_err(|e| config(format!("cannot read checkpoint {}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Overwrite every variable in `store` from the checkpoint, converting
/// dtype if needed. Names and shapes must match exactly.
pub fn load_into(dir: &Path, store: &ParamStore) -> Result<()> {
    let index = read_index(dir)?;
    let blob = fs::read(dir.join("weights.bin"))?;
    if index.tensors.len() != store.len() {
        return Err(config(format!(
            "checkpoint has {} tensors, model has {}",
            index.tensors.len(),
            store.len()
        )));
    }
    for entry in &index.tensors {
        let var = store
            .get(&entry.name)
            .ok_or_else(|| config(format!("checkpoint tensor '{}' not in model", entry.name)))?;
        if var.dims() != entry.shape.as_slice() {
            return Err(config(format!(
                "shape mismatch for '{}': checkpoint {:?}, model {:?}",
                entry.name,
                entry.shape,
                var.dims()
            )));
        }
        let start = entry.offset as usize;
        let bytes = blob
            .get(start..start + entry.bytes as usize)
            .ok_or_else(|| config(format!("weights.bin truncated at '{}'", entry.name)))?;
        let t = match entry.dtype.as_str() {
            "float32" => {
                let v: Vec<f32> = bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Tensor::from_vec(v, entry.shape.as_slice(), &Device::Cpu)?
            }
            "float64" => {
                let v: Vec<f64> = bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Tensor::from_vec(v, entry.shape.as_slice(), &Device::Cpu)?
            }
            other => return Err(config(format!("unsupported dtype '{other}' in checkpoint"))),
        };
        var.set(&t.to_dtype(var.dtype())?)?;
    }
    Ok(())
}
