//! JSON file formats: blocks, base states, contract registries and conflict
//! specs. The on-disk shapes are stable; see the README for examples.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::ContractRegistry;
use crate::spec::ConflictSpec;
use crate::types::{BaseState, Block, StateKey, Value};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
}

fn read(path: &Path) -> Result<Vec<u8>, WireError> {
    fs::read(path).map_err(|source| WireError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), WireError> {
    fs::write(path, bytes)
        .map_err(|source| WireError::Io { path: path.display().to_string(), source })
}

fn to_json<T: Serialize>(path: &Path, value: &T) -> Result<Vec<u8>, WireError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|source| WireError::Json { path: path.display().to_string(), source })?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn from_json<T: for<'de> Deserialize<'de>>(path: &Path, bytes: &[u8]) -> Result<T, WireError> {
    serde_json::from_slice(bytes)
        .map_err(|source| WireError::Json { path: path.display().to_string(), source })
}

pub fn save_block(path: &Path, block: &Block) -> Result<(), WireError> {
    write(path, &to_json(path, block)?)
}

pub fn load_block(path: &Path) -> Result<Block, WireError> {
    let block: Block = from_json(path, &read(path)?)?;
    block.validate().map_err(|reason| WireError::Invalid {
        path: path.display().to_string(),
        reason,
    })?;
    Ok(block)
}

#[derive(Serialize, Deserialize)]
struct StateEntry {
    key: StateKey,
    value: Value,
}

pub fn save_state(path: &Path, state: &BaseState) -> Result<(), WireError> {
    let mut entries: Vec<StateEntry> =
        state.iter().map(|(k, v)| StateEntry { key: *k, value: *v }).collect();
    entries.sort_by_key(|e| e.key);
    write(path, &to_json(path, &entries)?)
}

pub fn load_state(path: &Path) -> Result<BaseState, WireError> {
    let entries: Vec<StateEntry> = from_json(path, &read(path)?)?;
    Ok(entries.into_iter().map(|e| (e.key, e.value)).collect())
}

pub fn save_registry(path: &Path, registry: &ContractRegistry) -> Result<(), WireError> {
    write(path, &to_json(path, registry)?)
}

pub fn load_registry(path: &Path) -> Result<ContractRegistry, WireError> {
    from_json(path, &read(path)?)
}

pub fn save_spec(path: &Path, spec: &ConflictSpec) -> Result<(), WireError> {
    write(path, &to_json(path, spec)?)
}

pub fn load_spec(path: &Path) -> Result<ConflictSpec, WireError> {
    let spec: ConflictSpec = from_json(path, &read(path)?)?;
    spec.validate().map_err(|e| WireError::Invalid {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(spec)
}
