//! Snapshot persistence: an 8-byte magic, a little-endian `u64` header
//! length, a JSON header and the grid values as little-endian `f64`.

use crate::error::{Error, Result};
use crate::model::GridSpec;
use crate::simulate::{SimState, StepDiagnostics};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"FRSNAP01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub t: f64,
    pub grid: GridSpec,
    /// Hash of whatever produced the state (medium, nonlinearity, config).
    pub provenance: String,
    pub len: usize,
}

fn fmt(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<stream>".into(),
        message: e.to_string(),
    }
}

pub fn write_snapshot<W: Write>(mut w: W, state: &SimState, provenance: &str) -> Result<()> {
    let header = SnapshotHeader {
        t: state.t,
        grid: state.grid.clone(),
        provenance: provenance.to_string(),
        len: state.u.len(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| fmt(e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * state.u.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for v in &state.u {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(SnapshotHeader, SimState)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(fmt("bad snapshot magic"));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io_err)?;
    let hlen = u64::from_le_bytes(len) as usize;
    if hlen > 1 << 24 {
        return Err(fmt("snapshot header too large"));
    }
    let mut json = vec![0u8; hlen];
    r.read_exact(&mut json).map_err(io_err)?;
    let header: SnapshotHeader = serde_json::from_slice(&json).map_err(|e| fmt(e.to_string()))?;
    if header.len != header.grid.len() {
        return Err(fmt("snapshot length does not match its grid"));
    }
    let mut raw = vec![0u8; 8 * header.len];
    r.read_exact(&mut raw).map_err(io_err)?;
    let u = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let state = SimState {
        t: header.t,
        u,
        grid: header.grid.clone(),
        diagnostics: StepDiagnostics::default(),
    };
    Ok((header, state))
}
