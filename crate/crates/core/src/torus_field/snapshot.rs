//! Field snapshot format: a JSON header `{dim, N, L, fields: [names]}` plus
//! one little-endian f64 raw binary file per field, row-major.
//!
//! Header file: `<prefix>.json`; field payloads: `<prefix>.<name>.f64`.
//! The decoders are hardened against malformed input (wrong lengths,
//! non-finite payloads, absurd headers) and are fuzzed in `fuzz/`.

use super::{FieldError, ScalarField, TorusGrid};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("field payload for '{name}' has {got} bytes, expected {want}")]
    PayloadSize { name: String, got: usize, want: usize },
    #[error("field payload for '{name}' contains non-finite values")]
    PayloadNonFinite { name: String },
    #[error("field error: {0}")]
    Field(#[from] FieldError),
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub fields: Vec<String>,
}

impl SnapshotHeader {
    /// Parse and sanity-check a header. Rejects grids the format cannot
    /// describe and anything that would allocate absurd amounts of memory.
    pub fn parse(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let h: SnapshotHeader =
            serde_json::from_slice(bytes).map_err(|e| SnapshotError::Header(e.to_string()))?;
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), SnapshotError> {
        if !(1..=3).contains(&self.dim) {
            return Err(SnapshotError::Header(format!("dim {} out of range", self.dim)));
        }
        if self.n < 8 || !self.n.is_multiple_of(2) || self.n > 1 << 12 {
            return Err(SnapshotError::Header(format!("N {} unsupported", self.n)));
        }
        if !self.l.is_finite() || self.l <= 0.0 {
            return Err(SnapshotError::Header(format!("L {} invalid", self.l)));
        }
        if self.fields.is_empty() || self.fields.len() > 64 {
            return Err(SnapshotError::Header(format!(
                "field count {} unsupported",
                self.fields.len()
            )));
        }
        for name in &self.fields {
            if name.is_empty()
                || name.len() > 64
                || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                return Err(SnapshotError::Header(format!("bad field name {name:?}")));
            }
        }
        // n^dim points of 8 bytes each must fit comfortably
        let points = (self.n as u128).pow(self.dim as u32);
        if points > 1 << 28 {
            return Err(SnapshotError::Header("grid too large".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
}

/// Decode a raw little-endian f64 payload of exactly `expected_len` values.
pub fn decode_field_bytes(
    name: &str,
    expected_len: usize,
    bytes: &[u8],
) -> Result<Vec<f64>, SnapshotError> {
    if bytes.len() != expected_len * 8 {
        return Err(SnapshotError::PayloadSize {
            name: name.to_string(),
            got: bytes.len(),
            want: expected_len * 8,
        });
    }
    let mut out = Vec::with_capacity(expected_len);
    for chunk in bytes.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(SnapshotError::PayloadNonFinite { name: name.to_string() });
        }
        out.push(v);
    }
    Ok(out)
}

pub fn encode_field_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Write `<prefix>.json` + one `<prefix>.<name>.f64` per field into `dir`.
pub fn write_snapshot(
    dir: &Path,
    prefix: &str,
    fields: &[(&str, &ScalarField)],
) -> Result<(), SnapshotError> {
    let grid = fields
        .first()
        .ok_or_else(|| SnapshotError::Header("no fields to write".into()))?
        .1
        .grid();
    let header = SnapshotHeader {
        dim: grid.dim(),
        n: grid.points_per_axis(),
        l: grid.period(),
        fields: fields.iter().map(|(n, _)| n.to_string()).collect(),
    };
    header.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut hf = std::fs::File::create(dir.join(format!("{prefix}.json")))?;
    hf.write_all(serde_json::to_string_pretty(&header).unwrap().as_bytes())?;
    hf.write_all(b"\n")?;
    for (name, field) in fields {
        let mut bf = std::fs::File::create(dir.join(format!("{prefix}.{name}.f64")))?;
        bf.write_all(&encode_field_bytes(field.values()))?;
    }
    Ok(())
}

/// Read a snapshot back; returns the reconstructed grid and named fields.
pub fn read_snapshot(
    dir: &Path,
    prefix: &str,
    dealias: bool,
) -> Result<(Arc<TorusGrid>, Vec<(String, ScalarField)>), SnapshotError> {
    let mut bytes = Vec::new();
    std::fs::File::open(dir.join(format!("{prefix}.json")))?.read_to_end(&mut bytes)?;
    let header = SnapshotHeader::parse(&bytes)?;
    let grid = TorusGrid::new(header.dim, header.n, header.l, dealias)?;
    let mut fields = Vec::with_capacity(header.fields.len());
    for name in &header.fields {
        let mut payload = Vec::new();
        std::fs::File::open(dir.join(format!("{prefix}.{name}.f64")))?.read_to_end(&mut payload)?;
        let values = decode_field_bytes(name, header.points(), &payload)?;
        fields.push((name.clone(), ScalarField::from_values(grid.clone(), values)?));
    }
    Ok((grid, fields))
}
