//! Binary state snapshots.
//!
//! Little-endian layout: magic `QSH1`, `u32 dim`, `u32 n`, `f64 domain_length`,
//! `f64 time`, `u32 field_count`, then per field a `u8` rank tag followed by
//! the row-major physical values of every component.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::dynamics::SimState;
use crate::error::{QshError, Result};
use crate::spectral::{Field, Grid, Rank};

pub const MAGIC: &[u8; 4] = b"QSH1";

pub fn encode_snapshot(state: &SimState) -> Vec<u8> {
    let grid = state.grid();
    let mut out = Vec::with_capacity(32 + 8 * grid.len() * (grid.dim() + 2 * grid.dim() * grid.dim()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&grid.domain_length().to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    out.extend_from_slice(&3u32.to_le_bytes());
    for field in [&state.v, &state.q, &state.w] {
        out.push(field.rank.tag());
        for comp in &field.comps {
            for x in comp {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(QshError::Format(format!(
                "truncated: needed {k} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a snapshot onto a fresh grid built from its header.
pub fn decode_snapshot(bytes: &[u8]) -> Result<SimState> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(QshError::Format("bad magic, expected QSH1".into()));
    }
    let dim = cur.u32()? as usize;
    let n = cur.u32()? as usize;
    let length = cur.f64()?;
    let t = cur.f64()?;
    let count = cur.u32()?;
    if count != 3 {
        return Err(QshError::Format(format!("expected 3 fields, header says {count}")));
    }
    let grid = Grid::new(dim, n, length).map_err(|e| QshError::Format(format!("bad header: {e}")))?;
    let mut fields = Vec::with_capacity(3);
    for expected in [Rank::Vector, Rank::Matrix, Rank::Matrix] {
        let tag = cur.take(1)?[0];
        let rank = Rank::from_tag(tag).ok_or_else(|| QshError::Format(format!("unknown rank tag {tag}")))?;
        if rank != expected {
            return Err(QshError::Format(format!(
                "field {} has rank tag {tag}, expected {}",
                fields.len(),
                expected.tag()
            )));
        }
        let mut field = Field::zeros(&grid, rank);
        for comp in field.comps.iter_mut() {
            for x in comp.iter_mut() {
                *x = cur.f64()?;
            }
        }
        fields.push(field);
    }
    if cur.pos != bytes.len() {
        return Err(QshError::Format(format!(
            "{} trailing bytes after the last field",
            bytes.len() - cur.pos
        )));
    }
    let w = fields.pop().unwrap();
    let q = fields.pop().unwrap();
    let v = fields.pop().unwrap();
    Ok(SimState { t, v, q, w })
}

pub fn write_snapshot(state: &SimState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| QshError::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&encode_snapshot(state))
        .and_then(|_| out.flush())
        .map_err(|e| QshError::io(path, e))
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<SimState> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| QshError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| QshError::io(path, e))?;
    decode_snapshot(&bytes)
}

/// Reads a snapshot and rebinds it to `grid`, which must match its header.
pub fn read_snapshot_on(path: impl AsRef<Path>, grid: &Arc<Grid>) -> Result<SimState> {
    let state = read_snapshot(path)?;
    let g = state.grid();
    if g.dim() != grid.dim() || g.n() != grid.n() || g.domain_length() != grid.domain_length() {
        return Err(QshError::ShapeMismatch(format!(
            "snapshot is dim={} n={} L={}, configuration is dim={} n={} L={}",
            g.dim(),
            g.n(),
            g.domain_length(),
            grid.dim(),
            grid.n(),
            grid.domain_length()
        )));
    }
    let rebind = |f: Field| Field {
        grid: grid.clone(),
        rank: f.rank,
        comps: f.comps,
    };
    Ok(SimState {
        t: state.t,
        v: rebind(state.v),
        q: rebind(state.q),
        w: rebind(state.w),
    })
}
