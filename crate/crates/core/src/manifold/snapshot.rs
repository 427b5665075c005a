//! `LFLD` binary field snapshots.
//!
//! Layout (little-endian): magic `LFLD`, version `u32`, dimension `u32`,
//! `res[n]` as `u32`, `periods[n]` as `f64`, component count `u32`, then
//! node-major `f64` data (`node * components + c`).

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::manifold::field::{Field, Kind};
use crate::manifold::grid::{PeriodicGrid, Scheme};

pub const MAGIC: &[u8; 4] = b"LFLD";
pub const VERSION: u32 = 1;

/// A decoded snapshot, independent of the tensor kind.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub res: Vec<usize>,
    pub periods: Vec<f64>,
    pub components: usize,
    /// Node-major values.
    pub data: Vec<f64>,
}

impl Snapshot {
    pub fn from_field<K: Kind>(field: &Field<K>) -> Self {
        let grid = field.grid();
        Self {
            res: grid.res().to_vec(),
            periods: grid.periods().to_vec(),
            components: field.n_components(),
            data: field.node_major(),
        }
    }

    pub fn grid(&self, scheme: Scheme) -> Result<Arc<PeriodicGrid>> {
        Ok(Arc::new(PeriodicGrid::new(
            &self.res,
            &self.periods,
            scheme,
        )?))
    }

    /// Rebuilds a field on `grid`, which must match the stored geometry.
    pub fn to_field<K: Kind>(&self, grid: &Arc<PeriodicGrid>) -> Result<Field<K>> {
        if grid.res() != self.res.as_slice() || grid.periods() != self.periods.as_slice() {
            return Err(LabError::Format(
                "snapshot grid differs from the requested grid".into(),
            ));
        }
        if K::components(grid.dim()) != self.components {
            return Err(LabError::Format(format!(
                "snapshot has {} components, a {} field needs {}",
                self.components,
                K::NAME,
                K::components(grid.dim())
            )));
        }
        Field::from_node_major(grid, &self.data)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.res.len() as u32).to_le_bytes());
        for &r in &self.res {
            out.extend_from_slice(&(r as u32).to_le_bytes());
        }
        for &p in &self.periods {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out.extend_from_slice(&(self.components as u32).to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut cur, &mut magic)?;
        if &magic != MAGIC {
            return Err(LabError::Format("bad magic".into()));
        }
        let version = read_u32(&mut cur)?;
        if version != VERSION {
            return Err(LabError::Format(format!("unsupported version {version}")));
        }
        let n = read_u32(&mut cur)? as usize;
        if !(2..=3).contains(&n) {
            return Err(LabError::Format(format!("dimension {n} not in {{2, 3}}")));
        }
        let res = (0..n)
            .map(|_| read_u32(&mut cur).map(|r| r as usize))
            .collect::<Result<Vec<_>>>()?;
        let periods = (0..n)
            .map(|_| read_f64(&mut cur))
            .collect::<Result<Vec<_>>>()?;
        let components = read_u32(&mut cur)? as usize;
        let count = res.iter().product::<usize>() * components;
        if cur.len() != 8 * count {
            return Err(LabError::Format(format!(
                "expected {} data bytes, found {}",
                8 * count,
                cur.len()
            )));
        }
        let data = cur
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            res,
            periods,
            components,
            data,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::decode(&buf)
    }
}

fn read_exact(cur: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    cur.read_exact(buf)
        .map_err(|_| LabError::Format("truncated header".into()))
}

fn read_u32(cur: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(cur, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(cur: &mut &[u8]) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(cur, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Writes a field as an `LFLD` file.
pub fn write_field<K: Kind>(path: &Path, field: &Field<K>) -> Result<()> {
    Snapshot::from_field(field).write(path)
}

/// Reads an `LFLD` file as a field on `grid`.
pub fn read_field<K: Kind>(path: &Path, grid: &Arc<PeriodicGrid>) -> Result<Field<K>> {
    Snapshot::read(path)?.to_field(grid)
}
