//! Trajectory dumps for offline segmentation.
//!
//! ```text
//! magic   b"OPTITTRJ"
//! version u32 (= 1)
//! records, each: u32 step count L, u32 observation length D,
//!                then L times (D observation bytes, u32 action id)
//! ```
//!
//! One record per finished episode, little-endian throughout. Observations
//! are binary, one byte per feature.

use std::io::{Read, Write};

pub const MAGIC: &[u8; 8] = b"OPTITTRJ";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryRecord {
    pub observations: Vec<Vec<u8>>,
    pub actions: Vec<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a trajectory file")]
    BadMagic,
    #[error("unsupported trajectory version {0}")]
    Version(u32),
    #[error("inconsistent record: {0}")]
    Inconsistent(String),
}

pub struct TrajectoryWriter<W: Write> {
    out: W,
    records: u64,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W) -> Result<Self, TrajectoryError> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        Ok(TrajectoryWriter { out, records: 0 })
    }

    pub fn write(&mut self, rec: &TrajectoryRecord) -> Result<(), TrajectoryError> {
        let len = rec.actions.len();
        if rec.observations.len() != len {
            return Err(TrajectoryError::Inconsistent("observation and action counts differ".into()));
        }
        let dim = rec.observations.first().map_or(0, Vec::len);
        if rec.observations.iter().any(|o| o.len() != dim) {
            return Err(TrajectoryError::Inconsistent("observation lengths differ".into()));
        }
        let u = |v: usize| u32::try_from(v).map_err(|_| TrajectoryError::Inconsistent("length exceeds u32".into()));
        self.out.write_all(&u(len)?.to_le_bytes())?;
        self.out.write_all(&u(dim)?.to_le_bytes())?;
        for (o, a) in rec.observations.iter().zip(&rec.actions) {
            self.out.write_all(o)?;
            self.out.write_all(&a.to_le_bytes())?;
        }
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn into_inner(mut self) -> Result<W, TrajectoryError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads every record of a dump.
pub fn read_trajectories(mut r: impl Read) -> Result<Vec<TrajectoryRecord>, TrajectoryError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| TrajectoryError::BadMagic)?;
    if &magic != MAGIC {
        return Err(TrajectoryError::BadMagic);
    }
    let v = read_u32(&mut r)?;
    if v != VERSION {
        return Err(TrajectoryError::Version(v));
    }
    let mut out = Vec::new();
    loop {
        let mut first = [0u8; 4];
        match r.read(&mut first[..1])? {
            0 => return Ok(out),
            _ => r.read_exact(&mut first[1..])?,
        }
        let len = u32::from_le_bytes(first) as usize;
        let dim = read_u32(&mut r)? as usize;
        let mut rec = TrajectoryRecord { observations: Vec::with_capacity(len.min(1 << 16)), actions: Vec::with_capacity(len.min(1 << 16)) };
        for _ in 0..len {
            let mut o = vec![0u8; dim];
            r.read_exact(&mut o)?;
            rec.observations.push(o);
            rec.actions.push(read_u32(&mut r)?);
        }
        out.push(rec);
    }
}
