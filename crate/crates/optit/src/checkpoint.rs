//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"OPTITCKP"
//! version u32 (= 1)
//! header  u32 byte length, then UTF-8 TOML: the run config plus a
//!         [checkpoint] table (seed, steps, updates, head layout)
//! nets    u32 count (= 2: policy, value); per net:
//!         u32 layer count, then per layer u32 inputs, u32 outputs;
//!         then per layer the weights (input-major) and biases as f32
//! ```

use std::io::{Read, Write};
use std::path::Path;

use optit_core::nn::{HeadLayout, Mlp, PolicyNet, ValueNet};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const MAGIC: &[u8; 8] = b"OPTITCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub total_env_steps: u64,
    pub updates: u64,
    pub num_options: usize,
    pub num_actions: usize,
    pub termination: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    checkpoint: CheckpointMeta,
    config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub meta: CheckpointMeta,
    pub policy: PolicyNet<f32>,
    pub value: ValueNet<f32>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<(), CheckpointError> {
    let v = u32::try_from(v).map_err(|_| CheckpointError::Corrupt("size exceeds u32".into()))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_mlp(out: &mut Vec<u8>, mlp: &Mlp<f32>) -> Result<(), CheckpointError> {
    put_u32(out, mlp.num_layers())?;
    for (i, o) in mlp.shapes() {
        put_u32(out, i)?;
        put_u32(out, o)?;
    }
    for l in 0..mlp.num_layers() {
        let (w, b) = mlp.layer_params(l);
        for v in w.iter().chain(b) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or_else(|| CheckpointError::Corrupt("truncated".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, CheckpointError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| CheckpointError::Corrupt("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn mlp(&mut self) -> Result<Mlp<f32>, CheckpointError> {
        let layers = self.u32()?;
        if layers == 0 || layers > 64 {
            return Err(CheckpointError::Corrupt(format!("{layers} layers")));
        }
        let shapes: Vec<(usize, usize)> = (0..layers).map(|_| Ok((self.u32()?, self.u32()?))).collect::<Result<_, CheckpointError>>()?;
        let mut parts = Vec::with_capacity(layers);
        for (i, o) in shapes {
            let w = self.f32s(i * o)?;
            let b = self.f32s(o)?;
            parts.push((i, o, w, b));
        }
        Mlp::from_parts(parts).map_err(|e| CheckpointError::Corrupt(e.to_string()))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        let header = toml::to_string(&Header { checkpoint: self.meta.clone(), config: self.config.clone() })
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_u32(&mut out, header.len())?;
        out.extend_from_slice(header.as_bytes());
        put_u32(&mut out, 2)?;
        put_mlp(&mut out, &self.policy.mlp)?;
        put_mlp(&mut out, &self.value.mlp)?;
        Ok(out)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, CheckpointError> {
        let mut c = Cursor { data, pos: 0 };
        if c.take(8).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = c.u32()? as u32;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let len = c.u32()?;
        let text = std::str::from_utf8(c.take(len)?).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let header: Header = toml::from_str(text).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        if c.u32()? != 2 {
            return Err(CheckpointError::Corrupt("expected two networks".into()));
        }
        let policy_mlp = c.mlp()?;
        let value_mlp = c.mlp()?;
        if c.pos != data.len() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        let m = &header.checkpoint;
        let layout = HeadLayout::new(m.num_options, m.num_actions, m.termination).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        if policy_mlp.output_dim() != layout.output_dim() || value_mlp.output_dim() != 1 {
            return Err(CheckpointError::Corrupt("network outputs do not match the head layout".into()));
        }
        Ok(Checkpoint {
            config: header.config,
            meta: header.checkpoint,
            policy: PolicyNet { mlp: policy_mlp, layout },
            value: ValueNet { mlp: value_mlp },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        std::fs::File::create(&tmp)?.write_all(&bytes)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        Self::from_bytes(&data)
    }

    /// Human-readable layer shapes and parameter norms.
    pub fn dump(&self) -> String {
        let m = &self.meta;
        let mut s = format!(
            "checkpoint v{VERSION}: preset {}, seed {}, {} env steps, {} updates\nheads: {} options x {} actions{}\n",
            self.config.preset,
            m.seed,
            m.total_env_steps,
            m.updates,
            m.num_options,
            m.num_actions,
            if m.termination { " + termination" } else { "" }
        );
        for (name, mlp) in [("policy", &self.policy.mlp), ("value", &self.value.mlp)] {
            s += &format!("{name}: {} parameters\n", mlp.param_count());
            for (l, (i, o)) in mlp.shapes().into_iter().enumerate() {
                let (w, b) = mlp.layer_params(l);
                let norm = |v: &[f32]| v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
                s += &format!("  layer {l}: {i} -> {o}  |W| = {:.6}  |b| = {:.6}\n", norm(w), norm(b));
            }
        }
        s
    }
}
