//! Binary checkpoint record.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    b"TQCK"
//! version  u32 (1)
//! input, hidden, head_hidden, actions   u32 each
//! mean_subtract                         u8
//! adam_t, updates                       u64 each
//! n                                     u64 (parameter count)
//! online[n], target[n], adam_m[n], adam_v[n]   f64 row-major
//! ```

use std::fs;
use std::path::Path;

use super::adam::Adam;
use super::dqn::{DqnAgent, TrainConfig};
use super::network::{NetShape, QParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TQCK";
const VERSION: u32 = 1;

pub fn encode(agent: &DqnAgent) -> Vec<u8> {
    let s = agent.online.shape;
    let n = agent.online.len();
    let mut out = Vec::with_capacity(64 + 32 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [s.input, s.hidden, s.head_hidden, s.actions] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(s.mean_subtract as u8);
    out.extend_from_slice(&agent.adam.t.to_le_bytes());
    out.extend_from_slice(&agent.updates.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for block in [&agent.online.data, &agent.target.data, &agent.adam.m, &agent.adam.v] {
        for x in block {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        let s = self
            .buf
            .get(self.at..end)
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.at)))?;
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(8 * n)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Rebuilds an agent from a record; `cfg` supplies the hyperparameters,
/// which are not part of the record.
pub fn decode(buf: &[u8], cfg: TrainConfig) -> Result<DqnAgent> {
    let mut r = Reader { buf, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|d| d as usize);
    let mean_subtract = r.take(1)?[0] != 0;
    let shape = NetShape {
        input: dims[0],
        hidden: dims[1],
        head_hidden: dims[2],
        actions: dims[3],
        mean_subtract,
    };
    let t = r.u64()?;
    let updates = r.u64()?;
    let n = r.u64()? as usize;
    if n != shape.param_count() {
        return Err(Error::Checkpoint(format!(
            "parameter count {n} does not match shape ({})",
            shape.param_count()
        )));
    }
    let online = QParams {
        shape,
        data: r.f64s(n)?,
    };
    let target = QParams {
        shape,
        data: r.f64s(n)?,
    };
    let m = r.f64s(n)?;
    let v = r.f64s(n)?;
    if r.at != buf.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(DqnAgent {
        online,
        target,
        adam: Adam { m, v, t },
        cfg,
        updates,
    })
}

pub fn save_checkpoint(path: &Path, agent: &DqnAgent) -> Result<()> {
    // write-then-rename keeps the previous checkpoint intact on failure
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(agent)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path, cfg: TrainConfig) -> Result<DqnAgent> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf, cfg)
}
