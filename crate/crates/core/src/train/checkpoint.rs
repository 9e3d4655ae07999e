//! Binary checkpoint container. All integers and floats are little-endian;
//! floats are stored as raw IEEE-754 bits so a round trip is bit-exact.
//!
//! ```text
//! magic      8 bytes  "DNRSFMCK"
//! version    u32      currently 1
//! p          u64
//! n          u64      followed by n widths, u64 each
//! step       u64
//! tensors    u32 count, then per tensor:
//!              name_len u32, name (UTF-8), rows u64, cols u64, rows*cols f64
//! optimizer  u8 kind: 0 = sgd (no payload), 1 = adam:
//!              t u64, then one (rows u64, cols u64, data) record per
//!              parameter tensor for the first moment, then the same for
//!              the second moment
//! loss       u64 count, then (step u64, value f64) pairs
//! coherence  u64 count, then (step u64, value f64) pairs
//! ```
//!
//! Tensors appear in [`ModelParams::tensors`] order and their names must match
//! [`ModelDims::tensor_shapes`].

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{ModelDims, ModelParams};
use crate::train::OptState;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DNRSFMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub step: u64,
    pub optimizer: OptState,
    pub loss_history: Vec<(u64, f64)>,
    pub coherence_history: Vec<(u64, f64)>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let dims = &self.params.dims;
        put_u64(&mut out, dims.p as u64);
        put_u64(&mut out, dims.widths.len() as u64);
        for w in &dims.widths {
            put_u64(&mut out, *w as u64);
        }
        put_u64(&mut out, self.step);
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for ((name, _, _), t) in dims.tensor_shapes().iter().zip(&tensors) {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            put_mat(&mut out, t);
        }
        match &self.optimizer {
            OptState::Sgd => out.push(0),
            OptState::Adam { t, m, v } => {
                out.push(1);
                put_u64(&mut out, *t);
                for mat in m.iter().chain(v) {
                    put_mat(&mut out, mat);
                }
            }
        }
        for hist in [&self.loss_history, &self.coherence_history] {
            put_u64(&mut out, hist.len() as u64);
            for (step, value) in hist {
                put_u64(&mut out, *step);
                out.extend_from_slice(&value.to_bits().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Schema("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!("unsupported checkpoint version {version}")));
        }
        let p = r.usize()?;
        let n = r.usize()?;
        if n > 1024 {
            return Err(Error::Schema(format!("implausible layer count {n}")));
        }
        let widths = (0..n).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let dims = ModelDims::new(p, widths).map_err(|e| Error::Schema(format!("bad dimensions: {e}")))?;
        let step = r.u64()?;
        let shapes = dims.tensor_shapes();
        let count = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
        if count != shapes.len() {
            return Err(Error::Schema(format!("expected {} tensors, found {count}", shapes.len())));
        }
        let mut tensors = Vec::with_capacity(count);
        for (name, rows, cols) in &shapes {
            let len = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
            let got =
                std::str::from_utf8(r.take(len)?).map_err(|_| Error::Schema("tensor name is not UTF-8".into()))?;
            if got != name {
                return Err(Error::Schema(format!("expected tensor {name:?}, found {got:?}")));
            }
            tensors.push(r.mat(*rows, *cols, name)?);
        }
        let params = ModelParams::from_tensors(dims, tensors)?;
        let optimizer = match r.take(1)?[0] {
            0 => OptState::Sgd,
            1 => {
                let t = r.u64()?;
                let mut moments = Vec::with_capacity(2 * count);
                for _ in 0..2 {
                    for (name, rows, cols) in &shapes {
                        moments.push(r.mat(*rows, *cols, name)?);
                    }
                }
                let v = moments.split_off(count);
                OptState::Adam { t, m: moments, v }
            }
            k => return Err(Error::Schema(format!("unknown optimizer kind {k}"))),
        };
        let loss_history = r.history()?;
        let coherence_history = r.history()?;
        if r.pos != bytes.len() {
            return Err(Error::Schema(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { params, step, optimizer, loss_history, coherence_history })
    }
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&ck.to_bytes())?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Checkpoint::from_bytes(&bytes)
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_mat(out: &mut Vec<u8>, m: &Mat) {
    put_u64(out, m.rows() as u64);
    put_u64(out, m.cols() as u64);
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Schema(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Schema("size does not fit in memory".into()))
    }

    fn mat(&mut self, rows: usize, cols: usize, name: &str) -> Result<Mat> {
        let (r, c) = (self.usize()?, self.usize()?);
        if (r, c) != (rows, cols) {
            return Err(Error::Schema(format!("tensor {name} is {r}x{c}, expected {rows}x{cols}")));
        }
        let data = (0..r * c).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Mat::from_vec(r, c, data).map_err(|_| Error::Schema(format!("tensor {name} holds non-finite values")))
    }

    fn history(&mut self) -> Result<Vec<(u64, f64)>> {
        let n = self.usize()?;
        if n > self.bytes.len() / 16 {
            return Err(Error::Schema("history length exceeds file size".into()));
        }
        (0..n).map(|_| Ok((self.u64()?, self.f64()?))).collect()
    }
}
