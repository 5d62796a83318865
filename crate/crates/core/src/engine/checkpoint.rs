//! Binary checkpoint format.
//!
//! ```text
//! magic        8 bytes  "FIINETCK"
//! version      u32
//! dtype        u8       4 = f32, 8 = f64
//! meta count   u32      then per entry: u32 key len, key, u32 value len, value (UTF-8)
//! param count  u32
//! per parameter:
//!   name len   u32
//!   name       UTF-8 bytes
//!   rank       u32
//!   dims       rank × u64
//!   values     product(dims) little-endian floats of width dtype
//! ```
//!
//! All integers are little-endian. The metadata block carries the model
//! configuration (variant, embedding width, ...) so a checkpoint can be
//! matched against the config that loads it.

use std::collections::BTreeMap;
use std::path::Path;

use crate::engine::params::ParameterStore;
use crate::engine::real::Real;
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FIINETCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor<T>)>,
}

impl<T: Real> Checkpoint<T> {
    pub fn from_store(params: &ParameterStore<T>, meta: BTreeMap<String, String>) -> Self {
        Self {
            meta,
            tensors: params
                .iter()
                .map(|(n, p)| (n.to_string(), p.value.clone()))
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(T::BYTES as u8);
        put_u32(&mut out, self.meta.len());
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        put_u32(&mut out, self.tensors.len());
        for (name, t) in &self.tensors {
            put_str(&mut out, name);
            put_u32(&mut out, t.rank());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.data() {
                v.write_le(&mut out);
            }
        }
        out
    }

    /// Parses a checkpoint; values stored at another precision are converted.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let width = r.take(1)?[0] as usize;
        if width != 4 && width != 8 {
            return Err(Error::Checkpoint(format!("unknown dtype width {width}")));
        }
        let mut meta = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            meta.insert(k, v);
        }
        let count = r.u32()?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = r.take(
                n.checked_mul(width)
                    .ok_or_else(|| Error::Checkpoint(format!("tensor {name} too large")))?,
            )?;
            let data = if width == T::BYTES {
                raw.chunks_exact(width).map(T::read_le).collect()
            } else if width == 4 {
                raw.chunks_exact(4)
                    .map(|c| T::from_f64_lossy(f32::read_le(c) as f64))
                    .collect()
            } else {
                raw.chunks_exact(8)
                    .map(|c| T::from_f64_lossy(f64::read_le(c)))
                    .collect()
            };
            let t = Tensor::new(&shape, data)
                .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
            tensors.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Copies every stored tensor into `params`; names and shapes must match
    /// exactly and no parameter may be left unset.
    pub fn restore_into(&self, params: &mut ParameterStore<T>) -> Result<()> {
        if self.tensors.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model has {}",
                self.tensors.len(),
                params.len()
            )));
        }
        for (name, t) in &self.tensors {
            params
                .set(name, t.clone())
                .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8 in name".into()))
    }
}
