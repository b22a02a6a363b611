//! `CTWT` tensor container.
//!
//! ```text
//! magic "CTWT" | version u8 = 1 | entry_count u32
//! per entry: name_len u16 | name (UTF-8) | dtype u8 | rank u8 | dims u32 x rank | data
//! ```
//!
//! All integers are little-endian. The only dtype is `0`, little-endian
//! `f32`. Entries whose names start with `meta.` carry auxiliary constants
//! such as input normalisation.

use std::fs;
use std::path::Path;

use crate::error::{contract, Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"CTWT";
pub const VERSION: u8 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Entry {
    pub fn new(name: impl Into<String>, dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let numel = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
        if numel != Some(data.len()) {
            return Err(contract!("entry `{name}`: dims {:?} do not match {} values", dims, data.len()));
        }
        if name.len() > u16::MAX as usize {
            return Err(contract!("entry name longer than 65535 bytes"));
        }
        if dims.len() > u8::MAX as usize {
            return Err(contract!("entry `{name}`: rank {} too large", dims.len()));
        }
        Ok(Entry { name, dims, data })
    }

    /// Narrows a compute tensor to 32-bit storage.
    pub fn from_tensor(name: impl Into<String>, t: &Tensor) -> Result<Self> {
        let dims = t.shape().iter().map(|&d| d as u32).collect();
        Entry::new(name, dims, t.data().iter().map(|&v| v as f32).collect())
    }

    /// Widens storage to a 64-bit compute tensor.
    pub fn to_tensor(&self) -> Tensor {
        let shape = self.dims.iter().map(|&d| d as usize).collect();
        Tensor::new(shape, self.data.iter().map(|&v| v as f64).collect()).expect("validated on construction")
    }

    pub fn shape(&self) -> Vec<usize> {
        self.dims.iter().map(|&d| d as usize).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightContainer {
    entries: Vec<Entry>,
}

impl WeightContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn insert(&mut self, entry: Entry) -> Result<()> {
        if self.get(&entry.name).is_some() {
            return Err(contract!("duplicate entry `{}`", entry.name));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn insert_tensor(&mut self, name: impl Into<String>, t: &Tensor) -> Result<()> {
        self.insert(Entry::from_tensor(name, t)?)
    }

    pub fn tensor(&self, name: &str) -> Option<Tensor> {
        self.get(name).map(Entry::to_tensor)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u16).to_le_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.push(DTYPE_F32);
            out.push(e.dims.len() as u8);
            for d in &e.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in &e.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad container magic".into()));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let count = r.u32()?;
        let mut wc = WeightContainer::new();
        for _ in 0..count {
            let name_at = r.pos;
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format(format!("entry name at byte {name_at} is not UTF-8")))?
                .to_owned();
            let dtype = r.u8()?;
            if dtype != DTYPE_F32 {
                return Err(Error::Format(format!("entry `{name}`: unknown dtype {dtype}")));
            }
            let rank = r.u8()? as usize;
            let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let numel = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
            let byte_len = numel.and_then(|n| n.checked_mul(4)).filter(|&n| n <= r.remaining()).ok_or_else(|| {
                Error::Format(format!("entry `{name}`: dims {dims:?} exceed the remaining {} bytes", r.remaining()))
            })?;
            let data = r
                .take(byte_len)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if wc.get(&name).is_some() {
                return Err(Error::Format(format!("duplicate entry `{name}`")));
            }
            wc.entries.push(Entry { name, dims, data });
        }
        if r.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes after last entry", r.remaining())));
        }
        Ok(wc)
    }
}

pub fn read_container(path: impl AsRef<Path>) -> Result<WeightContainer> {
    WeightContainer::from_bytes(&fs::read(path)?)
}

pub fn write_container(wc: &WeightContainer, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, wc.to_bytes())?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Corrupt { offset: self.bytes.len(), msg: format!("need {n} more bytes") });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
