use std::collections::HashMap;
use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    /// False for buffers such as batch-norm running statistics.
    pub trainable: bool,
}

/// Named tensors of a model: learnable parameters plus non-trainable buffers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(ParamEntry { name, value, trainable });
        self.entries.len() - 1
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn value(&self, id: usize) -> &Tensor {
        &self.entries[id].value
    }

    pub fn value_mut(&mut self, id: usize) -> &mut Tensor {
        &mut self.entries[id].value
    }

    pub fn entry(&self, id: usize) -> &ParamEntry {
        &self.entries[id]
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn trainable_ids(&self) -> Vec<usize> {
        (0..self.entries.len()).filter(|&i| self.entries[i].trainable).collect()
    }

    /// Total number of learnable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.value.len()).sum()
    }

    /// Keeps only the entries whose name satisfies `keep` (ids change).
    pub fn retain(&mut self, keep: impl Fn(&str) -> bool) {
        self.entries.retain(|e| keep(&e.name));
        self.index = self.entries.iter().enumerate().map(|(i, e)| (e.name.clone(), i)).collect();
    }

    /// Copies values from `other` for every name present in both with equal
    /// shapes; returns how many tensors were copied.
    pub fn load_matching(&mut self, other: &ParamStore) -> usize {
        let mut n = 0;
        for e in &mut self.entries {
            if let Some(&j) = other.index.get(&e.name) {
                if other.entries[j].value.shape == e.value.shape {
                    e.value = other.entries[j].value.clone();
                    n += 1;
                }
            }
        }
        n
    }
}

/// Kaiming-uniform weights for leaky-ReLU networks: `U(−√(6/fan_in), √(6/fan_in))`.
pub fn kaiming_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Tensor {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect())
}

/// Bias initialization `U(−1/√fan_in, 1/√fan_in)`.
pub fn bias_uniform(rng: &mut ChaCha8Rng, cols: usize, fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::matrix(1, cols, (0..cols).map(|_| rng.random_range(-bound..bound)).collect())
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"UVNC";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Writes a checkpoint. Layout (little endian):
///
/// ```text
/// magic "UVNC" | version u32 | metadata_len u32 | metadata (UTF-8 JSON)
/// | count u32 | count × { name_len u32 | name | trainable u8
///                        | ndim u32 | ndim × u64 dims | values f64 × prod(dims) }
/// ```
pub fn write_checkpoint(w: &mut impl Write, store: &ParamStore, metadata: &str) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(metadata.len() as u32).to_le_bytes())?;
    w.write_all(metadata.as_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for e in store.entries() {
        w.write_all(&(e.name.len() as u32).to_le_bytes())?;
        w.write_all(e.name.as_bytes())?;
        w.write_all(&[u8::from(e.trainable)])?;
        w.write_all(&(e.value.shape.len() as u32).to_le_bytes())?;
        for &d in &e.value.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in &e.value.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a checkpoint written by [`write_checkpoint`]; returns the store and metadata.
pub fn read_checkpoint(r: &mut impl Read) -> Result<(ParamStore, String)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let meta_len = read_u32(r)? as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)?;
    let metadata = String::from_utf8(meta).map_err(|e| Error::Format(e.to_string()))?;
    let count = read_u32(r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name_len = read_u32(r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let ndim = read_u32(r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if store.id(&name).is_some() {
            return Err(Error::Format(format!("duplicate tensor {name}")));
        }
        store.add(name, Tensor::new(shape, data)?, flag[0] != 0);
    }
    Ok((store, metadata))
}
