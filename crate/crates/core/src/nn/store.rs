//! Named parameter tensors and their binary file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "CONVSATP" | version u32 | precision u8 | seed u64
//! config_hash: len u32 + utf8 bytes
//! tensor count u32, then per tensor:
//!   name: len u32 + utf8 | ndim u32 | dims u64 * ndim | precision u8
//!   values: f32 or f64 per element
//! sha256 of everything above (32 bytes)
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use sha2::{Digest, Sha256};

use super::tensor::{Precision, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CONVSATP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
    pub seed: u64,
    pub precision: Precision,
    pub config_hash: String,
}

impl ParamStore {
    pub fn new(seed: u64, precision: Precision) -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
            seed,
            precision,
            config_hash: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Insert a tensor; values are rounded to the store precision.
    pub fn insert(&mut self, name: impl Into<String>, mut tensor: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name `{name}`")));
        }
        let p = self.precision;
        tensor.data.iter_mut().for_each(|x| *x = p.round(*x));
        let idx = self.tensors.len();
        self.index.insert(name.clone(), idx);
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(idx)
    }

    /// Insert a tensor drawn from `uniform(-bound, bound)`.
    pub fn insert_uniform(&mut self, name: &str, shape: Vec<usize>, bound: f64, rng: &mut impl Rng) -> Result<usize> {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.insert(name, Tensor::new(shape, data)?)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index_of(name).map(move |i| &mut self.tensors[i])
    }

    pub fn tensor(&self, idx: usize) -> &Tensor {
        &self.tensors[idx]
    }

    pub fn tensor_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.tensors[idx]
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.precision.tag());
        out.extend_from_slice(&self.seed.to_le_bytes());
        put_str(&mut out, &self.config_hash);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in self.iter() {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for d in &t.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            out.push(self.precision.tag());
            for x in &t.data {
                match self.precision {
                    Precision::Single => out.extend_from_slice(&(*x as f32).to_le_bytes()),
                    Precision::Double => out.extend_from_slice(&x.to_le_bytes()),
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 32 {
            return Err(Error::ParamFile("file too short; checksum missing".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::ParamFile("checksum mismatch; file is truncated or corrupted".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::ParamFile("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::ParamFile(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let precision = r.precision()?;
        let seed = r.u64()?;
        let mut store = ParamStore::new(seed, precision);
        store.config_hash = r.string()?;
        let count = r.u32()?;
        for _ in 0..count {
            let name = r.string()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let tensor_precision = r.precision()?;
            if tensor_precision != precision {
                return Err(Error::ParamFile(format!("tensor `{name}` precision differs from the store")));
            }
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| match precision {
                    Precision::Single => r.f32().map(f64::from),
                    Precision::Double => r.f64(),
                })
                .collect::<Result<Vec<_>>>()?;
            store.insert(name, Tensor::new(shape, data)?)?;
        }
        if r.pos != body.len() {
            return Err(Error::ParamFile("trailing bytes after tensor table".into()));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Load and insist on a precision; no silent casting between the two.
    pub fn load_expecting(path: &Path, precision: Precision) -> Result<Self> {
        let store = Self::load(path)?;
        if store.precision != precision {
            return Err(Error::ParamFile(format!(
                "parameter file is {:?} precision but the run expects {:?}",
                store.precision, precision
            )));
        }
        Ok(store)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::ParamFile("unexpected end of parameter data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn precision(&mut self) -> Result<Precision> {
        let tag = self.take(1)?[0];
        Precision::from_tag(tag).ok_or_else(|| Error::ParamFile(format!("unknown precision tag {tag}")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::ParamFile("non-utf8 name".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_store(precision: Precision) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = ParamStore::new(42, precision);
        s.config_hash = "abc123".into();
        s.insert_uniform("a.w", vec![3, 4], 0.5, &mut rng).unwrap();
        s.insert_uniform("b", vec![7], 2.0, &mut rng).unwrap();
        s.insert("empty", Tensor::zeros(vec![0])).unwrap();
        s
    }

    #[test]
    fn round_trip_is_bitwise() {
        for p in [Precision::Single, Precision::Double] {
            let s = random_store(p);
            let back = ParamStore::from_bytes(&s.to_bytes()).unwrap();
            assert_eq!(back, s);
            for ((_, a), (_, b)) in s.iter().zip(back.iter()) {
                let bits = |t: &Tensor| t.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(a), bits(b));
            }
        }
    }

    #[test]
    fn truncation_fails_the_checksum() {
        let bytes = random_store(Precision::Double).to_bytes();
        let err = ParamStore::from_bytes(&bytes[..bytes.len() - 5]).unwrap_err();
        assert!(err.to_string().contains("checksum"));
        let mut flipped = bytes.clone();
        flipped[20] ^= 1;
        assert!(ParamStore::from_bytes(&flipped).is_err());
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = random_store(Precision::Double).to_bytes();
        bytes.truncate(bytes.len() - 32);
        bytes[8] = 9;
        let digest = Sha256::digest(&bytes);
        bytes.extend_from_slice(&digest);
        let err = ParamStore::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn cross_precision_load_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        random_store(Precision::Single).save(&path).unwrap();
        assert!(ParamStore::load_expecting(&path, Precision::Double).is_err());
        assert!(ParamStore::load_expecting(&path, Precision::Single).is_ok());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new(0, Precision::Double);
        s.insert("x", Tensor::zeros(vec![1])).unwrap();
        assert!(s.insert("x", Tensor::zeros(vec![1])).is_err());
    }
}
