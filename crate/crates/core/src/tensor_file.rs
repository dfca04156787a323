//! The `SGT1` binary tensor format and the JSON name sidecars that travel
//! with descriptor sets.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "SGT1"
//! 4       1           rank (u8, >= 1)
//! 5       4 * rank    dims (u32 each, >= 1)
//! 5+4r    1           dtype (0x01 = f32)
//! 6+4r    4 * prod    payload, row-major f32
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{DescriptorSet, FeatureMap, WhiteningParams};

pub const MAGIC: [u8; 4] = *b"SGT1";
pub const DTYPE_F32: u8 = 0x01;

/// A decoded tensor file: shape plus raw `f32` payload.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl TensorFile {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        check_dims(&dims)?;
        let expected = element_count(&dims)?;
        if data.len() != expected {
            return Err(Error::DimMismatch(format!(
                "dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.push(DTYPE_F32);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let header = |need: usize| {
            if bytes.len() < need {
                Err(Error::DimMismatch(format!(
                    "header needs {need} bytes, file has {}",
                    bytes.len()
                )))
            } else {
                Ok(())
            }
        };
        header(5)?;
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&bytes[..4]);
        if magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let rank = bytes[4] as usize;
        let payload_start = 5 + 4 * rank + 1;
        header(payload_start)?;
        let dims: Vec<u32> = bytes[5..5 + 4 * rank]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        check_dims(&dims)?;
        let dtype = bytes[5 + 4 * rank];
        if dtype != DTYPE_F32 {
            return Err(Error::UnsupportedDtype(dtype));
        }
        let count = element_count(&dims)?;
        let expected = count
            .checked_mul(4)
            .ok_or_else(|| Error::DimMismatch(format!("dims {dims:?} overflow")))?;
        let payload = &bytes[payload_start..];
        if payload.len() < expected {
            return Err(Error::TruncatedPayload {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(Error::DimMismatch(format!(
                "{} trailing bytes after a {expected}-byte payload",
                payload.len() - expected
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { dims, data })
    }
}

fn check_dims(dims: &[u32]) -> Result<()> {
    if dims.is_empty() || dims.len() > u8::MAX as usize {
        return Err(Error::DimMismatch(format!("unsupported rank {}", dims.len())));
    }
    if dims.contains(&0) {
        return Err(Error::DimMismatch(format!("zero-length dim in {dims:?}")));
    }
    Ok(())
}

fn element_count(dims: &[u32]) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, &d| {
        acc.checked_mul(d as usize)
            .ok_or_else(|| Error::DimMismatch(format!("dims {dims:?} overflow")))
    })
}

fn dim_u32(n: usize) -> u32 {
    u32::try_from(n).expect("tensor dimension exceeds u32")
}

impl From<&FeatureMap> for TensorFile {
    fn from(m: &FeatureMap) -> Self {
        TensorFile {
            dims: vec![dim_u32(m.height()), dim_u32(m.width()), dim_u32(m.channels())],
            data: m.data().to_vec(),
        }
    }
}

impl From<&DescriptorSet> for TensorFile {
    fn from(s: &DescriptorSet) -> Self {
        TensorFile {
            dims: vec![dim_u32(s.len()), dim_u32(s.dim())],
            data: s.data().to_vec(),
        }
    }
}

impl TryFrom<TensorFile> for FeatureMap {
    type Error = Error;

    fn try_from(t: TensorFile) -> Result<Self> {
        match t.dims[..] {
            [h, w, c] => FeatureMap::new(h as usize, w as usize, c as usize, t.data),
            _ => Err(Error::DimMismatch(format!(
                "feature map needs rank 3, got dims {:?}",
                t.dims
            ))),
        }
    }
}

impl TryFrom<TensorFile> for DescriptorSet {
    type Error = Error;

    fn try_from(t: TensorFile) -> Result<Self> {
        match t.dims[..] {
            [_, c] => DescriptorSet::new(c as usize, t.data),
            [c] => DescriptorSet::new(c as usize, t.data),
            _ => Err(Error::DimMismatch(format!(
                "descriptor set needs rank 2, got dims {:?}",
                t.dims
            ))),
        }
    }
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    TensorFile::decode(&bytes)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &TensorFile) -> Result<()> {
    write_atomic(path, &tensor.encode())
}

pub fn read_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    read_tensor(path)?.try_into()
}

pub fn read_descriptor_set(path: impl AsRef<Path>) -> Result<DescriptorSet> {
    read_tensor(path)?.try_into()
}

/// Reads a rank-2 `C_g × C_d` matrix and, when given, a rank-1 `C_g` bias.
/// A missing bias file means `b = 0`.
pub fn read_whitening(matrix: impl AsRef<Path>, bias: Option<&Path>) -> Result<WhiteningParams> {
    let m = read_tensor(matrix)?;
    let (rows, cols) = match m.dims[..] {
        [r, c] => (r as usize, c as usize),
        _ => {
            return Err(Error::DimMismatch(format!(
                "whitening matrix needs rank 2, got dims {:?}",
                m.dims
            )))
        }
    };
    let b = match bias {
        Some(p) => read_tensor(p)?.data,
        None => vec![0.0; rows],
    };
    WhiteningParams::new(rows, cols, m.data, b)
}

/// Sidecar path holding image names for a descriptor tensor:
/// `foo.sgt` → `foo.names.json`.
pub fn names_path(tensor_path: &Path) -> PathBuf {
    tensor_path.with_extension("names.json")
}

pub fn read_names(path: impl AsRef<Path>) -> Result<Vec<String>> {
    read_json(path)
}

pub fn write_names(path: impl AsRef<Path>, names: &[String]) -> Result<()> {
    write_json(path, &names)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Writes through a temporary file in the destination directory, then
/// renames over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
