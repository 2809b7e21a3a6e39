//! Fixed-layout binary tensor files: 8-byte magic, 120-byte ASCII header
//! `f32 LE <ndim> <d0> <d1> ...` padded with spaces, then the row-major
//! little-endian `f32` payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array3, ArrayD, IxDyn};

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 8] = b"DWTENSR1";
pub const HEADER_LEN: usize = 120;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorContainer {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorContainer {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    /// Narrows to `f32`.
    pub fn from_f64(shape: &[usize], data: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::new(shape.to_vec(), data.into_iter().map(|v| v as f32).collect())
    }

    pub fn from_array3(a: &Array3<f64>) -> Self {
        Self::from_f64(a.shape(), a.iter().copied()).expect("array shape is consistent")
    }

    pub fn to_array(&self) -> ArrayD<f64> {
        ArrayD::from_shape_vec(IxDyn(&self.shape), self.data.iter().map(|&v| v as f64).collect())
            .expect("container shape is consistent")
    }

    pub fn to_array3(&self) -> Result<Array3<f64>> {
        if self.shape.len() != 3 {
            return Err(Error::Shape(format!("expected a rank-3 tensor, found shape {:?}", self.shape)));
        }
        Ok(self.to_array().into_dimensionality().expect("rank checked"))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut header = format!("f32 LE {}", self.shape.len());
        for d in &self.shape {
            header.push_str(&format!(" {d}"));
        }
        if header.len() > HEADER_LEN {
            return Err(Error::Format(format!("shape {:?} does not fit the {HEADER_LEN}-byte header", self.shape)));
        }
        let mut buf = Vec::with_capacity(8 + HEADER_LEN + 4 * self.data.len());
        buf.extend_from_slice(TENSOR_MAGIC);
        buf.extend_from_slice(format!("{header:<HEADER_LEN$}").as_bytes());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != TENSOR_MAGIC {
            return Err(Error::Format(format!("bad tensor magic {:?}", String::from_utf8_lossy(&magic))));
        }
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        let header = std::str::from_utf8(&header).map_err(|_| Error::Format("tensor header is not ASCII".into()))?;
        let mut fields = header.split_ascii_whitespace();
        if fields.next() != Some("f32") || fields.next() != Some("LE") {
            return Err(Error::Format(format!("unsupported tensor header `{}`", header.trim_end())));
        }
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("malformed tensor header `{}`", header.trim_end())))
        };
        let ndim = parse(fields.next())?;
        let shape = (0..ndim).map(|_| parse(fields.next())).collect::<Result<Vec<_>>>()?;
        if fields.next().is_some() {
            return Err(Error::Format("tensor header has trailing fields".into()));
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        let mut bytes = vec![0u8; 4 * n];
        r.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(Self { shape, data })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut v = Vec::new();
        self.write_to(&mut v)?;
        Ok(v)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let t = Self::read_from(&mut bytes)?;
        if !bytes.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after tensor payload", bytes.len())));
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    pub fn load_buffered(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let t = TensorContainer::new(vec![2, 3], vec![0.5; 6]).unwrap();
        let b = t.to_bytes().unwrap();
        assert_eq!(&b[..8], b"DWTENSR1");
        assert_eq!(&b[8..20], b"f32 LE 2 2 3");
        assert!(b[20..128].iter().all(|&c| c == b' '));
        assert_eq!(b.len(), 128 + 24);
        assert_eq!(&b[128..132], &0.5f32.to_le_bytes());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let t = TensorContainer::new(vec![4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut b = t.to_bytes().unwrap();
        assert!(TensorContainer::from_bytes(&b[..b.len() - 1]).is_err());
        b[0] = b'X';
        assert!(TensorContainer::from_bytes(&b).is_err());
        assert!(TensorContainer::new(vec![3], vec![1.0]).is_err());
    }
}
