//! Little-endian parameter files.
//!
//! Layout: a one-byte family tag, the family's spec fields as 4-byte
//! integers, then the parameter payload. Dense blocks are raw `f32`s; sparse
//! blocks are `(u32 flat index, f32 value)` pairs whose count is implied by
//! the spec. The payload length therefore equals the footprint's parameter
//! bytes exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::SparseMatrix;

pub const TAG_CNN: u8 = b'C';
pub const TAG_PROTONN: u8 = b'P';
pub const TAG_BONSAI: u8 = b'B';
pub const TAG_FASTGRNN: u8 = b'F';

/// Densities are stored as parts-per-thousand so the header stays integral.
pub fn density_to_permille(density: f64) -> u32 {
    (density * 1000.0).round() as u32
}

pub fn permille_to_density(permille: u32) -> f64 {
    permille as f64 / 1000.0
}

#[derive(Debug, Default)]
pub struct ParamWriter {
    header: Vec<u8>,
    payload: Vec<u8>,
}

impl ParamWriter {
    pub fn new(tag: u8) -> Self {
        ParamWriter {
            header: vec![tag],
            payload: Vec::new(),
        }
    }

    pub fn header_u8(&mut self, v: u8) -> &mut Self {
        self.header.push(v);
        self
    }

    pub fn header_u32(&mut self, v: u32) -> &mut Self {
        self.header.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn dense(&mut self, values: &[f32]) -> &mut Self {
        for v in values {
            self.payload.extend_from_slice(&v.to_le_bytes());
        }
        self
    }

    pub fn scalar(&mut self, v: f32) -> &mut Self {
        self.dense(&[v])
    }

    pub fn sparse(&mut self, m: &SparseMatrix) -> &mut Self {
        for &(i, v) in m.entries() {
            self.payload.extend_from_slice(&i.to_le_bytes());
            self.payload.extend_from_slice(&v.to_le_bytes());
        }
        self
    }

    pub fn header_len(&self) -> usize {
        self.header.len()
    }

    pub fn payload_len(&self) -> usize {
        self.payload.len()
    }

    pub fn finish(self) -> Vec<u8> {
        let mut out = self.header;
        out.extend(self.payload);
        out
    }
}

#[derive(Debug)]
pub struct ParamReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ParamReader<'a> {
    /// Starts reading, checking the leading family tag.
    pub fn new(bytes: &'a [u8], tag: u8) -> Result<Self> {
        match bytes.first() {
            Some(&t) if t == tag => Ok(ParamReader { bytes, pos: 1 }),
            Some(&t) => Err(Error::Format(format!(
                "family tag {:?}, expected {:?}",
                t as char, tag as char
            ))),
            None => Err(Error::Format("empty parameter file".into())),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "parameter file truncated at byte {} (need {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_bits(self.u32()?))
    }

    pub fn dense(&mut self, n: usize) -> Result<Vec<f32>> {
        (0..n).map(|_| self.f32()).collect()
    }

    pub fn sparse(&mut self, rows: usize, cols: usize, nnz: usize) -> Result<SparseMatrix> {
        let entries = (0..nnz)
            .map(|_| Ok((self.u32()?, self.f32()?)))
            .collect::<Result<Vec<_>>>()?;
        SparseMatrix::new(rows, cols, entries)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "{} trailing bytes after parameters",
                self.bytes.len() - self.pos
            )))
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
