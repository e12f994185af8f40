//! Score-vector files: a JSON array of numbers, or raw little-endian
//! `f64`s preceded by a little-endian `u64` length.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    Json,
    Binary,
}

impl VectorFormat {
    /// `.bin` means binary; anything else is JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => VectorFormat::Binary,
            _ => VectorFormat::Json,
        }
    }
}

pub fn write_vector_to<W: Write>(mut w: W, v: &[f64], format: VectorFormat) -> Result<()> {
    match format {
        VectorFormat::Json => {
            serde_json::to_writer(&mut w, v)?;
            writeln!(w)?;
        }
        VectorFormat::Binary => {
            w.write_all(&(v.len() as u64).to_le_bytes())?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_from<R: Read>(mut r: R, format: VectorFormat) -> Result<Vec<f64>> {
    match format {
        VectorFormat::Json => Ok(serde_json::from_reader(r)?),
        VectorFormat::Binary => {
            let mut len = [0u8; 8];
            r.read_exact(&mut len)?;
            let len = u64::from_le_bytes(len) as usize;
            let mut bytes = Vec::new();
            r.read_to_end(&mut bytes)?;
            if bytes.len() != len * 8 {
                return Err(invalid(format!("binary vector declares {len} entries but holds {} bytes", bytes.len())));
            }
            Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        }
    }
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_vector_to(BufWriter::new(File::create(path)?), v, VectorFormat::from_path(path))
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    read_vector_from(BufReader::new(File::open(path)?), VectorFormat::from_path(path))
}
