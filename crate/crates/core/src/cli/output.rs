//! Artifact formats.
//!
//! Binary matrices: 8-byte magic `ION2DMAT`, `u32` LE version, `u32` LE kind
//! (0 real, 1 complex), two `u64` LE dimensions, then row-major `f64` LE
//! values (complex as interleaved re/im).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ION2DMAT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Matrix {
    Real(Array2<f64>),
    Complex(Array2<C64>),
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let (kind, (r, c)) = match m {
        Matrix::Real(a) => (0u32, a.dim()),
        Matrix::Complex(a) => (1u32, a.dim()),
    };
    let mut out = Vec::with_capacity(32 + r * c * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&(r as u64).to_le_bytes());
    out.extend_from_slice(&(c as u64).to_le_bytes());
    match m {
        Matrix::Real(a) => a.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Matrix::Complex(a) => a.iter().for_each(|z| {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }),
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let bad = |m: &str| Error::Config(format!("matrix file: {m}"));
    if bytes.len() < 32 || &bytes[..8] != MAGIC {
        return Err(bad("missing header"));
    }
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
    let u64_at = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().unwrap()) as usize;
    if u32_at(8) != FORMAT_VERSION {
        return Err(bad("unsupported version"));
    }
    let kind = u32_at(12);
    let (r, c) = (u64_at(16), u64_at(24));
    let width = match kind {
        0 => 8,
        1 => 16,
        _ => return Err(bad("unknown kind")),
    };
    if bytes.len() != 32 + r * c * width {
        return Err(bad("length does not match dimensions"));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[32 + 8 * k..40 + 8 * k].try_into().unwrap());
    Ok(if kind == 0 {
        Matrix::Real(Array2::from_shape_fn((r, c), |(i, j)| f(i * c + j)))
    } else {
        Matrix::Complex(Array2::from_shape_fn((r, c), |(i, j)| C64::new(f(2 * (i * c + j)), f(2 * (i * c + j) + 1))))
    })
}

/// CSV text from a header and rows of already-formatted cells.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Fixed-width scientific formatting so CSVs are byte-stable.
pub fn num(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x:.12e}").unwrap();
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Writes artifacts into one directory and records their checksums.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    pub files: Vec<OutputFile>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.files.push(OutputFile { file: name.to_string(), bytes: bytes.len(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }

    pub fn matrix(&mut self, name: &str, m: &Matrix) -> Result<()> {
        self.write(name, &encode_matrix(m))
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write(name, text.as_bytes())
    }
}
