//! Sparse triplet storage shared by the cooccurrence and association
//! matrices, with the two on-disk forms: sorted text triplets and a binary
//! format with a magic header. Metadata travels in a JSON sidecar next to
//! the matrix file.

use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

const BINARY_MAGIC: &[u8; 8] = b"TVSPMTX1";

/// Row-major sorted sparse matrix with strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: u32,
    cols: u32,
    entries: Vec<(u32, u32, f64)>,
}

impl SparseMatrix {
    pub fn empty(rows: u32, cols: u32) -> Self {
        SparseMatrix {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    /// Build from unordered entries; sorts by `(row, col)` and checks the
    /// storage invariants (indices in range, weights finite and positive,
    /// no duplicate keys).
    pub fn from_entries(rows: u32, cols: u32, mut entries: Vec<(u32, u32, f64)>) -> Result<Self> {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        for window in entries.windows(2) {
            if (window[0].0, window[0].1) == (window[1].0, window[1].1) {
                return Err(Error::InvalidInput(format!(
                    "duplicate matrix entry at ({}, {})",
                    window[0].0, window[0].1
                )));
            }
        }
        for &(r, c, w) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::InvalidInput(format!(
                    "entry ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "entry ({r}, {c}) has non-positive weight {w}"
                )));
            }
        }
        Ok(SparseMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, _, w)| w).sum()
    }

    pub fn get(&self, row: u32, col: u32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&(row, col), |&(r, c, _)| (r, c))
            .ok()
            .map(|i| self.entries[i].2)
    }

    /// Entrywise sum of two matrices with identical dimensions.
    pub fn merged(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ConfigMismatch(format!(
                "cannot merge {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut merged = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let a = self.entries[i];
            let b = other.entries[j];
            match (a.0, a.1).cmp(&(b.0, b.1)) {
                std::cmp::Ordering::Less => {
                    merged.push(a);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    merged.push(b);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    merged.push((a.0, a.1, a.2 + b.2));
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&self.entries[i..]);
        merged.extend_from_slice(&other.entries[j..]);
        Ok(SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: merged,
        })
    }

    /// True when every entry `(r, c, w)` has a transposed twin `(c, r, w)`.
    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && self
                .entries
                .iter()
                .all(|&(r, c, w)| self.get(c, r) == Some(w))
    }

    pub fn scaled(&self, factor: f64) -> Result<SparseMatrix> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        Ok(SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .map(|&(r, c, w)| (r, c, w * factor))
                .collect(),
        })
    }

    /// Write `row<TAB>col<TAB>weight` lines in sorted order. Weights use the
    /// shortest round-trip decimal form, so reading the file back restores
    /// them bit-exactly.
    pub fn write_text(&self, mut writer: impl Write) -> Result<()> {
        for &(r, c, w) in &self.entries {
            writeln!(writer, "{r}\t{c}\t{w}")?;
        }
        Ok(())
    }

    /// Read text triplets; dimensions come from the metadata sidecar.
    pub fn read_text(reader: impl BufRead, rows: u32, cols: u32, path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (r, c, w) = match (fields.next(), fields.next(), fields.next()) {
                (Some(r), Some(c), Some(w)) => (r, c, w),
                _ => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "expected row<TAB>col<TAB>weight",
                    ))
                }
            };
            let r: u32 = r
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad row index {r:?}")))?;
            let c: u32 = c
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad column index {c:?}")))?;
            let w: f64 = w
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad weight {w:?}")))?;
            entries.push((r, c, w));
        }
        SparseMatrix::from_entries(rows, cols, entries)
    }

    /// Binary form: magic, `u32` rows, `u32` cols, `u64` entry count, then
    /// little-endian `(u32, u32, f64)` triplets.
    pub fn write_binary(&self, mut writer: impl Write) -> Result<()> {
        writer.write_all(BINARY_MAGIC)?;
        writer.write_all(&self.rows.to_le_bytes())?;
        writer.write_all(&self.cols.to_le_bytes())?;
        writer.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for &(r, c, w) in &self.entries {
            writer.write_all(&r.to_le_bytes())?;
            writer.write_all(&c.to_le_bytes())?;
            writer.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut reader: impl Read, path: &Path) -> Result<Self> {
        let mut magic = [0u8; 8];
        reader
            .read_exact(&mut magic)
            .map_err(|_| Error::parse(path, 0, "missing binary matrix header"))?;
        if &magic != BINARY_MAGIC {
            return Err(Error::parse(
                path,
                0,
                format!("bad magic {magic:?}, expected {BINARY_MAGIC:?}"),
            ));
        }
        let rows = read_u32(&mut reader, path)?;
        let cols = read_u32(&mut reader, path)?;
        let count = read_u64(&mut reader, path)?;
        let mut entries = Vec::with_capacity(usize::try_from(count).unwrap_or(0));
        for _ in 0..count {
            let r = read_u32(&mut reader, path)?;
            let c = read_u32(&mut reader, path)?;
            let mut buf = [0u8; 8];
            reader
                .read_exact(&mut buf)
                .map_err(|_| Error::parse(path, 0, "truncated matrix entry"))?;
            entries.push((r, c, f64::from_le_bytes(buf)));
        }
        SparseMatrix::from_entries(rows, cols, entries)
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_text(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load_text(path: impl AsRef<Path>, rows: u32, cols: u32) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(file), rows, cols, path)
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_binary(std::io::BufReader::new(file), path)
    }
}

fn read_u32(reader: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader
        .read_exact(&mut buf)
        .map_err(|_| Error::parse(path, 0, "truncated binary matrix"))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(reader: &mut impl Read, path: &Path) -> Result<u64> {
    let mut buf = [0u8; 8];
    reader
        .read_exact(&mut buf)
        .map_err(|_| Error::parse(path, 0, "truncated binary matrix"))?;
    Ok(u64::from_le_bytes(buf))
}

/// Path of the JSON metadata sidecar for an artifact.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

pub fn write_sidecar<T: Serialize>(artifact: &Path, meta: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    std::fs::write(sidecar_path(artifact), json)?;
    Ok(())
}

pub fn read_sidecar<T: DeserializeOwned>(artifact: &Path) -> Result<T> {
    let path = sidecar_path(artifact);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Error::InvalidInput(format!(
            "missing metadata sidecar {}: {e}",
            path.display()
        ))
    })?;
    Ok(serde_json::from_str(&text)?)
}
