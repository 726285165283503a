//! Seeded random projection from the sparse context space to dense vectors.
//!
//! The operator is sparse ternary: entry `(r, c)` is `+1/sqrt(s*d)` with
//! probability `s/2`, `-1/sqrt(s*d)` with probability `s/2`, and zero
//! otherwise. Entries are a pure function of `(seed, row, column)` through a
//! splitmix64-style mixer, so any entry can be generated independently and
//! workers can project disjoint row ranges without sharing state.
//!
//! An identity scheme (requires `d == C`) bypasses the randomness so tests
//! can compare embeddings against dense association rows directly.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::weighting::AssociationMatrix;
use crate::{Error, Result};

const EMBEDDING_MAGIC: &[u8; 8] = b"TVEMBM01";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProjectionScheme {
    /// Achlioptas-style sparse ternary entries with the given density.
    SparseTernary { density: f64 },
    /// Pass-through operator for testing; requires equal dimensions.
    Identity,
}

/// Everything that determines the projection operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub input_dim: u32,
    pub output_dim: u32,
    pub seed: u64,
    pub scheme: ProjectionScheme,
}

impl ProjectionSpec {
    /// Sparse ternary spec with the default density `1/sqrt(C)`.
    pub fn sparse_ternary(input_dim: u32, output_dim: u32, seed: u64) -> Self {
        ProjectionSpec {
            input_dim,
            output_dim,
            seed,
            scheme: ProjectionScheme::SparseTernary {
                density: default_density(input_dim),
            },
        }
    }

    pub fn identity(dim: u32) -> Self {
        ProjectionSpec {
            input_dim: dim,
            output_dim: dim,
            seed: 0,
            scheme: ProjectionScheme::Identity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_dim < 1 {
            return Err(Error::InvalidInput(
                "output dimension must be at least 1".into(),
            ));
        }
        if self.output_dim > self.input_dim {
            return Err(Error::InvalidInput(format!(
                "output dimension {} exceeds input dimension {}",
                self.output_dim, self.input_dim
            )));
        }
        match self.scheme {
            ProjectionScheme::SparseTernary { density } => {
                if !density.is_finite() || density <= 0.0 || density > 1.0 {
                    return Err(Error::InvalidInput(format!(
                        "projection density must lie in (0, 1], got {density}"
                    )));
                }
            }
            ProjectionScheme::Identity => {
                if self.input_dim != self.output_dim {
                    return Err(Error::InvalidInput(
                        "identity projection requires equal dimensions".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn default_density(input_dim: u32) -> f64 {
    1.0 / (input_dim.max(1) as f64).sqrt()
}

/// Materialized projection operator: one sparse row per input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    spec: ProjectionSpec,
    rows: Vec<Vec<(u32, f64)>>,
}

/// Deterministically generate the operator for a spec. The same spec always
/// yields the same operator.
pub fn build_projection(spec: &ProjectionSpec) -> Result<ProjectionOperator> {
    spec.validate()?;
    let rows: Vec<Vec<(u32, f64)>> = (0..spec.input_dim)
        .into_par_iter()
        .map(|r| {
            (0..spec.output_dim)
                .filter_map(|c| {
                    let v = entry_value(spec, r, c);
                    (v != 0.0).then_some((c, v))
                })
                .collect()
        })
        .collect();
    Ok(ProjectionOperator {
        spec: spec.clone(),
        rows,
    })
}

fn entry_value(spec: &ProjectionSpec, row: u32, col: u32) -> f64 {
    match spec.scheme {
        ProjectionScheme::Identity => {
            if row == col {
                1.0
            } else {
                0.0
            }
        }
        ProjectionScheme::SparseTernary { density } => {
            let scale = 1.0 / (density * spec.output_dim as f64).sqrt();
            // 53 uniform bits keyed on (seed, row, col).
            let h = mix(spec.seed, row, col);
            let u = (h >> 11) as f64 / (1u64 << 53) as f64;
            if u < density / 2.0 {
                scale
            } else if u < density {
                -scale
            } else {
                0.0
            }
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(seed: u64, row: u32, col: u32) -> u64 {
    let s = splitmix64(seed ^ 0x6C62_272E_07BB_0142);
    let r = splitmix64(s ^ u64::from(row));
    splitmix64(r ^ u64::from(col))
}

impl ProjectionOperator {
    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    /// Single operator entry, recomputed from the counter-based rule.
    pub fn entry(&self, row: u32, col: u32) -> f64 {
        entry_value(&self.spec, row, col)
    }

    pub fn row(&self, row: u32) -> &[(u32, f64)] {
        &self.rows[row as usize]
    }

    /// Project one sparse input row: `out = sum_c value_c * operator_row_c`.
    pub fn project_row(&self, sparse_row: &[(u32, f64)]) -> Vec<f64> {
        let mut out = vec![0.0f64; self.spec.output_dim as usize];
        for &(c, v) in sparse_row {
            for &(j, p) in &self.rows[c as usize] {
                out[j as usize] += v * p;
            }
        }
        out
    }
}

/// Dense word-by-dimension matrix bound to a token list.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
    normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(tokens: Vec<String>, dim: usize, data: Vec<f64>, normalized: bool) -> Result<Self> {
        if data.len() != tokens.len() * dim {
            return Err(Error::InvalidInput(format!(
                "embedding data holds {} values, expected {} x {}",
                data.len(),
                tokens.len(),
                dim
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate() {
            if index.insert(token.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate token {token:?} in embedding"
                )));
            }
        }
        Ok(EmbeddingMatrix {
            tokens,
            index,
            dim,
            data,
            normalized,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn vector_of(&self, token: &str) -> Option<&[f64]> {
        self.id(token).map(|id| self.vector(id))
    }

    /// word2vec text form: `V d` header, then one `token v_1 ... v_d` line
    /// per word with six significant digits.
    pub fn write_word2vec_text(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dim)?;
        for (i, token) in self.tokens.iter().enumerate() {
            write!(writer, "{token}")?;
            for v in self.vector(i) {
                write!(writer, " {}", format_sig6(*v))?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }

    pub fn read_word2vec_text(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty embedding file"))??;
        let mut fields = header.split_whitespace();
        let count: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "bad vocabulary size in header"))?;
        let dim: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "bad dimension in header"))?;

        let mut tokens = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields
                .next()
                .ok_or_else(|| Error::parse(path, lineno, "missing token"))?;
            tokens.push(token.to_string());
            let mut read = 0usize;
            for field in fields {
                let v: f64 = field.parse().map_err(|_| {
                    Error::parse(path, lineno, format!("bad component {field:?}"))
                })?;
                data.push(v);
                read += 1;
            }
            if read != dim {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {dim} components, got {read}"),
                ));
            }
        }
        if tokens.len() != count {
            return Err(Error::parse(
                path,
                0,
                format!("header promises {count} words, file holds {}", tokens.len()),
            ));
        }
        EmbeddingMatrix::new(tokens, dim, data, false)
    }

    pub fn save_word2vec_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_word2vec_text(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load_word2vec_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_word2vec_text(std::io::BufReader::new(file), path)
    }

    /// Binary form mirroring the matrix format: magic, dimensions, a
    /// normalization flag, then per word a length-prefixed token and its
    /// little-endian components.
    pub fn write_binary(&self, mut writer: impl Write) -> Result<()> {
        writer.write_all(EMBEDDING_MAGIC)?;
        writer.write_all(&(self.len() as u32).to_le_bytes())?;
        writer.write_all(&(self.dim as u32).to_le_bytes())?;
        writer.write_all(&[u8::from(self.normalized)])?;
        for (i, token) in self.tokens.iter().enumerate() {
            writer.write_all(&(token.len() as u32).to_le_bytes())?;
            writer.write_all(token.as_bytes())?;
            for v in self.vector(i) {
                writer.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(mut reader: impl Read, path: &Path) -> Result<Self> {
        let mut magic = [0u8; 8];
        reader
            .read_exact(&mut magic)
            .map_err(|_| Error::parse(path, 0, "missing embedding header"))?;
        if &magic != EMBEDDING_MAGIC {
            return Err(Error::parse(path, 0, format!("bad magic {magic:?}")));
        }
        let mut u32buf = [0u8; 4];
        reader
            .read_exact(&mut u32buf)
            .map_err(|_| Error::parse(path, 0, "truncated embedding"))?;
        let count = u32::from_le_bytes(u32buf) as usize;
        reader
            .read_exact(&mut u32buf)
            .map_err(|_| Error::parse(path, 0, "truncated embedding"))?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        let mut flag = [0u8; 1];
        reader
            .read_exact(&mut flag)
            .map_err(|_| Error::parse(path, 0, "truncated embedding"))?;

        let mut tokens = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for _ in 0..count {
            reader
                .read_exact(&mut u32buf)
                .map_err(|_| Error::parse(path, 0, "truncated embedding"))?;
            let len = u32::from_le_bytes(u32buf) as usize;
            let mut token = vec![0u8; len];
            reader
                .read_exact(&mut token)
                .map_err(|_| Error::parse(path, 0, "truncated embedding"))?;
            tokens.push(String::from_utf8(token).map_err(|_| {
                Error::parse(path, 0, "embedding token is not valid UTF-8")
            })?);
            let mut f64buf = [0u8; 8];
            for _ in 0..dim {
                reader
                    .read_exact(&mut f64buf)
                    .map_err(|_| Error::parse(path, 0, "truncated embedding"))?;
                data.push(f64::from_le_bytes(f64buf));
            }
        }
        EmbeddingMatrix::new(tokens, dim, data, flag[0] != 0)
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_binary(std::io::BufReader::new(file), path)
    }
}

/// Format a value with six significant digits.
fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".to_string() } else { v.to_string() };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Project every row of the association matrix, binding the result to the
/// vocabulary. Rows are independent; assembly is by row index.
pub fn embed(
    association: &AssociationMatrix,
    vocab: &Vocabulary,
    operator: &ProjectionOperator,
    normalize: bool,
) -> Result<EmbeddingMatrix> {
    if operator.spec.input_dim != association.matrix.cols() {
        return Err(Error::InvalidInput(format!(
            "projection expects {} input dimensions but the matrix has {} contexts",
            operator.spec.input_dim,
            association.matrix.cols()
        )));
    }
    if vocab.len() as u32 != association.matrix.rows() {
        return Err(Error::InvalidInput(format!(
            "vocabulary holds {} tokens but the matrix has {} rows",
            vocab.len(),
            association.matrix.rows()
        )));
    }
    let dim = operator.spec.output_dim as usize;
    let rows: Vec<Vec<f64>> = (0..association.matrix.rows())
        .into_par_iter()
        .map(|r| {
            let sparse: Vec<(u32, f64)> = association
                .row(r)
                .iter()
                .map(|&(_, c, v)| (c, v))
                .collect();
            let mut out = operator.project_row(&sparse);
            if normalize {
                normalize_in_place(&mut out);
            }
            out
        })
        .collect();
    let mut data = Vec::with_capacity(vocab.len() * dim);
    for row in rows {
        data.extend(row);
    }
    EmbeddingMatrix::new(vocab.tokens().to_vec(), dim, data, normalize)
}

fn normalize_in_place(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}
