//! Shifted positive PMI over a cooccurrence matrix.
//!
//! Entries become `max(0, ln[p(t,c) / (p(t) p_a(c))] - ln k)` with a
//! context-smoothing exponent `a` and shift `k`; zero results are dropped so
//! the association matrix stays sparse. The transform is invariant to a
//! global rescaling of the input weights, which is what removes the constant
//! segment weight of the default counting configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cooccur::{CooccurMeta, CooccurrenceMatrix};
use crate::matrix::{read_sidecar, write_sidecar, SparseMatrix};
use crate::{Error, Result};

pub const PPMI_KIND: &str = "ppmi";

/// Parameters and provenance recorded next to an association matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpmiMeta {
    pub kind: String,
    pub rows: u32,
    pub cols: u32,
    /// Shift `k >= 1`; `ln k` is subtracted from every PMI value.
    pub shift: f64,
    /// Context-smoothing exponent in `(0, 1]`.
    pub alpha: f64,
    /// Metadata of the counted matrix this was derived from.
    pub source: CooccurMeta,
}

/// Sparse matrix of shifted positive PMI values; rows are word vectors in
/// the full context space.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix {
    pub matrix: SparseMatrix,
    pub meta: PpmiMeta,
}

#[derive(Serialize, Deserialize)]
struct PpmiSidecar {
    #[serde(flatten)]
    meta: PpmiMeta,
    entries: u64,
}

impl AssociationMatrix {
    /// Sparse row `t` as `(context id, value)` pairs.
    pub fn row(&self, row: u32) -> &[(u32, u32, f64)] {
        let entries = self.matrix.entries();
        let start = entries.partition_point(|&(r, _, _)| r < row);
        let end = entries.partition_point(|&(r, _, _)| r <= row);
        &entries[start..end]
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.matrix.save_binary(path)?;
        self.write_meta(path)
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.matrix.save_text(path)?;
        self.write_meta(path)
    }

    fn write_meta(&self, path: &Path) -> Result<()> {
        write_sidecar(
            path,
            &PpmiSidecar {
                meta: self.meta.clone(),
                entries: self.matrix.len() as u64,
            },
        )
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta = Self::load_meta(path)?;
        let matrix = SparseMatrix::load_binary(path)?;
        Self::check_dims(path, &meta, &matrix)?;
        Ok(AssociationMatrix { matrix, meta })
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta = Self::load_meta(path)?;
        let matrix = SparseMatrix::load_text(path, meta.rows, meta.cols)?;
        Self::check_dims(path, &meta, &matrix)?;
        Ok(AssociationMatrix { matrix, meta })
    }

    fn load_meta(path: &Path) -> Result<PpmiMeta> {
        let sidecar: PpmiSidecar = read_sidecar(path)?;
        if sidecar.meta.kind != PPMI_KIND {
            return Err(Error::ConfigMismatch(format!(
                "{} holds a {:?} matrix, expected {PPMI_KIND:?}",
                path.display(),
                sidecar.meta.kind
            )));
        }
        Ok(sidecar.meta)
    }

    fn check_dims(path: &Path, meta: &PpmiMeta, matrix: &SparseMatrix) -> Result<()> {
        if meta.rows != matrix.rows() || meta.cols != matrix.cols() {
            return Err(Error::ConfigMismatch(format!(
                "{}: sidecar says {}x{} but the matrix is {}x{}",
                path.display(),
                meta.rows,
                meta.cols,
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(())
    }
}

/// Transform raw cooccurrence weights into shifted positive PMI.
pub fn to_ppmi(source: &CooccurrenceMatrix, shift: f64, alpha: f64) -> Result<AssociationMatrix> {
    if !shift.is_finite() || shift < 1.0 {
        return Err(Error::InvalidInput(format!(
            "PPMI shift must be at least 1, got {shift}"
        )));
    }
    if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
        return Err(Error::InvalidInput(format!(
            "context smoothing exponent must lie in (0, 1], got {alpha}"
        )));
    }
    if source.matrix.is_empty() || source.total_mass() <= 0.0 {
        return Err(Error::InvalidInput(
            "cannot compute PPMI of a matrix with zero total mass".into(),
        ));
    }

    let rows = source.matrix.rows();
    let cols = source.matrix.cols();
    let mut row_mass = vec![0.0f64; rows as usize];
    let mut col_mass = vec![0.0f64; cols as usize];
    for &(r, c, w) in source.matrix.entries() {
        row_mass[r as usize] += w;
        col_mass[c as usize] += w;
    }
    let smoothed_total: f64 = col_mass
        .iter()
        .map(|&m| if m > 0.0 { m.powf(alpha) } else { 0.0 })
        .sum();
    let ln_smoothed_total = smoothed_total.ln();
    let ln_shift = shift.ln();

    // p(t,c) / (p(t) p_a(c)) reduces to w * A / (r_t * m_c^a): the corpus
    // mass cancels because the smoothed context distribution normalizes
    // itself.
    let entries: Vec<(u32, u32, f64)> = source
        .matrix
        .entries()
        .iter()
        .filter_map(|&(r, c, w)| {
            let value = w.ln() + ln_smoothed_total
                - row_mass[r as usize].ln()
                - alpha * col_mass[c as usize].ln()
                - ln_shift;
            (value > 0.0).then_some((r, c, value))
        })
        .collect();

    Ok(AssociationMatrix {
        matrix: SparseMatrix::from_entries(rows, cols, entries)?,
        meta: PpmiMeta {
            kind: PPMI_KIND.to_string(),
            rows,
            cols,
            shift,
            alpha,
            source: source.meta.clone(),
        },
    })
}
