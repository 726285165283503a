//! Windowed, optionally segment-weighted cooccurrence counting.
//!
//! Each segment contributes `segment_weight(seg) * window_weight(distance)`
//! to every (target, context) pair inside the window. With the unit
//! weighting every contribution is exactly 1 and the matrix holds plain
//! integer counts; with the default weighting (all potentials zero, energy
//! one) every entry is the integer count scaled by the constant `e^{-beta}`,
//! which cancels under PPMI.
//!
//! Counting may be split into shards over disjoint segment subsets and
//! merged; the merge is associative and config-checked, and equals a single
//! pass bit-exactly whenever the contributions are integers.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Segment;
use crate::matrix::{read_sidecar, write_sidecar, SparseMatrix};
use crate::{Error, Result};

/// How a context position is weighted by its distance from the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowWeighting {
    /// Every position in the window contributes 1.
    Uniform,
    /// A position at distance `d` contributes `1/d`.
    Harmonic,
}

/// Window geometry for counting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Window size `w >= 1`.
    pub window: u32,
    pub weighting: WindowWeighting,
    /// Context on both sides when true, right side only otherwise.
    pub symmetric: bool,
    /// Keep only context ids below this bound (`None` keeps the full
    /// vocabulary). Frequency-descending ids make this a top-C cut.
    #[serde(default)]
    pub context_limit: Option<u32>,
}

impl WindowConfig {
    pub fn new(window: u32) -> Self {
        WindowConfig {
            window,
            weighting: WindowWeighting::Uniform,
            symmetric: true,
            context_limit: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::InvalidInput("window size must be at least 1".into()));
        }
        if self.context_limit == Some(0) {
            return Err(Error::InvalidInput("context limit must be positive".into()));
        }
        Ok(())
    }

    pub fn context_dim(&self, vocab_size: u32) -> u32 {
        self.context_limit
            .map_or(vocab_size, |c| c.min(vocab_size))
    }

    fn distance_weight(&self, distance: u32) -> f64 {
        match self.weighting {
            WindowWeighting::Uniform => 1.0,
            WindowWeighting::Harmonic => 1.0 / distance as f64,
        }
    }
}

/// Per-segment weight parameters: inverse temperature, per-token potentials
/// (default 0), and a constant energy per segment.
///
/// [`SegmentWeighting::default`] uses zero potentials and energy one, so
/// every segment weighs `e^{-beta}`; [`SegmentWeighting::unit`] sets the
/// energy to zero as well, making every segment weigh exactly 1 and
/// reproducing unweighted integer counting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentWeighting {
    pub beta: f64,
    pub potentials: BTreeMap<u32, f64>,
    pub energy: f64,
}

impl Default for SegmentWeighting {
    fn default() -> Self {
        SegmentWeighting {
            beta: 1.0,
            potentials: BTreeMap::new(),
            energy: 1.0,
        }
    }
}

impl SegmentWeighting {
    /// Weighting under which every segment weighs exactly 1.
    pub fn unit() -> Self {
        SegmentWeighting {
            beta: 1.0,
            potentials: BTreeMap::new(),
            energy: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "beta must be a positive finite real, got {}",
                self.beta
            )));
        }
        if !self.energy.is_finite() {
            return Err(Error::InvalidInput("segment energy must be finite".into()));
        }
        if let Some((id, mu)) = self.potentials.iter().find(|(_, mu)| !mu.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite potential {mu} for token id {id}"
            )));
        }
        Ok(())
    }

    /// True when every segment weighs exactly 1 regardless of content.
    pub fn is_unit(&self) -> bool {
        self.energy == 0.0 && self.potentials.values().all(|&mu| mu == 0.0)
    }
}

/// `exp(beta * (sum_k mu_k N_k(seg) - E(seg)))` where `N_k` counts
/// occurrences of token `k` in the segment.
pub fn segment_weight(segment: &Segment, weighting: &SegmentWeighting) -> f64 {
    let coupling: f64 = if weighting.potentials.is_empty() {
        0.0
    } else {
        segment
            .ids
            .iter()
            .filter_map(|id| weighting.potentials.get(id))
            .sum()
    };
    (weighting.beta * (coupling - weighting.energy)).exp()
}

/// Configuration recorded next to a counted matrix; two matrices merge only
/// if all of it matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurMeta {
    pub kind: String,
    pub rows: u32,
    pub cols: u32,
    pub window: WindowConfig,
    pub weighting: SegmentWeighting,
    pub corpus_digest: Option<String>,
}

pub const COOCCURRENCE_KIND: &str = "cooccurrence";

/// Sparse target-by-context matrix of segment-weighted window counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    pub matrix: SparseMatrix,
    pub meta: CooccurMeta,
}

#[derive(Serialize, Deserialize)]
struct CooccurSidecar {
    #[serde(flatten)]
    meta: CooccurMeta,
    total_mass: f64,
    entries: u64,
}

impl CooccurrenceMatrix {
    pub fn total_mass(&self) -> f64 {
        self.matrix.total_mass()
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
            &CooccurSidecar {
                meta: self.meta.clone(),
                total_mass: self.total_mass(),
                entries: self.matrix.len() as u64,
            },
        )
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta = Self::load_meta(path)?;
        let matrix = SparseMatrix::load_binary(path)?;
        Self::check_dims(path, &meta, &matrix)?;
        Ok(CooccurrenceMatrix { matrix, meta })
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta = Self::load_meta(path)?;
        let matrix = SparseMatrix::load_text(path, meta.rows, meta.cols)?;
        Self::check_dims(path, &meta, &matrix)?;
        Ok(CooccurrenceMatrix { matrix, meta })
    }

    fn load_meta(path: &Path) -> Result<CooccurMeta> {
        let sidecar: CooccurSidecar = read_sidecar(path)?;
        if sidecar.meta.kind != COOCCURRENCE_KIND {
            return Err(Error::ConfigMismatch(format!(
                "{} holds a {:?} matrix, expected {COOCCURRENCE_KIND:?}",
                path.display(),
                sidecar.meta.kind
            )));
        }
        Ok(sidecar.meta)
    }

    fn check_dims(path: &Path, meta: &CooccurMeta, matrix: &SparseMatrix) -> Result<()> {
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

/// Count cooccurrences over a segment stream in a single pass.
pub fn count(
    segments: &[Segment],
    vocab_size: u32,
    window: &WindowConfig,
    weighting: &SegmentWeighting,
) -> Result<CooccurrenceMatrix> {
    count_with_digest(segments, vocab_size, window, weighting, None)
}

pub fn count_with_digest(
    segments: &[Segment],
    vocab_size: u32,
    window: &WindowConfig,
    weighting: &SegmentWeighting,
    corpus_digest: Option<String>,
) -> Result<CooccurrenceMatrix> {
    window.validate()?;
    weighting.validate()?;
    let cols = window.context_dim(vocab_size);
    let accumulator = accumulate(segments.iter(), vocab_size, cols, window, weighting)?;
    finish(accumulator, vocab_size, cols, window, weighting, corpus_digest)
}

/// Count over disjoint shards (segment `i` goes to shard `i % shards`) and
/// merge the per-shard matrices in shard order. Equals [`count`] bit-exactly
/// when contributions are integers and up to float associativity otherwise.
pub fn count_sharded(
    segments: &[Segment],
    vocab_size: u32,
    window: &WindowConfig,
    weighting: &SegmentWeighting,
    shards: usize,
    corpus_digest: Option<String>,
) -> Result<CooccurrenceMatrix> {
    if shards == 0 {
        return Err(Error::InvalidInput("shard count must be positive".into()));
    }
    window.validate()?;
    weighting.validate()?;
    let cols = window.context_dim(vocab_size);
    let maps: Vec<Result<HashMap<(u32, u32), f64>>> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            accumulate(
                segments.iter().skip(shard).step_by(shards),
                vocab_size,
                cols,
                window,
                weighting,
            )
        })
        .collect();
    let mut merged: Option<CooccurrenceMatrix> = None;
    for map in maps {
        let shard_matrix = finish(
            map?,
            vocab_size,
            cols,
            window,
            weighting,
            corpus_digest.clone(),
        )?;
        merged = Some(match merged {
            None => shard_matrix,
            Some(acc) => merge(&acc, &shard_matrix)?,
        });
    }
    Ok(merged.expect("at least one shard"))
}

fn accumulate<'a>(
    segments: impl Iterator<Item = &'a Segment>,
    vocab_size: u32,
    cols: u32,
    window: &WindowConfig,
    weighting: &SegmentWeighting,
) -> Result<HashMap<(u32, u32), f64>> {
    let mut acc: HashMap<(u32, u32), f64> = HashMap::new();
    for segment in segments {
        if let Some(&bad) = segment.ids.iter().find(|&&id| id >= vocab_size) {
            return Err(Error::InvalidInput(format!(
                "segment (doc {}, index {}) holds id {bad} outside vocabulary of size {vocab_size}",
                segment.doc_id, segment.index
            )));
        }
        if segment.ids.len() < 2 {
            continue;
        }
        let base = segment_weight(segment, weighting);
        let ids = &segment.ids;
        for t in 0..ids.len() {
            let span = (window.window as usize).min(ids.len() - 1 - t);
            for d in 1..=span {
                let contribution = base * window.distance_weight(d as u32);
                let (target, context) = (ids[t], ids[t + d]);
                if context < cols {
                    *acc.entry((target, context)).or_insert(0.0) += contribution;
                }
                if window.symmetric && target < cols {
                    *acc.entry((context, target)).or_insert(0.0) += contribution;
                }
            }
        }
    }
    Ok(acc)
}

fn finish(
    accumulator: HashMap<(u32, u32), f64>,
    rows: u32,
    cols: u32,
    window: &WindowConfig,
    weighting: &SegmentWeighting,
    corpus_digest: Option<String>,
) -> Result<CooccurrenceMatrix> {
    let entries: Vec<(u32, u32, f64)> = accumulator
        .into_iter()
        .map(|((r, c), w)| (r, c, w))
        .collect();
    Ok(CooccurrenceMatrix {
        matrix: SparseMatrix::from_entries(rows, cols, entries)?,
        meta: CooccurMeta {
            kind: COOCCURRENCE_KIND.to_string(),
            rows,
            cols,
            window: window.clone(),
            weighting: weighting.clone(),
            corpus_digest,
        },
    })
}

/// Entrywise sum of two matrices counted under identical configurations.
pub fn merge(a: &CooccurrenceMatrix, b: &CooccurrenceMatrix) -> Result<CooccurrenceMatrix> {
    if a.meta != b.meta {
        return Err(Error::ConfigMismatch(
            "cooccurrence matrices were counted under different configurations".into(),
        ));
    }
    Ok(CooccurrenceMatrix {
        matrix: a.matrix.merged(&b.matrix)?,
        meta: a.meta.clone(),
    })
}
