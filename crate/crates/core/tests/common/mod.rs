//! Shared test oracles and generators.
//!
//! Everything here is deliberately written as the dumbest possible route to
//! the answer, independent of the library's optimized paths, so agreement is
//! a meaningful check.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use thermovec::cooccur::{SegmentWeighting, WindowConfig, WindowWeighting};
use thermovec::corpus::Segment;
use thermovec::cooccur::CooccurrenceMatrix;
use thermovec::ensemble::{log_partition, EnsembleSpec, Microstate};

/// Naive pair-enumeration cooccurrence oracle: walk every ordered pair of
/// positions within the window and add its contribution directly.
pub fn naive_cooccur_oracle(
    segments: &[Segment],
    vocab_size: u32,
    window: &WindowConfig,
    weighting: &SegmentWeighting,
) -> HashMap<(u32, u32), f64> {
    let cols = window.context_dim(vocab_size);
    let w = window.window as usize;
    let mut map: HashMap<(u32, u32), f64> = HashMap::new();
    for segment in segments {
        let base = naive_segment_weight(segment, weighting);
        let ids = &segment.ids;
        for i in 0..ids.len() {
            let lo = if window.symmetric { i.saturating_sub(w) } else { i };
            let hi = (i + w).min(ids.len().saturating_sub(1));
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let d = i.abs_diff(j);
                let dw = match window.weighting {
                    WindowWeighting::Uniform => 1.0,
                    WindowWeighting::Harmonic => 1.0 / d as f64,
                };
                if ids[j] < cols {
                    *map.entry((ids[i], ids[j])).or_insert(0.0) += base * dw;
                }
            }
        }
    }
    map
}

/// Independent segment-weight evaluation: iterates the potential table and
/// counts occurrences per token, rather than summing lookups per position.
pub fn naive_segment_weight(segment: &Segment, weighting: &SegmentWeighting) -> f64 {
    let mut coupling = 0.0;
    for (&id, &mu) in &weighting.potentials {
        let occurrences = segment.ids.iter().filter(|&&x| x == id).count();
        coupling += mu * occurrences as f64;
    }
    (weighting.beta * (coupling - weighting.energy)).exp()
}

/// Compare a counted matrix against the naive oracle. Integer-valued
/// contributions (uniform window weighting, unit segment weights) must agree
/// exactly; anything else only up to float associativity.
pub fn assert_matches_oracle(
    matrix: &CooccurrenceMatrix,
    oracle: &HashMap<(u32, u32), f64>,
    exact: bool,
) {
    assert_eq!(
        matrix.matrix.len(),
        oracle.len(),
        "entry counts differ: {} vs {}",
        matrix.matrix.len(),
        oracle.len()
    );
    for &(r, c, w) in matrix.matrix.entries() {
        let want = oracle.get(&(r, c)).copied().unwrap_or(0.0);
        if exact {
            assert_eq!(w, want, "entry ({r}, {c})");
        } else {
            assert!(
                (w - want).abs() <= 1e-12 * want.abs().max(1.0),
                "entry ({r}, {c}): {w} vs {want}"
            );
        }
    }
}

/// Dense PPMI recomputation straight from the probability definition.
pub fn dense_ppmi_oracle(
    matrix: &CooccurrenceMatrix,
    shift: f64,
    alpha: f64,
) -> Vec<Vec<f64>> {
    let rows = matrix.matrix.rows() as usize;
    let cols = matrix.matrix.cols() as usize;
    let mut dense = vec![vec![0.0f64; cols]; rows];
    for &(r, c, w) in matrix.matrix.entries() {
        dense[r as usize][c as usize] = w;
    }
    let mass: f64 = dense.iter().flatten().sum();
    let row_mass: Vec<f64> = dense.iter().map(|row| row.iter().sum()).collect();
    let col_mass: Vec<f64> = (0..cols)
        .map(|c| dense.iter().map(|row| row[c]).sum())
        .collect();
    let smoothed: Vec<f64> = col_mass.iter().map(|&m| m.powf(alpha)).collect();
    let smoothed_total: f64 = smoothed.iter().sum();
    let mut out = vec![vec![0.0f64; cols]; rows];
    for r in 0..rows {
        for c in 0..cols {
            if dense[r][c] > 0.0 {
                let p_tc = dense[r][c] / mass;
                let p_t = row_mass[r] / mass;
                let p_c = smoothed[c] / smoothed_total;
                out[r][c] = ((p_tc / (p_t * p_c)).ln() - shift.ln()).max(0.0);
            }
        }
    }
    out
}

/// Random small ensemble within the documented identity-suite bounds:
/// up to 4 species, up to 50 microstates, counts in 0..=2, potentials in
/// [-2, 2], beta in [0.1, 5]. Energies are drawn in [-2, 2] and then shifted
/// so that ln Z sits near zero; the shift leaves probabilities and moments
/// unchanged and keeps the finite-difference checks well conditioned.
pub fn random_small_ensemble(rng: &mut ChaCha8Rng) -> EnsembleSpec {
    let species = rng.gen_range(1..=4usize);
    let states = rng.gen_range(1..=50usize);
    let beta = rng.gen_range(0.1..=5.0);
    let potentials: Vec<f64> = (0..species).map(|_| rng.gen_range(-2.0..=2.0)).collect();
    let microstates: Vec<Microstate> = (0..states)
        .map(|_| {
            Microstate::new(
                (0..species).map(|_| rng.gen_range(0..=2u64)).collect(),
                rng.gen_range(-2.0..=2.0),
            )
        })
        .collect();
    let mut spec = EnsembleSpec {
        beta,
        potentials,
        microstates,
    };
    let log_z = log_partition(&spec).expect("generated spec is valid");
    for state in &mut spec.microstates {
        state.energy += log_z / spec.beta;
    }
    spec
}

/// Random token-id corpus: segments of random length over a random-size
/// vocabulary, totalling roughly `target_tokens` tokens.
pub fn random_corpus(rng: &mut ChaCha8Rng, target_tokens: usize, vocab_size: u32) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut produced = 0usize;
    let mut index = 0u32;
    while produced < target_tokens {
        let len = rng.gen_range(1..=30usize).min(target_tokens - produced);
        let ids: Vec<u32> = (0..len).map(|_| rng.gen_range(0..vocab_size)).collect();
        produced += len;
        segments.push(Segment::with_provenance(ids, 0, index));
        index += 1;
    }
    segments
}

/// Corpus with planted singular/plural pair families.
///
/// Structure lines are `marker lexN famN` (singular) or
/// `marker lexNs famN` (plural): with a window of 1 every noun links only to
/// its number markers and its family tag, so `v(lexNs) - v(lexN)` isolates
/// the plural-marker direction while the family tag identifies the partner.
/// Noise-only lines pad the vocabulary past the projection dimension.
pub struct PlantedCorpus {
    pub lines: Vec<String>,
    /// `source<TAB>answer` category lines for the planted pairs.
    pub category_lines: Vec<String>,
    pub families: usize,
}

pub fn planted_analogy_corpus(
    rng: &mut ChaCha8Rng,
    families: usize,
    target_tokens: usize,
) -> PlantedCorpus {
    let singular_markers = ["one", "this", "lone", "single"];
    let plural_markers = ["many", "these", "several", "crowd"];
    let noise_vocab: Vec<String> = (0..480).map(|i| format!("filler{i:03}")).collect();

    let structure_tokens = target_tokens * 3 / 5;
    let structure_lines = structure_tokens / 3;
    let mut lines = Vec::new();
    for _ in 0..structure_lines {
        let family = rng.gen_range(0..families);
        let plural: bool = rng.gen();
        let (marker, noun) = if plural {
            (
                plural_markers[rng.gen_range(0..plural_markers.len())],
                format!("lex{family}s"),
            )
        } else {
            (
                singular_markers[rng.gen_range(0..singular_markers.len())],
                format!("lex{family}"),
            )
        };
        lines.push(format!("{marker} {noun} fam{family}"));
    }
    let mut noise_tokens = target_tokens - structure_lines * 3;
    while noise_tokens > 0 {
        let len = rng.gen_range(5..=15usize).min(noise_tokens);
        let words: Vec<&str> = (0..len)
            .map(|_| noise_vocab[rng.gen_range(0..noise_vocab.len())].as_str())
            .collect();
        lines.push(words.join(" "));
        noise_tokens -= len;
    }

    let category_lines: Vec<String> = (0..families)
        .map(|f| format!("lex{f}\tlex{f}s"))
        .collect();
    PlantedCorpus {
        lines,
        category_lines,
        families,
    }
}

/// Large corpus with Zipf-like frequencies and topic structure, used for the
/// at-scale robustness run. Token `w<i>` is more frequent for small `i`;
/// each line draws from one topic, which boosts a slice of the vocabulary.
pub fn zipf_topic_corpus(
    rng: &mut ChaCha8Rng,
    target_tokens: usize,
    vocab_size: usize,
    topics: usize,
) -> Vec<String> {
    // Cumulative Zipf table over the base distribution.
    let weights: Vec<f64> = (0..vocab_size)
        .map(|i| 1.0 / (i as f64 + 10.0).powf(1.05))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(vocab_size);
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cumulative.push(acc);
    }

    let mut lines = Vec::new();
    let mut produced = 0usize;
    while produced < target_tokens {
        let topic = rng.gen_range(0..topics);
        let len = rng.gen_range(5..=25usize).min(target_tokens - produced);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            // Half the tokens come from the topic slice, half from the
            // global Zipf distribution.
            let id = if rng.gen_bool(0.5) {
                topic + topics * rng.gen_range(0..vocab_size / topics / 8)
            } else {
                let u: f64 = rng.gen();
                cumulative.partition_point(|&c| c < u).min(vocab_size - 1)
            };
            words.push(format!("w{id}"));
        }
        produced += len;
        lines.push(words.join(" "));
    }
    lines
}
