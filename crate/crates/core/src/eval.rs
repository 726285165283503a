//! Analogy and nearest-neighbor evaluation over an embedding matrix.
//!
//! Analogy categories are directories of text files, one `source<TAB>answer`
//! pair per line where the answer field may list alternatives as
//! `alt1/alt2/...`. Question `a : a' :: b : ?` is solved by ranking the
//! vocabulary by cosine against `v(a') - v(a) + v(b)`; questions touching
//! out-of-vocabulary words are counted as skipped, never as wrong.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::project::EmbeddingMatrix;
use crate::{Error, Result};

/// One analogy category: named word pairs with accepted answer sets.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogySet {
    pub category: String,
    pub pairs: Vec<AnalogyPair>,
    pub path: PathBuf,
}

/// A source word with its accepted answers in file order; the first answer
/// is the canonical one used when the pair serves as the example side of a
/// question.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogyPair {
    pub source: String,
    pub answers: Vec<String>,
}

/// Load one category file. Lines are `word<TAB>answer` with `/`-separated
/// answer alternatives; everything is lowercased to match the tokenizer.
pub fn load_analogy_file(path: impl AsRef<Path>) -> Result<AnalogySet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (source, answers) = line.split_once('\t').ok_or_else(|| {
            Error::parse(path, lineno, "expected word<TAB>answer")
        })?;
        let source = source.trim().to_lowercase();
        if source.is_empty() {
            return Err(Error::parse(path, lineno, "empty source word"));
        }
        let answers: Vec<String> = answers
            .split('/')
            .map(|a| a.trim().to_lowercase())
            .filter(|a| !a.is_empty())
            .collect();
        if answers.is_empty() {
            return Err(Error::parse(path, lineno, "pair has no accepted answers"));
        }
        if !seen.insert(source.clone()) {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate source word {source:?}"),
            ));
        }
        pairs.push(AnalogyPair { source, answers });
    }
    if pairs.is_empty() {
        return Err(Error::parse(path, 0, "category file lists no pairs"));
    }
    let category = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(AnalogySet {
        category,
        pairs,
        path: path.to_path_buf(),
    })
}

/// Load every file in a directory as a category, sorted by file name so
/// reports are deterministic.
pub fn load_analogy_dir(dir: impl AsRef<Path>) -> Result<Vec<AnalogySet>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no category files in {}",
            dir.display()
        )));
    }
    files.into_iter().map(load_analogy_file).collect()
}

/// Rank vocabulary ids by cosine against `query`, skipping excluded ids and
/// zero vectors. Ties break toward the lower id.
fn rank_by_cosine(
    embedding: &EmbeddingMatrix,
    query: &[f64],
    exclude: &HashSet<usize>,
    top_n: usize,
) -> Vec<(usize, f64)> {
    let query_norm = norm(query);
    if query_norm == 0.0 || top_n == 0 {
        return Vec::new();
    }
    let mut scored: Vec<(usize, f64)> = (0..embedding.len())
        .filter(|id| !exclude.contains(id))
        .filter_map(|id| {
            let v = embedding.vector(id);
            let n = norm(v);
            (n > 0.0).then(|| (id, dot(query, v) / (query_norm * n)))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(top_n);
    scored
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Solve `a : a' :: b : ?` by ranking on `v(a') - v(a) + v(b)`.
///
/// Returns `Ok(None)` — a skip, not an error — when any query word is
/// out of vocabulary or has a zero vector. The query words themselves and
/// any words in `exclude` never appear in the ranking.
pub fn solve_3cosadd(
    embedding: &EmbeddingMatrix,
    a: &str,
    a_prime: &str,
    b: &str,
    exclude: &[&str],
    top_n: usize,
) -> Result<Option<Vec<(String, f64)>>> {
    let ids = match (embedding.id(a), embedding.id(a_prime), embedding.id(b)) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => return Ok(None),
    };
    if ids.iter().any(|&id| norm(embedding.vector(id)) == 0.0) {
        return Ok(None);
    }
    let dim = embedding.dim();
    let mut query = vec![0.0f64; dim];
    let (va, vap, vb) = (
        embedding.vector(ids[0]),
        embedding.vector(ids[1]),
        embedding.vector(ids[2]),
    );
    for j in 0..dim {
        query[j] = vap[j] - va[j] + vb[j];
    }
    if norm(&query) == 0.0 {
        return Ok(None);
    }
    let mut excluded: HashSet<usize> = ids.into_iter().collect();
    for word in exclude {
        if let Some(id) = embedding.id(word) {
            excluded.insert(id);
        }
    }
    let ranked = rank_by_cosine(embedding, &query, &excluded, top_n)
        .into_iter()
        .map(|(id, sim)| (embedding.token(id).unwrap().to_string(), sim))
        .collect();
    Ok(Some(ranked))
}

/// Top-n nearest neighbors of a word by cosine, excluding the word itself.
pub fn nearest_neighbors(
    embedding: &EmbeddingMatrix,
    word: &str,
    n: usize,
) -> Result<Vec<(String, f64)>> {
    let id = embedding
        .id(word)
        .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
    let query = embedding.vector(id).to_vec();
    let exclude: HashSet<usize> = [id].into_iter().collect();
    Ok(rank_by_cosine(embedding, &query, &exclude, n)
        .into_iter()
        .map(|(i, sim)| (embedding.token(i).unwrap().to_string(), sim))
        .collect())
}

/// Outcome of one category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryResult {
    pub category: String,
    pub attempted: u64,
    pub skipped: u64,
    pub correct: u64,
    /// `correct / attempted`; absent when every question was skipped.
    pub accuracy: Option<f64>,
}

/// Results of a full evaluation run.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub categories: Vec<CategoryResult>,
    /// Mean accuracy over categories with at least one attempted question.
    pub macro_average: Option<f64>,
    pub total_attempted: u64,
    pub total_skipped: u64,
    pub total_correct: u64,
}

impl EvalReport {
    fn from_categories(categories: Vec<CategoryResult>) -> Self {
        let defined: Vec<f64> = categories.iter().filter_map(|c| c.accuracy).collect();
        let macro_average = if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        };
        EvalReport {
            total_attempted: categories.iter().map(|c| c.attempted).sum(),
            total_skipped: categories.iter().map(|c| c.skipped).sum(),
            total_correct: categories.iter().map(|c| c.correct).sum(),
            macro_average,
            categories,
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("category\tattempted\tskipped\tcorrect\taccuracy\n");
        for c in &self.categories {
            let accuracy = c
                .accuracy
                .map_or_else(|| "NA".to_string(), |a| format!("{a}"));
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                c.category, c.attempted, c.skipped, c.correct, accuracy
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        Ok(json)
    }
}

/// Evaluate every ordered pair of distinct pairs in each category.
///
/// For pairs `(a, A')` and `(b, B')` the question is `a : first(A') :: b : ?`,
/// correct iff the top-1 prediction is in `B'`. Questions whose query words
/// are out of vocabulary (or whose accepted answers all are) count as
/// skipped; `attempted + skipped` always equals `n * (n - 1)`.
pub fn evaluate(embedding: &EmbeddingMatrix, sets: &[AnalogySet]) -> Result<EvalReport> {
    let mut categories = Vec::with_capacity(sets.len());
    for set in sets {
        let mut attempted = 0u64;
        let mut skipped = 0u64;
        let mut correct = 0u64;
        for (i, example) in set.pairs.iter().enumerate() {
            for (j, question) in set.pairs.iter().enumerate() {
                if i == j {
                    continue;
                }
                let a = example.source.as_str();
                let a_prime = example.answers[0].as_str();
                let b = question.source.as_str();
                if !question
                    .answers
                    .iter()
                    .any(|ans| embedding.id(ans).is_some())
                {
                    skipped += 1;
                    continue;
                }
                match solve_3cosadd(embedding, a, a_prime, b, &[], 1)? {
                    None => skipped += 1,
                    Some(ranked) => {
                        attempted += 1;
                        if let Some((top, _)) = ranked.first() {
                            if question.answers.iter().any(|ans| ans == top) {
                                correct += 1;
                            }
                        }
                    }
                }
            }
        }
        let accuracy = (attempted > 0).then(|| correct as f64 / attempted as f64);
        categories.push(CategoryResult {
            category: set.category.clone(),
            attempted,
            skipped,
            correct,
            accuracy,
        });
    }
    Ok(EvalReport::from_categories(categories))
}
