//! Tokenization, vocabulary construction, and segment encoding.
//!
//! One input line is one segment. Tokens are lowercased whitespace splits
//! with leading and trailing non-alphanumeric characters stripped; purely
//! numeric tokens collapse to the `<num>` sentinel. Vocabulary ids are dense,
//! assigned in descending frequency order with a lexicographic tie-break, so
//! identical input bytes always produce an identical vocabulary.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::{Error, Result};

/// Sentinel replacing purely numeric tokens.
pub const NUM_SENTINEL: &str = "<num>";

/// Tokenize one line of text.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace()
        .filter_map(|raw| {
            let stripped = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if stripped.is_empty() {
                return None;
            }
            let token = stripped.to_lowercase();
            if token.chars().all(|c| c.is_numeric()) {
                Some(NUM_SENTINEL.to_string())
            } else {
                Some(token)
            }
        })
        .collect()
}

/// Immutable token-to-id mapping with per-id frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    frequencies: Vec<u64>,
    min_count: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn frequency(&self, id: u32) -> Option<u64> {
        self.frequencies.get(id as usize).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Map tokens to ids, dropping out-of-vocabulary tokens. Dropped tokens
    /// do not occupy positions in the result.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens
            .iter()
            .filter_map(|t| self.id(t.as_ref()))
            .collect()
    }

    /// Persist as `token<TAB>id<TAB>count` lines sorted by id.
    pub fn write_tsv(&self, mut writer: impl Write) -> Result<()> {
        for (id, (token, freq)) in self.id_to_token.iter().zip(&self.frequencies).enumerate() {
            writeln!(writer, "{token}\t{id}\t{freq}")?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::new();
        self.write_tsv(&mut out)?;
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_tsv(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut id_to_token = Vec::new();
        let mut frequencies = Vec::new();
        let mut token_to_id = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (token, id, freq) = match (fields.next(), fields.next(), fields.next()) {
                (Some(t), Some(i), Some(f)) => (t, i, f),
                _ => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "expected token<TAB>id<TAB>count",
                    ))
                }
            };
            let id: u32 = id
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad id {id:?}")))?;
            if id as usize != id_to_token.len() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("ids must be dense and sorted; expected {}", id_to_token.len()),
                ));
            }
            let freq: u64 = freq
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad count {freq:?}")))?;
            if token_to_id.insert(token.to_string(), id).is_some() {
                return Err(Error::parse(path, lineno, format!("duplicate token {token:?}")));
            }
            id_to_token.push(token.to_string());
            frequencies.push(freq);
        }
        let min_count = frequencies.iter().copied().min().unwrap_or(1);
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            frequencies,
            min_count,
        })
    }

    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_tsv(std::io::BufReader::new(file), path)
    }
}

/// Single-pass vocabulary build over tokenized segments.
///
/// Tokens with frequency below `min_count` are dropped; ids are assigned in
/// descending frequency order with ties broken lexicographically.
pub fn build_vocabulary<I, S>(segments: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = Vec<S>>,
    S: Into<String>,
{
    if min_count < 1 {
        return Err(Error::InvalidInput("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for segment in segments {
        for token in segment {
            *counts.entry(token.into()).or_insert(0) += 1;
        }
    }
    let mut retained: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .collect();
    retained.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));

    let mut token_to_id = HashMap::with_capacity(retained.len());
    let mut id_to_token = Vec::with_capacity(retained.len());
    let mut frequencies = Vec::with_capacity(retained.len());
    for (id, (token, freq)) in retained.into_iter().enumerate() {
        token_to_id.insert(token.clone(), id as u32);
        id_to_token.push(token);
        frequencies.push(freq);
    }
    Ok(Vocabulary {
        token_to_id,
        id_to_token,
        frequencies,
        min_count,
    })
}

/// Build a vocabulary directly from corpus lines.
pub fn build_vocabulary_from_lines<'a, I>(lines: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    build_vocabulary(lines.into_iter().map(tokenize), min_count)
}

/// A run of token ids with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub ids: Vec<u32>,
    pub doc_id: u32,
    pub index: u32,
}

impl Segment {
    pub fn new(ids: Vec<u32>) -> Self {
        Segment {
            ids,
            doc_id: 0,
            index: 0,
        }
    }

    pub fn with_provenance(ids: Vec<u32>, doc_id: u32, index: u32) -> Self {
        Segment { ids, doc_id, index }
    }
}

/// Encode corpus lines into segments: one line, one segment, OOV dropped.
pub fn segments_from_lines<'a, I>(lines: I, vocab: &Vocabulary) -> Vec<Segment>
where
    I: IntoIterator<Item = &'a str>,
{
    lines
        .into_iter()
        .enumerate()
        .map(|(i, line)| Segment::with_provenance(vocab.encode(&tokenize(line)), 0, i as u32))
        .collect()
}
