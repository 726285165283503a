//! Subcommand pipeline driver: vocab -> count -> ppmi -> embed -> eval,
//! plus nearest-neighbor inspection and the ensemble oracle suite.
//!
//! Every stage reads its upstream artifact, validates the metadata sidecar,
//! writes its output plus sidecars, and records the resolved configuration
//! next to the output as `<output>.run.toml`. Exit codes: 0 success, 1 usage
//! error, 2 data error, 3 failed internal check.

mod config;
mod oracle;

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use config::RunConfig;
use thermovec::cooccur::{
    count_sharded, CooccurrenceMatrix, SegmentWeighting, WindowConfig, WindowWeighting,
};
use thermovec::corpus::{build_vocabulary_from_lines, segments_from_lines, Vocabulary};
use thermovec::ensemble::DEFAULT_FD_STEP;
use thermovec::eval::{evaluate, load_analogy_dir, nearest_neighbors};
use thermovec::project::{build_projection, embed, EmbeddingMatrix, ProjectionSpec};
use thermovec::weighting::{to_ppmi, AssociationMatrix};

#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Parser)]
#[command(
    name = "thermovec",
    version,
    about = "Count-based word embeddings with an exact ensemble oracle"
)]
struct Cli {
    /// TOML config file providing defaults; explicit flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a vocabulary from a corpus (one segment per line)
    Vocab(VocabArgs),
    /// Count windowed cooccurrences into a sparse matrix
    Count(CountArgs),
    /// Transform a cooccurrence matrix into shifted positive PMI
    Ppmi(PpmiArgs),
    /// Project association rows into dense word vectors
    Embed(EmbedArgs),
    /// Score analogy categories against an embedding
    Eval(EvalArgs),
    /// Print nearest neighbors of a word
    Neighbors(NeighborsArgs),
    /// Run the ensemble identity suite and print a pass/fail table
    Oracle(OracleArgs),
}

#[derive(Args)]
struct VocabArgs {
    /// Corpus file, one segment per line
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output vocabulary TSV
    #[arg(long)]
    output: Option<PathBuf>,
    /// Drop tokens seen fewer than this many times
    #[arg(long)]
    min_count: Option<u64>,
}

#[derive(Args)]
struct CountArgs {
    /// Corpus file, one segment per line
    #[arg(long)]
    input: Option<PathBuf>,
    /// Vocabulary TSV produced by `vocab`
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Output matrix file
    #[arg(long)]
    output: Option<PathBuf>,
    /// Window size
    #[arg(long)]
    window: Option<u32>,
    /// Weight context positions by 1/distance instead of uniformly
    #[arg(long)]
    harmonic: bool,
    /// Count right-side context only
    #[arg(long)]
    asymmetric: bool,
    /// Keep only the most frequent N context ids
    #[arg(long)]
    context_limit: Option<u32>,
    /// Inverse temperature of the segment weighting
    #[arg(long)]
    beta: Option<f64>,
    /// Constant energy assigned to every segment
    #[arg(long)]
    energy: Option<f64>,
    /// TSV of token<TAB>potential pairs (default: all potentials zero)
    #[arg(long)]
    potentials: Option<PathBuf>,
    /// Number of counting shards merged deterministically
    #[arg(long)]
    shards: Option<usize>,
    /// Output format: binary or text
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct PpmiArgs {
    /// Cooccurrence matrix from `count`
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output association matrix
    #[arg(long)]
    output: Option<PathBuf>,
    /// Context-smoothing exponent in (0, 1]
    #[arg(long)]
    alpha: Option<f64>,
    /// PPMI shift k >= 1
    #[arg(long)]
    shift: Option<f64>,
    /// Output format: binary or text
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Association matrix from `ppmi`
    #[arg(long)]
    input: Option<PathBuf>,
    /// Vocabulary TSV (token binding for the embedding)
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Output embedding file
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output dimensionality
    #[arg(long)]
    dim: Option<u32>,
    /// Projection seed (the pipeline's only source of randomness)
    #[arg(long)]
    seed: Option<u64>,
    /// Projection density in (0, 1]; default 1/sqrt(contexts)
    #[arg(long)]
    density: Option<f64>,
    /// Keep raw row magnitudes instead of unit-normalizing
    #[arg(long)]
    no_normalize: bool,
    /// Output format: text (word2vec) or binary
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Embedding file from `embed`
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Directory of analogy category files
    #[arg(long)]
    analogies: Option<PathBuf>,
    /// Write the per-category TSV here (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the JSON aggregate here
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct NeighborsArgs {
    /// Embedding file from `embed`
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Query word
    #[arg(long)]
    word: Option<String>,
    /// Number of neighbors
    #[arg(long, short = 'n')]
    top_n: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    /// Ensemble description files to check (repeatable)
    #[arg(long = "ensemble-file")]
    ensemble_files: Vec<PathBuf>,
    /// Reservoir description files to check (repeatable)
    #[arg(long = "reservoir-file")]
    reservoir_files: Vec<PathBuf>,
    /// Number of randomized ensembles in the identity suite
    #[arg(long)]
    trials: Option<usize>,
    /// Seed of the randomized suite
    #[arg(long)]
    seed: Option<u64>,
    /// Central-difference step
    #[arg(long)]
    fd_step: Option<f64>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = if err.downcast_ref::<UsageError>().is_some() {
                1
            } else {
                2
            };
            std::process::exit(code);
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let defaults = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Vocab(args) => cmd_vocab(args, &defaults),
        Command::Count(args) => cmd_count(args, &defaults),
        Command::Ppmi(args) => cmd_ppmi(args, &defaults),
        Command::Embed(args) => cmd_embed(args, &defaults),
        Command::Eval(args) => cmd_eval(args, &defaults),
        Command::Neighbors(args) => cmd_neighbors(args, &defaults),
        Command::Oracle(args) => cmd_oracle(args, &defaults),
    }
}

fn require(value: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    value
        .or_else(|| fallback.clone())
        .ok_or_else(|| usage(format!("missing --{what} (flag or config key)")))
}

fn read_corpus_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read corpus {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn sha256_hex(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher)?;
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

fn parse_format(format: Option<String>, fallback: &Option<String>, default: &str) -> Result<String> {
    let format = format
        .or_else(|| fallback.clone())
        .unwrap_or_else(|| default.to_string());
    if format != "binary" && format != "text" {
        return Err(usage(format!(
            "unknown format {format:?}: expected \"binary\" or \"text\""
        )));
    }
    Ok(format)
}

/// Sniff a matrix or embedding file: magic headers mark the binary forms.
fn starts_with_magic(path: &Path, magic: &[u8]) -> Result<bool> {
    let mut file = std::fs::File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut head = vec![0u8; magic.len()];
    match file.read_exact(&mut head) {
        Ok(()) => Ok(head == magic),
        Err(_) => Ok(false),
    }
}

fn load_cooccurrence_auto(path: &Path) -> Result<CooccurrenceMatrix> {
    if starts_with_magic(path, b"TVSPMTX1")? {
        Ok(CooccurrenceMatrix::load_binary(path)?)
    } else {
        Ok(CooccurrenceMatrix::load_text(path)?)
    }
}

fn load_association_auto(path: &Path) -> Result<AssociationMatrix> {
    if starts_with_magic(path, b"TVSPMTX1")? {
        Ok(AssociationMatrix::load_binary(path)?)
    } else {
        Ok(AssociationMatrix::load_text(path)?)
    }
}

fn load_embedding_auto(path: &Path) -> Result<EmbeddingMatrix> {
    if starts_with_magic(path, b"TVEMBM01")? {
        Ok(EmbeddingMatrix::load_binary(path)?)
    } else {
        Ok(EmbeddingMatrix::load_word2vec_text(path)?)
    }
}

fn cmd_vocab(args: VocabArgs, defaults: &RunConfig) -> Result<i32> {
    let input = require(args.input, &defaults.input, "input")?;
    let output = require(args.output, &defaults.output, "output")?;
    let min_count = args.min_count.or(defaults.min_count).unwrap_or(1);

    let lines = read_corpus_lines(&input)?;
    let vocab = build_vocabulary_from_lines(lines.iter().map(String::as_str), min_count)?;
    vocab.save_tsv(&output)?;
    RunConfig {
        input: Some(input),
        output: Some(output.clone()),
        min_count: Some(min_count),
        ..RunConfig::default()
    }
    .write_beside(&output)?;
    println!("vocabulary\t{}\ttokens", vocab.len());
    Ok(0)
}

fn load_potentials(path: &Path, vocab: &Vocabulary) -> Result<std::collections::BTreeMap<u32, f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read potentials {}", path.display()))?;
    let mut table = std::collections::BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (token, value) = line.split_once('\t').ok_or_else(|| {
            anyhow::anyhow!("{}:{}: expected token<TAB>potential", path.display(), i + 1)
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            anyhow::anyhow!("{}:{}: bad potential {value:?}", path.display(), i + 1)
        })?;
        let id = vocab.id(token).ok_or_else(|| {
            anyhow::anyhow!(
                "{}:{}: token {token:?} is not in the vocabulary",
                path.display(),
                i + 1
            )
        })?;
        table.insert(id, value);
    }
    Ok(table)
}

fn cmd_count(args: CountArgs, defaults: &RunConfig) -> Result<i32> {
    let input = require(args.input, &defaults.input, "input")?;
    let vocab_path = require(args.vocab, &defaults.vocab, "vocab")?;
    let output = require(args.output, &defaults.output, "output")?;
    let window = args.window.or(defaults.window).unwrap_or(5);
    let harmonic = args.harmonic || defaults.harmonic.unwrap_or(false);
    let asymmetric = args.asymmetric || defaults.asymmetric.unwrap_or(false);
    let context_limit = args.context_limit.or(defaults.context_limit);
    let beta = args.beta.or(defaults.beta).unwrap_or(1.0);
    let energy = args.energy.or(defaults.energy).unwrap_or(1.0);
    let potentials_path = args.potentials.or_else(|| defaults.potentials.clone());
    let shards = args.shards.or(defaults.shards).unwrap_or(1);
    let format = parse_format(args.format, &defaults.format, "binary")?;

    let vocab = Vocabulary::load_tsv(&vocab_path)?;
    let lines = read_corpus_lines(&input)?;
    let segments = segments_from_lines(lines.iter().map(String::as_str), &vocab);
    let digest = sha256_hex(&input)?;

    let potentials = match &potentials_path {
        Some(path) => load_potentials(path, &vocab)?,
        None => Default::default(),
    };
    let weighting = SegmentWeighting {
        beta,
        potentials,
        energy,
    };
    let window_config = WindowConfig {
        window,
        weighting: if harmonic {
            WindowWeighting::Harmonic
        } else {
            WindowWeighting::Uniform
        },
        symmetric: !asymmetric,
        context_limit,
    };

    let matrix = count_sharded(
        &segments,
        vocab.len() as u32,
        &window_config,
        &weighting,
        shards,
        Some(digest),
    )?;
    match format.as_str() {
        "binary" => matrix.save_binary(&output)?,
        _ => matrix.save_text(&output)?,
    }
    RunConfig {
        input: Some(input),
        vocab: Some(vocab_path),
        output: Some(output.clone()),
        window: Some(window),
        harmonic: Some(harmonic),
        asymmetric: Some(asymmetric),
        context_limit,
        beta: Some(beta),
        energy: Some(energy),
        potentials: potentials_path,
        shards: Some(shards),
        format: Some(format),
        ..RunConfig::default()
    }
    .write_beside(&output)?;
    println!(
        "cooccurrence\t{}\tentries\t{}\tmass",
        matrix.matrix.len(),
        matrix.total_mass()
    );
    Ok(0)
}

fn cmd_ppmi(args: PpmiArgs, defaults: &RunConfig) -> Result<i32> {
    let input = require(args.input, &defaults.input, "input")?;
    let output = require(args.output, &defaults.output, "output")?;
    let alpha = args.alpha.or(defaults.alpha).unwrap_or(0.75);
    let shift = args.shift.or(defaults.shift).unwrap_or(1.0);
    let format = parse_format(args.format, &defaults.format, "binary")?;

    let matrix = load_cooccurrence_auto(&input)?;
    let association = to_ppmi(&matrix, shift, alpha)?;
    match format.as_str() {
        "binary" => association.save_binary(&output)?,
        _ => association.save_text(&output)?,
    }
    RunConfig {
        input: Some(input),
        output: Some(output.clone()),
        alpha: Some(alpha),
        shift: Some(shift),
        format: Some(format),
        ..RunConfig::default()
    }
    .write_beside(&output)?;
    println!("ppmi\t{}\tentries", association.matrix.len());
    Ok(0)
}

fn cmd_embed(args: EmbedArgs, defaults: &RunConfig) -> Result<i32> {
    let input = require(args.input, &defaults.input, "input")?;
    let vocab_path = require(args.vocab, &defaults.vocab, "vocab")?;
    let output = require(args.output, &defaults.output, "output")?;
    let dim = args.dim.or(defaults.dim).unwrap_or(300);
    let seed = args.seed.or(defaults.seed).unwrap_or(42);
    let normalize = if args.no_normalize {
        false
    } else {
        defaults.normalize.unwrap_or(true)
    };
    let format = parse_format(args.format, &defaults.format, "text")?;

    let association = load_association_auto(&input)?;
    let vocab = Vocabulary::load_tsv(&vocab_path)?;
    let mut spec = ProjectionSpec::sparse_ternary(association.matrix.cols(), dim, seed);
    if let Some(density) = args.density.or(defaults.density) {
        spec.scheme = thermovec::project::ProjectionScheme::SparseTernary { density };
    }
    let density = match spec.scheme {
        thermovec::project::ProjectionScheme::SparseTernary { density } => density,
        thermovec::project::ProjectionScheme::Identity => 1.0,
    };
    let operator = build_projection(&spec)?;
    let embedding = embed(&association, &vocab, &operator, normalize)?;
    match format.as_str() {
        "binary" => embedding.save_binary(&output)?,
        _ => embedding.save_word2vec_text(&output)?,
    }
    RunConfig {
        input: Some(input),
        vocab: Some(vocab_path),
        output: Some(output.clone()),
        dim: Some(dim),
        seed: Some(seed),
        density: Some(density),
        normalize: Some(normalize),
        format: Some(format),
        ..RunConfig::default()
    }
    .write_beside(&output)?;
    println!("embedding\t{}\twords\t{}\tdims", embedding.len(), embedding.dim());
    Ok(0)
}

fn cmd_eval(args: EvalArgs, defaults: &RunConfig) -> Result<i32> {
    let embeddings = require(args.embeddings, &defaults.embeddings, "embeddings")?;
    let analogies = require(args.analogies, &defaults.analogies, "analogies")?;
    let output = args.output.or_else(|| defaults.output.clone());
    let json = args.json.or_else(|| defaults.json.clone());

    let embedding = load_embedding_auto(&embeddings)?;
    let sets = load_analogy_dir(&analogies)?;
    let report = evaluate(&embedding, &sets)?;
    let tsv = report.to_tsv();
    match &output {
        Some(path) => {
            std::fs::write(path, &tsv)?;
            RunConfig {
                embeddings: Some(embeddings),
                analogies: Some(analogies),
                output: Some(path.clone()),
                json: json.clone(),
                ..RunConfig::default()
            }
            .write_beside(path)?;
        }
        None => print!("{tsv}"),
    }
    if let Some(path) = &json {
        std::fs::write(path, report.to_json()?)?;
    }
    match report.macro_average {
        Some(average) => println!("macro_average\t{average}"),
        None => println!("macro_average\tNA"),
    }
    Ok(0)
}

fn cmd_neighbors(args: NeighborsArgs, defaults: &RunConfig) -> Result<i32> {
    let embeddings = require(args.embeddings, &defaults.embeddings, "embeddings")?;
    let word = args
        .word
        .or_else(|| defaults.word.clone())
        .ok_or_else(|| usage("missing --word"))?;
    let top_n = args.top_n.or(defaults.top_n).unwrap_or(10);

    let embedding = load_embedding_auto(&embeddings)?;
    for (neighbor, cosine) in nearest_neighbors(&embedding, &word, top_n)? {
        println!("{word}\t{neighbor}\t{cosine:.6}");
    }
    Ok(0)
}

fn cmd_oracle(args: OracleArgs, defaults: &RunConfig) -> Result<i32> {
    let options = oracle::OracleOptions {
        ensemble_files: args.ensemble_files,
        reservoir_files: args.reservoir_files,
        trials: args.trials.or(defaults.trials).unwrap_or(100),
        seed: args.seed.or(defaults.seed).unwrap_or(42),
        fd_step: args.fd_step.or(defaults.fd_step).unwrap_or(DEFAULT_FD_STEP),
    };
    let all_passed = oracle::run(&options)?;
    if all_passed {
        println!("oracle\tall checks passed");
        Ok(0)
    } else {
        eprintln!("error: oracle checks failed");
        Ok(3)
    }
}
