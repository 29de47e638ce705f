//! `homogenizer` subcommands.
//!
//! Every run echoes its effective configuration (including the seed) to
//! stderr. Exit status: 0 on success, 1 on invalid input or flags, 2 on
//! runtime failures.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use homogenizer_core::align::{self, fit_linear, fit_orthogonal, iterative_normalize, FALLBACK_RIDGE};
use homogenizer_core::diagnostics;
use homogenizer_core::eval::{self, Similarity};
use homogenizer_core::fusion::{self, FuseSource, Layout, SequenceBuilder};
use homogenizer_core::mlp::{self, MlpHomogenizer, TrainConfig};
use homogenizer_core::rng;
use homogenizer_core::targets::{build_target_set, PairedDataset};
use homogenizer_core::tokenizer::tokenize;
use homogenizer_core::{EmbeddingTable, Error as CoreError};
use serde::{Deserialize, Serialize};

use crate::embeddings::{load_embeddings, save_embeddings};
use crate::entities::load_entities;
use crate::error::{Error, Result};
use crate::lists::{load_keys, load_names, load_vocab};
use crate::model_file::{load_model, save_model, AlignmentModel, ModelMeta, SavedModel};
use crate::paired::{load_paired, save_paired};
use crate::sequence_file::{save_sequences, SequenceRecord};

/// Relative paths are resolved against this directory when it is set.
pub const DATA_DIR_ENV: &str = "HOMOGENIZER_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "homogenizer", version, about = "Align knowledge-graph embeddings with a language model's token space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pair KGE vectors with mean-subword targets.
    BuildTargets(BuildTargetsArgs),
    /// Fit an alignment model on a paired dataset.
    Fit(FitArgs),
    /// Map a table through a fitted model.
    Apply(ApplyArgs),
    /// Average homogenized and definition vectors, or draw the random baseline.
    Fuse(FuseArgs),
    /// Build BERTRAM or DEKCOR input sequences.
    Augment(AugmentArgs),
    /// Score predictions against targets.
    Eval(EvalArgs),
    /// Run the gradient and recovery checks.
    Selfcheck(SelfcheckArgs),
    /// Mean static-embedding stand-in for definition vectors (not a pooler output).
    ProxyDefinitions(ProxyArgs),
}

#[derive(Debug, Args)]
struct BuildTargetsArgs {
    #[arg(long)]
    kge: PathBuf,
    /// LM token-embedding table
    #[arg(long)]
    lm: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Entity annotations (JSON lines)
    #[arg(long, conflicts_with = "names", required_unless_present = "names")]
    entities: Option<PathBuf>,
    /// `key<TAB>preferred name` table
    #[arg(long)]
    names: Option<PathBuf>,
    /// Definition-embedding table used by --require-definition
    #[arg(long)]
    definitions: Option<PathBuf>,
    /// Keep only entities with a definition vector
    #[arg(long, requires = "definitions")]
    require_definition: bool,
    /// Uniformly sample this many candidates
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    cased: bool,
    #[arg(long)]
    out_sources: PathBuf,
    #[arg(long)]
    out_targets: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Mlp,
    Linear,
    Orthogonal,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    sources: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Iterative normalization of both sides before fitting (0 = off)
    #[arg(long, default_value_t = 0)]
    normalize_iters: usize,
    #[arg(long, default_value_t = align::DEFAULT_NORMALIZE_TOL)]
    normalize_tol: f64,
    /// Ridge for the linear method; 0 retries with 1e-6 when rank deficient
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Debug, Args)]
struct TrainFlags {
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.25)]
    dropout: f64,
    #[arg(long, default_value_t = 0.001)]
    weight_decay: f64,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    adam_eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    holdout_fraction: f64,
    #[arg(long, default_value_t = mlp::DEFAULT_HIDDEN)]
    hidden: usize,
    #[arg(long, default_value_t = mlp::DEFAULT_LN_EPS)]
    ln_eps: f64,
}

impl From<&TrainFlags> for TrainConfig {
    fn from(f: &TrainFlags) -> Self {
        TrainConfig {
            epochs: f.epochs,
            batch_size: f.batch_size,
            dropout_p: f.dropout,
            weight_decay: f.weight_decay,
            learning_rate: f.learning_rate,
            adam_beta1: f.beta1,
            adam_beta2: f.beta2,
            adam_eps: f.adam_eps,
            seed: f.seed,
            holdout_fraction: f.holdout_fraction,
            hidden_dim: f.hidden,
            ln_eps: f.ln_eps,
        }
    }
}

#[derive(Debug, Args)]
struct ApplyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    table: PathBuf,
    /// Only map these keys (one per line)
    #[arg(long)]
    keys: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    normalize_iters: usize,
    #[arg(long, default_value_t = align::DEFAULT_NORMALIZE_TOL)]
    normalize_tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[arg(long)]
    homogenized: Option<PathBuf>,
    #[arg(long)]
    definitions: Option<PathBuf>,
    /// Keys to fuse, one per line (default: every homogenized key)
    #[arg(long, conflicts_with = "entities")]
    keys: Option<PathBuf>,
    /// Take keys and definition keys from entity annotations
    #[arg(long)]
    entities: Option<PathBuf>,
    /// Emit the random baseline instead of fusing
    #[arg(long)]
    random_seed: Option<u64>,
    /// Dimension of the random baseline (default: homogenized dimension)
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LayoutArg {
    Bertram,
    Dekcor,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Bertram => Layout::Bertram,
            LayoutArg::Dekcor => Layout::Dekcor,
        }
    }
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long, value_enum)]
    layout: LayoutArg,
    #[arg(long)]
    entities: PathBuf,
    #[arg(long)]
    fused: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// JSON lines `{"id":..,"context":"text"}` or `{"id":..,"tokens":[..]}`
    #[arg(long)]
    contexts: Option<PathBuf>,
    #[arg(long, default_value_t = fusion::DEFAULT_MAX_LEN)]
    max_len: usize,
    /// Write vectors inside each unit instead of a per-record side table
    #[arg(long)]
    inline_vectors: bool,
    #[arg(long)]
    cased: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimilarityArg {
    Cosine,
    Euclidean,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    predicted: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    /// Keys to score (default: every predicted key)
    #[arg(long)]
    keys: Option<PathBuf>,
    /// Retrieval cutoffs; repeatable
    #[arg(long = "k", default_values_t = vec![1usize, 5, 10])]
    k: Vec<usize>,
    #[arg(long, value_enum, default_value_t = SimilarityArg::Cosine)]
    similarity: SimilarityArg,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelfcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random network shapes for the gradient check
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

#[derive(Debug, Args)]
struct ProxyArgs {
    /// JSON lines `{"key":..,"definition":"text"}`
    #[arg(long)]
    definitions_text: PathBuf,
    #[arg(long)]
    lm: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    cased: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::BuildTargets(a) => build_targets(a),
        Command::Fit(a) => fit(a),
        Command::Apply(a) => apply(a),
        Command::Fuse(a) => fuse(a),
        Command::Augment(a) => augment(a),
        Command::Eval(a) => evaluate(a),
        Command::Selfcheck(a) => selfcheck(a),
        Command::ProxyDefinitions(a) => proxy_definitions(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn opt_resolve(path: &Option<PathBuf>) -> Option<PathBuf> {
    path.as_deref().map(resolve)
}

fn echo(command: &str, settings: &[(&str, &dyn Display)]) {
    let mut line = format!("effective config: command={command}");
    for (k, v) in settings {
        line.push_str(&format!(" {k}={v}"));
    }
    eprintln!("{line}");
}

fn show(path: &Option<PathBuf>) -> String {
    path.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string())
}

fn build_targets(a: &BuildTargetsArgs) -> Result<()> {
    echo(
        "build-targets",
        &[
            ("kge", &a.kge.display()),
            ("lm", &a.lm.display()),
            ("vocab", &a.vocab.display()),
            ("entities", &show(&a.entities)),
            ("names", &show(&a.names)),
            ("require_definition", &a.require_definition),
            ("sample", &a.sample.map_or("all".to_string(), |n| n.to_string())),
            ("seed", &a.seed),
            ("lowercase", &!a.cased),
        ],
    );
    let kge = load_embeddings(resolve(&a.kge), None)?;
    let lm = load_embeddings(resolve(&a.lm), None)?;
    let vocab = load_vocab(resolve(&a.vocab))?;

    // (key, preferred name, definition lookup key)
    let mut candidates: Vec<(String, String, String)> = Vec::new();
    if let Some(path) = opt_resolve(&a.entities) {
        let mut seen = HashSet::new();
        for q in load_entities(path)? {
            for e in q.entities {
                if seen.insert(e.key.clone()) {
                    let def = e.definition_lookup_key().to_string();
                    candidates.push((e.key, e.preferred_name, def));
                }
            }
        }
    } else if let Some(path) = opt_resolve(&a.names) {
        let mut seen = HashSet::new();
        for (k, n) in load_names(path)? {
            if seen.insert(k.clone()) {
                candidates.push((k.clone(), n, k));
            }
        }
    } else {
        return Err(Error::Usage("one of --entities or --names is required".into()));
    }

    if a.require_definition {
        let path = opt_resolve(&a.definitions)
            .ok_or_else(|| Error::Usage("--require-definition needs --definitions".into()))?;
        let defs = load_embeddings(path, None)?;
        candidates.retain(|(_, _, d)| defs.contains(d));
    }
    if let Some(n) = a.sample {
        let idx = rng::sample_indices(&mut rng::stream(a.seed, rng::STREAM_SAMPLE), candidates.len(), n);
        candidates = idx.into_iter().map(|i| candidates[i].clone()).collect();
    }

    let names: Vec<(&str, &str)> = candidates.iter().map(|(k, n, _)| (k.as_str(), n.as_str())).collect();
    let (pairs, skipped) = build_target_set(&names, &kge, &lm, &vocab, !a.cased)?;
    for s in &skipped {
        eprintln!("skipped {}: {}", s.key, s.reason);
    }
    save_paired(&pairs, resolve(&a.out_sources), resolve(&a.out_targets))?;
    eprintln!(
        "{} pairs ({} -> {} dims), {} skipped",
        pairs.len(),
        pairs.src_dim(),
        pairs.tgt_dim(),
        skipped.len()
    );
    Ok(())
}

fn normalize_pairs(pairs: &PairedDataset, iters: usize, tol: f64) -> Result<PairedDataset> {
    let (src, tgt) = pairs.to_tables()?;
    let src = normalize_table(&src, iters, tol, "sources")?;
    let tgt = normalize_table(&tgt, iters, tol, "targets")?;
    Ok(PairedDataset::from_tables(&src, &tgt)?)
}

fn normalize_table(table: &EmbeddingTable, iters: usize, tol: f64, label: &str) -> Result<EmbeddingTable> {
    let (out, status) = iterative_normalize(table, tol, iters)?;
    if status.converged {
        eprintln!("{label}: iterative normalization converged after {} iterations", status.iterations);
    } else {
        eprintln!("warning: {label}: iterative normalization did not converge in {iters} iterations");
    }
    Ok(out)
}

fn fit(a: &FitArgs) -> Result<()> {
    let cfg = TrainConfig::from(&a.train);
    let method = format!("{:?}", a.method).to_lowercase();
    match a.method {
        Method::Mlp => echo(
            "fit",
            &[
                ("method", &method),
                ("epochs", &cfg.epochs),
                ("batch_size", &cfg.batch_size),
                ("dropout", &cfg.dropout_p),
                ("weight_decay", &cfg.weight_decay),
                ("learning_rate", &cfg.learning_rate),
                ("beta1", &cfg.adam_beta1),
                ("beta2", &cfg.adam_beta2),
                ("adam_eps", &cfg.adam_eps),
                ("holdout_fraction", &cfg.holdout_fraction),
                ("hidden", &cfg.hidden_dim),
                ("ln_eps", &cfg.ln_eps),
                ("normalize_iters", &a.normalize_iters),
                ("seed", &cfg.seed),
            ],
        ),
        _ => echo(
            "fit",
            &[
                ("method", &method),
                ("ridge", &a.ridge),
                ("normalize_iters", &a.normalize_iters),
                ("seed", &"none"),
            ],
        ),
    }

    let mut pairs = load_paired(resolve(&a.sources), resolve(&a.targets))?;
    if a.normalize_iters > 0 {
        pairs = normalize_pairs(&pairs, a.normalize_iters, a.normalize_tol)?;
    }
    let normalize_iters = (a.normalize_iters > 0).then_some(a.normalize_iters);

    let saved = match a.method {
        Method::Linear => {
            let (map, ridge) = match fit_linear(&pairs, a.ridge) {
                Err(CoreError::RankDeficient) if a.ridge == 0.0 => {
                    eprintln!("warning: normal equations are rank deficient; retrying with ridge={FALLBACK_RIDGE}");
                    (fit_linear(&pairs, FALLBACK_RIDGE)?, FALLBACK_RIDGE)
                }
                other => (other?, a.ridge),
            };
            let mse = align::residual_sum_sq(map.weights(), &pairs) / (pairs.len() * pairs.tgt_dim()) as f64;
            eprintln!("linear map {}x{}, training mse {mse:e}", map.d_src(), map.d_tgt());
            SavedModel {
                model: AlignmentModel::Linear(map),
                meta: ModelMeta {
                    ridge: Some(ridge),
                    normalize_iters,
                    ..ModelMeta::default()
                },
            }
        }
        Method::Orthogonal => {
            let map = fit_orthogonal(&pairs)?;
            let mse = align::residual_sum_sq(map.weights(), &pairs) / (pairs.len() * pairs.tgt_dim()) as f64;
            eprintln!("orthogonal map {}x{}, training mse {mse:e}", map.dim(), map.dim());
            SavedModel {
                model: AlignmentModel::Orthogonal(map),
                meta: ModelMeta {
                    normalize_iters,
                    ..ModelMeta::default()
                },
            }
        }
        Method::Mlp => {
            let outcome = mlp::train(&pairs, &cfg)?;
            for h in &outcome.history {
                eprintln!(
                    "epoch {:>3}  train_mse {:.6e}  holdout_mse {:.6e}",
                    h.epoch, h.train_mse, h.holdout_mse
                );
            }
            match outcome.best_epoch {
                Some(e) => eprintln!("best holdout epoch {e}"),
                None => eprintln!("no epochs run; saving the initialization"),
            }
            SavedModel {
                model: AlignmentModel::Mlp(outcome.model),
                meta: ModelMeta {
                    config: Some(cfg),
                    best_epoch: outcome.best_epoch,
                    history: outcome.history,
                    ridge: None,
                    normalize_iters,
                },
            }
        }
    };
    eprintln!("{} trainable parameters", saved.model.parameter_count());
    save_model(&saved, resolve(&a.out))
}

fn apply(a: &ApplyArgs) -> Result<()> {
    echo(
        "apply",
        &[
            ("model", &a.model.display()),
            ("table", &a.table.display()),
            ("keys", &show(&a.keys)),
            ("normalize_iters", &a.normalize_iters),
            ("seed", &"none"),
        ],
    );
    let saved = load_model(resolve(&a.model))?;
    let mut table = load_embeddings(resolve(&a.table), Some(saved.model.d_src()))?;
    if a.normalize_iters > 0 {
        table = normalize_table(&table, a.normalize_iters, a.normalize_tol, "input")?;
    }
    let keys = opt_resolve(&a.keys).map(load_keys).transpose()?;
    let out = saved.model.apply_table(&table, keys.as_deref())?;
    save_embeddings(&out, resolve(&a.out))
}

/// `(key, definition key)` pairs from a key list or entity annotations.
fn fusion_keys(keys: &Option<PathBuf>, entities: &Option<PathBuf>) -> Result<Option<Vec<(String, Option<String>)>>> {
    if let Some(path) = opt_resolve(keys) {
        return Ok(Some(load_keys(path)?.into_iter().map(|k| (k, None)).collect()));
    }
    if let Some(path) = opt_resolve(entities) {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for q in load_entities(path)? {
            for e in q.entities {
                if seen.insert(e.key.clone()) {
                    out.push((e.key, e.definition_key));
                }
            }
        }
        return Ok(Some(out));
    }
    Ok(None)
}

fn fuse(a: &FuseArgs) -> Result<()> {
    echo(
        "fuse",
        &[
            ("homogenized", &show(&a.homogenized)),
            ("definitions", &show(&a.definitions)),
            ("keys", &show(&a.keys)),
            ("entities", &show(&a.entities)),
            ("random", &a.random_seed.is_some()),
            ("seed", &a.random_seed.map_or("none".to_string(), |s| s.to_string())),
        ],
    );
    let homogenized = opt_resolve(&a.homogenized).map(|p| load_embeddings(p, None)).transpose()?;
    let keys = fusion_keys(&a.keys, &a.entities)?;
    let default_keys = || -> Result<Vec<(String, Option<String>)>> {
        let h = homogenized
            .as_ref()
            .ok_or_else(|| Error::Usage("pass --keys, --entities or --homogenized to choose keys".into()))?;
        Ok(h.names().iter().map(|k| (k.clone(), None)).collect())
    };
    let keys = match keys {
        Some(k) => k,
        None => default_keys()?,
    };

    let table = if let Some(seed) = a.random_seed {
        let dim = match (a.dim, &homogenized) {
            (Some(d), _) => d,
            (None, Some(h)) => h.dim(),
            (None, None) => return Err(Error::Usage("the random baseline needs --dim or --homogenized".into())),
        };
        let names: Vec<&str> = keys.iter().map(|(k, _)| k.as_str()).collect();
        fusion::random_table(&names, dim, seed)?
    } else {
        let homogenized = homogenized.ok_or_else(|| Error::Usage("--homogenized is required".into()))?;
        let def_path = opt_resolve(&a.definitions).ok_or_else(|| Error::Usage("--definitions is required".into()))?;
        let definitions = load_embeddings(def_path, None)?;
        let mapped: Vec<(&str, Option<&str>)> = keys.iter().map(|(k, d)| (k.as_str(), d.as_deref())).collect();
        let fused = fusion::fuse_mapped(&homogenized, &definitions, &mapped)?;
        let count = |s: FuseSource| fused.sources.iter().filter(|&&x| x == s).count();
        eprintln!(
            "fused {} keys: {} averaged, {} homogenized only, {} definition only",
            fused.table.len(),
            count(FuseSource::Both),
            count(FuseSource::HomogenizedOnly),
            count(FuseSource::DefinitionOnly)
        );
        fused.table
    };
    save_embeddings(&table, resolve(&a.out))
}

#[derive(Debug, Deserialize)]
struct ContextJson {
    id: String,
    #[serde(default)]
    context: Option<String>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
}

fn load_contexts(path: &Path, vocab: &homogenizer_core::Vocab, lowercase: bool) -> Result<HashMap<String, Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ContextJson = serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let tokens = match (rec.tokens, rec.context) {
            (Some(t), None) => t,
            (None, Some(c)) => tokenize(&c, vocab, lowercase),
            _ => return Err(Error::parse(path, i + 1, "exactly one of `context` or `tokens` is required")),
        };
        out.insert(rec.id, tokens);
    }
    Ok(out)
}

fn augment(a: &AugmentArgs) -> Result<()> {
    let layout = Layout::from(a.layout);
    echo(
        "augment",
        &[
            ("layout", &layout.as_str()),
            ("entities", &a.entities.display()),
            ("fused", &a.fused.display()),
            ("contexts", &show(&a.contexts)),
            ("max_len", &a.max_len),
            ("inline_vectors", &a.inline_vectors),
            ("lowercase", &!a.cased),
            ("seed", &"none"),
        ],
    );
    let questions = load_entities(resolve(&a.entities))?;
    let fused = load_embeddings(resolve(&a.fused), None)?;
    let vocab = load_vocab(resolve(&a.vocab))?;
    let contexts = match opt_resolve(&a.contexts) {
        Some(p) => load_contexts(&p, &vocab, !a.cased)?,
        None => HashMap::new(),
    };
    let builder = SequenceBuilder::new(&vocab, &fused).max_len(a.max_len).lowercase(!a.cased);
    let empty = Vec::new();
    let mut records = Vec::with_capacity(questions.len());
    for q in &questions {
        let ctx = contexts.get(&q.id).unwrap_or(&empty);
        let seq = builder
            .build(layout, &q.question, &q.entities, ctx)
            .map_err(|source| Error::Entity {
                path: resolve(&a.entities),
                question_id: q.id.clone(),
                source,
            })?;
        records.push(SequenceRecord::new(&q.id, &seq, &fused, a.inline_vectors)?);
    }
    save_sequences(&records, resolve(&a.out))?;
    eprintln!("{} sequences written", records.len());
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalSettings {
    similarity: &'static str,
    predicted: String,
    targets: String,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    mse: f64,
    mean_cosine: Option<f64>,
    precision_at_k: BTreeMap<usize, f64>,
    n: usize,
    k: Vec<usize>,
    settings: EvalSettings,
}

fn evaluate(a: &EvalArgs) -> Result<()> {
    let similarity = match a.similarity {
        SimilarityArg::Cosine => Similarity::Cosine,
        SimilarityArg::Euclidean => Similarity::Euclidean,
    };
    let sim_name = match similarity {
        Similarity::Cosine => "cosine",
        Similarity::Euclidean => "euclidean",
    };
    let ks: Vec<String> = a.k.iter().map(|k| k.to_string()).collect();
    echo(
        "eval",
        &[
            ("predicted", &a.predicted.display()),
            ("targets", &a.targets.display()),
            ("keys", &show(&a.keys)),
            ("k", &ks.join(",")),
            ("similarity", &sim_name),
            ("seed", &"none"),
        ],
    );
    let predicted = load_embeddings(resolve(&a.predicted), None)?;
    let targets = load_embeddings(resolve(&a.targets), None)?;
    let keys = match opt_resolve(&a.keys) {
        Some(p) => load_keys(p)?,
        None => predicted.names().to_vec(),
    };
    let mse = eval::mse(&predicted, &targets, &keys)?;
    let mean_cosine = match eval::mean_cosine(&predicted, &targets, &keys) {
        Ok(v) => Some(v),
        Err(CoreError::ZeroNorm(k)) => {
            eprintln!("warning: mean cosine undefined, `{k}` is a zero vector");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let mut precision_at_k = BTreeMap::new();
    for &k in &a.k {
        precision_at_k.insert(k, eval::retrieval_precision_at_k(&predicted, &targets, &keys, k, similarity)?);
    }
    let report = EvalReport {
        mse,
        mean_cosine,
        precision_at_k,
        n: keys.len(),
        k: a.k.clone(),
        settings: EvalSettings {
            similarity: sim_name,
            predicted: a.predicted.display().to_string(),
            targets: a.targets.display().to_string(),
        },
    };
    let text = serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
    match opt_resolve(&a.out) {
        Some(p) => std::fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn selfcheck(a: &SelfcheckArgs) -> Result<()> {
    echo("selfcheck", &[("trials", &a.trials), ("seed", &a.seed)]);
    let mut failures = 0;
    let mut report = |name: &str, ok: bool, detail: String| {
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let mut shapes = rng::stream(a.seed, 0x73_6861_7065);
    let mut worst: f64 = 0.0;
    for t in 0..a.trials {
        use rand_like::dim;
        let dims = (dim(&mut shapes), dim(&mut shapes), dim(&mut shapes));
        let rep = diagnostics::gradient_check(dims.0, dims.1, dims.2, a.seed.wrapping_add(t as u64))?;
        worst = worst.max(rep.worst());
    }
    report(
        "gradient check",
        worst <= diagnostics::GRADIENT_TOL,
        format!("{} networks, max relative error {worst:.3e}", a.trials),
    );

    let lin = diagnostics::linear_recovery(8, 12, 500, a.seed)?;
    report(
        "linear recovery",
        lin.weight_error <= diagnostics::RECOVERY_TOL && lin.secondary_error <= diagnostics::RECOVERY_TOL,
        format!("|W-W*| {:.3e}, |xW-z| {:.3e}", lin.weight_error, lin.secondary_error),
    );

    let orth = diagnostics::orthogonal_recovery(10, 500, a.seed)?;
    report(
        "orthogonal recovery",
        orth.weight_error <= diagnostics::RECOVERY_TOL && orth.secondary_error <= diagnostics::RECOVERY_TOL,
        format!("|W-R| {:.3e}, |WtW-I| {:.3e}", orth.weight_error, orth.secondary_error),
    );

    let mlp_params = MlpHomogenizer::zeros(50, 300, 768, mlp::DEFAULT_LN_EPS)?.parameter_count();
    report(
        "parameter count",
        mlp_params == 247_068,
        format!("mlp(50,300,768) {mlp_params} vs linear(50,768) {}", 50 * 768),
    );

    if failures > 0 {
        return Err(Error::SelfCheck(failures));
    }
    Ok(())
}

mod rand_like {
    use homogenizer_core::rng::{uniform, ChaCha8Rng};

    /// Network width in `[2, 16]`.
    pub fn dim(rng: &mut ChaCha8Rng) -> usize {
        2 + (uniform(rng, 0.0, 15.0) as usize).min(14)
    }
}

#[derive(Debug, Deserialize)]
struct DefinitionJson {
    key: String,
    definition: String,
}

fn proxy_definitions(a: &ProxyArgs) -> Result<()> {
    echo(
        "proxy-definitions",
        &[
            ("definitions_text", &a.definitions_text.display()),
            ("lm", &a.lm.display()),
            ("lowercase", &!a.cased),
            ("seed", &"none"),
        ],
    );
    eprintln!("note: vectors are mean static token embeddings, not transformer pooler outputs");
    let lm = load_embeddings(resolve(&a.lm), None)?;
    let vocab = load_vocab(resolve(&a.vocab))?;
    let path = resolve(&a.definitions_text);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = EmbeddingTable::new(lm.dim())?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DefinitionJson = serde_json::from_str(line).map_err(|e| Error::parse(&path, i + 1, e.to_string()))?;
        match fusion::static_pooler_proxy(&rec.definition, &lm, &vocab, !a.cased) {
            Ok(v) => out
                .insert(rec.key, &v)
                .map_err(|e| Error::parse(&path, i + 1, e.to_string()))?,
            Err(e) => eprintln!("skipped {}: {e}", rec.key),
        }
    }
    save_embeddings(&out, resolve(&a.out))
}
