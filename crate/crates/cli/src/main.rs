//! Command line front end: each subcommand wires one stage of the pipeline
//! (generate, merge, cut, apply, evaluate, sweep) into a reproducible run.
//!
//! Exit codes: 0 on success, 1 on usage or input validation errors, 2 when a
//! computation fails partway. Every JSON output embeds the effective
//! configuration under a `config` key so results stay traceable to the exact
//! settings that produced them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use codebook_core::criteria::MaxMarginCost;
use codebook_core::engine::TIE_WINDOW;
use codebook_core::{
    apply_merge_map, bench, build_merge_tree, evaluate, gen_synthetic, load_dataset, loss_csv,
    preprocess, taylor_residual, write_dataset, BenchConfig, CachePolicy, CorrelationMode,
    CriteriaConfig, Criterion, CriterionError, CriterionKind, EngineConfig, EngineError,
    HistogramDataset, MergeTree, SynthConfig, WordMap,
};

/// Compress a bag-of-words codebook by greedily merging words.
#[derive(Parser)]
#[command(name = "codebook", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalOpts,
}

#[derive(Args)]
struct GlobalOpts {
    /// JSON file with criterion and evaluation settings; fields it omits
    /// keep their built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Dotted-path setting override, e.g. mlt.alpha=0.7. Repeatable;
    /// applied on top of --config.
    #[arg(long, global = true, value_name = "KEY=VALUE", action = ArgAction::Append)]
    set: Vec<String>,
    /// Seed for every random choice this run makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Never changes output bytes.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Print the effective settings and progress to stderr.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Build the full merge hierarchy of a dataset.
    Merge(MergeArgs),
    /// Cut a merge tree at a target codebook size, yielding a word map.
    Cut(CutArgs),
    /// Rewrite a dataset onto the merged codebook of a word map.
    Apply(ApplyArgs),
    /// Train on compressed training data and score compressed test data.
    Eval(EvalArgs),
    /// Generate a synthetic two-class histogram dataset.
    Synth(SynthArgs),
    /// Sweep criteria x codebook sizes x seeds and report accuracy curves.
    Bench(BenchArgs),
    /// Dump internal criterion state for inspection.
    Diag(DiagArgs),
}

/// Row preprocessing applied right after a dataset is loaded.
#[derive(Args, Clone, Copy)]
struct PrepFlags {
    /// Divide each row by its sum before anything else.
    #[arg(long)]
    l1_normalize: bool,
    /// Take the square root of every count (after normalization when both).
    #[arg(long)]
    sqrt: bool,
}

#[derive(Args)]
struct MergeArgs {
    /// Input dataset CSV (label column, then one column per word).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output merge tree JSON.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the per-level loss table to this CSV file.
    #[arg(long, value_name = "FILE")]
    losses: Option<PathBuf>,
    #[arg(long, default_value = "aib")]
    criterion: CriterionKind,
    /// Stop merging when this many words remain.
    #[arg(long, default_value_t = 1, value_name = "K")]
    min_size: usize,
    /// Pair cache policy: lazy_heap or full_rescan (identical results).
    #[arg(long, default_value = "lazy_heap")]
    cache: CachePolicy,
    #[command(flatten)]
    prep: PrepFlags,
}

#[derive(Args)]
struct CutArgs {
    /// Merge tree JSON produced by `merge`.
    #[arg(long, value_name = "FILE")]
    tree: PathBuf,
    /// Target codebook size.
    #[arg(long, value_name = "K")]
    k: usize,
    /// Output word map JSON.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Word map JSON produced by `cut`.
    #[arg(long, value_name = "FILE")]
    map: PathBuf,
    /// Output dataset CSV over the merged codebook.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[command(flatten)]
    prep: PrepFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    train: PathBuf,
    #[arg(long, value_name = "FILE")]
    test: PathBuf,
    /// Word map JSON applied to both datasets before training.
    #[arg(long, value_name = "FILE")]
    map: PathBuf,
    /// Output metrics JSON (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    prep: PrepFlags,
}

/// Generator settings; defaults match the library's synthetic corpus.
#[derive(Args)]
struct SynthParams {
    #[arg(long, default_value_t = 100)]
    n_per_class: usize,
    /// Words whose frequency differs between the classes.
    #[arg(long, default_value_t = 8)]
    t_disc: usize,
    /// Words drawn identically for both classes.
    #[arg(long, default_value_t = 56)]
    t_noise: usize,
    #[arg(long, default_value_t = 100)]
    counts_per_sample: usize,
    /// Frequency boost of a discriminative word in its favored class.
    #[arg(long, default_value_t = 3.0)]
    class_skew: f64,
    /// Word correlation: iid or block.
    #[arg(long, default_value = "iid")]
    mode: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset CSV.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[command(flatten)]
    params: SynthParams,
}

#[derive(Args)]
struct BenchArgs {
    /// Output report JSON (rows, summary, and failed cells).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the per-cell table to this CSV file.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Also write gnuplot-friendly accuracy curves to this file.
    #[arg(long, value_name = "FILE")]
    curves: Option<PathBuf>,
    /// Comma-separated criteria to sweep (default: all six).
    #[arg(long, value_name = "LIST")]
    criteria: Option<String>,
    /// Comma-separated codebook sizes to cut each tree to.
    #[arg(long, default_value = "8,16,32", value_name = "LIST")]
    sizes: String,
    /// Number of dataset seeds, counted upward from --seed.
    #[arg(long, default_value_t = 1, value_name = "N")]
    runs: u64,
    /// Skip the random-merging baseline.
    #[arg(long)]
    no_baseline: bool,
    #[arg(long, default_value = "lazy_heap")]
    cache: CachePolicy,
    #[command(flatten)]
    params: SynthParams,
}

#[derive(Args)]
struct DiagArgs {
    #[command(subcommand)]
    which: DiagCommand,
}

#[derive(Subcommand)]
enum DiagCommand {
    /// Dump the max-margin criterion's SVM weights, recovered probability
    /// model, and the cost curvature check for one pair.
    Mme(DiagMmeArgs),
}

#[derive(Args)]
struct DiagMmeArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output JSON (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Word pair to inspect, e.g. 3,7 (default: the pair that would merge
    /// first).
    #[arg(long, value_name = "R,S")]
    pair: Option<String>,
    #[command(flatten)]
    prep: PrepFlags,
}

/// A failed run, already split by exit code: usage and input validation
/// problems exit 1, mid-computation failures exit 2.
enum Failure {
    Usage(String),
    Compute(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Compute(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Compute(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version arrive as non-error kinds and exit 0
            let code = u8::from(err.use_stderr());
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("--threads: {e}")))?;
    }
    let criteria = effective_criteria(&cli.global)?;
    if cli.global.verbose > 0 {
        eprintln!(
            "effective settings: {}",
            serde_json::to_string(&criteria).expect("config serializes")
        );
    }
    match cli.command {
        Command::Merge(args) => run_merge(args, &cli.global, criteria),
        Command::Cut(args) => run_cut(args, &cli.global),
        Command::Apply(args) => run_apply(args),
        Command::Eval(args) => run_eval(args, &cli.global, criteria),
        Command::Synth(args) => run_synth(args, &cli.global),
        Command::Bench(args) => run_bench(args, &cli.global, criteria),
        Command::Diag(args) => match args.which {
            DiagCommand::Mme(args) => run_diag_mme(args, &cli.global, criteria),
        },
    }
}

/// Builds the effective settings: defaults, then the config file, then each
/// --set override in order.
fn effective_criteria(global: &GlobalOpts) -> Result<CriteriaConfig, Failure> {
    let mut cfg = match &global.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => CriteriaConfig::default(),
    };
    for entry in &global.set {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set {entry:?}: expected KEY=VALUE")))?;
        cfg.set(key.trim(), value.trim())
            .map_err(|e| Failure::Usage(format!("--set {entry:?}: {e}")))?;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn run_merge(args: MergeArgs, global: &GlobalOpts, criteria: CriteriaConfig) -> Result<(), Failure> {
    let ds = load_input(&args.input, args.prep)?;
    let mut engine = EngineConfig::new(args.criterion);
    engine.min_size = args.min_size;
    engine.record_losses = args.losses.is_some();
    engine.cache_policy = args.cache;
    engine.criteria = criteria;
    let tree = build_merge_tree(&ds, &engine).map_err(|e| match e {
        EngineError::Criterion { .. } => Failure::Compute(e.to_string()),
        other => Failure::Usage(other.to_string()),
    })?;
    let doc = json!({
        "config": provenance(
            "merge",
            global,
            Some(&engine.criteria),
            json!({
                "input": args.input.display().to_string(),
                "criterion": args.criterion.name(),
                "cache_policy": args.cache.name(),
                "min_size": args.min_size,
                "preprocess": prep_json(args.prep),
            }),
        ),
        "tree": tree,
    });
    emit_json(Some(&args.out), &doc)?;
    if let Some(path) = &args.losses {
        write_text(path, &loss_csv(&tree))?;
    }
    Ok(())
}

fn run_cut(args: CutArgs, global: &GlobalOpts) -> Result<(), Failure> {
    let tree = load_tree(&args.tree)?;
    let map = tree
        .cut(args.k)
        .map_err(|e| Failure::Usage(format!("k out of range: {e}")))?;
    let doc = json!({
        "config": provenance(
            "cut",
            global,
            None,
            json!({
                "tree": args.tree.display().to_string(),
                "k": args.k,
            }),
        ),
        "map": WordMapDoc::from(&map),
    });
    emit_json(Some(&args.out), &doc)
}

fn run_apply(args: ApplyArgs) -> Result<(), Failure> {
    let ds = load_input(&args.input, args.prep)?;
    let map = load_map(&args.map)?;
    let merged = apply_merge_map(&ds, &map).map_err(|e| Failure::Usage(e.to_string()))?;
    write_dataset(&merged, &args.out)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", args.out.display())))
}

fn run_eval(args: EvalArgs, global: &GlobalOpts, criteria: CriteriaConfig) -> Result<(), Failure> {
    let train = load_input(&args.train, args.prep)?;
    let test = load_input(&args.test, args.prep)?;
    let map = load_map(&args.map)?;
    let metrics =
        evaluate(&train, &test, &map, &criteria.eval).map_err(|e| Failure::Compute(e.to_string()))?;
    let doc = json!({
        "config": provenance(
            "eval",
            global,
            Some(&criteria),
            json!({
                "train": args.train.display().to_string(),
                "test": args.test.display().to_string(),
                "map": args.map.display().to_string(),
                "k": map.clusters(),
                "preprocess": prep_json(args.prep),
            }),
        ),
        "metrics": metrics,
    });
    emit_json(args.out.as_deref(), &doc)
}

fn run_synth(args: SynthArgs, global: &GlobalOpts) -> Result<(), Failure> {
    let cfg = synth_config(&args.params, global.seed)?;
    let ds = gen_synthetic(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    write_dataset(&ds, &args.out)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", args.out.display())))
}

fn run_bench(args: BenchArgs, global: &GlobalOpts, criteria: CriteriaConfig) -> Result<(), Failure> {
    let cfg = BenchConfig {
        synth: synth_config(&args.params, global.seed)?,
        criteria: parse_criteria(args.criteria.as_deref())?,
        sizes: parse_sizes(&args.sizes)?,
        seeds: (0..args.runs).map(|i| global.seed.wrapping_add(i)).collect(),
        baseline: !args.no_baseline,
        criteria_config: criteria,
        cache_policy: args.cache,
    };
    let report = bench(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    if global.verbose > 0 {
        for row in &report.rows {
            if let Some(error) = &row.error {
                eprintln!(
                    "cell ({}, k={}, seed {}) failed: {error}",
                    row.criterion, row.k, row.seed
                );
            }
        }
    }
    let doc = json!({
        "config": provenance("bench", global, None, json!({ "bench": cfg })),
        "report": report,
    });
    emit_json(Some(&args.out), &doc)?;
    if let Some(path) = &args.csv {
        write_text(path, &report.to_csv())?;
    }
    if let Some(path) = &args.curves {
        write_text(path, &report.gnuplot_curves())?;
    }
    Ok(())
}

fn run_diag_mme(
    args: DiagMmeArgs,
    global: &GlobalOpts,
    criteria: CriteriaConfig,
) -> Result<(), Failure> {
    let ds = load_input(&args.input, args.prep)?;
    let crit = MaxMarginCost::new(&ds, &criteria.mme).map_err(|e| match e {
        CriterionError::NotBinary(_) | CriterionError::BadConfig(_) => {
            Failure::Usage(e.to_string())
        }
        other => Failure::Compute(other.to_string()),
    })?;
    let (r, s) = match &args.pair {
        Some(text) => parse_pair(text, ds.t())?,
        None => first_merge_pair(&crit, ds.t())?,
    };
    let (w, b) = crit.weights();
    let model = crit.model();
    let (cost, residual) = taylor_residual(w, b, &model.p_word, r, s, model.eta)
        .map_err(|e| Failure::Compute(e.to_string()))?;
    let doc = json!({
        "config": provenance(
            "diag mme",
            global,
            Some(&criteria),
            json!({
                "input": args.input.display().to_string(),
                "preprocess": prep_json(args.prep),
            }),
        ),
        "w": w,
        "b": b,
        "model": model,
        "pair": [r, s],
        "pair_cost": cost,
        "taylor_residual": residual,
    });
    emit_json(args.out.as_deref(), &doc)
}

/// The pair the engine would merge at the top level: smallest loss, ties
/// broken toward the lexicographically smallest pair within the tie window.
fn first_merge_pair(crit: &MaxMarginCost, t: usize) -> Result<(usize, usize), Failure> {
    let mut losses = Vec::with_capacity(t * (t - 1) / 2);
    for r in 0..t {
        for s in (r + 1)..t {
            let loss = crit
                .pair_loss(r, s)
                .map_err(|e| Failure::Compute(e.to_string()))?;
            losses.push((r, s, loss));
        }
    }
    let min = losses
        .iter()
        .map(|&(_, _, loss)| loss)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Failure::Usage("dataset has fewer than two words".into()))?;
    let (r, s, _) = losses
        .iter()
        .find(|&&(_, _, loss)| loss <= min + TIE_WINDOW)
        .expect("minimum exists");
    Ok((*r, *s))
}

fn parse_pair(text: &str, t: usize) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Usage(format!("--pair {text:?}: expected two word indices like 3,7"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == b || a >= t || b >= t {
        return Err(Failure::Usage(format!(
            "--pair {text:?}: need two distinct indices below {t}"
        )));
    }
    Ok((a.min(b), a.max(b)))
}

fn synth_config(params: &SynthParams, seed: u64) -> Result<SynthConfig, Failure> {
    let correlation_mode = match params.mode.as_str() {
        "iid" => CorrelationMode::Iid,
        "block" => CorrelationMode::Block,
        other => {
            return Err(Failure::Usage(format!(
                "--mode {other:?}: expected iid or block"
            )))
        }
    };
    Ok(SynthConfig {
        n_per_class: params.n_per_class,
        t_disc: params.t_disc,
        t_noise: params.t_noise,
        counts_per_sample: params.counts_per_sample,
        class_skew: params.class_skew,
        correlation_mode,
        seed,
    })
}

fn parse_criteria(list: Option<&str>) -> Result<Vec<CriterionKind>, Failure> {
    match list {
        None => Ok(CriterionKind::ALL.to_vec()),
        Some(text) => text
            .split(',')
            .map(|name| name.trim().parse().map_err(Failure::Usage))
            .collect(),
    }
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("--sizes: {part:?} is not a size")))
        })
        .collect()
}

/// Word map as stored on disk. `assign[j]` is the cluster of word `j`.
#[derive(Serialize, Deserialize)]
struct WordMapDoc {
    assign: Vec<usize>,
    clusters: usize,
}

impl From<&WordMap> for WordMapDoc {
    fn from(map: &WordMap) -> Self {
        Self {
            assign: map.assignments().to_vec(),
            clusters: map.clusters(),
        }
    }
}

fn load_input(path: &Path, prep: PrepFlags) -> Result<HistogramDataset, Failure> {
    let ds = load_dataset(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    preprocess(ds, prep.l1_normalize, prep.sqrt)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Reads a merge tree, accepting both the bare tree format and the
/// `{"config": ..., "tree": ...}` document `merge` writes.
fn load_tree(path: &Path) -> Result<MergeTree, Failure> {
    let value = load_json(path)?;
    let inner = match value.get("tree") {
        Some(tree) => tree.clone(),
        None => value,
    };
    let tree: MergeTree = serde_json::from_value(inner)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    tree.validate()
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(tree)
}

/// Reads a word map, accepting both the bare map format and the
/// `{"config": ..., "map": ...}` document `cut` writes.
fn load_map(path: &Path) -> Result<WordMap, Failure> {
    let value = load_json(path)?;
    let inner = match value.get("map") {
        Some(map) => map.clone(),
        None => value,
    };
    let doc: WordMapDoc = serde_json::from_value(inner)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    WordMap::new(doc.assign, doc.clusters)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Run identity block embedded in every JSON output: the command, the tool
/// version, the seed, the consumed settings, and command-specific fields.
fn provenance(
    command: &str,
    global: &GlobalOpts,
    criteria: Option<&CriteriaConfig>,
    extra: Value,
) -> Value {
    let mut doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": global.seed,
    });
    let fields = doc.as_object_mut().expect("provenance is an object");
    if let Some(cfg) = criteria {
        fields.insert(
            "criteria".into(),
            serde_json::to_value(cfg).expect("config serializes"),
        );
    }
    if let Value::Object(extra) = extra {
        fields.extend(extra);
    }
    doc
}

fn prep_json(prep: PrepFlags) -> Value {
    json!({ "l1_normalize": prep.l1_normalize, "sqrt": prep.sqrt })
}

fn emit_json(out: Option<&Path>, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("document serializes");
    text.push('\n');
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}
