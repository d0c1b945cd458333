use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use topolstm::datagen::generate_dataset;
use topolstm::eval::{evaluate_detailed, IcsbScorer, MetricsTable, DEFAULT_KS};
use topolstm::graph::{format_cascades, read_cascades, read_graph, Directedness, LoadedGraph};
use topolstm::icsb::fit_static_bernoulli;
use topolstm::par::{self, Parallelism};
use topolstm::trainer::{initial_model, split_dataset, train_from, TrainConfig};
use topolstm::{Error, Model, ModelConfig, ScoreMode};

mod presets;

const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(
    name = "topolstm",
    version,
    about = "Topology-aware LSTM for next-activation prediction in information cascades",
    after_help = "File formats:\n  \
        graph     one `src dst` edge per line; a lone label declares an isolated node; `#` starts a comment\n  \
        cascades  one cascade per line, node labels in activation order\n\n\
        Exit codes: 0 success, 2 usage or data error, 3 training diverged, 4 artifact mismatch"
)]
struct Cli {
    /// Log filter for stderr (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info", env = "TOPOLSTM_LOG")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic graph plus independent-cascade simulations.
    Generate(GenerateArgs),
    /// Split cascades, train a model and write the best checkpoint.
    Train(TrainArgs),
    /// Rank test cascades with a checkpoint (and optionally the IC-SB baseline).
    Evaluate(EvaluateArgs),
    /// Rank the likely next activations after a partial cascade.
    Predict(PredictArgs),
}

#[derive(Args)]
struct WorkerArgs {
    /// Worker threads; 0 uses every available core.
    #[arg(long, env = "TOPOLSTM_WORKERS", default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct GenerateArgs {
    /// Built-in configuration (chain-deterministic, desk-default).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// JSON file with a full generator configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreModeArg {
    AllActive,
    PrecedentOnly,
}

impl From<ScoreModeArg> for ScoreMode {
    fn from(m: ScoreModeArg) -> Self {
        match m {
            ScoreModeArg::AllActive => ScoreMode::AllActive,
            ScoreModeArg::PrecedentOnly => ScoreMode::PrecedentOnly,
        }
    }
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file.
    #[arg(long)]
    graph: PathBuf,
    /// Read every edge in both directions.
    #[arg(long)]
    undirected: bool,
}

impl GraphArgs {
    fn load(&self) -> topolstm::Result<LoadedGraph> {
        let dir = if self.undirected {
            Directedness::Undirected
        } else {
            Directedness::Directed
        };
        read_graph(&self.graph, dir)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Cascade file; split into train, validation and test.
    #[arg(long)]
    cascades: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON file with `model` and `train` sections; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hidden dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    score_mode: Option<ScoreModeArg>,
    /// L2 trade-off.
    #[arg(long)]
    lambda: Option<f64>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Cascades per mini-batch.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Maximum epochs; 0 saves the initial model.
    #[arg(long)]
    epochs: Option<usize>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Global gradient-norm cap.
    #[arg(long)]
    clip: Option<f64>,
    /// Fixed reduction order; reruns produce identical checkpoints and reports.
    #[arg(long)]
    deterministic: bool,
    /// Fraction of cascades kept for training (the rest is the test split).
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Fraction of the training cascades held out for validation.
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[command(flatten)]
    workers: WorkerArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Icsb,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    graph: GraphArgs,
    /// Test cascades.
    #[arg(long)]
    cascades: PathBuf,
    /// Cutoffs for MAP@k and Hits@k.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS)]
    ks: Vec<usize>,
    /// Also score a baseline on the same instances.
    #[arg(long, requires = "train_cascades")]
    baseline: Option<Baseline>,
    /// Cascades the baseline is fitted on.
    #[arg(long)]
    train_cascades: Option<PathBuf>,
    /// Directory for metrics.json, metrics.txt and metrics_by_length.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    workers: WorkerArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    graph: GraphArgs,
    /// Active nodes in activation order.
    #[arg(long, num_args = 1.., required = true)]
    prefix: Vec<String>,
    /// Number of candidates to print.
    #[arg(long, default_value_t = 10)]
    top_n: usize,
}

/// Configuration file accepted by `train --config`.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    model: ModelFile,
    train: Option<TrainConfig>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ModelFile {
    hidden_dim: Option<usize>,
    score_mode: Option<ScoreMode>,
}

const DEFAULT_DIM: usize = 32;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => {
            let workers = a.workers.workers;
            par::with_workers(workers, move || cmd_train(a))
        }
        Command::Evaluate(a) => {
            let workers = a.workers.workers;
            par::with_workers(workers, move || cmd_evaluate(a))
        }
        Command::Predict(a) => cmd_predict(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Diverged { .. } | Error::NonFinite(_) => EXIT_DIVERGED,
        Error::Checkpoint(_) | Error::Shape { .. } => EXIT_MISMATCH,
        _ => EXIT_USAGE,
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> topolstm::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> topolstm::Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Argument(format!("{}: {e}", path.display())))
}

fn cmd_generate(args: GenerateArgs) -> topolstm::Result<()> {
    let mut config = match (&args.preset, &args.config) {
        (Some(name), _) => presets::load(name)?,
        (None, Some(path)) => read_json(path)?,
        (None, None) => return Err(Error::Argument("pass --preset or --config".into())),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let data = generate_dataset(&config)?;
    data.write_to(&args.out)?;
    log::info!(
        "wrote {} nodes, {} edges, {} cascades to {}",
        data.graph.node_count(),
        data.graph.edge_count(),
        data.cascades.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> topolstm::Result<()> {
    let file: TrainFile = match &args.config {
        Some(path) => read_json(path)?,
        None => TrainFile::default(),
    };
    let mut tc = file.train.unwrap_or_default();
    if let Some(v) = args.lambda {
        tc.lambda = v;
    }
    if let Some(v) = args.lr {
        tc.adam.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        tc.batch_size = v;
    }
    if let Some(v) = args.epochs {
        tc.max_epochs = v;
    }
    if let Some(v) = args.patience {
        tc.patience = v;
    }
    if let Some(v) = args.seed {
        tc.seed = v;
    }
    if args.clip.is_some() {
        tc.clip_norm = args.clip;
    }
    if let Some(v) = args.train_fraction {
        tc.split.train_fraction = v;
    }
    if let Some(v) = args.validation_fraction {
        tc.split.validation_fraction = v;
    }
    tc.deterministic |= args.deterministic;
    tc.parallelism = Parallelism::Parallel;
    tc.validate()?;

    let loaded = args.graph.load()?;
    let cascades = read_cascades(&args.cascades, &loaded.labels)?;
    let mut mc = ModelConfig::new(
        args.dim.or(file.model.hidden_dim).unwrap_or(DEFAULT_DIM),
        loaded.graph.node_count(),
    );
    if let Some(mode) = args
        .score_mode
        .map(ScoreMode::from)
        .or(file.model.score_mode)
    {
        mc = mc.with_score_mode(mode);
    }
    mc.validate()?;

    let split = split_dataset(&cascades, tc.split, tc.seed)?;
    fs::create_dir_all(&args.out)?;
    let labels = &loaded.labels;
    fs::write(
        args.out.join("train.txt"),
        format_cascades(&split.train, labels),
    )?;
    fs::write(
        args.out.join("validation.txt"),
        format_cascades(&split.validation, labels),
    )?;
    fs::write(
        args.out.join("test.txt"),
        format_cascades(&split.test, labels),
    )?;
    fs::write(args.out.join("labels.tsv"), labels.to_tsv())?;

    let echo = json!({
        "command": "train",
        "graph": args.graph.graph,
        "undirected": args.graph.undirected,
        "cascades": args.cascades,
        "model": mc,
        "train": tc,
        "split_sizes": {
            "train": split.train.len(),
            "validation": split.validation.len(),
            "test": split.test.len(),
        },
    });
    log::info!(
        "training on {} cascades ({} validation, {} test held out)",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );

    let model = initial_model(mc, tc.seed)?;
    let mut log_file = fs::File::create(args.out.join("train.log"))?;
    let outcome = train_from(
        model,
        &loaded.graph,
        &split.train,
        &split.validation,
        &tc,
        |record| {
            let _ = writeln!(log_file, "{}", record.log_line(!tc.deterministic));
        },
    );
    let (best, report) = match outcome {
        Ok(v) => v,
        Err(e @ Error::Diverged { .. }) => {
            write_json(
                &args.out.join("report.json"),
                &json!({
                    "tool_version": topolstm::VERSION,
                    "config": echo,
                    "error": e.to_string(),
                }),
            )?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    best.save(args.out.join("model.ckpt"), labels, &echo)?;
    write_json(
        &args.out.join("report.json"),
        &json!({
            "tool_version": topolstm::VERSION,
            "config": echo,
            "report": report.to_json(!tc.deterministic),
        }),
    )?;
    log::info!(
        "best epoch {} validation loss {:.6}, final train loss {:.6}",
        report.best_epoch,
        report.best_validation_loss,
        report.final_train_nll
    );
    Ok(())
}

/// Loads a checkpoint and checks it was trained on a graph with the same
/// node labels.
fn load_checkpoint(path: &Path, loaded: &LoadedGraph) -> topolstm::Result<Model> {
    let ckpt = Model::load(path)?;
    if ckpt.labels != loaded.labels {
        return Err(Error::Checkpoint(format!(
            "{} was trained on {} nodes that do not match the graph's {} nodes",
            path.display(),
            ckpt.labels.len(),
            loaded.labels.len()
        )));
    }
    Ok(ckpt.model)
}

fn cmd_evaluate(args: EvaluateArgs) -> topolstm::Result<()> {
    let loaded = args.graph.load()?;
    let model = load_checkpoint(&args.checkpoint, &loaded)?;
    let test = read_cascades(&args.cascades, &loaded.labels)?;
    if test.is_empty() {
        return Err(Error::Argument(format!(
            "{} contains no cascades",
            args.cascades.display()
        )));
    }
    let mode = Parallelism::Parallel;
    let detailed = evaluate_detailed(&model, &loaded.graph, &test, &args.ks, mode)?;

    let baseline = match (args.baseline, &args.train_cascades) {
        (Some(Baseline::Icsb), Some(path)) => {
            let train = read_cascades(path, &loaded.labels)?;
            let probs = fit_static_bernoulli(&loaded.graph, &train)?;
            Some(evaluate_detailed(
                &IcsbScorer { probs },
                &loaded.graph,
                &test,
                &args.ks,
                mode,
            )?)
        }
        _ => None,
    };

    let mut rows: Vec<(&str, &MetricsTable)> = vec![("Topo-LSTM", &detailed.overall)];
    if let Some(b) = &baseline {
        rows.push(("IC-SB", &b.overall));
    }
    let table = MetricsTable::format_table(&rows);
    print!("{table}");

    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        let echo = json!({
            "command": "evaluate",
            "checkpoint": args.checkpoint,
            "graph": args.graph.graph,
            "undirected": args.graph.undirected,
            "cascades": args.cascades,
            "ks": args.ks,
            "baseline": baseline.as_ref().map(|_| "icsb"),
            "train_cascades": args.train_cascades,
        });
        let mut doc = json!({
            "tool_version": topolstm::VERSION,
            "config": echo,
            "averaging": "micro: every prediction step of every test cascade is one instance",
            "instances": detailed.overall.instances,
            "model": detailed.overall.entries(),
        });
        if let Some(b) = &baseline {
            doc["baseline"] = json!(b.overall.entries());
        }
        write_json(&out.join("metrics.json"), &doc)?;
        fs::write(
            out.join("metrics.txt"),
            format!(
                "# micro-averaged over {} instances\n{table}",
                detailed.overall.instances
            ),
        )?;
        fs::write(out.join("metrics_by_length.csv"), detailed.length_csv())?;
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> topolstm::Result<()> {
    let loaded = args.graph.load()?;
    let model = load_checkpoint(&args.checkpoint, &loaded)?;
    let prefix_text: Vec<&str> = args
        .prefix
        .iter()
        .flat_map(|s| s.split(|c: char| c.is_whitespace() || c == ','))
        .filter(|s| !s.is_empty())
        .collect();
    let unknown: Vec<String> = prefix_text
        .iter()
        .filter(|l| loaded.labels.get(l).is_none())
        .map(|l| l.to_string())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownNodes(unknown));
    }
    let prefix: Vec<_> = prefix_text
        .iter()
        .map(|l| loaded.labels.get(l).expect("checked above"))
        .collect();
    let ranked = model.predict_next(&loaded.graph, &prefix)?;
    let mut out = std::io::stdout().lock();
    for (v, p) in ranked.iter().take(args.top_n) {
        writeln!(out, "{}\t{p:.6}", loaded.labels.label(*v))?;
    }
    Ok(())
}
