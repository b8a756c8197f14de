use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pkge_core::dataset::build_filter;
use pkge_core::pca::principal_components;
use pkge_core::{evaluate, fit, Checkpoint, Dataset, Error, ScoreKind, TrainConfig};

#[derive(Parser)]
#[command(
    name = "pkge",
    version,
    about = "Knowledge-graph embeddings trained by closed-form orthogonal Procrustes analysis"
)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "PKGE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Evaluate a checkpoint with filtered ranking.
    Eval(EvalArgs),
    /// Print entity, relation and split counts.
    Stats(DataArgs),
    /// Write principal-component coordinates of every entity as CSV.
    ExportPca(PcaArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, Error> {
        Dataset::load(&self.train, &self.valid, &self.test)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Score {
    Squared,
    Unsquared,
}

impl From<Score> for ScoreKind {
    fn from(s: Score) -> Self {
        match s {
            Score::Squared => ScoreKind::Squared,
            Score::Unsquared => ScoreKind::Unsquared,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Embedding width.
    #[arg(long, default_value_t = 2000)]
    d: usize,
    /// Subspace width; must divide --d.
    #[arg(long, default_value_t = 20)]
    ds: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 2000)]
    max_epochs: usize,
    /// Validate every this many epochs and stop once MRR stops improving.
    #[arg(long, default_value_t = 100)]
    eval_every: usize,
    /// Train entities with the logistic negative-sampling loss.
    #[arg(long)]
    neg_sampling: bool,
    /// Shuffled mini-batches instead of one full batch per epoch.
    #[arg(long)]
    trad_batch: bool,
    #[arg(long, requires = "trad_batch")]
    batch_size: Option<usize>,
    /// Corruptions per positive.
    #[arg(long, requires = "neg_sampling")]
    negatives: Option<usize>,
    #[arg(long, requires = "neg_sampling")]
    margin: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip centring and length normalisation after each epoch.
    #[arg(long)]
    no_spherise: bool,
    /// Distance used for validation ranking.
    #[arg(long, value_enum, default_value_t = Score::Squared)]
    score: Score,
    /// Checkpoint path.
    #[arg(long, default_value = "model.pkge")]
    out: PathBuf,
    /// Per-epoch metrics as JSON lines.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Valid,
    Test,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    split: Split,
    #[arg(long, value_enum, default_value_t = Score::Squared)]
    score: Score,
}

#[derive(Args)]
struct PcaArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    components: usize,
    /// Training split used to label rows with entity names instead of ids.
    #[arg(long, requires_all = ["valid", "test"])]
    train: Option<PathBuf>,
    #[arg(long, requires_all = ["train", "test"])]
    valid: Option<PathBuf>,
    #[arg(long, requires_all = ["train", "valid"])]
    test: Option<PathBuf>,
}

enum Failure {
    /// Bad invocation; exit code 2.
    Usage(String),
    /// Runtime failure; exit code 1.
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Stats(args) => stats(args),
        Command::ExportPca(args) => export_pca(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        dim: args.d,
        sub_dim: args.ds,
        learning_rate: args.lr,
        max_epochs: args.max_epochs,
        eval_every: args.eval_every,
        negative_sampling: args.neg_sampling,
        traditional_batch: args.trad_batch,
        batch_size: args.batch_size.unwrap_or(defaults.batch_size),
        negatives: args.negatives.unwrap_or(defaults.negatives),
        margin: args.margin.unwrap_or(defaults.margin),
        seed: args.seed,
        spherise: !args.no_spherise,
        score: args.score.into(),
        ..defaults
    };
    config
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let data = args.data.load()?;

    let mut metrics = args
        .metrics
        .as_deref()
        .map(|p| File::create(p).map(BufWriter::new))
        .transpose()?;
    let mut write_error = None;
    let outcome = fit(&config, &data, |record| {
        if let Some(mrr) = record.valid_mrr {
            eprintln!(
                "epoch {:>5}  loss {:.6}  valid mrr {mrr:.4}",
                record.epoch, record.loss
            );
        }
        if let (Some(out), None) = (metrics.as_mut(), write_error.as_ref()) {
            let line = serde_json::to_string(record).expect("record serialises");
            if let Err(e) = writeln!(out, "{line}") {
                write_error = Some(e);
            }
        }
    })?;
    if let Some(e) = write_error {
        return Err(e.into());
    }
    if let Some(mut out) = metrics {
        out.flush()?;
    }

    Checkpoint::new(outcome.state.entities, outcome.state.relations)?.save(&args.out)?;
    let summary = serde_json::json!({
        "checkpoint": args.out,
        "stopped_at": outcome.stopped_at,
        "best_epoch": outcome.state.best_epoch,
        "best_valid_mrr": outcome.state.best_valid_mrr,
        "evaluations": outcome.evaluations,
    });
    println!("{summary}");
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let data = args.data.load()?;
    if checkpoint.entities.n_entities() != data.n_entities()
        || checkpoint.relations.n_relations() != data.n_relations()
    {
        return Err(Failure::Run(format!(
            "checkpoint holds {} entities and {} relations, the data has {} and {}",
            checkpoint.entities.n_entities(),
            checkpoint.relations.n_relations(),
            data.n_entities(),
            data.n_relations()
        )));
    }
    let split = match args.split {
        Split::Valid => &data.store.valid,
        Split::Test => &data.store.test,
    };
    let report = evaluate(
        &checkpoint.entities,
        &checkpoint.relations,
        split,
        &build_filter(&data.store),
        args.score.into(),
    )?;
    println!("{}", report.to_json());
    Ok(())
}

fn stats(args: DataArgs) -> Result<(), Failure> {
    let data = args.load()?;
    println!(
        "{}",
        serde_json::to_string(&data.stats()).expect("stats serialise")
    );
    Ok(())
}

fn export_pca(args: PcaArgs) -> Result<(), Failure> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let d = checkpoint.entities.dim();
    if args.components == 0 || args.components > d {
        return Err(Failure::Usage(format!(
            "--components must be between 1 and the embedding width {d}, got {}",
            args.components
        )));
    }
    let names = match (&args.train, &args.valid, &args.test) {
        (Some(train), Some(valid), Some(test)) => {
            let data = Dataset::load(train, valid, test)?;
            if data.n_entities() != checkpoint.entities.n_entities() {
                return Err(Failure::Run(format!(
                    "checkpoint holds {} entities, the data has {}",
                    checkpoint.entities.n_entities(),
                    data.n_entities()
                )));
            }
            Some(data.vocab.entities.names().to_vec())
        }
        _ => None,
    };
    let pca = principal_components(&checkpoint.entities, args.components)?;
    write_csv(&args.out, &pca.projections, names.as_deref())?;
    Ok(())
}

fn write_csv(
    path: &Path,
    projections: &pkge_core::DenseMatrix,
    names: Option<&[String]>,
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "entity")?;
    for c in 1..=projections.cols() {
        write!(out, ",pc{c}")?;
    }
    writeln!(out)?;
    for (i, row) in projections.row_iter().enumerate() {
        match names {
            Some(n) => write!(out, "{}", csv_field(&n[i]))?,
            None => write!(out, "{i}")?,
        }
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// Quotes a field that contains a separator, quote or line break.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
