use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use conqa::cli::{cmd_audit, cmd_augment, cmd_eval, cmd_gen_toy, cmd_train, CliError};
use conqa::config::RunConfig;
use conqa::data::TaskFormat;
use conqa::trainer::Mode;

/// Consistency toolkit for comparison question answering.
#[derive(Parser)]
#[command(name = "conqa", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate symmetric/transitive augmented examples and links.
    Augment(AugmentArgs),
    /// Train a classifier under one of the ablation modes.
    Train(TrainArgs),
    /// Print a checkpoint's accuracy on a dataset.
    Eval(EvalArgs),
    /// Measure consistency violations of a model or prediction file.
    Audit(AuditArgs),
    /// Generate a synthetic comparison-QA dataset.
    GenToy(GenToyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Key = value configuration file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AugmentArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Input examples (JSONL).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Input links; defaults to the `.links.jsonl` sibling when present.
    #[arg(long)]
    train_links: Option<PathBuf>,
    /// Antonym dictionary TSV; bundled dictionary when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Negation templates file.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Output path for augmented examples (JSONL).
    #[arg(long)]
    augmented: Option<PathBuf>,
    /// Output path for augmented links.
    #[arg(long)]
    augmented_links: Option<PathBuf>,
    /// Fraction of candidates to keep, in [0, 1].
    #[arg(long)]
    sample_rate: Option<f64>,
}

impl AugmentArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            seed: self.common.seed,
            train: self.train,
            train_links: self.train_links,
            lexicon: self.lexicon,
            templates: self.templates,
            augmented: self.augmented,
            augmented_links: self.augmented_links,
            sample_rate: self.sample_rate,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    train_links: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    dev_links: Option<PathBuf>,
    /// Augmented examples from `conqa augment` (required in da/da_reg).
    #[arg(long)]
    augmented: Option<PathBuf>,
    #[arg(long)]
    augmented_links: Option<PathBuf>,
    /// Output checkpoint path (JSON).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output history path (JSONL); defaults next to the checkpoint.
    #[arg(long)]
    history: Option<PathBuf>,
    /// baseline | da | reg | da_reg.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lambda_sym: Option<f64>,
    #[arg(long)]
    lambda_trans: Option<f64>,
    /// Annealing epochs: consistency weights are zero before this epoch.
    #[arg(long)]
    tau: Option<usize>,
    /// Feature dimension (power of two).
    #[arg(long)]
    dim: Option<usize>,
    /// Whether augmented examples also enter the task loss.
    #[arg(long)]
    aug_in_task_loss: Option<bool>,
    /// Early stopping patience in epochs.
    #[arg(long)]
    patience: Option<usize>,
}

impl TrainArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            seed: self.common.seed,
            train: self.train,
            train_links: self.train_links,
            dev: self.dev,
            dev_links: self.dev_links,
            augmented: self.augmented,
            augmented_links: self.augmented_links,
            checkpoint: self.checkpoint,
            history: self.history,
            mode: self.mode,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            lambda_sym: self.lambda_sym,
            lambda_trans: self.lambda_trans,
            tau: self.tau,
            dim: self.dim,
            aug_in_task_loss: self.aug_in_task_loss,
            patience: self.patience,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset to evaluate (JSONL).
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    dev_links: Option<PathBuf>,
}

impl EvalArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            seed: self.common.seed,
            checkpoint: self.checkpoint,
            dev: self.dev,
            dev_links: self.dev_links,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Model checkpoint; mutually exclusive with --predictions.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Precomputed predictions (JSONL); mutually exclusive with --checkpoint.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Dataset with links to audit against.
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    dev_links: Option<PathBuf>,
    /// Output report path (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

impl AuditArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            seed: self.common.seed,
            checkpoint: self.checkpoint,
            predictions: self.predictions,
            dev: self.dev,
            dev_links: self.dev_links,
            report: self.report,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct GenToyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output prefix: writes {out}.train.jsonl, {out}.train.links.jsonl,
    /// {out}.dev.jsonl, {out}.dev.links.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training split size.
    #[arg(long)]
    size: Option<usize>,
    /// Held-out dev split size.
    #[arg(long)]
    dev_size: Option<usize>,
    /// Number of distinct nouns/entities.
    #[arg(long)]
    vocab_size: Option<usize>,
    /// classification | choice.
    #[arg(long, value_parser = parse_format)]
    format: Option<TaskFormat>,
    /// Surface bias of the training split, in [0, 1].
    #[arg(long)]
    bias: Option<f64>,
}

fn parse_format(value: &str) -> Result<TaskFormat, String> {
    match value {
        "classification" => Ok(TaskFormat::Classification),
        "choice" => Ok(TaskFormat::MultipleChoice),
        other => Err(format!(
            "unknown format \"{other}\" (expected classification or choice)"
        )),
    }
}

impl GenToyArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            seed: self.common.seed,
            out: self.out,
            size: self.size,
            dev_size: self.dev_size,
            vocab_size: self.vocab_size,
            format: self.format,
            bias: self.bias,
            ..RunConfig::default()
        }
    }
}

fn resolve(config_path: &Option<PathBuf>, flags: RunConfig) -> Result<RunConfig, CliError> {
    let base = match config_path {
        Some(path) => RunConfig::from_file(path).map_err(|e| CliError::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    Ok(base.overlay(flags))
}

fn run() -> Result<(), CliError> {
    let cli = Cli::try_parse().map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            print!("{e}");
            CliError::Usage(String::new())
        }
        _ => CliError::Usage(e.to_string()),
    });
    let cli = match cli {
        Ok(cli) => cli,
        Err(e) if e.message().is_empty() => return Ok(()),
        Err(e) => return Err(e),
    };
    match cli.command {
        Command::Augment(args) => {
            let config = resolve(&args.common.config.clone(), args.into_config())?;
            cmd_augment(&config)
        }
        Command::Train(args) => {
            let config = resolve(&args.common.config.clone(), args.into_config())?;
            cmd_train(&config)
        }
        Command::Eval(args) => {
            let config = resolve(&args.common.config.clone(), args.into_config())?;
            cmd_eval(&config)
        }
        Command::Audit(args) => {
            let config = resolve(&args.common.config.clone(), args.into_config())?;
            cmd_audit(&config)
        }
        Command::GenToy(args) => {
            let config = resolve(&args.common.config.clone(), args.into_config())?;
            cmd_gen_toy(&config)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.message().is_empty() {
                eprintln!("error: {}", e.message());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
