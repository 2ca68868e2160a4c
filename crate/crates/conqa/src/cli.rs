//! Subcommand implementations behind the `conqa` binary: `augment`, `train`,
//! `eval`, `audit`, `gen-toy`.
//!
//! Every subcommand is deterministic given its configuration and inputs.
//! Errors split into usage/validation failures (exit code 1) and internal
//! failures such as output I/O (exit code 2).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audit::{audit_model, audit_predictions};
use crate::augment::{make_symmetric, make_transitive, sample_augmented, AugmentationOutput};
use crate::config::RunConfig;
use crate::data::{
    links_path_for, load_dataset, load_examples, load_links, save_examples, save_links, Dataset,
};
use crate::lexicon::{load_lexicon, AntonymLexicon};
use crate::model::{load_checkpoint, save_checkpoint};
use crate::toygen::{self, ToyConfig};
use crate::trainer::{evaluate_accuracy, save_history, train, Mode};

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config, unreadable or invalid inputs: exit code 1.
    Usage(String),
    /// Unexpected failures (output I/O, serialization): exit code 2.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

fn require<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing required path \"{key}\"")))
}

/// Loads a dataset with its links file: an explicit links path must exist;
/// the conventional sibling (`X.links.jsonl`) is used when present.
fn load_dataset_with_links(
    examples_path: &Path,
    links_path: &Option<PathBuf>,
) -> Result<Dataset, CliError> {
    let links = match links_path {
        Some(p) => Some(p.clone()),
        None => {
            let conventional = links_path_for(examples_path);
            conventional.exists().then_some(conventional)
        }
    };
    load_dataset(examples_path, links.as_deref()).map_err(usage)
}

fn load_lexicon_from(config: &RunConfig) -> Result<AntonymLexicon, CliError> {
    match &config.lexicon {
        Some(path) => load_lexicon(path, config.templates.as_deref()).map_err(usage),
        None => Ok(AntonymLexicon::builtin()),
    }
}

fn load_augmented(config: &RunConfig) -> Result<(AugmentationOutput, PathBuf), CliError> {
    let path = require(&config.augmented, "augmented")?;
    let examples = load_examples(path).map_err(usage)?;
    let links_path = config
        .augmented_links
        .clone()
        .unwrap_or_else(|| links_path_for(path));
    let links = if links_path.exists() {
        load_links(&links_path).map_err(usage)?
    } else {
        Vec::new()
    };
    Ok((AugmentationOutput::from_parts(examples, links), path.to_owned()))
}

/// Generates, samples, and writes the augmented examples and links.
pub fn cmd_augment(config: &RunConfig) -> Result<(), CliError> {
    let train_path = require(&config.train, "train")?;
    let dataset = load_dataset_with_links(train_path, &config.train_links)?;
    let lexicon = load_lexicon_from(config)?;
    let out_path = require(&config.augmented, "augmented")?;

    let candidates = make_symmetric(&dataset, &lexicon).merge(make_transitive(&dataset));
    let rate = config.sample_rate.unwrap_or(1.0);
    let seed = config.seed.unwrap_or(0);
    let n_candidates = candidates.len();
    let sampled_target = (rate.clamp(0.0, 1.0) * n_candidates as f64).floor() as usize;
    let kept = sample_augmented(&candidates, rate, seed, &dataset);

    save_examples(&kept.examples, out_path).map_err(internal)?;
    let links_path = config
        .augmented_links
        .clone()
        .unwrap_or_else(|| links_path_for(out_path));
    save_links(&kept.links, &links_path).map_err(internal)?;

    println!("candidates: {n_candidates}");
    println!("sampled: {sampled_target}");
    println!("deduped: {}", sampled_target - kept.len());
    println!("written: {}", kept.len());
    Ok(())
}

/// Trains under the configured mode and writes the checkpoint and history.
pub fn cmd_train(config: &RunConfig) -> Result<(), CliError> {
    let train_path = require(&config.train, "train")?;
    let dev_path = require(&config.dev, "dev")?;
    let checkpoint_path = require(&config.checkpoint, "checkpoint")?;
    let training = config.training_config();

    let train_set = load_dataset_with_links(train_path, &config.train_links)?;
    let dev_set = load_dataset_with_links(dev_path, &config.dev_links)?;

    let augmented = match training.mode {
        Mode::Da | Mode::DaReg => Some(load_augmented(config)?.0),
        Mode::Baseline | Mode::Reg => None,
    };

    let (params, history) =
        train(&training, &train_set, augmented.as_ref(), &dev_set).map_err(usage)?;

    save_checkpoint(&params, checkpoint_path).map_err(internal)?;
    let history_path = config.history.clone().unwrap_or_else(|| {
        let mut p = checkpoint_path.to_owned();
        p.set_extension("history.jsonl");
        p
    });
    save_history(&history, &history_path).map_err(internal)?;

    let last = history.epochs.last();
    let accuracy = last.map(|r| r.dev_accuracy).unwrap_or(0.0);
    let violation = last.map(|r| r.dev_violation).unwrap_or(0.0);
    println!("dev accuracy: {:.1}", accuracy * 100.0);
    println!("v_total: {violation:.1}");
    Ok(())
}

/// Prints accuracy (percentage, one decimal) of a checkpoint on a dataset.
pub fn cmd_eval(config: &RunConfig) -> Result<(), CliError> {
    let checkpoint_path = require(&config.checkpoint, "checkpoint")?;
    let dev_path = require(&config.dev, "dev")?;
    let params = load_checkpoint(checkpoint_path).map_err(usage)?;
    let dataset = load_dataset_with_links(dev_path, &config.dev_links)?;
    let accuracy = evaluate_accuracy(&params, &dataset).map_err(usage)?;
    println!("{:.1}", accuracy * 100.0);
    Ok(())
}

/// One line of a predictions file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionRecord {
    id: String,
    pred: usize,
    probs: Vec<f64>,
}

fn load_predictions(path: &Path) -> Result<HashMap<String, usize>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut predictions = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(line.trim()).map_err(|e| {
            CliError::Usage(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        predictions.insert(record.id, record.pred);
    }
    Ok(predictions)
}

/// Audits a checkpoint or a precomputed predictions file against a dataset's
/// links, writes the report, and prints `v_total`.
pub fn cmd_audit(config: &RunConfig) -> Result<(), CliError> {
    let dev_path = require(&config.dev, "dev")?;
    let report_path = require(&config.report, "report")?;
    let dataset = load_dataset_with_links(dev_path, &config.dev_links)?;

    let report = match (&config.checkpoint, &config.predictions) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "both checkpoint and predictions given; pass exactly one".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Usage(
                "neither checkpoint nor predictions given; pass exactly one".into(),
            ))
        }
        (Some(checkpoint), None) => {
            let params = load_checkpoint(checkpoint).map_err(usage)?;
            audit_model(&params, &dataset).map_err(usage)?
        }
        (None, Some(predictions)) => {
            let predictions = load_predictions(predictions)?;
            audit_predictions(&predictions, &dataset).map_err(usage)?
        }
    };

    let json = serde_json::to_string_pretty(&report).map_err(internal)?;
    std::fs::write(report_path, json).map_err(internal)?;
    println!("v_total: {:.1}", report.v_total);
    Ok(())
}

/// Generates the synthetic train/dev splits and writes all four files.
pub fn cmd_gen_toy(config: &RunConfig) -> Result<(), CliError> {
    let out = require(&config.out, "out")?;
    let defaults = ToyConfig::default();
    let toy = ToyConfig {
        train_size: config.size.unwrap_or(defaults.train_size),
        dev_size: config.dev_size.unwrap_or(defaults.dev_size),
        vocab_size: config.vocab_size.unwrap_or(defaults.vocab_size),
        seed: config.seed.unwrap_or(defaults.seed),
        format: config.format.unwrap_or(defaults.format),
        bias: config.bias.unwrap_or(defaults.bias),
        ..defaults
    };
    let (train_set, dev_set) = toygen::generate(&toy);

    let out = out.to_string_lossy();
    let write = |dataset: &Dataset, stem: &str| -> Result<(), CliError> {
        let examples_path = PathBuf::from(format!("{out}.{stem}.jsonl"));
        let links_path = PathBuf::from(format!("{out}.{stem}.links.jsonl"));
        save_examples(&dataset.examples, &examples_path).map_err(internal)?;
        save_links(&dataset.links, &links_path).map_err(internal)?;
        Ok(())
    };
    write(&train_set, "train")?;
    write(&dev_set, "dev")?;

    println!("train examples: {}", train_set.len());
    println!("train links: {}", train_set.links.len());
    println!("dev examples: {}", dev_set.len());
    println!("dev links: {}", dev_set.links.len());
    Ok(())
}
