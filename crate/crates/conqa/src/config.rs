//! Flat `key = value` run configuration shared by all subcommands.
//!
//! Files are UTF-8 with `#` comments; unknown keys are rejected. Values from
//! command-line flags override file values, which override built-in
//! defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::consistency::ConsistencyWeights;
use crate::data::TaskFormat;
use crate::trainer::{Mode, TrainingConfig};

/// Every setting a subcommand may need; unset fields fall back to defaults
/// at use time. See the module docs for precedence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lambda_sym: Option<f64>,
    pub lambda_trans: Option<f64>,
    pub tau: Option<usize>,
    pub sample_rate: Option<f64>,
    pub seed: Option<u64>,
    pub aug_in_task_loss: Option<bool>,
    pub dim: Option<usize>,
    pub patience: Option<usize>,

    pub train: Option<PathBuf>,
    pub train_links: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub dev_links: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub augmented: Option<PathBuf>,
    pub augmented_links: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub predictions: Option<PathBuf>,

    pub out: Option<PathBuf>,
    pub size: Option<usize>,
    pub dev_size: Option<usize>,
    pub vocab_size: Option<usize>,
    pub format: Option<TaskFormat>,
    pub bias: Option<f64>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `key = value`, got \"{content}\"")]
    Syntax {
        path: PathBuf,
        line: usize,
        content: String,
    },
    #[error("{path}:{line}: unknown key \"{key}\"")]
    UnknownKey {
        path: PathBuf,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: bad value for \"{key}\": {message}")]
    BadValue {
        path: PathBuf,
        line: usize,
        key: String,
        message: String,
    },
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

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("expected true/false, got \"{other}\"")),
    }
}

impl RunConfig {
    /// Parses a config file. Every key is checked; unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut config = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: path.to_owned(),
                line: lineno + 1,
                content: line.to_owned(),
            })?;
            let key = key.trim();
            let value = value.trim();
            config
                .set(key, value)
                .map_err(|message| match message {
                    SetError::Unknown => ConfigError::UnknownKey {
                        path: path.to_owned(),
                        line: lineno + 1,
                        key: key.to_owned(),
                    },
                    SetError::Bad(message) => ConfigError::BadValue {
                        path: path.to_owned(),
                        line: lineno + 1,
                        key: key.to_owned(),
                        message,
                    },
                })?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), SetError> {
        fn num<T: std::str::FromStr>(value: &str) -> Result<T, SetError>
        where
            T::Err: fmt::Display,
        {
            value.parse::<T>().map_err(|e| SetError::Bad(e.to_string()))
        }
        match key {
            "mode" => self.mode = Some(value.parse().map_err(SetError::Bad)?),
            "epochs" => self.epochs = Some(num(value)?),
            "batch_size" => self.batch_size = Some(num(value)?),
            "learning_rate" => self.learning_rate = Some(num(value)?),
            "lambda_sym" => self.lambda_sym = Some(num(value)?),
            "lambda_trans" => self.lambda_trans = Some(num(value)?),
            "tau" => self.tau = Some(num(value)?),
            "sample_rate" => {
                let rate: f64 = num(value)?;
                if !(0.0..=1.0).contains(&rate) {
                    return Err(SetError::Bad("sample_rate must be in [0, 1]".into()));
                }
                self.sample_rate = Some(rate);
            }
            "seed" => self.seed = Some(num(value)?),
            "aug_in_task_loss" => {
                self.aug_in_task_loss = Some(parse_bool(value).map_err(SetError::Bad)?)
            }
            "dim" => self.dim = Some(num(value)?),
            "patience" => self.patience = Some(num(value)?),
            "train" => self.train = Some(value.into()),
            "train_links" => self.train_links = Some(value.into()),
            "dev" => self.dev = Some(value.into()),
            "dev_links" => self.dev_links = Some(value.into()),
            "lexicon" => self.lexicon = Some(value.into()),
            "templates" => self.templates = Some(value.into()),
            "augmented" => self.augmented = Some(value.into()),
            "augmented_links" => self.augmented_links = Some(value.into()),
            "checkpoint" => self.checkpoint = Some(value.into()),
            "history" => self.history = Some(value.into()),
            "report" => self.report = Some(value.into()),
            "predictions" => self.predictions = Some(value.into()),
            "out" => self.out = Some(value.into()),
            "size" => self.size = Some(num(value)?),
            "dev_size" => self.dev_size = Some(num(value)?),
            "vocab_size" => self.vocab_size = Some(num(value)?),
            "format" => self.format = Some(parse_format(value).map_err(SetError::Bad)?),
            "bias" => self.bias = Some(num(value)?),
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }

    /// Merges `overrides` on top of `self`: set fields win.
    pub fn overlay(mut self, overrides: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($field:ident),* $(,)?) => {
                $(if overrides.$field.is_some() { self.$field = overrides.$field; })*
            };
        }
        take!(
            mode, epochs, batch_size, learning_rate, lambda_sym, lambda_trans, tau, sample_rate,
            seed, aug_in_task_loss, dim, patience, train, train_links, dev, dev_links, lexicon,
            templates, augmented, augmented_links, checkpoint, history, report, predictions, out,
            size, dev_size, vocab_size, format, bias,
        );
        self
    }

    /// Concrete training settings with defaults applied.
    pub fn training_config(&self) -> TrainingConfig {
        let defaults = TrainingConfig::default();
        TrainingConfig {
            epochs: self.epochs.unwrap_or(defaults.epochs),
            batch_size: self.batch_size.unwrap_or(defaults.batch_size).max(1),
            learning_rate: self.learning_rate.unwrap_or(defaults.learning_rate),
            weights: ConsistencyWeights {
                lambda_sym: self.lambda_sym.unwrap_or(defaults.weights.lambda_sym),
                lambda_trans: self.lambda_trans.unwrap_or(defaults.weights.lambda_trans),
                tau: self.tau.unwrap_or(defaults.weights.tau),
            },
            sample_rate: self.sample_rate.unwrap_or(defaults.sample_rate),
            seed: self.seed.unwrap_or(defaults.seed),
            mode: self.mode.unwrap_or(defaults.mode),
            aug_in_task_loss: self.aug_in_task_loss.unwrap_or(defaults.aug_in_task_loss),
            dim: self.dim.unwrap_or(defaults.dim),
            patience: self.patience,
        }
    }
}

enum SetError {
    Unknown,
    Bad(String),
}
