//! The training loop: shuffled mini-batch Adam on the combined objective,
//! with link members co-located in one batch, plus accuracy evaluation.
//!
//! Training is sequential and fully deterministic: identical (config,
//! datasets) produce bitwise-identical parameters and history. The sampled
//! augmented set is fixed before training and reused every epoch.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit;
use crate::augment::AugmentationOutput;
use crate::consistency::{
    combined_loss_and_grad, BatchMember, ConsistencyWeights, LinkedBatch,
};
use crate::data::{validate, ConsistencyLink, Dataset, Example, Origin, TaskFormat, Violation};
use crate::model::{
    adam_step, featurize_example, forward, Featurized, ModelError, Parameters,
};

/// Ablation mode: plain task loss, data augmentation, consistency
/// regularization over existing links, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "da")]
    Da,
    #[serde(rename = "reg")]
    Reg,
    #[serde(rename = "da_reg")]
    DaReg,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Mode::Baseline => "baseline",
            Mode::Da => "da",
            Mode::Reg => "reg",
            Mode::DaReg => "da_reg",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "da" => Ok(Mode::Da),
            "reg" => Ok(Mode::Reg),
            "da_reg" => Ok(Mode::DaReg),
            other => Err(format!(
                "unknown mode \"{other}\" (expected baseline, da, reg, or da_reg)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weights: ConsistencyWeights,
    pub sample_rate: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Whether augmented examples also enter the task term (they carry gold
    /// labels either way).
    pub aug_in_task_loss: bool,
    /// Feature dimension (power of two).
    pub dim: usize,
    /// Optional early stopping: stop after this many epochs without a dev
    /// accuracy improvement.
    pub patience: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 40,
            batch_size: 32,
            learning_rate: 0.002,
            weights: ConsistencyWeights::default(),
            sample_rate: 1.0,
            seed: 0,
            mode: Mode::Baseline,
            aug_in_task_loss: true,
            dim: 1 << 16,
            patience: None,
        }
    }
}

/// Per-epoch record: losses (raw sym/trans even when their weight is zero),
/// effective weights, and dev metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_loss: f64,
    pub sym_loss: f64,
    pub trans_loss: f64,
    pub combined_loss: f64,
    pub lambda_sym_eff: f64,
    pub lambda_trans_eff: f64,
    pub dev_accuracy: f64,
    pub dev_violation: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("mode `reg` requires the training dataset to contain links")]
    RegNeedsLinks,
    #[error("mode `{0}` requires augmented data")]
    NeedsAugmented(Mode),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("examples mix classification and choice formats")]
    MixedFormats,
    #[error("training data invalid after merging augmentation: {0}")]
    InvalidMerged(Violation),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("audit during training failed: {0}")]
    Audit(#[from] audit::AuditError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Number of answer classes the parameter matrix needs for this data.
fn num_classes(examples: &[Example]) -> Result<usize, TrainError> {
    let first = examples.first().ok_or(TrainError::EmptyDataset)?;
    if examples.iter().any(|e| e.format != first.format) {
        return Err(TrainError::MixedFormats);
    }
    Ok(match first.format {
        TaskFormat::Classification => first.candidates.len(),
        TaskFormat::MultipleChoice => 1,
    })
}

/// Connected components of examples under link co-membership, in first-seen
/// order. Each group must be batched together so pairwise losses can see all
/// of a link's members.
pub fn link_groups(examples: &[Example], links: &[ConsistencyLink]) -> Vec<Vec<usize>> {
    let index: HashMap<&str, usize> = examples
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    let mut parent: Vec<usize> = (0..examples.len()).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut at = i;
        while parent[at] != root {
            let next = parent[at];
            parent[at] = root;
            at = next;
        }
        root
    }
    for link in links {
        let mut members = link.members.iter().filter_map(|m| index.get(m.as_str()));
        if let Some(&first) = members.next() {
            let root = find(&mut parent, first);
            for &m in members {
                let other = find(&mut parent, m);
                parent[other] = root;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root: HashMap<usize, usize> = HashMap::new();
    for i in 0..examples.len() {
        let root = find(&mut parent, i);
        match group_of_root.get(&root) {
            Some(&g) => groups[g].push(i),
            None => {
                group_of_root.insert(root, groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&(epoch as u64).to_le_bytes());
    bytes[16..24].copy_from_slice(b"conqa-ep");
    ChaCha8Rng::from_seed(bytes)
}

/// Deterministic batch plan for one epoch: groups are shuffled under
/// (seed, epoch) and packed greedily until a batch reaches `batch_size`
/// examples (groups are never split).
pub fn epoch_batches(
    groups: &[Vec<usize>],
    seed: u64,
    epoch: usize,
    batch_size: usize,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut epoch_rng(seed, epoch));
    let mut batches = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for g in order {
        current.extend(groups[g].iter().copied());
        if current.len() >= batch_size.max(1) {
            batches.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches
}

/// The working set a run trains on: examples, active links, cached features.
pub struct WorkingSet {
    pub examples: Vec<Example>,
    pub links: Vec<ConsistencyLink>,
    pub feats: Vec<Featurized>,
    pub num_classes: usize,
}

/// Assembles and validates the examples and links a mode trains on.
pub fn build_working_set(
    config: &TrainingConfig,
    train: &Dataset,
    augmented: Option<&AugmentationOutput>,
) -> Result<WorkingSet, TrainError> {
    match config.mode {
        Mode::Reg => {
            if train.links.is_empty() {
                return Err(TrainError::RegNeedsLinks);
            }
        }
        Mode::Da | Mode::DaReg => {
            if augmented.is_none() {
                return Err(TrainError::NeedsAugmented(config.mode));
            }
        }
        Mode::Baseline => {}
    }

    let mut examples = train.examples.clone();
    let mut links = Vec::new();
    match config.mode {
        Mode::Baseline => {}
        Mode::Reg => links.extend(train.links.iter().cloned()),
        Mode::Da | Mode::DaReg => {
            let aug = augmented.expect("checked above");
            examples.extend(aug.examples.iter().cloned());
            links.extend(train.links.iter().cloned());
            links.extend(aug.links.iter().cloned());
        }
    }

    let merged = Dataset {
        examples,
        links,
    };
    if let Some(v) = validate(&merged).into_iter().next() {
        return Err(TrainError::InvalidMerged(v));
    }
    let num_classes = num_classes(&merged.examples)?;
    let feats = merged
        .examples
        .iter()
        .map(|e| featurize_example(e, config.dim, crate::model::FEATURE_HASH_SEED))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WorkingSet {
        examples: merged.examples,
        links: merged.links,
        feats,
        num_classes,
    })
}

fn assemble_batch<'a>(
    set: &'a WorkingSet,
    batch_indices: &[usize],
    link_lookup: &HashMap<&str, usize>,
    include_in_task: impl Fn(&Example) -> bool,
) -> LinkedBatch<'a> {
    let mut member_of: HashMap<usize, usize> = HashMap::new();
    let mut batch = LinkedBatch::default();
    for (slot, &idx) in batch_indices.iter().enumerate() {
        member_of.insert(idx, slot);
        batch.members.push(BatchMember {
            example: &set.examples[idx],
            feats: &set.feats[idx],
        });
        if include_in_task(&set.examples[idx]) {
            batch.task.push(slot);
        }
    }
    for link in &set.links {
        let slots: Option<Vec<usize>> = link
            .members
            .iter()
            .map(|m| link_lookup.get(m.as_str()).and_then(|i| member_of.get(i)))
            .map(|s| s.copied())
            .collect();
        let Some(slots) = slots else { continue };
        match link.kind {
            crate::data::LinkKind::Symmetric => {
                batch.sym_pairs.push((slots[0], slots[1]));
            }
            crate::data::LinkKind::Transitive => {
                batch.trans_triples.push((slots[0], slots[1], slots[2]));
            }
        }
    }
    batch
}

/// Runs `config.epochs` of shuffled mini-batch Adam over the working set.
/// In `baseline`/`da` the consistency weights are forced to zero; in
/// `reg`/`da_reg` they follow the annealing schedule. Returns the final
/// parameters and per-epoch history.
pub fn train(
    config: &TrainingConfig,
    train_dataset: &Dataset,
    augmented: Option<&AugmentationOutput>,
    dev_dataset: &Dataset,
) -> Result<(Parameters, TrainingHistory), TrainError> {
    let set = build_working_set(config, train_dataset, augmented)?;
    let mut params = Parameters::new(config.dim, set.num_classes)?;
    let mut history = TrainingHistory::default();

    let effective_weights = match config.mode {
        Mode::Baseline | Mode::Da => ConsistencyWeights {
            lambda_sym: 0.0,
            lambda_trans: 0.0,
            tau: 0,
        },
        Mode::Reg | Mode::DaReg => config.weights,
    };
    let include_in_task = |ex: &Example| config.aug_in_task_loss || ex.origin == Origin::Original;

    let groups = link_groups(&set.examples, &set.links);
    let link_lookup: HashMap<&str, usize> = set
        .examples
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();

    let dev_feats: Vec<Featurized> = dev_dataset
        .examples
        .iter()
        .map(|e| featurize_example(e, config.dim, crate::model::FEATURE_HASH_SEED))
        .collect::<Result<Vec<_>, _>>()?;

    let mut best_accuracy = f64::NEG_INFINITY;
    let mut epochs_since_best = 0usize;

    for epoch in 0..config.epochs {
        let batches = epoch_batches(&groups, config.seed, epoch, config.batch_size);
        let (lambda_sym_eff, lambda_trans_eff) =
            crate::consistency::lambda_at_epoch(&effective_weights, epoch);

        let mut task_sum = 0.0;
        let mut combined_sum = 0.0;
        let mut sym_sum = 0.0;
        let mut sym_count = 0usize;
        let mut trans_sum = 0.0;
        let mut trans_count = 0usize;
        let n_batches = batches.len().max(1);

        for batch_indices in &batches {
            let batch = assemble_batch(&set, batch_indices, &link_lookup, include_in_task);
            let (breakdown, grad) =
                combined_loss_and_grad(&batch, &params, &effective_weights, epoch)?;
            adam_step(&mut params, &grad, config.learning_rate)?;
            task_sum += breakdown.task;
            combined_sum += breakdown.total;
            sym_sum += breakdown.sym * breakdown.n_sym_pairs as f64;
            sym_count += breakdown.n_sym_pairs;
            trans_sum += breakdown.trans * breakdown.n_trans_triples as f64;
            trans_count += breakdown.n_trans_triples;
        }

        let (dev_accuracy, dev_violation) = if dev_dataset.is_empty() {
            (0.0, 0.0)
        } else {
            let mut predictions: HashMap<String, usize> = HashMap::new();
            let mut correct = 0usize;
            for (example, feats) in dev_dataset.examples.iter().zip(dev_feats.iter()) {
                let prediction = forward(feats, &params)?;
                if prediction.argmax == example.gold {
                    correct += 1;
                }
                predictions.insert(example.id.clone(), prediction.argmax);
            }
            let accuracy = correct as f64 / dev_dataset.len() as f64;
            let report = audit::audit_predictions(&predictions, dev_dataset)?;
            (accuracy, report.v_total)
        };

        history.epochs.push(EpochRecord {
            epoch,
            task_loss: task_sum / n_batches as f64,
            sym_loss: if sym_count == 0 { 0.0 } else { sym_sum / sym_count as f64 },
            trans_loss: if trans_count == 0 {
                0.0
            } else {
                trans_sum / trans_count as f64
            },
            combined_loss: combined_sum / n_batches as f64,
            lambda_sym_eff,
            lambda_trans_eff,
            dev_accuracy,
            dev_violation,
        });

        if let Some(patience) = config.patience {
            if dev_accuracy > best_accuracy {
                best_accuracy = dev_accuracy;
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
                if epochs_since_best >= patience {
                    break;
                }
            }
        }
    }

    Ok((params, history))
}

/// Fraction of examples whose argmax equals the gold index. Empty datasets
/// are an error, not 0/0.
pub fn evaluate_accuracy(params: &Parameters, dataset: &Dataset) -> Result<f64, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut correct = 0usize;
    for example in &dataset.examples {
        let prediction = crate::model::predict(example, params)?;
        if prediction.argmax == example.gold {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Writes the history as JSONL, one epoch record per line.
pub fn save_history(history: &TrainingHistory, path: &Path) -> Result<(), TrainError> {
    let io_err = |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for record in &history.epochs {
        let line = serde_json::to_string(record).expect("record serializes");
        writer.write_all(line.as_bytes()).map_err(io_err)?;
        writer.write_all(b"\n").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}
