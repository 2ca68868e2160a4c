//! A small differentiable classifier: feature-hashed bag-of-words scoring
//! with softmax outputs for both task formats, trained with a hand-rolled
//! Adam optimizer.
//!
//! Classification examples get one weight row per class over features of
//! (paragraph, question). Multiple-choice examples share a single scoring
//! head over features of (paragraph, question, candidate), softmaxed across
//! candidates. Features are unigram and bigram counts hashed by 64-bit
//! FNV-1a (seeded, stable across platforms) into a power-of-two dimension.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Example, TaskFormat};

/// Seed folded into the feature hash; stored in checkpoints so loaded models
/// reproduce predictions bit-exactly.
pub const FEATURE_HASH_SEED: u64 = 0x51ab_7301_9e24_d0c6;

/// Probabilities are clamped to `[PROB_CLAMP, 1]` before every logarithm.
pub const PROB_CLAMP: f64 = 1e-12;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for b in part.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Sparse hashed count vector; indices strictly increasing, values positive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Cached features of one example: one vector for classification, one per
/// candidate for multiple choice.
#[derive(Debug, Clone)]
pub enum Featurized {
    Classification(FeatureVector),
    Choice(Vec<FeatureVector>),
}

/// Softmax output over an example's candidates. Ties in `argmax` break to
/// the lowest index.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub argmax: usize,
}

/// Classifier weights plus Adam moment accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub dim: usize,
    pub num_classes: usize,
    /// Row-major `num_classes x dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub adam_m: Gradient,
    pub adam_v: Gradient,
    pub step: u64,
    pub hash_seed: u64,
}

/// Dense gradient (or moment accumulator) with the same shape as the
/// trainable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradient {
    pub fn zeros(dim: usize, num_classes: usize) -> Self {
        Gradient {
            weights: vec![0.0; dim * num_classes],
            bias: vec![0.0; num_classes],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|v| v.is_finite()) && self.bias.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature dimension {0} is not a power of two")]
    DimNotPowerOfTwo(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("gradient contains non-finite entries")]
    NonFiniteGradient,
    #[error("checkpoint {path}: {message}")]
    BadCheckpoint { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Parameters {
    /// Zero-initialized parameters. Multiple choice uses one scoring head
    /// (`num_classes = 1`).
    pub fn new(dim: usize, num_classes: usize) -> Result<Self, ModelError> {
        if !dim.is_power_of_two() {
            return Err(ModelError::DimNotPowerOfTwo(dim));
        }
        Ok(Parameters {
            dim,
            num_classes,
            weights: vec![0.0; dim * num_classes],
            bias: vec![0.0; num_classes],
            adam_m: Gradient::zeros(dim, num_classes),
            adam_v: Gradient::zeros(dim, num_classes),
            step: 0,
            hash_seed: FEATURE_HASH_SEED,
        })
    }
}

fn tokens_of(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Hashes unigrams and bigrams of (paragraph, question, candidate text) into
/// `[0, dim)`. Deterministic across runs and platforms.
pub fn featurize(
    example: &Example,
    candidate: Option<usize>,
    dim: usize,
    hash_seed: u64,
) -> Result<FeatureVector, ModelError> {
    if !dim.is_power_of_two() {
        return Err(ModelError::DimNotPowerOfTwo(dim));
    }
    let mask = (dim - 1) as u64;
    let mut stream = tokens_of(&example.paragraph);
    stream.extend(tokens_of(&example.question));
    if let Some(c) = candidate {
        let text = example
            .candidates
            .get(c)
            .ok_or_else(|| ModelError::ShapeMismatch(format!("candidate index {c} out of range")))?;
        stream.extend(tokens_of(text));
    }

    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for token in &stream {
        let idx = (fnv1a(hash_seed, &["u", token]) & mask) as u32;
        *counts.entry(idx).or_insert(0.0) += 1.0;
    }
    for pair in stream.windows(2) {
        let idx = (fnv1a(hash_seed, &["b", &pair[0], &pair[1]]) & mask) as u32;
        *counts.entry(idx).or_insert(0.0) += 1.0;
    }

    let mut fv = FeatureVector::default();
    for (idx, value) in counts {
        fv.indices.push(idx);
        fv.values.push(value);
    }
    Ok(fv)
}

/// Features for an example under its task format.
pub fn featurize_example(
    example: &Example,
    dim: usize,
    hash_seed: u64,
) -> Result<Featurized, ModelError> {
    match example.format {
        TaskFormat::Classification => Ok(Featurized::Classification(featurize(
            example, None, dim, hash_seed,
        )?)),
        TaskFormat::MultipleChoice => {
            let per_candidate = (0..example.candidates.len())
                .map(|c| featurize(example, Some(c), dim, hash_seed))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Featurized::Choice(per_candidate))
        }
    }
}

fn dot_row(params: &Parameters, row: usize, fv: &FeatureVector) -> f64 {
    let base = row * params.dim;
    let mut acc = 0.0;
    for (idx, value) in fv.indices.iter().zip(fv.values.iter()) {
        acc += params.weights[base + *idx as usize] * value;
    }
    acc + params.bias[row]
}

fn logits(feats: &Featurized, params: &Parameters) -> Result<Vec<f64>, ModelError> {
    match feats {
        Featurized::Classification(fv) => Ok((0..params.num_classes)
            .map(|k| dot_row(params, k, fv))
            .collect()),
        Featurized::Choice(fvs) => {
            if params.num_classes != 1 {
                return Err(ModelError::ShapeMismatch(format!(
                    "choice scoring needs a single head, parameters have {}",
                    params.num_classes
                )));
            }
            Ok(fvs.iter().map(|fv| dot_row(params, 0, fv)).collect())
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate().skip(1) {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

/// Forward pass over cached features.
pub fn forward(feats: &Featurized, params: &Parameters) -> Result<Prediction, ModelError> {
    if let Featurized::Choice(fvs) = feats {
        if fvs.is_empty() {
            return Err(ModelError::ShapeMismatch(
                "choice example without candidates".into(),
            ));
        }
    }
    let probs = softmax(&logits(feats, params)?);
    let argmax = argmax(&probs);
    Ok(Prediction { probs, argmax })
}

/// Predicts the candidate distribution for one example.
pub fn predict(example: &Example, params: &Parameters) -> Result<Prediction, ModelError> {
    if example.format == TaskFormat::Classification
        && example.candidates.len() != params.num_classes
    {
        return Err(ModelError::ShapeMismatch(format!(
            "example {} has {} candidates, parameters have {} classes",
            example.id,
            example.candidates.len(),
            params.num_classes
        )));
    }
    let feats = featurize_example(example, params.dim, params.hash_seed)?;
    forward(&feats, params)
}

/// Accumulates `d loss / d logits` into the parameter-shaped gradient.
pub(crate) fn accumulate_logit_grad(
    grad: &mut Gradient,
    feats: &Featurized,
    dlogits: &[f64],
    params: &Parameters,
) {
    match feats {
        Featurized::Classification(fv) => {
            for (k, g) in dlogits.iter().enumerate() {
                if *g == 0.0 {
                    continue;
                }
                let base = k * params.dim;
                for (idx, value) in fv.indices.iter().zip(fv.values.iter()) {
                    grad.weights[base + *idx as usize] += g * value;
                }
                grad.bias[k] += g;
            }
        }
        Featurized::Choice(fvs) => {
            for (fv, g) in fvs.iter().zip(dlogits.iter()) {
                if *g == 0.0 {
                    continue;
                }
                for (idx, value) in fv.indices.iter().zip(fv.values.iter()) {
                    grad.weights[*idx as usize] += g * value;
                }
                grad.bias[0] += g;
            }
        }
    }
}

/// Mean negative log-likelihood of the gold answers, with its exact
/// analytic gradient. Probabilities are clamped before the log.
pub fn task_loss_and_grad(
    batch: &[(&Example, &Featurized)],
    params: &Parameters,
) -> Result<(f64, Gradient), ModelError> {
    let mut grad = Gradient::zeros(params.dim, params.num_classes);
    if batch.is_empty() {
        return Ok((0.0, grad));
    }
    let inv_n = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (example, feats) in batch {
        let prediction = forward(feats, params)?;
        let p_gold = prediction.probs[example.gold];
        loss += -p_gold.clamp(PROB_CLAMP, 1.0).ln();
        if p_gold > PROB_CLAMP {
            let dlogits: Vec<f64> = prediction
                .probs
                .iter()
                .enumerate()
                .map(|(k, p)| (p - f64::from(u8::from(k == example.gold))) * inv_n)
                .collect();
            accumulate_logit_grad(&mut grad, feats, &dlogits, params);
        }
    }
    Ok((loss * inv_n, grad))
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One bias-corrected Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
pub fn adam_step(params: &mut Parameters, grad: &Gradient, lr: f64) -> Result<(), ModelError> {
    if grad.weights.len() != params.weights.len() || grad.bias.len() != params.bias.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "gradient shape ({}, {}) does not match parameters ({}, {})",
            grad.weights.len(),
            grad.bias.len(),
            params.weights.len(),
            params.bias.len()
        )));
    }
    if !grad.is_finite() {
        return Err(ModelError::NonFiniteGradient);
    }
    params.step += 1;
    let t = params.step as i32;
    let m_corr = 1.0 - BETA1.powi(t);
    let v_corr = 1.0 - BETA2.powi(t);
    let update = |w: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
        for i in 0..w.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = m[i] / m_corr;
            let v_hat = v[i] / v_corr;
            w[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    };
    update(
        &mut params.weights,
        &mut params.adam_m.weights,
        &mut params.adam_v.weights,
        &grad.weights,
    );
    update(
        &mut params.bias,
        &mut params.adam_m.bias,
        &mut params.adam_v.bias,
        &grad.bias,
    );
    Ok(())
}

/// Writes the checkpoint as a single JSON document.
pub fn save_checkpoint(params: &Parameters, path: &Path) -> Result<(), ModelError> {
    let json = serde_json::to_string(params).expect("parameters serialize");
    fs::write(path, json).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a checkpoint and validates its shapes.
pub fn load_checkpoint(path: &Path) -> Result<Parameters, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let params: Parameters =
        serde_json::from_str(&text).map_err(|e| ModelError::BadCheckpoint {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let bad = |message: &str| ModelError::BadCheckpoint {
        path: path.display().to_string(),
        message: message.into(),
    };
    if !params.dim.is_power_of_two() {
        return Err(bad("dim is not a power of two"));
    }
    if params.weights.len() != params.dim * params.num_classes
        || params.bias.len() != params.num_classes
        || params.adam_m.weights.len() != params.weights.len()
        || params.adam_v.weights.len() != params.weights.len()
        || params.adam_m.bias.len() != params.bias.len()
        || params.adam_v.bias.len() != params.bias.len()
    {
        return Err(bad("inconsistent shapes"));
    }
    Ok(params)
}
