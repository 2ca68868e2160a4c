//! The consistency-violation metric over a prediction set and the dataset's
//! links, with a per-rule breakdown.
//!
//! A symmetric pair is violated when the augmented prediction differs from
//! the relabel map applied to the original prediction. A transitive triple is
//! violated when the first prediction is "more" but the composed prediction
//! differs from the second; triples whose first prediction is not "more" are
//! vacuously consistent. Rates are percentages over links (pairs/triples),
//! zero when the denominator is zero.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::relabel_classification;
use crate::data::{Dataset, Example, LinkKind, TaskFormat};
use crate::model::{self, ModelError, Parameters};

/// One violating link with the answers the model picked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offender {
    pub link: String,
    pub members: Vec<String>,
    pub predicted: Vec<String>,
}

/// Violation counts and percentage rates, plus the offending links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n_sym_pairs: usize,
    pub n_sym_violations: usize,
    pub n_trans_triples: usize,
    pub n_trans_violations: usize,
    pub v_sym: f64,
    pub v_trans: f64,
    pub v_total: f64,
    pub offenders: Vec<Offender>,
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("link {link}: member \"{member}\" does not resolve to any example")]
    UnresolvableMember { link: String, member: String },
    #[error("no prediction for example \"{0}\"")]
    MissingPrediction(String),
    #[error("prediction {pred} out of range for example \"{id}\" with {n} candidates")]
    PredictionOutOfRange { id: String, pred: usize, n: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Flip count of a symmetric pair, recovered from its gold labels: differing
/// golds mean one flip; equal more/less golds mean two. Equal "no effect"
/// golds are ambiguous (one- and two-flip edits both preserve them) and
/// default to one flip.
pub fn infer_flips(gold: usize, gold_aug: usize) -> usize {
    if gold != gold_aug || gold == 2 {
        1
    } else {
        2
    }
}

/// Whether a symmetric pair's predictions break the relabel map.
pub fn symmetric_violation(
    pred: usize,
    pred_sym: usize,
    format: TaskFormat,
    flips: usize,
) -> bool {
    let expected = match format {
        TaskFormat::Classification => {
            relabel_classification(pred, flips).expect("flips is 1 or 2")
        }
        TaskFormat::MultipleChoice => 1 - pred,
    };
    pred_sym != expected
}

/// Whether a transitive triple's predictions break the composition rule.
/// Index 0 is "more" in the causal candidate set.
pub fn transitive_violation(pred_1: usize, pred_2: usize, pred_trans: usize) -> bool {
    pred_1 == 0 && pred_trans != pred_2
}

/// Audits a precomputed prediction set (example ID to predicted candidate
/// index) against the dataset's links.
pub fn audit_predictions(
    predictions: &HashMap<String, usize>,
    dataset: &Dataset,
) -> Result<AuditReport, AuditError> {
    let index = dataset.id_index();
    let resolve = |link: &crate::data::ConsistencyLink,
                   member: &str|
     -> Result<&Example, AuditError> {
        index
            .get(member)
            .map(|&i| &dataset.examples[i])
            .ok_or_else(|| AuditError::UnresolvableMember {
                link: link.render(),
                member: member.to_owned(),
            })
    };
    let pred_of = |ex: &Example| -> Result<usize, AuditError> {
        let p = *predictions
            .get(&ex.id)
            .ok_or_else(|| AuditError::MissingPrediction(ex.id.clone()))?;
        if p >= ex.candidates.len() {
            return Err(AuditError::PredictionOutOfRange {
                id: ex.id.clone(),
                pred: p,
                n: ex.candidates.len(),
            });
        }
        Ok(p)
    };

    let mut report = AuditReport {
        n_sym_pairs: 0,
        n_sym_violations: 0,
        n_trans_triples: 0,
        n_trans_violations: 0,
        v_sym: 0.0,
        v_trans: 0.0,
        v_total: 0.0,
        offenders: Vec::new(),
    };

    for link in &dataset.links {
        match link.kind {
            LinkKind::Symmetric => {
                let orig = resolve(link, &link.members[0])?;
                let aug = resolve(link, &link.members[1])?;
                let p = pred_of(orig)?;
                let p_sym = pred_of(aug)?;
                let flips = infer_flips(orig.gold, aug.gold);
                report.n_sym_pairs += 1;
                if symmetric_violation(p, p_sym, orig.format, flips) {
                    report.n_sym_violations += 1;
                    report.offenders.push(Offender {
                        link: link.render(),
                        members: link.members.clone(),
                        predicted: vec![
                            orig.candidates[p].clone(),
                            aug.candidates[p_sym].clone(),
                        ],
                    });
                }
            }
            LinkKind::Transitive => {
                let q1 = resolve(link, &link.members[0])?;
                let q2 = resolve(link, &link.members[1])?;
                let qt = resolve(link, &link.members[2])?;
                let p1 = pred_of(q1)?;
                let p2 = pred_of(q2)?;
                let pt = pred_of(qt)?;
                report.n_trans_triples += 1;
                if transitive_violation(p1, p2, pt) {
                    report.n_trans_violations += 1;
                    report.offenders.push(Offender {
                        link: link.render(),
                        members: link.members.clone(),
                        predicted: vec![
                            q1.candidates[p1].clone(),
                            q2.candidates[p2].clone(),
                            qt.candidates[pt].clone(),
                        ],
                    });
                }
            }
        }
    }

    let rate = |violations: usize, total: usize| {
        if total == 0 {
            0.0
        } else {
            (100.0 * violations as f64) / total as f64
        }
    };
    report.v_sym = rate(report.n_sym_violations, report.n_sym_pairs);
    report.v_trans = rate(report.n_trans_violations, report.n_trans_triples);
    report.v_total = rate(
        report.n_sym_violations + report.n_trans_violations,
        report.n_sym_pairs + report.n_trans_triples,
    );
    Ok(report)
}

/// Predicts every link member with the model, then audits.
pub fn audit_model(params: &Parameters, dataset: &Dataset) -> Result<AuditReport, AuditError> {
    let index = dataset.id_index();
    let mut predictions: HashMap<String, usize> = HashMap::new();
    for link in &dataset.links {
        for member in &link.members {
            if predictions.contains_key(member) {
                continue;
            }
            let example = index
                .get(member.as_str())
                .map(|&i| &dataset.examples[i])
                .ok_or_else(|| AuditError::UnresolvableMember {
                    link: link.render(),
                    member: member.clone(),
                })?;
            let prediction = model::predict(example, params)?;
            predictions.insert(member.clone(), prediction.argmax);
        }
    }
    audit_predictions(&predictions, dataset)
}
