//! Consistency losses over linked batches: symmetric and transitive
//! penalties on gold-answer log probabilities, conjunction relaxed by the
//! product T-norm, with annealing and masking.
//!
//! Both penalties compare log probabilities of the *gold* answers (the
//! original labeled answer and its relabeled counterpart), not the model's
//! argmax. Examples without a link contribute only to the task term.

use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::model::{
    self, accumulate_logit_grad, Featurized, Gradient, ModelError, Parameters, PROB_CLAMP,
};

/// Weighting scalars for the two consistency terms plus the annealing epoch
/// count: both weights are zero for the first `tau` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyWeights {
    pub lambda_sym: f64,
    pub lambda_trans: f64,
    pub tau: usize,
}

impl Default for ConsistencyWeights {
    fn default() -> Self {
        ConsistencyWeights {
            lambda_sym: 0.5,
            lambda_trans: 0.05,
            tau: 3,
        }
    }
}

/// One example of a batch with its cached features.
#[derive(Debug, Clone, Copy)]
pub struct BatchMember<'a> {
    pub example: &'a Example,
    pub feats: &'a Featurized,
}

/// A mini-batch whose linked members are co-located: `task` indexes the
/// members entering the task term, `sym_pairs` holds (original, augmented)
/// member indices, `trans_triples` holds (q1, q2, q_trans) member indices.
#[derive(Debug, Clone, Default)]
pub struct LinkedBatch<'a> {
    pub members: Vec<BatchMember<'a>>,
    pub task: Vec<usize>,
    pub sym_pairs: Vec<(usize, usize)>,
    pub trans_triples: Vec<(usize, usize, usize)>,
}

/// Loss components of one batch. `sym` and `trans` are raw per-link means,
/// reported even when the effective weights are zero; `total` only includes
/// a term when its effective weight is positive and the batch has links of
/// that kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub task: f64,
    pub sym: f64,
    pub trans: f64,
    pub n_sym_pairs: usize,
    pub n_trans_triples: usize,
}

fn clamped_ln(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0).ln()
}

/// Dissimilarity of the two gold-answer probabilities of a symmetric pair:
/// `|log p - log p_aug|`. Symmetric in its arguments, zero iff they agree.
pub fn sym_loss(p_gold: f64, p_gold_aug: f64) -> f64 {
    (clamped_ln(p_gold) - clamped_ln(p_gold_aug)).abs()
}

/// Transitive penalty under the product T-norm:
/// `|log p1 + log p2 - log p3|`, zero iff `p1 * p2 = p3`.
pub fn trans_loss(p1: f64, p2: f64, p3: f64) -> f64 {
    (clamped_ln(p1) + clamped_ln(p2) - clamped_ln(p3)).abs()
}

/// Effective consistency weights at a (zero-based) epoch: zero before `tau`,
/// the configured weights from `tau` on.
pub fn lambda_at_epoch(weights: &ConsistencyWeights, epoch: usize) -> (f64, f64) {
    if epoch < weights.tau {
        (0.0, 0.0)
    } else {
        (weights.lambda_sym, weights.lambda_trans)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The combined objective over one batch: mean task NLL plus the weighted
/// mean consistency penalties, with the exact analytic gradient of that
/// scalar. When an effective weight is zero the corresponding term is
/// skipped entirely, so the total equals the task loss bit-for-bit.
pub fn combined_loss_and_grad(
    batch: &LinkedBatch,
    params: &Parameters,
    weights: &ConsistencyWeights,
    epoch: usize,
) -> Result<(LossBreakdown, Gradient), ModelError> {
    let task_items: Vec<(&Example, &Featurized)> = batch
        .task
        .iter()
        .map(|&i| (batch.members[i].example, batch.members[i].feats))
        .collect();
    let (task, mut grad) = model::task_loss_and_grad(&task_items, params)?;

    // Forward passes for link members, computed once per member.
    let mut preds: Vec<Option<model::Prediction>> = vec![None; batch.members.len()];
    let mut linked: Vec<usize> = batch
        .sym_pairs
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .chain(
            batch
                .trans_triples
                .iter()
                .flat_map(|&(a, b, c)| [a, b, c]),
        )
        .collect();
    linked.sort_unstable();
    linked.dedup();
    for &i in &linked {
        preds[i] = Some(model::forward(batch.members[i].feats, params)?);
    }
    let gold_prob = |i: usize| -> f64 {
        let gold = batch.members[i].example.gold;
        preds[i].as_ref().expect("forwarded").probs[gold]
    };

    let (lambda_sym_eff, lambda_trans_eff) = lambda_at_epoch(weights, epoch);

    let mut sym_sum = 0.0;
    for &(a, b) in &batch.sym_pairs {
        sym_sum += sym_loss(gold_prob(a), gold_prob(b));
    }
    let sym = if batch.sym_pairs.is_empty() {
        0.0
    } else {
        sym_sum / batch.sym_pairs.len() as f64
    };

    let mut trans_sum = 0.0;
    for &(a, b, c) in &batch.trans_triples {
        trans_sum += trans_loss(gold_prob(a), gold_prob(b), gold_prob(c));
    }
    let trans = if batch.trans_triples.is_empty() {
        0.0
    } else {
        trans_sum / batch.trans_triples.len() as f64
    };

    let mut total = task;

    // d log p(gold) / d logits, zero where the probability is clamped.
    let add_log_prob_grad = |grad: &mut Gradient,
                             preds: &[Option<model::Prediction>],
                             i: usize,
                             coef: f64| {
        let member = &batch.members[i];
        let prediction = preds[i].as_ref().expect("forwarded");
        let p_gold = prediction.probs[member.example.gold];
        if p_gold <= PROB_CLAMP {
            return;
        }
        let dlogits: Vec<f64> = prediction
            .probs
            .iter()
            .enumerate()
            .map(|(k, p)| coef * (f64::from(u8::from(k == member.example.gold)) - p))
            .collect();
        accumulate_logit_grad(grad, member.feats, &dlogits, params);
    };

    if lambda_sym_eff > 0.0 && !batch.sym_pairs.is_empty() {
        total += lambda_sym_eff * sym;
        let scale = lambda_sym_eff / batch.sym_pairs.len() as f64;
        for &(a, b) in &batch.sym_pairs {
            let s = sign(clamped_ln(gold_prob(a)) - clamped_ln(gold_prob(b)));
            if s == 0.0 {
                continue;
            }
            add_log_prob_grad(&mut grad, &preds, a, scale * s);
            add_log_prob_grad(&mut grad, &preds, b, -scale * s);
        }
    }

    if lambda_trans_eff > 0.0 && !batch.trans_triples.is_empty() {
        total += lambda_trans_eff * trans;
        let scale = lambda_trans_eff / batch.trans_triples.len() as f64;
        for &(a, b, c) in &batch.trans_triples {
            let t = clamped_ln(gold_prob(a)) + clamped_ln(gold_prob(b))
                - clamped_ln(gold_prob(c));
            let s = sign(t);
            if s == 0.0 {
                continue;
            }
            add_log_prob_grad(&mut grad, &preds, a, scale * s);
            add_log_prob_grad(&mut grad, &preds, b, scale * s);
            add_log_prob_grad(&mut grad, &preds, c, -scale * s);
        }
    }

    Ok((
        LossBreakdown {
            total,
            task,
            sym,
            trans,
            n_sym_pairs: batch.sym_pairs.len(),
            n_trans_triples: batch.trans_triples.len(),
        },
        grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Origin, TaskFormat, WIQA_CANDIDATES};
    use crate::model::featurize_example;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sym_loss_hand_values() {
        assert_eq!(sym_loss(0.5, 0.5), 0.0);
        // |ln 0.8 - ln 0.4| = ln 2.
        assert!((sym_loss(0.8, 0.4) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(sym_loss(0.4, 0.8), sym_loss(0.8, 0.4));
    }

    #[test]
    fn trans_loss_hand_values() {
        // 0.9 * 0.8 = 0.72 satisfies the product T-norm exactly.
        assert!(trans_loss(0.9, 0.8, 0.72).abs() < 1e-12);
        assert_eq!(trans_loss(1.0, 1.0, 1.0), 0.0);
        // |ln 0.25 - ln 0.5| = ln 2.
        assert!((trans_loss(0.5, 0.5, 0.5) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn annealing_schedule() {
        let weights = ConsistencyWeights {
            lambda_sym: 0.5,
            lambda_trans: 0.05,
            tau: 3,
        };
        assert_eq!(lambda_at_epoch(&weights, 2), (0.0, 0.0));
        assert_eq!(lambda_at_epoch(&weights, 3), (0.5, 0.05));
        let immediate = ConsistencyWeights { tau: 0, ..weights };
        assert_eq!(lambda_at_epoch(&immediate, 0), (0.5, 0.05));
    }

    proptest! {
        #[test]
        fn sym_loss_properties(x in 1e-9f64..1.0, y in 1e-9f64..1.0) {
            prop_assert_eq!(sym_loss(x, x), 0.0);
            prop_assert_eq!(sym_loss(x, y), sym_loss(y, x));
            if x != y {
                prop_assert!(sym_loss(x, y) > 0.0);
            }
        }

        #[test]
        fn trans_loss_zero_on_exact_product(p1 in 1e-6f64..1.0, p2 in 1e-6f64..1.0) {
            // Floating-point product, so allow rounding at the ulp scale.
            prop_assert!(trans_loss(p1, p2, p1 * p2) < 1e-12);
        }
    }

    fn example(id: &str, question: &str, gold: usize) -> Example {
        Example {
            id: id.into(),
            format: TaskFormat::Classification,
            paragraph: "more water leads to less salt in the pan".into(),
            question: question.into(),
            candidates: WIQA_CANDIDATES.iter().map(|s| s.to_string()).collect(),
            gold,
            cause: None,
            effect: None,
            origin: Origin::Original,
        }
    }

    struct Arena {
        examples: Vec<Example>,
        feats: Vec<Featurized>,
    }

    impl Arena {
        fn new(examples: Vec<Example>, params: &Parameters) -> Arena {
            let feats = examples
                .iter()
                .map(|e| featurize_example(e, params.dim, params.hash_seed).unwrap())
                .collect();
            Arena { examples, feats }
        }

        fn batch(&self) -> LinkedBatch<'_> {
            LinkedBatch {
                members: self
                    .examples
                    .iter()
                    .zip(self.feats.iter())
                    .map(|(example, feats)| BatchMember { example, feats })
                    .collect(),
                task: (0..self.examples.len()).collect(),
                sym_pairs: Vec::new(),
                trans_triples: Vec::new(),
            }
        }
    }

    fn random_params(dim: usize, classes: usize, rng: &mut ChaCha8Rng) -> Parameters {
        let mut params = Parameters::new(dim, classes).unwrap();
        for w in params.weights.iter_mut() {
            *w = rng.gen_range(-1.0..1.0);
        }
        for b in params.bias.iter_mut() {
            *b = rng.gen_range(-0.5..0.5);
        }
        params
    }

    fn nine_example_arena(params: &Parameters) -> Arena {
        Arena::new(
            vec![
                example("a", "is more salt removed from the pan", 0),
                example("a_s", "is less salt removed from the pan", 1),
                example("b", "will the water heat up quickly", 0),
                example("b_s", "will the water cool down quickly", 1),
                example("c", "does more rain cause more erosion", 2),
                example("c_s", "does less rain cause more erosion", 2),
                example("t1", "if more rain falls, is the soil more wet", 0),
                example("t2", "if the soil is more wet, is more erosion occurring", 0),
                example("t3", "if more rain falls, is more erosion occurring", 0),
            ],
            params,
        )
    }

    fn linked_batch(arena: &Arena) -> LinkedBatch<'_> {
        let mut batch = arena.batch();
        batch.sym_pairs = vec![(0, 1), (2, 3), (4, 5)];
        batch.trans_triples = vec![(6, 7, 8)];
        batch
    }

    #[test]
    fn masking_keeps_unlinked_examples_in_task_term_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = random_params(64, 3, &mut rng);
        let arena = nine_example_arena(&params);
        let weights = ConsistencyWeights {
            lambda_sym: 0.7,
            lambda_trans: 0.3,
            tau: 0,
        };

        let mut batch = linked_batch(&arena);
        let (with_links, _) = combined_loss_and_grad(&batch, &params, &weights, 0).unwrap();

        batch.sym_pairs.clear();
        batch.trans_triples.clear();
        let (no_links, _) = combined_loss_and_grad(&batch, &params, &weights, 0).unwrap();

        // Zero links: total equals the task term for any lambda.
        assert_eq!(no_links.total, no_links.task);
        assert_eq!(no_links.task, with_links.task);
        assert!(with_links.total > with_links.task);
    }

    #[test]
    fn annealed_epoch_matches_task_loss_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let params = random_params(64, 3, &mut rng);
        let arena = nine_example_arena(&params);
        let batch = linked_batch(&arena);
        let weights = ConsistencyWeights {
            lambda_sym: 0.5,
            lambda_trans: 0.05,
            tau: 2,
        };
        let (epoch0, _) = combined_loss_and_grad(&batch, &params, &weights, 0).unwrap();
        assert_eq!(epoch0.total.to_bits(), epoch0.task.to_bits());
        // Raw components are still reported under annealing.
        assert!(epoch0.sym > 0.0);
        let (epoch2, _) = combined_loss_and_grad(&batch, &params, &weights, 2).unwrap();
        assert!(epoch2.total > epoch2.task);
    }

    fn fd_combined(
        batch: &LinkedBatch,
        params: &Parameters,
        weights: &ConsistencyWeights,
        h: f64,
    ) -> Gradient {
        let mut fd = Gradient::zeros(params.dim, params.num_classes);
        let mut probe = params.clone();
        let eval = |p: &Parameters| {
            combined_loss_and_grad(batch, p, weights, 0).unwrap().0.total
        };
        for i in 0..params.weights.len() {
            probe.weights[i] = params.weights[i] + h;
            let up = eval(&probe);
            probe.weights[i] = params.weights[i] - h;
            let down = eval(&probe);
            probe.weights[i] = params.weights[i];
            fd.weights[i] = (up - down) / (2.0 * h);
        }
        for i in 0..params.bias.len() {
            probe.bias[i] = params.bias[i] + h;
            let up = eval(&probe);
            probe.bias[i] = params.bias[i] - h;
            let down = eval(&probe);
            probe.bias[i] = params.bias[i];
            fd.bias[i] = (up - down) / (2.0 * h);
        }
        fd
    }

    fn near_kink(batch: &LinkedBatch, params: &Parameters) -> bool {
        let gp = |i: usize| {
            let member = &batch.members[i];
            model::forward(member.feats, params).unwrap().probs[member.example.gold]
        };
        let kink = 1e-6;
        batch
            .sym_pairs
            .iter()
            .any(|&(a, b)| (clamped_ln(gp(a)) - clamped_ln(gp(b))).abs() < kink)
            || batch.trans_triples.iter().any(|&(a, b, c)| {
                (clamped_ln(gp(a)) + clamped_ln(gp(b)) - clamped_ln(gp(c))).abs() < kink
            })
    }

    #[test]
    fn combined_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let weights = ConsistencyWeights {
            lambda_sym: 0.5,
            lambda_trans: 0.05,
            tau: 0,
        };
        let mut checked = 0;
        while checked < 5 {
            let params = random_params(32, 3, &mut rng);
            let arena = nine_example_arena(&params);
            let batch = linked_batch(&arena);
            if near_kink(&batch, &params) {
                continue;
            }
            let (_, analytic) = combined_loss_and_grad(&batch, &params, &weights, 0).unwrap();
            let fd = fd_combined(&batch, &params, &weights, 1e-5);
            let pairwise = analytic
                .weights
                .iter()
                .zip(fd.weights.iter())
                .chain(analytic.bias.iter().zip(fd.bias.iter()));
            let mut worst = 0.0f64;
            for (a, f) in pairwise {
                worst = worst.max((a - f).abs() / a.abs().max(f.abs()).max(1.0));
            }
            assert!(worst < 1e-4, "max relative error {worst}");
            checked += 1;
        }
    }
}
