//! Finite-difference verification of the combined objective's analytic
//! gradient on a randomly drawn linked batch.
//!
//! ```bash
//! cargo run -p conqa --example gradient_check
//! ```

use conqa::consistency::{
    combined_loss_and_grad, BatchMember, ConsistencyWeights, LinkedBatch,
};
use conqa::data::{Example, Origin, TaskFormat, WIQA_CANDIDATES};
use conqa::model::{featurize_example, Featurized, Gradient, Parameters, FEATURE_HASH_SEED};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

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

fn main() {
    let dim = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut params = Parameters::new(dim, 3).unwrap();
    for w in params.weights.iter_mut() {
        *w = rng.gen_range(-1.0..1.0);
    }

    let examples = [
        example("a", "is more salt removed from the pan", 0),
        example("a_sym", "is less salt removed from the pan", 1),
        example("b", "will the water heat up quickly", 0),
        example("b_sym", "will the water cool down quickly", 1),
        example("t1", "if more rain falls, is the soil more wet", 0),
        example("t2", "if the soil is more wet, is more erosion occurring", 0),
        example("t3", "if more rain falls, is more erosion occurring", 0),
    ];
    let feats: Vec<Featurized> = examples
        .iter()
        .map(|e| featurize_example(e, dim, FEATURE_HASH_SEED).unwrap())
        .collect();
    let batch = LinkedBatch {
        members: examples
            .iter()
            .zip(feats.iter())
            .map(|(example, feats)| BatchMember { example, feats })
            .collect(),
        task: (0..examples.len()).collect(),
        sym_pairs: vec![(0, 1), (2, 3)],
        trans_triples: vec![(4, 5, 6)],
    };
    let weights = ConsistencyWeights {
        lambda_sym: 0.5,
        lambda_trans: 0.05,
        tau: 0,
    };

    let (breakdown, analytic) = combined_loss_and_grad(&batch, &params, &weights, 0).unwrap();
    println!(
        "loss: total={:.6} task={:.6} sym={:.6} trans={:.6}",
        breakdown.total, breakdown.task, breakdown.sym, breakdown.trans
    );

    let h = 1e-5;
    let mut fd = Gradient::zeros(dim, 3);
    let mut probe = params.clone();
    for i in 0..params.weights.len() {
        probe.weights[i] = params.weights[i] + h;
        let up = combined_loss_and_grad(&batch, &probe, &weights, 0).unwrap().0.total;
        probe.weights[i] = params.weights[i] - h;
        let down = combined_loss_and_grad(&batch, &probe, &weights, 0).unwrap().0.total;
        probe.weights[i] = params.weights[i];
        fd.weights[i] = (up - down) / (2.0 * h);
    }

    let mut worst = 0.0f64;
    for (a, f) in analytic.weights.iter().zip(fd.weights.iter()) {
        worst = worst.max((a - f).abs() / a.abs().max(f.abs()).max(1.0));
    }
    println!("max relative error vs central differences (h = {h}): {worst:.3e}");
    assert!(worst < 1e-4);
    println!("analytic gradient verified");
}
