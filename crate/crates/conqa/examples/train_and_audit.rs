//! End-to-end experiment: generate comparison-QA data, augment it, train
//! the three ablation modes, and audit each model's consistency.
//!
//! ```bash
//! cargo run --release -p conqa --example train_and_audit
//! ```

use conqa::audit::audit_model;
use conqa::augment::{make_symmetric, make_transitive, sample_augmented};
use conqa::data::TaskFormat;
use conqa::lexicon::AntonymLexicon;
use conqa::toygen::{self, ToyConfig};
use conqa::trainer::{evaluate_accuracy, train, Mode, TrainingConfig};

fn main() {
    let seed = 1u64;
    let toy = ToyConfig {
        train_size: 2000,
        dev_size: 500,
        seed,
        format: TaskFormat::Classification,
        ..ToyConfig::default()
    };
    let (train_set, dev_set) = toygen::generate(&toy);
    println!(
        "generated {} train / {} dev examples ({} train links, {} dev links)",
        train_set.len(),
        dev_set.len(),
        train_set.links.len(),
        dev_set.links.len()
    );

    let lexicon = AntonymLexicon::builtin();
    let candidates = make_symmetric(&train_set, &lexicon).merge(make_transitive(&train_set));
    let augmented = sample_augmented(&candidates, 1.0, seed, &train_set);
    println!(
        "augmentation: {} candidates, {} kept after dedup\n",
        candidates.len(),
        augmented.len()
    );

    println!("mode       dev_acc   v_total   v_sym   v_trans");
    for mode in [Mode::Baseline, Mode::Da, Mode::DaReg] {
        let config = TrainingConfig {
            epochs: 40,
            dim: 1 << 13,
            seed,
            mode,
            ..TrainingConfig::default()
        };
        let aug = matches!(mode, Mode::Da | Mode::DaReg).then_some(&augmented);
        let (params, _history) = train(&config, &train_set, aug, &dev_set).unwrap();
        let accuracy = evaluate_accuracy(&params, &dev_set).unwrap();
        let report = audit_model(&params, &dev_set).unwrap();
        println!(
            "{:<10} {:>6.1}%   {:>6.1}   {:>5.1}   {:>6.1}",
            mode.to_string(),
            accuracy * 100.0,
            report.v_total,
            report.v_sym,
            report.v_trans
        );
    }
}
