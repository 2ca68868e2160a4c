//! Synthetic dataset generation: planted causal directions, linked
//! symmetric pairs and transitive triples, and a biased training split.
//!
//! ```bash
//! cargo run -p conqa --example generate_toy_data
//! ```

use std::collections::HashMap;

use conqa::audit::audit_predictions;
use conqa::data::{Dataset, LinkKind, TaskFormat};
use conqa::toygen::{self, ToyConfig};

fn describe(name: &str, dataset: &Dataset) {
    let sym = dataset
        .links
        .iter()
        .filter(|l| l.kind == LinkKind::Symmetric)
        .count();
    let trans = dataset.links.len() - sym;
    let golds: Vec<usize> = (0..3)
        .map(|g| dataset.examples.iter().filter(|e| e.gold == g).count())
        .collect();
    println!(
        "{name}: {} examples ({} more / {} less / {} no effect), {sym} symmetric pairs, {trans} transitive triples",
        dataset.len(),
        golds[0],
        golds[1],
        golds[2]
    );
}

fn main() {
    let config = ToyConfig {
        train_size: 2000,
        dev_size: 500,
        seed: 1,
        format: TaskFormat::Classification,
        ..ToyConfig::default()
    };
    let (train, dev) = toygen::generate(&config);
    describe("train", &train);
    describe("dev", &dev);

    println!("\nsample examples:");
    for ex in train.examples.iter().take(4) {
        println!("  [{}] {}", ex.id, ex.question);
        println!("        paragraph: {}", ex.paragraph);
        println!("        gold: {}", ex.gold_text());
    }

    // The planted labels satisfy the consistency rules by construction.
    for (name, dataset) in [("train", &train), ("dev", &dev)] {
        let golds: HashMap<String, usize> = dataset
            .examples
            .iter()
            .map(|e| (e.id.clone(), e.gold))
            .collect();
        let report = audit_predictions(&golds, dataset).unwrap();
        println!("\n{name} gold labels audited: v_total = {:.1}", report.v_total);
    }
}
