//! The consistency loss kernels and the annealing schedule.
//!
//! ```bash
//! cargo run -p conqa --example consistency_losses
//! ```

use conqa::consistency::{lambda_at_epoch, sym_loss, trans_loss, ConsistencyWeights};

fn main() {
    println!("symmetric loss |log p - log p_aug| on gold-answer probabilities:");
    for (p, q) in [(0.5, 0.5), (0.8, 0.4), (0.4, 0.8), (0.9, 0.1)] {
        println!("  sym_loss({p}, {q}) = {:.6}", sym_loss(p, q));
    }

    println!("\ntransitive loss |log p1 + log p2 - log p3| (product T-norm):");
    for (p1, p2, p3) in [(0.9, 0.8, 0.72), (1.0, 1.0, 1.0), (0.5, 0.5, 0.5), (0.9, 0.9, 0.2)] {
        println!(
            "  trans_loss({p1}, {p2}, {p3}) = {:.6}",
            trans_loss(p1, p2, p3)
        );
    }

    let weights = ConsistencyWeights {
        lambda_sym: 0.5,
        lambda_trans: 0.05,
        tau: 3,
    };
    println!("\nannealing with lambda_sym=0.5, lambda_trans=0.05, tau=3:");
    for epoch in 0..5 {
        let (ls, lt) = lambda_at_epoch(&weights, epoch);
        println!("  epoch {epoch}: effective weights = ({ls}, {lt})");
    }
}
