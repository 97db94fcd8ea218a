//! Trains a small Bonsai tree on blobs and reports its realized sparsity.
//!
//! Run with `cargo run --release --example bonsai_tree`.

use memclass::bonsai::{bonsai_train, BonsaiSpec, BonsaiTrainConfig};
use memclass::datasets::{synth_blobs, Example};

fn main() -> memclass::Result<()> {
    let blobs = synth_blobs(10, 48, 60, 3.0, 2);
    let (train, rest) = blobs.split_at(400);
    let (validation, test) = rest.split_at(100);

    let spec = BonsaiSpec::new(2, 6)?;
    let config = BonsaiTrainConfig {
        epochs: 40,
        batch_size: 50,
        seed: 3,
        ..BonsaiTrainConfig::default()
    };
    let out = bonsai_train(spec, train, validation, &config)?;
    let model = &out.best_model;
    println!("{} nodes, {} internal", spec.nodes(), spec.internal_nodes());
    println!("nonzeros Z/W/V/theta: {:?} (configured {:?})", model.nonzeros(), spec.nonzeros(48));
    println!("footprint at 48 inputs: {}", spec.footprint(48));
    for e in out.history.epochs.iter().step_by(10) {
        println!(
            "  epoch {:>3}: loss {:.3}, validation {:.3}",
            e.epoch, e.train_loss, e.validation_accuracy
        );
    }
    let hits = test
        .iter()
        .filter(|b| model.predict_features(b.features()).ok() == Some(b.label()))
        .count();
    println!("test accuracy {:.3}", hits as f64 / test.len() as f64);
    Ok(())
}
