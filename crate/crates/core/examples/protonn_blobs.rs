//! ProtoNN on Gaussian blobs: a dense and a sparse projection side by side.
//!
//! Run with `cargo run --release --example protonn_blobs`.

use memclass::datasets::{synth_blobs, Example};
use memclass::protonn::{protonn_train, ProtoSpec, ProtoTrainConfig};

fn main() -> memclass::Result<()> {
    let blobs = synth_blobs(10, 64, 60, 3.0, 4);
    // blobs interleave classes, so a prefix split stays balanced
    let (train, rest) = blobs.split_at(400);
    let (validation, test) = rest.split_at(100);

    for density in [1.0, 0.2] {
        let spec = ProtoSpec::new(8, 20, density)?;
        let config = ProtoTrainConfig {
            gamma: 1.5,
            epochs: 40,
            seed: 1,
            ..ProtoTrainConfig::default()
        };
        let (model, history) = protonn_train(spec, train, validation, &config)?;
        let hits = test
            .iter()
            .filter(|b| model.predict_features(b.features()).ok() == Some(b.label()))
            .count();
        println!(
            "d=8 m=20 density {density}: {} projection nonzeros, footprint {}",
            model.projection_nonzeros(),
            model.footprint()
        );
        println!(
            "  best validation {:.3} at epoch {:?}, test {:.3}",
            history.best_validation_accuracy,
            history.best_epoch,
            hits as f64 / test.len() as f64
        );
    }
    Ok(())
}
