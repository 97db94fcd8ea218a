//! The three ways of turning an image into sequences, each trained briefly
//! on synthetic images.
//!
//! Run with `cargo run --release --example fastgrnn_modes`.

use memclass::datasets::synth_image_split;
use memclass::fastgrnn::{fastgrnn_train, sequence_image, FastGrnnSpec, FastGrnnTrainConfig, SeqMode};

fn main() -> memclass::Result<()> {
    let split = synth_image_split(10, 30, 10, 1, 4.0, 9)?;
    let first = &split.train[0].image;
    for (mode, hidden, dw, du) in [
        (SeqMode::RowMajor, 16, 0.3, 0.3),
        (SeqMode::ChannelMajor, 16, 0.3, 0.3),
        (SeqMode::Multi, 8, 0.3, 1.0),
    ] {
        let seqs = sequence_image(first, mode)?;
        let spec = FastGrnnSpec::new(mode, hidden, dw, du)?;
        println!(
            "{spec}: {} cell(s) x {} steps x {} inputs, footprint {}",
            seqs.len(),
            seqs[0].len(),
            seqs[0][0].len(),
            spec.footprint()
        );
        let config = FastGrnnTrainConfig {
            epochs: 9,
            batch_size: 50,
            seed: 1,
            ..FastGrnnTrainConfig::default()
        };
        let out = fastgrnn_train(spec, &split.train, &split.validation, &config)?;
        println!(
            "  validation {:.3}, nonzeros (W, U) per cell {:?}",
            out.history.best_validation_accuracy,
            out.model.nonzeros()
        );
    }
    Ok(())
}
