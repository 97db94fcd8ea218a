//! The whole comparison at a glance. With `$CIFAR10_DIR` set this runs the
//! desk-scale recipe on real data (hours); otherwise a toy version on
//! synthetic images finishes in about a minute.
//!
//! Run with `cargo run --release --example desk_experiment`.

use memclass::datasets::{load_cifar10, synth_image_split};
use memclass::harness::{
    emit_report, prepare_split, run_experiment_scaled, ExperimentConfig, ReportFormat, Scale, ScaleConfig,
};
use memclass::protonn::ProtoGrid;

fn toy_scale() -> ScaleConfig {
    ScaleConfig {
        train_per_class: None,
        validation_per_class: None,
        cnn_samples: 3,
        cnn_partial_epochs: 1,
        cnn_epochs: 3,
        proto_grid: ProtoGrid {
            dims: vec![2, 4],
            prototypes: vec![4, 8],
            gammas: vec![1.5],
            learning_rates: vec![0.01],
            density: 1.0,
        },
        proto_epochs: 5,
        bonsai_depths: vec![1, 2, 3],
        bonsai_dim_stride: 4,
        bonsai_epochs: 5,
        fastgrnn_candidates: 1,
        fastgrnn_epochs: 3,
    }
}

fn main() -> memclass::Result<()> {
    let config = ExperimentConfig::default();
    let (split, scale) = match std::env::var_os(memclass::cli::DATA_ENV) {
        Some(dir) => {
            let (train, test) = load_cifar10(dir.as_ref())?;
            let scale = Scale::Desk.config();
            (prepare_split(train, test, &scale, false, config.seed)?, scale)
        }
        None => (synth_image_split(10, 20, 5, 5, 4.0, config.seed)?, toy_scale()),
    };
    let report = run_experiment_scaled(&config, &scale, &split)?;
    println!("{}", emit_report(&report, ReportFormat::Markdown)?);
    println!("{} distinct models read the test set", report.evaluated_models);
    Ok(())
}
