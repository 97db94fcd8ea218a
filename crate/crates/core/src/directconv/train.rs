use rand::Rng;

use super::kernels::{layer_backward, layer_forward};
use super::layer::{LayerSpec, DROPOUT_RATE};
use super::model::CnnModel;
use crate::adam::BlockOptimizer;
use crate::datasets::{DatasetSplit, LabeledImage};
use crate::error::Result;
use crate::history::{accuracy, ensure_finite, EarlyStopping, EpochRecord, History};
use crate::real::softmax_cross_entropy;
use crate::rng::{seeded_rng, shuffled_indices, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct CnnTrainConfig {
    pub epochs: usize,
    pub learning_rate: f32,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f32,
    pub batch_size: usize,
    /// Stop after this many epochs without a new best validation accuracy.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for CnnTrainConfig {
    fn default() -> Self {
        CnnTrainConfig {
            epochs: 100,
            learning_rate: 0.005,
            lr_decay: 0.95,
            batch_size: 32,
            patience: Some(5),
            seed: 0,
        }
    }
}

impl CnnTrainConfig {
    /// Fixed-length run used to rank search candidates.
    pub fn partial(epochs: usize, seed: u64) -> Self {
        CnnTrainConfig {
            epochs,
            patience: None,
            seed,
            ..CnnTrainConfig::default()
        }
    }
}

/// Loss of one example and accumulation of its gradients into `grads`.
fn example_gradient(
    model: &CnnModel,
    item: &LabeledImage,
    rng: &mut SeededRng,
    grads: &mut [Vec<Vec<f32>>],
) -> f64 {
    let layers = model.arch().layers();
    let shapes = model.shapes();
    let mut acts: Vec<Vec<f32>> = vec![item.image.data().to_vec()];
    let mut masks: Vec<Option<Vec<f32>>> = Vec::with_capacity(layers.len());
    let keep = 1.0 - DROPOUT_RATE;
    for (i, layer) in layers.iter().enumerate() {
        let x = acts.last().expect("non-empty");
        if *layer == LayerSpec::Dropout {
            // inverted dropout: inference is a pass-through
            let mask: Vec<f32> = (0..x.len())
                .map(|_| if rng.random::<f32>() < keep { 1.0 / keep } else { 0.0 })
                .collect();
            let y = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
            masks.push(Some(mask));
            acts.push(y);
        } else {
            let y = layer_forward(layer, x, shapes[i], &model.params()[i]);
            masks.push(None);
            acts.push(y);
        }
    }
    let (loss, mut g) = softmax_cross_entropy(acts.last().expect("non-empty"), item.label as usize);
    for i in (0..layers.len()).rev() {
        if let Some(mask) = &masks[i] {
            g = g.iter().zip(mask).map(|(a, m)| a * m).collect();
            continue;
        }
        let (gin, gp) = layer_backward(
            &layers[i],
            &acts[i],
            shapes[i],
            &model.params()[i],
            &acts[i + 1],
            &g,
        );
        for (acc, blk) in grads[i].iter_mut().zip(gp) {
            for (a, b) in acc.iter_mut().zip(blk) {
                *a += b;
            }
        }
        g = gin;
    }
    loss as f64
}

/// Adam on softmax cross-entropy with per-epoch learning-rate decay and
/// early stopping; the best-validation parameters are returned.
pub fn train_cnn(
    model: CnnModel,
    split: &DatasetSplit,
    config: &CnnTrainConfig,
) -> Result<(CnnModel, History)> {
    let mut model = model;
    let sizes: Vec<usize> = model.params().iter().flatten().map(Vec::len).collect();
    let mut opt = BlockOptimizer::new(&sizes, config.learning_rate, 0.0);
    let mut rng = seeded_rng(config.seed);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut history = History::default();
    let batch = config.batch_size.max(1);

    for epoch in 0..config.epochs {
        let lr = config.learning_rate * config.lr_decay.powi(epoch as i32);
        opt.set_learning_rate(lr);
        let order = shuffled_indices(&mut rng, split.train.len());
        let mut total = 0.0f64;
        for chunk in order.chunks(batch) {
            let mut grads: Vec<Vec<Vec<f32>>> = model
                .params()
                .iter()
                .map(|l| l.iter().map(|b| vec![0.0; b.len()]).collect())
                .collect();
            for &i in chunk {
                total += example_gradient(&model, &split.train[i], &mut rng, &mut grads);
            }
            ensure_finite(total, epoch, "training")?;
            let scale = 1.0 / chunk.len() as f32;
            let mut block = 0;
            for (params, g) in model.params_mut().iter_mut().zip(&grads) {
                for (p, gb) in params.iter_mut().zip(g) {
                    let gb: Vec<f32> = gb.iter().map(|v| v * scale).collect();
                    opt.step_block(block, p, &gb)?;
                    block += 1;
                }
            }
        }
        let train_loss = total / split.train.len().max(1) as f64;
        let val = accuracy(&model, &split.validation)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation_accuracy: val,
            learning_rate: lr,
        });
        let (improved, stop) = stopper.observe(val);
        if improved {
            best = model.clone();
            history.best_epoch = Some(epoch);
            history.best_validation_accuracy = val;
        }
        if stop {
            history.stopped_early = true;
            break;
        }
    }
    Ok((best, history))
}

/// Mean cross-entropy over `items` with dropout off.
pub fn mean_loss(model: &CnnModel, items: &[LabeledImage]) -> Result<f64> {
    let mut total = 0.0;
    for it in items {
        let logits = super::model::forward_naive(model, &it.image)?;
        total += softmax_cross_entropy(&logits, it.label as usize).0 as f64;
    }
    Ok(total / items.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synth_image_split;
    use crate::directconv::ArchSpec;

    fn tiny() -> (CnnModel, DatasetSplit) {
        let arch: ArchSpec = "A,C1(4,5),M,C1(8,3),Dr,D*".parse().unwrap();
        let split = synth_image_split(10, 6, 3, 1, 6.0, 3).unwrap();
        (CnnModel::init(arch, 5), split)
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let (m, split) = tiny();
        let cfg = CnnTrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            ..CnnTrainConfig::partial(1, 0)
        };
        let (out, _) = train_cnn(m.clone(), &split, &cfg).unwrap();
        assert_eq!(out.params(), m.params());
    }

    #[test]
    fn one_epoch_lowers_training_loss() {
        let (m, split) = tiny();
        let before = mean_loss(&m, &split.train).unwrap();
        let (out, h) = train_cnn(m, &split, &CnnTrainConfig::partial(1, 1)).unwrap();
        let after = mean_loss(&out, &split.train).unwrap();
        assert!(after < before, "{before} -> {after}");
        assert_eq!(h.epochs.len(), 1);
        assert_eq!(split.test.reads(), 0);
    }
}
