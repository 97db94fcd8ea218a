//! Bookkeeping shared by the training loops.

use rayon::prelude::*;

use crate::datasets::{Example, LabeledImage};
use crate::error::{Error, Result};
use crate::Classifier;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_accuracy: f64,
    pub learning_rate: f32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    pub best_validation_accuracy: f64,
    pub stopped_early: bool,
}

impl History {
    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

/// Fraction of `items` classified correctly.
pub fn accuracy<C: Classifier + ?Sized>(model: &C, items: &[LabeledImage]) -> Result<f64> {
    if items.is_empty() {
        return Ok(0.0);
    }
    let hits = items
        .par_iter()
        .map(|it| Ok(usize::from(model.predict(&it.image)? == it.label as usize)))
        .collect::<Result<Vec<usize>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / items.len() as f64)
}

/// Fraction of `items` for which `predict` returns the label.
pub fn accuracy_with<E, F>(items: &[E], predict: F) -> Result<f64>
where
    E: Example,
    F: Fn(&[f32]) -> Result<usize> + Sync,
{
    if items.is_empty() {
        return Ok(0.0);
    }
    let hits = items
        .par_iter()
        .map(|it| Ok(usize::from(predict(it.features())? == it.label())))
        .collect::<Result<Vec<usize>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / items.len() as f64)
}

/// Examples summed sequentially inside each parallel group of a batch.
const BATCH_GROUP: usize = 8;

/// Sums `f(i)` over `indices` in parallel. Groups are formed and combined
/// in a fixed order, so floating-point results do not depend on thread
/// scheduling.
pub fn batch_sum<G, F, A>(indices: &[usize], f: F, add: A) -> Option<G>
where
    G: Send,
    F: Fn(usize) -> G + Sync,
    A: Fn(&mut G, G) + Sync,
{
    let partials: Vec<G> = indices
        .par_chunks(BATCH_GROUP)
        .map(|group| {
            let mut it = group.iter().map(|&i| f(i));
            let mut acc = it.next().expect("chunks are non-empty");
            for g in it {
                add(&mut acc, g);
            }
            acc
        })
        .collect();
    let mut it = partials.into_iter();
    let mut acc = it.next()?;
    for g in it {
        add(&mut acc, g);
    }
    Some(acc)
}

pub fn ensure_finite(loss: f64, epoch: usize, what: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            epoch,
            detail: format!("{what} loss is {loss}"),
        })
    }
}

/// Stage of `epoch` in a run of `epochs` split into three equal parts:
/// 0 dense, 1 re-projected onto the sparse support, 2 support frozen.
pub fn stage_of(epoch: usize, epochs: usize) -> usize {
    if epoch >= 2 * epochs / 3 {
        2
    } else if epoch >= epochs / 3 {
        1
    } else {
        0
    }
}

/// Tracks the best validation accuracy; signals a stop after `patience`
/// epochs without strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: Option<usize>,
    best: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: Option<usize>) -> Self {
        EarlyStopping {
            patience,
            best: f64::NEG_INFINITY,
            stale: 0,
        }
    }

    /// Returns `(improved, stop)`.
    pub fn observe(&mut self, validation_accuracy: f64) -> (bool, bool) {
        if validation_accuracy > self.best {
            self.best = validation_accuracy;
            self.stale = 0;
            (true, false)
        } else {
            self.stale += 1;
            (false, self.patience.is_some_and(|p| self.stale >= p))
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}
