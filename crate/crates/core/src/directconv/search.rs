use std::sync::OnceLock;

use rand::seq::index::sample;
use rayon::prelude::*;

use super::arch::{enumerate_models, ArchSpec};
use super::model::CnnModel;
use super::plan::FootprintCache;
use super::train::{train_cnn, CnnTrainConfig};
use crate::datasets::DatasetSplit;
use crate::error::{Error, Result};
use crate::history::History;
use crate::rng::{derive_seed, seeded_rng};
use crate::size::Footprint;

#[derive(Debug, Clone, PartialEq)]
pub struct CnnSearchConfig {
    pub samples: usize,
    pub partial_epochs: usize,
    pub full: CnnTrainConfig,
    pub seed: u64,
}

impl Default for CnnSearchConfig {
    fn default() -> Self {
        CnnSearchConfig {
            samples: 750,
            partial_epochs: 5,
            full: CnnTrainConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub arch: ArchSpec,
    pub footprint: Footprint,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct CnnSearchOutcome {
    pub model: CnnModel,
    pub footprint: Footprint,
    /// Every sampled candidate after partial training, in enumeration order.
    pub pool: Vec<Candidate>,
    pub history: History,
}

/// Every enumerated architecture with its footprint, computed once.
pub fn catalog() -> &'static [(ArchSpec, Footprint)] {
    static CATALOG: OnceLock<Vec<(ArchSpec, Footprint)>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        let mut cache = FootprintCache::new();
        enumerate_models()
            .into_iter()
            .map(|a| {
                let fp = cache.footprint(&a).expect("enumerated models shape-check");
                (a, fp)
            })
            .collect()
    })
}

pub fn feasible_models(budget_kb: u32) -> Vec<(ArchSpec, Footprint)> {
    catalog()
        .iter()
        .filter(|(_, fp)| fp.fits(budget_kb))
        .cloned()
        .collect()
}

/// Samples up to `samples` feasible architectures without replacement,
/// ranks them after a short fixed-length run, and fully trains the winner.
pub fn sampling_search(
    budget_kb: u32,
    split: &DatasetSplit,
    config: &CnnSearchConfig,
) -> Result<CnnSearchOutcome> {
    let feasible = feasible_models(budget_kb);
    if feasible.is_empty() {
        return Err(Error::NoFeasibleModel {
            family: "directconv".into(),
            budget_kb,
        });
    }
    let mut rng = seeded_rng(config.seed);
    let mut picks = sample(&mut rng, feasible.len(), config.samples.min(feasible.len())).into_vec();
    picks.sort_unstable();

    let pool = picks
        .par_iter()
        .map(|&i| {
            let (arch, footprint) = feasible[i].clone();
            let seed = derive_seed(config.seed, i as u64);
            let model = CnnModel::init(arch.clone(), seed);
            // same recipe as the full run, cut short and without early stopping
            let cfg = CnnTrainConfig {
                epochs: config.partial_epochs,
                patience: None,
                seed,
                ..config.full.clone()
            };
            let (_, h) = train_cnn(model, split, &cfg)?;
            Ok((
                i,
                Candidate {
                    arch,
                    footprint,
                    validation_accuracy: h.best_validation_accuracy,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let (winner, _) = pool
        .iter()
        .max_by(|(_, a), (_, b)| {
            a.validation_accuracy
                .total_cmp(&b.validation_accuracy)
                .then_with(|| b.arch.cmp(&a.arch))
        })
        .expect("pool is non-empty");
    let (arch, footprint) = feasible[*winner].clone();
    let seed = derive_seed(config.seed, *winner as u64);
    let full = CnnTrainConfig {
        seed,
        ..config.full.clone()
    };
    let (model, history) = train_cnn(CnnModel::init(arch, seed), split, &full)?;
    Ok(CnnSearchOutcome {
        model,
        footprint,
        pool: pool.into_iter().map(|(_, c)| c).collect(),
        history,
    })
}
