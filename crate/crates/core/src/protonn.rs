//! Prototype classifier: a sparse projection, learned prototypes in the
//! projected space, and per-prototype label scores combined through a
//! Gaussian kernel.
//!
//! `score(c) = Σ_j Z[c, j] · exp(−γ² ‖W x − b_j‖²)`

use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::adam::AdamState;
use crate::codec::{self, density_to_permille, permille_to_density, ParamReader, ParamWriter, TAG_PROTONN};
use crate::datasets::{Example, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::history::{accuracy_with, batch_sum, ensure_finite, EarlyStopping, EpochRecord, History};
use crate::real::{argmax, Real};
use crate::rng::{fan_in_uniform, seeded_rng, shuffled_indices, SeededRng};
use crate::size::{footprint_bytes, matrix_footprint, Footprint};
use crate::sparse::SupportMask;
use crate::tensor::{ImageTensor, SparseMatrix};
use crate::Classifier;

pub const INPUT_DIM: usize = 3072;

/// Size-determining hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtoSpec {
    pub dim: usize,
    pub prototypes: usize,
    pub density: f64,
}

impl ProtoSpec {
    pub fn new(dim: usize, prototypes: usize, density: f64) -> Result<Self> {
        if dim == 0 || prototypes == 0 {
            return Err(Error::invalid(format!(
                "projection dim {dim} and prototype count {prototypes} must be positive"
            )));
        }
        if !(density > 0.0 && density <= 1.0) {
            return Err(Error::invalid(format!("density {density} not in (0, 1]")));
        }
        Ok(ProtoSpec {
            dim,
            prototypes,
            density,
        })
    }

    pub fn footprint(&self, input_dim: usize) -> Footprint {
        let projection = matrix_footprint(self.dim * input_dim, self.density);
        let rest = self.dim * self.prototypes + NUM_CLASSES * self.prototypes + 1;
        projection.add(footprint_bytes(rest as u64, 0, 0))
    }
}

/// Projection (sparse below full density), prototypes, label scores, `γ`.
pub fn protonn_footprint(dim: usize, prototypes: usize, density: f64) -> Result<Footprint> {
    Ok(ProtoSpec::new(dim, prototypes, density)?.footprint(INPUT_DIM))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtoNNModel {
    spec: ProtoSpec,
    input_dim: usize,
    /// `dim × input_dim`, zero off the support.
    projection: Vec<f32>,
    support: SupportMask,
    /// `prototypes × dim`, one prototype per row.
    prototypes: Vec<f32>,
    /// `classes × prototypes`.
    label_scores: Vec<f32>,
    gamma: f32,
}

/// Projected point `W x`.
pub fn project<T: Real>(w: &[T], dim: usize, x: &[T]) -> Vec<T> {
    let n = x.len();
    (0..dim)
        .map(|r| {
            w[r * n..(r + 1) * n]
                .iter()
                .zip(x)
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
        })
        .collect()
}

/// Squared distances from `p` to every prototype row of `b`.
pub fn sq_distances<T: Real>(p: &[T], b: &[T]) -> Vec<T> {
    let d = p.len();
    b.chunks(d)
        .map(|row| {
            row.iter()
                .zip(p)
                .fold(T::zero(), |acc, (&bj, &pj)| acc + (pj - bj) * (pj - bj))
        })
        .collect()
}

fn weighted_scores<T: Real>(k: &[T], z: &[T], classes: usize) -> Vec<T> {
    let m = k.len();
    (0..classes)
        .map(|c| {
            z[c * m..(c + 1) * m]
                .iter()
                .zip(k)
                .fold(T::zero(), |acc, (&zc, &kj)| acc + zc * kj)
        })
        .collect()
}

/// Kernel scores for one input.
pub fn scores<T: Real>(w: &[T], b: &[T], z: &[T], gamma: T, dim: usize, x: &[T]) -> Vec<T> {
    let p = project(w, dim, x);
    let g2 = gamma * gamma;
    let k: Vec<T> = sq_distances(&p, b).into_iter().map(|d| (-g2 * d).exp()).collect();
    weighted_scores(&k, z, z.len() / k.len())
}

/// Which parameter blocks to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blocks {
    pub projection: bool,
    pub prototypes: bool,
    pub label_scores: bool,
}

impl Blocks {
    pub const ALL: Blocks = Blocks {
        projection: true,
        prototypes: true,
        label_scores: true,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtoGrads<T> {
    pub projection: Vec<T>,
    pub prototypes: Vec<T>,
    pub label_scores: Vec<T>,
}

/// Squared error `Σ_c (score_c − onehot_c)²` and gradients for the requested
/// blocks (unrequested blocks come back empty).
#[allow(clippy::too_many_arguments)]
pub fn loss_and_grads<T: Real>(
    w: &[T],
    b: &[T],
    z: &[T],
    gamma: T,
    dim: usize,
    x: &[T],
    label: usize,
    want: Blocks,
) -> (T, ProtoGrads<T>) {
    let m = b.len() / dim;
    let classes = z.len() / m;
    let p = project(w, dim, x);
    let g2 = gamma * gamma;
    let dist = sq_distances(&p, b);
    let k: Vec<T> = dist.iter().map(|&d| (-g2 * d).exp()).collect();
    let s = weighted_scores(&k, z, classes);
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let e: Vec<T> = s
        .iter()
        .enumerate()
        .map(|(c, &sc)| {
            let y = if c == label { T::one() } else { T::zero() };
            loss += (sc - y) * (sc - y);
            two * (sc - y)
        })
        .collect();

    let mut grads = ProtoGrads {
        projection: Vec::new(),
        prototypes: Vec::new(),
        label_scores: Vec::new(),
    };
    if want.label_scores {
        grads.label_scores = (0..classes * m).map(|i| e[i / m] * k[i % m]).collect();
    }
    if !(want.prototypes || want.projection) {
        return (loss, grads);
    }
    // d loss / d (p − b_j) = Σ_c e_c Z[c,j] · k_j · (−2γ²) · (p − b_j)
    let coef: Vec<T> = (0..m)
        .map(|j| {
            let dk = (0..classes).fold(T::zero(), |acc, c| acc + e[c] * z[c * m + j]);
            dk * k[j] * (-two * g2)
        })
        .collect();
    let mut gp = vec![T::zero(); dim];
    if want.prototypes {
        grads.prototypes = vec![T::zero(); m * dim];
    }
    for j in 0..m {
        for r in 0..dim {
            let g = coef[j] * (p[r] - b[j * dim + r]);
            gp[r] += g;
            if want.prototypes {
                grads.prototypes[j * dim + r] = -g;
            }
        }
    }
    if want.projection {
        let n = x.len();
        let mut gw = vec![T::zero(); dim * n];
        for r in 0..dim {
            for (g, &xi) in gw[r * n..(r + 1) * n].iter_mut().zip(x) {
                *g = gp[r] * xi;
            }
        }
        grads.projection = gw;
    }
    (loss, grads)
}

impl ProtoNNModel {
    pub fn from_parts(
        spec: ProtoSpec,
        input_dim: usize,
        projection: Vec<f32>,
        prototypes: Vec<f32>,
        label_scores: Vec<f32>,
        gamma: f32,
    ) -> Result<Self> {
        let (d, m) = (spec.dim, spec.prototypes);
        if projection.len() != d * input_dim
            || prototypes.len() != m * d
            || label_scores.len() != NUM_CLASSES * m
        {
            return Err(Error::shape(format!(
                "protonn d={d} m={m} D={input_dim}: got W {}, B {}, Z {}",
                projection.len(),
                prototypes.len(),
                label_scores.len()
            )));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma {gamma} must be finite and >= 0")));
        }
        let mut projection = projection;
        let support = if spec.density < 1.0 {
            SupportMask::threshold(&mut projection, spec.density)?
        } else {
            SupportMask::dense(projection.len())
        };
        Ok(ProtoNNModel {
            spec,
            input_dim,
            projection,
            support,
            prototypes,
            label_scores,
            gamma,
        })
    }

    pub fn spec(&self) -> ProtoSpec {
        self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn gamma(&self) -> f32 {
        self.gamma
    }

    pub fn projection(&self) -> &[f32] {
        &self.projection
    }

    pub fn prototypes(&self) -> &[f32] {
        &self.prototypes
    }

    pub fn label_scores(&self) -> &[f32] {
        &self.label_scores
    }

    pub fn projection_nonzeros(&self) -> usize {
        self.support.count()
    }

    pub fn footprint(&self) -> Footprint {
        self.spec.footprint(self.input_dim)
    }

    fn check_input(&self, x: &[f32]) -> Result<()> {
        if x.len() == self.input_dim {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "protonn expects {} features, got {}",
                self.input_dim,
                x.len()
            )))
        }
    }

    /// Kernel scores exactly as defined.
    pub fn scores(&self, x: &[f32]) -> Result<Vec<f32>> {
        self.check_input(x)?;
        Ok(scores(
            &self.projection,
            &self.prototypes,
            &self.label_scores,
            self.gamma,
            self.spec.dim,
            x,
        ))
    }

    /// Scores multiplied by `exp(γ² · min_j dist_j)`: same argmax, but the
    /// nearest prototype never underflows.
    pub fn scaled_scores(&self, x: &[f32]) -> Result<Vec<f32>> {
        self.check_input(x)?;
        let p = project(&self.projection, self.spec.dim, x);
        let dist = sq_distances(&p, &self.prototypes);
        let near = dist.iter().copied().fold(f32::INFINITY, f32::min);
        let g2 = self.gamma * self.gamma;
        let k: Vec<f32> = dist.iter().map(|&d| (-g2 * (d - near)).exp()).collect();
        Ok(weighted_scores(&k, &self.label_scores, NUM_CLASSES))
    }

    pub fn predict_features(&self, x: &[f32]) -> Result<usize> {
        Ok(argmax(&self.scaled_scores(x)?))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ParamWriter::new(TAG_PROTONN);
        w.header_u32(self.spec.dim as u32)
            .header_u32(self.spec.prototypes as u32)
            .header_u32(density_to_permille(self.spec.density))
            .header_u32(self.input_dim as u32);
        if self.spec.density < 1.0 {
            let s = self
                .support
                .to_sparse(self.spec.dim, self.input_dim, &self.projection)?;
            w.sparse(&s);
        } else {
            w.dense(&self.projection);
        }
        w.dense(&self.prototypes)
            .dense(&self.label_scores)
            .scalar(self.gamma);
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ParamReader::new(bytes, TAG_PROTONN)?;
        let (d, m) = (r.usize()?, r.usize()?);
        let spec = ProtoSpec::new(d, m, permille_to_density(r.u32()?))?;
        let input_dim = r.usize()?;
        let n = d * input_dim;
        let (projection, support) = if spec.density < 1.0 {
            let nnz = crate::sparse::kept_count(n, spec.density);
            let s: SparseMatrix = r.sparse(d, input_dim, nnz)?;
            (s.to_dense().into_data(), SupportMask::from_sparse(&s))
        } else {
            (r.dense(n)?, SupportMask::dense(n))
        };
        let prototypes = r.dense(m * d)?;
        let label_scores = r.dense(NUM_CLASSES * m)?;
        let gamma = r.f32()?;
        r.finish()?;
        Ok(ProtoNNModel {
            spec,
            input_dim,
            projection,
            support,
            prototypes,
            label_scores,
            gamma,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        codec::write_file(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ProtoNNModel::from_bytes(&codec::read_file(path)?)
    }
}

impl Classifier for ProtoNNModel {
    fn logits(&self, image: &ImageTensor) -> Result<Vec<f32>> {
        self.scaled_scores(image.data())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtoTrainConfig {
    pub gamma: f32,
    pub learning_rate: f32,
    pub epochs: usize,
    pub patience: Option<usize>,
    pub batch_size: usize,
    pub kmeans_iterations: usize,
    pub seed: u64,
}

impl Default for ProtoTrainConfig {
    fn default() -> Self {
        ProtoTrainConfig {
            gamma: 1.5,
            learning_rate: 0.01,
            epochs: 100,
            patience: Some(10),
            batch_size: 32,
            kmeans_iterations: 10,
            seed: 0,
        }
    }
}

/// Prototype count per class: `m / L` each, remainder to the lowest classes.
pub fn prototypes_per_class(m: usize, classes: usize) -> Vec<usize> {
    (0..classes)
        .map(|c| m / classes + usize::from(c < m % classes))
        .collect()
}

/// Lloyd's k-means with centres seeded from distinct points.
fn kmeans(points: &[Vec<f32>], k: usize, iterations: usize, rng: &mut SeededRng) -> Vec<Vec<f32>> {
    if points.is_empty() {
        return vec![];
    }
    let dim = points[0].len();
    let mut centres: Vec<Vec<f32>> = if k <= points.len() {
        sample(rng, points.len(), k).into_iter().map(|i| points[i].clone()).collect()
    } else {
        (0..k).map(|i| points[i % points.len()].clone()).collect()
    };
    for _ in 0..iterations {
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for p in points {
            let d = sq_distances(p, &centres.concat());
            let j = d
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, _)| j)
                .unwrap_or(0);
            counts[j] += 1;
            for (s, &v) in sums[j].iter_mut().zip(p) {
                *s += v as f64;
            }
        }
        for ((c, s), &n) in centres.iter_mut().zip(&sums).zip(&counts) {
            if n > 0 {
                for (cv, &sv) in c.iter_mut().zip(s) {
                    *cv = (sv / n as f64) as f32;
                }
            }
        }
    }
    centres
}

/// Random projection, per-class k-means prototypes, one-hot label scores.
pub fn init_model<E: Example>(
    spec: ProtoSpec,
    train: &[E],
    gamma: f32,
    kmeans_iterations: usize,
    seed: u64,
) -> Result<ProtoNNModel> {
    let first = train
        .first()
        .ok_or_else(|| Error::InsufficientData("protonn needs training data".into()))?;
    let input_dim = first.features().len();
    let mut rng = seeded_rng(seed);
    let mut projection = fan_in_uniform(&mut rng, spec.dim * input_dim, input_dim);
    if spec.density < 1.0 {
        SupportMask::threshold(&mut projection, spec.density)?;
    }
    let per_class = prototypes_per_class(spec.prototypes, NUM_CLASSES);
    let mut prototypes = Vec::with_capacity(spec.prototypes * spec.dim);
    let mut owner = Vec::with_capacity(spec.prototypes);
    for (c, &k) in per_class.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let points: Vec<Vec<f32>> = train
            .iter()
            .filter(|e| e.label() == c)
            .map(|e| project(&projection, spec.dim, e.features()))
            .collect();
        let centres = if points.is_empty() {
            (0..k).map(|_| vec![0.0; spec.dim]).collect()
        } else {
            kmeans(&points, k, kmeans_iterations, &mut rng)
        };
        for centre in centres {
            prototypes.extend(centre);
            owner.push(c);
        }
    }
    let m = spec.prototypes;
    let mut label_scores = vec![0.0; NUM_CLASSES * m];
    for (j, &c) in owner.iter().enumerate() {
        label_scores[c * m + j] = 1.0;
    }
    ProtoNNModel::from_parts(spec, input_dim, projection, prototypes, label_scores, gamma)
}

/// Mean loss of one block's sub-pass; updates only that block.
fn block_pass<E: Example>(
    model: &mut ProtoNNModel,
    train: &[E],
    order: &[usize],
    batch: usize,
    block: Blocks,
    opt: &mut AdamState,
) -> Result<f64> {
    let mut total = 0.0f64;
    for chunk in order.chunks(batch) {
        let (loss, grad) = batch_sum(
            chunk,
            |i| {
                let e = &train[i];
                let (l, g) = loss_and_grads(
                    &model.projection,
                    &model.prototypes,
                    &model.label_scores,
                    model.gamma,
                    model.spec.dim,
                    e.features(),
                    e.label(),
                    block,
                );
                let g = if block.projection {
                    g.projection
                } else if block.prototypes {
                    g.prototypes
                } else {
                    g.label_scores
                };
                (l as f64, g)
            },
            |(la, ga), (lb, gb)| {
                *la += lb;
                for (a, b) in ga.iter_mut().zip(gb) {
                    *a += b;
                }
            },
        )
        .expect("chunks are non-empty");
        total += loss;
        let scale = 1.0 / chunk.len() as f32;
        let grad: Vec<f32> = grad.into_iter().map(|g| g * scale).collect();
        let target = if block.projection {
            &mut model.projection
        } else if block.prototypes {
            &mut model.prototypes
        } else {
            &mut model.label_scores
        };
        opt.step(target, &grad)?;
    }
    Ok(total / order.len().max(1) as f64)
}

/// Alternating Adam passes over projection, prototypes and label scores,
/// re-thresholding the projection after each of its passes. Returns the
/// best-validation snapshot.
pub fn protonn_train<E: Example>(
    spec: ProtoSpec,
    train: &[E],
    validation: &[E],
    config: &ProtoTrainConfig,
) -> Result<(ProtoNNModel, History)> {
    let mut model = init_model(spec, train, config.gamma, config.kmeans_iterations, config.seed)?;
    let lr = config.learning_rate;
    let mut opt_w = AdamState::new(model.projection.len(), lr);
    let mut opt_b = AdamState::new(model.prototypes.len(), lr);
    let mut opt_z = AdamState::new(model.label_scores.len(), lr);
    let mut rng = seeded_rng(config.seed ^ 0xA5A5_A5A5);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = History::default();
    let mut best = model.clone();
    let batch = config.batch_size.max(1);
    let only = |projection, prototypes, label_scores| Blocks {
        projection,
        prototypes,
        label_scores,
    };

    for epoch in 0..config.epochs {
        let order = shuffled_indices(&mut rng, train.len());
        block_pass(&mut model, train, &order, batch, only(true, false, false), &mut opt_w)?;
        if spec.density < 1.0 {
            model.support = SupportMask::threshold(&mut model.projection, spec.density)?;
        }
        let order = shuffled_indices(&mut rng, train.len());
        block_pass(&mut model, train, &order, batch, only(false, true, false), &mut opt_b)?;
        let order = shuffled_indices(&mut rng, train.len());
        let loss = block_pass(&mut model, train, &order, batch, only(false, false, true), &mut opt_z)?;
        ensure_finite(loss, epoch, "protonn")?;

        let val = accuracy_with(validation, |x| model.predict_features(x))?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss,
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

/// The hyperparameter grid searched per budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtoGrid {
    pub dims: Vec<usize>,
    pub prototypes: Vec<usize>,
    pub gammas: Vec<f32>,
    pub learning_rates: Vec<f32>,
    pub density: f64,
}

impl ProtoGrid {
    pub fn full() -> Self {
        ProtoGrid {
            dims: vec![2, 4, 8, 16, 32, 64],
            prototypes: vec![2, 4, 8, 16, 32, 64],
            gammas: (-4..=4).map(|n| 1.5 * 10f32.powi(n)).collect(),
            learning_rates: vec![0.1, 0.01, 0.001],
            density: 1.0,
        }
    }

    /// Cells in `(dim, prototypes, gamma, learning rate)` order.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &dim in &self.dims {
            for &prototypes in &self.prototypes {
                for &gamma in &self.gammas {
                    for &learning_rate in &self.learning_rates {
                        out.push(GridCell {
                            spec: ProtoSpec {
                                dim,
                                prototypes,
                                density: self.density,
                            },
                            gamma,
                            learning_rate,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn feasible_cells(&self, budget_kb: u32, input_dim: usize) -> Vec<GridCell> {
        self.cells()
            .into_iter()
            .filter(|c| c.spec.footprint(input_dim).fits(budget_kb))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub spec: ProtoSpec,
    pub gamma: f32,
    pub learning_rate: f32,
}

#[derive(Debug, Clone)]
pub struct ProtoSearchOutcome {
    pub model: ProtoNNModel,
    pub cell: GridCell,
    pub footprint: Footprint,
    pub validation_accuracy: f64,
    /// `(cell, validation accuracy)` for every feasible cell, in grid order.
    pub evaluated: Vec<(GridCell, f64)>,
    pub history: History,
}

#[derive(Debug, Clone)]
pub struct ProtoCandidate {
    pub cell: GridCell,
    pub footprint: Footprint,
    pub model: ProtoNNModel,
    pub history: History,
}

/// Trains every grid cell fitting `limit_kb`, in grid order.
pub fn protonn_grid_train<E: Example>(
    limit_kb: u32,
    train: &[E],
    validation: &[E],
    grid: &ProtoGrid,
    base: &ProtoTrainConfig,
) -> Result<Vec<ProtoCandidate>> {
    let input_dim = train.first().map_or(INPUT_DIM, |e| e.features().len());
    let cells = grid.feasible_cells(limit_kb, input_dim);
    if cells.is_empty() {
        return Err(Error::NoFeasibleModel {
            family: "protonn".into(),
            budget_kb: limit_kb,
        });
    }
    cells
        .par_iter()
        .map(|cell| {
            let cfg = ProtoTrainConfig {
                gamma: cell.gamma,
                learning_rate: cell.learning_rate,
                ..base.clone()
            };
            let (model, history) = protonn_train(cell.spec, train, validation, &cfg)?;
            Ok(ProtoCandidate {
                cell: *cell,
                footprint: model.footprint(),
                model,
                history,
            })
        })
        .collect()
}

/// Best validated candidate fitting `budget_kb`; earlier cells win ties.
pub fn select_candidate(candidates: &[ProtoCandidate], budget_kb: u32) -> Result<&ProtoCandidate> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.footprint.fits(budget_kb))
        .max_by(|(i, a), (j, b)| {
            a.history
                .best_validation_accuracy
                .total_cmp(&b.history.best_validation_accuracy)
                .then(j.cmp(i))
        })
        .map(|(_, c)| c)
        .ok_or_else(|| Error::NoFeasibleModel {
            family: "protonn".into(),
            budget_kb,
        })
}

/// Trains every footprint-feasible cell and keeps the best by validation
/// accuracy, earlier cells winning ties.
pub fn protonn_grid_search<E: Example>(
    budget_kb: u32,
    train: &[E],
    validation: &[E],
    grid: &ProtoGrid,
    base: &ProtoTrainConfig,
) -> Result<ProtoSearchOutcome> {
    let candidates = protonn_grid_train(budget_kb, train, validation, grid, base)?;
    let best = select_candidate(&candidates, budget_kb)?.clone();
    Ok(ProtoSearchOutcome {
        footprint: best.footprint,
        validation_accuracy: best.history.best_validation_accuracy,
        evaluated: candidates
            .iter()
            .map(|c| (c.cell, c.history.best_validation_accuracy))
            .collect(),
        model: best.model,
        cell: best.cell,
        history: best.history,
    })
}
