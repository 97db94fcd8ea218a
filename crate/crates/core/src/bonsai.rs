//! Shallow decision tree over a learned sparse projection.
//!
//! With `x̂ = Z x`, every node `k` contributes `(W_k x̂) ⊙ tanh(σ_s V_k x̂)`
//! weighted by its path indicator `I_k`. Internal node `k` has children
//! `2k+1` (left) and `2k+2` (right). Soft indicators multiply
//! `sigmoid(σ_b θ_kᵀ x̂)` for left turns and its complement for right turns;
//! the hard indicator follows `θ_kᵀ x̂ > 0` to the left.

use std::path::Path;

use rayon::prelude::*;

use crate::adam::AdamState;
use crate::codec::{self, ParamReader, ParamWriter, TAG_BONSAI};
use crate::datasets::{Example, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::history::{accuracy_with, batch_sum, ensure_finite, stage_of, EarlyStopping, EpochRecord, History};
use crate::real::{argmax, softmax_cross_entropy, Real};
use crate::rng::{fan_in_uniform, seeded_rng, shuffled_indices};
use crate::size::{footprint_bytes, Footprint};
use crate::sparse::{kept_count, SupportMask};
use crate::tensor::ImageTensor;
use crate::Classifier;

pub const INPUT_DIM: usize = 3072;
pub const MAX_DEPTH: usize = 8;
pub const PROJECTION_DENSITY: f64 = 0.2;
pub const PREDICTOR_DENSITY: f64 = 0.3;
pub const BRANCH_DENSITY: f64 = 0.62;
/// Largest budget the depth × dimension sweep explores.
pub const SWEEP_LIMIT_KB: u32 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BonsaiSpec {
    pub depth: usize,
    pub dim: usize,
}

impl BonsaiSpec {
    pub fn new(depth: usize, dim: usize) -> Result<Self> {
        if !(1..=MAX_DEPTH).contains(&depth) || dim == 0 {
            return Err(Error::invalid(format!(
                "bonsai depth {depth} must be in 1..={MAX_DEPTH} and dim {dim} positive"
            )));
        }
        Ok(BonsaiSpec { depth, dim })
    }

    pub fn nodes(&self) -> usize {
        (1 << (self.depth + 1)) - 1
    }

    pub fn internal_nodes(&self) -> usize {
        (1 << self.depth) - 1
    }

    /// Nonzeros of the projection, the stacked predictor pairs and the
    /// stacked branch vectors.
    pub fn nonzeros(&self, input_dim: usize) -> [usize; 4] {
        let predictors = self.nodes() * NUM_CLASSES * self.dim;
        [
            kept_count(self.dim * input_dim, PROJECTION_DENSITY),
            kept_count(predictors, PREDICTOR_DENSITY),
            kept_count(predictors, PREDICTOR_DENSITY),
            kept_count(self.internal_nodes() * self.dim, BRANCH_DENSITY),
        ]
    }

    pub fn footprint(&self, input_dim: usize) -> Footprint {
        let nnz: usize = self.nonzeros(input_dim).iter().sum();
        footprint_bytes(0, nnz as u64, 0)
    }
}

/// Every parameter block is stored sparse.
pub fn bonsai_footprint(spec: BonsaiSpec) -> Footprint {
    spec.footprint(INPUT_DIM)
}

/// Parameter blocks: `z` is `dim × D`, `w` and `v` are `nodes × L × dim`,
/// `theta` is `internal × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BonsaiParams<T> {
    pub z: Vec<T>,
    pub w: Vec<T>,
    pub v: Vec<T>,
    pub theta: Vec<T>,
}

impl<T: Real> BonsaiParams<T> {
    pub fn zeros_like(&self) -> Self {
        BonsaiParams {
            z: vec![T::zero(); self.z.len()],
            w: vec![T::zero(); self.w.len()],
            v: vec![T::zero(); self.v.len()],
            theta: vec![T::zero(); self.theta.len()],
        }
    }

    pub fn blocks(&self) -> [&Vec<T>; 4] {
        [&self.z, &self.w, &self.v, &self.theta]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<T>; 4] {
        [&mut self.z, &mut self.w, &mut self.v, &mut self.theta]
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

fn matvec<T: Real>(m: &[T], cols: usize, x: &[T]) -> Vec<T> {
    m.chunks(cols)
        .map(|row| row.iter().zip(x).fold(T::zero(), |a, (&w, &v)| a + w * v))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Soft,
    Hard,
}

/// Path indicators of every node.
pub fn indicators<T: Real>(
    theta: &[T],
    spec: BonsaiSpec,
    sigma_branch: T,
    xhat: &[T],
    mode: Mode,
) -> Vec<T> {
    let d = spec.dim;
    let mut ind = vec![T::zero(); spec.nodes()];
    ind[0] = T::one();
    for k in 0..spec.internal_nodes() {
        let u = theta[k * d..(k + 1) * d]
            .iter()
            .zip(xhat)
            .fold(T::zero(), |a, (&t, &x)| a + t * x);
        let left = match mode {
            Mode::Soft => (sigma_branch * u).sigmoid(),
            Mode::Hard => {
                if u > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        };
        ind[2 * k + 1] = ind[k] * left;
        ind[2 * k + 2] = ind[k] * (T::one() - left);
    }
    ind
}

/// Class scores; nodes with a zero indicator are skipped.
pub fn scores<T: Real>(
    params: &BonsaiParams<T>,
    spec: BonsaiSpec,
    sigma_score: T,
    sigma_branch: T,
    x: &[T],
    mode: Mode,
) -> Vec<T> {
    let d = spec.dim;
    let xhat = matvec(&params.z, x.len(), x);
    let ind = indicators(&params.theta, spec, sigma_branch, &xhat, mode);
    let block = NUM_CLASSES * d;
    let mut s = vec![T::zero(); NUM_CLASSES];
    for (k, &ik) in ind.iter().enumerate() {
        if ik == T::zero() {
            continue;
        }
        let a = matvec(&params.w[k * block..(k + 1) * block], d, &xhat);
        let c = matvec(&params.v[k * block..(k + 1) * block], d, &xhat);
        for ((sv, av), cv) in s.iter_mut().zip(a).zip(c) {
            *sv += ik * av * (sigma_score * cv).tanh();
        }
    }
    s
}

/// Soft-mode cross-entropy of one example and its gradients.
pub fn example_loss_grads<T: Real>(
    params: &BonsaiParams<T>,
    spec: BonsaiSpec,
    sigma_score: T,
    sigma_branch: T,
    x: &[T],
    label: usize,
) -> (T, BonsaiParams<T>) {
    let d = spec.dim;
    let n_in = x.len();
    let block = NUM_CLASSES * d;
    let xhat = matvec(&params.z, n_in, x);
    let ind = indicators(&params.theta, spec, sigma_branch, &xhat, Mode::Soft);
    let mut a_all = Vec::with_capacity(spec.nodes());
    let mut t_all = Vec::with_capacity(spec.nodes());
    let mut s = vec![T::zero(); NUM_CLASSES];
    for (k, &ik) in ind.iter().enumerate() {
        let a = matvec(&params.w[k * block..(k + 1) * block], d, &xhat);
        let t: Vec<T> = matvec(&params.v[k * block..(k + 1) * block], d, &xhat)
            .into_iter()
            .map(|c| (sigma_score * c).tanh())
            .collect();
        for c in 0..NUM_CLASSES {
            s[c] += ik * a[c] * t[c];
        }
        a_all.push(a);
        t_all.push(t);
    }
    let (loss, g) = softmax_cross_entropy(&s, label);

    let mut grads = params.zeros_like();
    let mut dxhat = vec![T::zero(); d];
    let mut dind = vec![T::zero(); spec.nodes()];
    for k in 0..spec.nodes() {
        let (a, t, ik) = (&a_all[k], &t_all[k], ind[k]);
        for c in 0..NUM_CLASSES {
            dind[k] += g[c] * a[c] * t[c];
            let ga = ik * g[c] * t[c];
            let gc = ik * g[c] * a[c] * sigma_score * (T::one() - t[c] * t[c]);
            let row = k * block + c * d;
            for j in 0..d {
                grads.w[row + j] = ga * xhat[j];
                grads.v[row + j] = gc * xhat[j];
                dxhat[j] += ga * params.w[row + j] + gc * params.v[row + j];
            }
        }
    }
    // children have larger indices, so a reverse sweep sees them first
    for k in (0..spec.internal_nodes()).rev() {
        let (l, r) = (2 * k + 1, 2 * k + 2);
        let theta = &params.theta[k * d..(k + 1) * d];
        let u = theta.iter().zip(&xhat).fold(T::zero(), |acc, (&t, &x)| acc + t * x);
        let p = (sigma_branch * u).sigmoid();
        let (dl, dr) = (dind[l], dind[r]);
        dind[k] += dl * p + dr * (T::one() - p);
        let dp = ind[k] * (dl - dr);
        let du = dp * p * (T::one() - p) * sigma_branch;
        for j in 0..d {
            grads.theta[k * d + j] = du * xhat[j];
            dxhat[j] += du * theta[j];
        }
    }
    for (j, &dj) in dxhat.iter().enumerate() {
        for (gz, &xi) in grads.z[j * n_in..(j + 1) * n_in].iter_mut().zip(x) {
            *gz = dj * xi;
        }
    }
    (loss, grads)
}

/// L2 penalty strengths, applied as `λ/2 · ‖·‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularizers {
    pub z: f64,
    pub w: f64,
    pub v: f64,
    pub theta: f64,
}

impl Default for Regularizers {
    fn default() -> Self {
        Regularizers {
            z: 1e-4,
            w: 1e-3,
            v: 1e-3,
            theta: 1e-3,
        }
    }
}

impl Regularizers {
    fn strengths(&self) -> [f64; 4] {
        [self.z, self.w, self.v, self.theta]
    }

    /// Penalty value and its gradient.
    pub fn apply<T: Real>(&self, params: &BonsaiParams<T>) -> (T, BonsaiParams<T>) {
        let mut g = params.zeros_like();
        let mut value = T::zero();
        for ((block, gb), lambda) in params
            .blocks()
            .into_iter()
            .zip(g.blocks_mut())
            .zip(self.strengths())
        {
            let lam = T::lit(lambda);
            for (&p, gp) in block.iter().zip(gb.iter_mut()) {
                value += T::lit(0.5) * lam * p * p;
                *gp = lam * p;
            }
        }
        (value, g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BonsaiModel {
    spec: BonsaiSpec,
    input_dim: usize,
    params: BonsaiParams<f32>,
    sigma_score: f32,
    sigma_branch: f32,
}

impl BonsaiModel {
    /// Builds a model, hard-thresholding every block to its density.
    pub fn from_params(
        spec: BonsaiSpec,
        input_dim: usize,
        params: BonsaiParams<f32>,
        sigma_score: f32,
        sigma_branch: f32,
    ) -> Result<Self> {
        let block = spec.nodes() * NUM_CLASSES * spec.dim;
        if params.z.len() != spec.dim * input_dim
            || params.w.len() != block
            || params.v.len() != block
            || params.theta.len() != spec.internal_nodes() * spec.dim
        {
            return Err(Error::shape(format!(
                "bonsai h={} d={}: parameter block sizes do not match",
                spec.depth, spec.dim
            )));
        }
        let mut m = BonsaiModel {
            spec,
            input_dim,
            params,
            sigma_score,
            sigma_branch,
        };
        m.threshold()?;
        Ok(m)
    }

    /// Random dense initialisation (thresholding happens during training).
    fn init_dense(spec: BonsaiSpec, input_dim: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let block = spec.nodes() * NUM_CLASSES * spec.dim;
        let params = BonsaiParams {
            z: fan_in_uniform(&mut rng, spec.dim * input_dim, input_dim),
            w: fan_in_uniform(&mut rng, block, spec.dim),
            v: fan_in_uniform(&mut rng, block, spec.dim),
            theta: fan_in_uniform(&mut rng, spec.internal_nodes() * spec.dim, spec.dim),
        };
        BonsaiModel {
            spec,
            input_dim,
            params,
            sigma_score: 1.0,
            sigma_branch: 1.0,
        }
    }

    fn threshold(&mut self) -> Result<[SupportMask; 4]> {
        let densities = [
            PROJECTION_DENSITY,
            PREDICTOR_DENSITY,
            PREDICTOR_DENSITY,
            BRANCH_DENSITY,
        ];
        let [z, w, v, t] = self.params.blocks_mut();
        Ok([
            SupportMask::threshold(z, densities[0])?,
            SupportMask::threshold(w, densities[1])?,
            SupportMask::threshold(v, densities[2])?,
            SupportMask::threshold(t, densities[3])?,
        ])
    }

    pub fn spec(&self) -> BonsaiSpec {
        self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &BonsaiParams<f32> {
        &self.params
    }

    pub fn sigma_score(&self) -> f32 {
        self.sigma_score
    }

    pub fn sigma_branch(&self) -> f32 {
        self.sigma_branch
    }

    pub fn footprint(&self) -> Footprint {
        self.spec.footprint(self.input_dim)
    }

    /// Nonzero count of each block: projection, W, V, θ.
    pub fn nonzeros(&self) -> [usize; 4] {
        self.params
            .blocks()
            .map(|b| b.iter().filter(|v| **v != 0.0).count())
    }

    pub fn scores(&self, x: &[f32], mode: Mode) -> Result<Vec<f32>> {
        if x.len() != self.input_dim {
            return Err(Error::shape(format!(
                "bonsai expects {} features, got {}",
                self.input_dim,
                x.len()
            )));
        }
        Ok(scores(
            &self.params,
            self.spec,
            self.sigma_score,
            self.sigma_branch,
            x,
            mode,
        ))
    }

    /// Hard-mode prediction.
    pub fn predict_features(&self, x: &[f32]) -> Result<usize> {
        Ok(argmax(&self.scores(x, Mode::Hard)?))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ParamWriter::new(TAG_BONSAI);
        w.header_u32(self.spec.depth as u32)
            .header_u32(self.spec.dim as u32)
            .header_u32(self.input_dim as u32)
            .header_u32(self.sigma_score.to_bits())
            .header_u32(self.sigma_branch.to_bits());
        let nnz = self.spec.nonzeros(self.input_dim);
        for (block, want) in self.params.blocks().into_iter().zip(nnz) {
            // the support is the top-k set, which thresholding reproduces
            let mut values = block.clone();
            let mask = SupportMask::threshold(&mut values, want as f64 / block.len() as f64)?;
            if mask.count() != want {
                return Err(Error::invalid("bonsai support size drifted"));
            }
            w.sparse(&mask.to_sparse(1, block.len(), &values)?);
        }
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ParamReader::new(bytes, TAG_BONSAI)?;
        let spec = BonsaiSpec::new(r.usize()?, r.usize()?)?;
        let input_dim = r.usize()?;
        let sigma_score = f32::from_bits(r.u32()?);
        let sigma_branch = f32::from_bits(r.u32()?);
        let block = spec.nodes() * NUM_CLASSES * spec.dim;
        let lens = [spec.dim * input_dim, block, block, spec.internal_nodes() * spec.dim];
        let nnz = spec.nonzeros(input_dim);
        let mut blocks = Vec::with_capacity(4);
        for (len, k) in lens.into_iter().zip(nnz) {
            blocks.push(r.sparse(1, len, k)?.to_dense().into_data());
        }
        r.finish()?;
        let theta = blocks.pop().expect("four blocks");
        let v = blocks.pop().expect("four blocks");
        let w = blocks.pop().expect("four blocks");
        let z = blocks.pop().expect("four blocks");
        Ok(BonsaiModel {
            spec,
            input_dim,
            params: BonsaiParams { z, w, v, theta },
            sigma_score,
            sigma_branch,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        codec::write_file(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        BonsaiModel::from_bytes(&codec::read_file(path)?)
    }
}

impl Classifier for BonsaiModel {
    fn logits(&self, image: &ImageTensor) -> Result<Vec<f32>> {
        self.scores(image.data(), Mode::Hard)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BonsaiTrainConfig {
    pub epochs: usize,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub regularizers: Regularizers,
    pub sigma_score: f32,
    /// Branch sharpness reached by the start of the fine-tuning phase;
    /// it grows geometrically from 1.
    pub sigma_branch_final: f32,
    pub seed: u64,
}

impl Default for BonsaiTrainConfig {
    fn default() -> Self {
        BonsaiTrainConfig {
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 224,
            regularizers: Regularizers::default(),
            sigma_score: 1.0,
            sigma_branch_final: 64.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BonsaiOutcome {
    pub final_model: BonsaiModel,
    /// Best validation accuracy among sparse (phase 1 and later) epochs.
    pub best_model: BonsaiModel,
    /// Parameters when the support was frozen.
    pub frozen_at: Option<BonsaiModel>,
    pub history: History,
}

pub fn bonsai_train<E: Example>(
    spec: BonsaiSpec,
    train: &[E],
    validation: &[E],
    config: &BonsaiTrainConfig,
) -> Result<BonsaiOutcome> {
    let input_dim = train
        .first()
        .ok_or_else(|| Error::InsufficientData("bonsai needs training data".into()))?
        .features()
        .len();
    let mut model = BonsaiModel::init_dense(spec, input_dim, config.seed);
    model.sigma_score = config.sigma_score;
    let mut opts: Vec<AdamState> = model
        .params
        .blocks()
        .iter()
        .map(|b| AdamState::new(b.len(), config.learning_rate))
        .collect();
    let mut rng = seeded_rng(config.seed ^ 0xB0B5);
    let mut history = History::default();
    let mut stopper = EarlyStopping::new(None);
    let mut best: Option<BonsaiModel> = None;
    let mut frozen: Option<[SupportMask; 4]> = None;
    let mut frozen_at = None;
    let anneal_end = (2 * config.epochs / 3).max(1);
    let batch = config.batch_size.max(1);

    for epoch in 0..config.epochs {
        let phase = stage_of(epoch, config.epochs);
        let progress = epoch.min(anneal_end) as f32 / anneal_end as f32;
        model.sigma_branch = config.sigma_branch_final.powf(progress);
        if phase == 2 && frozen.is_none() {
            frozen = Some(model.threshold()?);
            frozen_at = Some(model.clone());
        }
        let order = shuffled_indices(&mut rng, train.len());
        let mut total = 0.0f64;
        for chunk in order.chunks(batch) {
            let (loss, mut grads) = batch_sum(
                chunk,
                |i| {
                    let e = &train[i];
                    let (l, g) = example_loss_grads(
                        &model.params,
                        spec,
                        model.sigma_score,
                        model.sigma_branch,
                        e.features(),
                        e.label(),
                    );
                    (l as f64, g)
                },
                |(la, ga), (lb, gb)| {
                    *la += lb;
                    ga.add_assign(&gb);
                },
            )
            .expect("chunks are non-empty");
            total += loss;
            let scale = 1.0 / chunk.len() as f32;
            let (_, reg) = config.regularizers.apply(&model.params);
            for (g, r) in grads.blocks_mut().into_iter().zip(reg.blocks()) {
                for (gv, &rv) in g.iter_mut().zip(r) {
                    *gv = *gv * scale + rv;
                }
            }
            if let Some(masks) = &frozen {
                for (g, m) in grads.blocks_mut().into_iter().zip(masks) {
                    m.apply(g);
                }
            }
            for ((p, g), opt) in model
                .params
                .blocks_mut()
                .into_iter()
                .zip(grads.blocks())
                .zip(&mut opts)
            {
                opt.step(p, g)?;
            }
            match (&frozen, phase) {
                (Some(masks), _) => {
                    for (p, m) in model.params.blocks_mut().into_iter().zip(masks) {
                        m.apply(p);
                    }
                }
                (None, 1) => {
                    model.threshold()?;
                }
                _ => {}
            }
        }
        let train_loss = total / train.len().max(1) as f64;
        ensure_finite(train_loss, epoch, "bonsai")?;
        let val = accuracy_with(validation, |x| model.predict_features(x))?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation_accuracy: val,
            learning_rate: config.learning_rate,
        });
        if phase >= 1 && stopper.observe(val).0 {
            best = Some(model.clone());
            history.best_epoch = Some(epoch);
            history.best_validation_accuracy = val;
        }
    }
    if frozen.is_none() {
        model.threshold()?;
    }
    let best_model = match best {
        Some(b) => b,
        None => {
            history.best_validation_accuracy = accuracy_with(validation, |x| model.predict_features(x))?;
            model.clone()
        }
    };
    Ok(BonsaiOutcome {
        final_model: model,
        best_model,
        frozen_at,
        history,
    })
}

/// `(depth, dim)` pairs visited by the sweep: for each depth, dims
/// `1, 2, 3, ...` up to the last one fitting `limit_kb`.
pub fn sweep_specs(depths: &[usize], limit_kb: u32, input_dim: usize) -> Vec<BonsaiSpec> {
    let mut out = Vec::new();
    for &depth in depths {
        for dim in 1.. {
            let spec = BonsaiSpec { depth, dim };
            if !spec.footprint(input_dim).fits(limit_kb) {
                break;
            }
            out.push(spec);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub spec: BonsaiSpec,
    pub footprint: Footprint,
    pub validation_accuracy: f64,
    pub model: BonsaiModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BonsaiSweepConfig {
    pub depths: Vec<usize>,
    /// Keep every `dim_stride`-th dimension of each depth's sweep.
    pub dim_stride: usize,
    pub limit_kb: u32,
    pub train: BonsaiTrainConfig,
}

impl Default for BonsaiSweepConfig {
    fn default() -> Self {
        BonsaiSweepConfig {
            depths: (1..=MAX_DEPTH).collect(),
            dim_stride: 1,
            limit_kb: SWEEP_LIMIT_KB,
            train: BonsaiTrainConfig::default(),
        }
    }
}

/// Trains every spec of the sweep; entries come back in sweep order.
pub fn bonsai_sweep<E: Example>(
    train: &[E],
    validation: &[E],
    config: &BonsaiSweepConfig,
) -> Result<Vec<SweepEntry>> {
    let input_dim = train.first().map_or(INPUT_DIM, |e| e.features().len());
    let specs: Vec<BonsaiSpec> = config
        .depths
        .iter()
        .flat_map(|&h| {
            sweep_specs(&[h], config.limit_kb, input_dim)
                .into_iter()
                .step_by(config.dim_stride.max(1))
        })
        .collect();
    specs
        .par_iter()
        .map(|&spec| {
            let out = bonsai_train(spec, train, validation, &config.train)?;
            Ok(SweepEntry {
                spec,
                footprint: out.best_model.footprint(),
                validation_accuracy: out.history.best_validation_accuracy,
                model: out.best_model,
            })
        })
        .collect()
}

/// Best sweep entry fitting `budget_kb`; earlier entries win ties.
pub fn select_for_budget(entries: &[SweepEntry], budget_kb: u32) -> Result<&SweepEntry> {
    entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.footprint.fits(budget_kb))
        .max_by(|(i, a), (j, b)| {
            a.validation_accuracy
                .total_cmp(&b.validation_accuracy)
                .then(j.cmp(i))
        })
        .map(|(_, e)| e)
        .ok_or_else(|| Error::NoFeasibleModel {
            family: "bonsai".into(),
            budget_kb,
        })
}

pub fn bonsai_search<E: Example>(
    budget_kb: u32,
    train: &[E],
    validation: &[E],
    config: &BonsaiSweepConfig,
) -> Result<SweepEntry> {
    let config = BonsaiSweepConfig {
        limit_kb: config.limit_kb.min(budget_kb),
        ..config.clone()
    };
    let entries = bonsai_sweep(train, validation, &config)?;
    select_for_budget(&entries, budget_kb).cloned()
}

/// Random inputs for property tests.
#[doc(hidden)]
pub fn random_params(spec: BonsaiSpec, input_dim: usize, seed: u64) -> BonsaiParams<f32> {
    BonsaiModel::init_dense(spec, input_dim, seed).params
}
