//! FastGRNN over image rows.
//!
//! Each time step is one 32-float row of one channel. A cell computes
//! `z = σ(Wx + Uh + b_z)`, `h̃ = tanh(Wx + Uh + b_h)` and
//! `h' = (ζ(1 − z) + ν) ⊙ h̃ + z ⊙ h`, sharing `W` and `U` between gate and
//! update. ζ and ν are trained as raw scalars.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::adam::AdamState;
use crate::codec::{self, density_to_permille, permille_to_density, ParamReader, ParamWriter, TAG_FASTGRNN};
use crate::datasets::{LabeledImage, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::history::{batch_sum, ensure_finite, stage_of, EarlyStopping, EpochRecord, History};
use crate::real::{argmax, softmax_cross_entropy, Real};
use crate::rng::{fan_in_uniform, seeded_rng, shuffled_indices};
use crate::size::{footprint_bytes, Footprint};
use crate::sparse::{kept_count, SupportMask};
use crate::tensor::ImageTensor;
use crate::Classifier;

/// Floats per time step: one image row.
pub const STEP_DIM: usize = 32;
pub const ROWS: usize = 32;
pub const CHANNELS: usize = 3;
pub const DENSITIES: [f64; 4] = [0.1, 0.2, 0.3, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeqMode {
    RowMajor,
    ChannelMajor,
    Multi,
}

impl SeqMode {
    pub const ALL: [SeqMode; 3] = [SeqMode::RowMajor, SeqMode::ChannelMajor, SeqMode::Multi];

    pub fn cells(self) -> usize {
        match self {
            SeqMode::Multi => CHANNELS,
            _ => 1,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            SeqMode::RowMajor => 0,
            SeqMode::ChannelMajor => 1,
            SeqMode::Multi => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        SeqMode::ALL
            .into_iter()
            .find(|m| m.code() == code)
            .ok_or_else(|| Error::Format(format!("unknown sequencing mode {code}")))
    }

    pub fn label(self) -> &'static str {
        match self {
            SeqMode::RowMajor => "FastGRNN (Row-Major)",
            SeqMode::ChannelMajor => "FastGRNN (Channel-Major)",
            SeqMode::Multi => "Multi-FastGRNN",
        }
    }
}

impl fmt::Display for SeqMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeqMode::RowMajor => "row",
            SeqMode::ChannelMajor => "channel",
            SeqMode::Multi => "multi",
        })
    }
}

impl FromStr for SeqMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "row" | "rowmajor" | "row-major" => Ok(SeqMode::RowMajor),
            "channel" | "channelmajor" | "channel-major" => Ok(SeqMode::ChannelMajor),
            "multi" => Ok(SeqMode::Multi),
            _ => Err(Error::invalid(format!("unknown sequencing mode {s:?}"))),
        }
    }
}

/// `(channel, row)` steps fed to each cell, in order.
pub fn sequence_plan(mode: SeqMode) -> Vec<Vec<(usize, usize)>> {
    match mode {
        SeqMode::RowMajor => vec![(0..CHANNELS)
            .flat_map(|c| (0..ROWS).map(move |r| (c, r)))
            .collect()],
        SeqMode::ChannelMajor => vec![(0..ROWS)
            .flat_map(|r| (0..CHANNELS).map(move |c| (c, r)))
            .collect()],
        SeqMode::Multi => (0..CHANNELS)
            .map(|c| (0..ROWS).map(|r| (c, r)).collect())
            .collect(),
    }
}

/// Per-cell sequences of row vectors.
pub fn sequence_image(image: &ImageTensor, mode: SeqMode) -> Result<Vec<Vec<Vec<f32>>>> {
    image.ensure_cifar_shape()?;
    Ok(sequence_plan(mode)
        .into_iter()
        .map(|steps| steps.into_iter().map(|(c, r)| image.channel_row(c, r)).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastGrnnSpec {
    pub mode: SeqMode,
    /// Hidden width of each cell.
    pub hidden: usize,
    pub density_w: f64,
    pub density_u: f64,
}

fn block_cost(elements: usize, density: f64) -> (u64, u64) {
    if density < 1.0 {
        (0, kept_count(elements, density) as u64)
    } else {
        (elements as u64, 0)
    }
}

impl FastGrnnSpec {
    pub fn new(mode: SeqMode, hidden: usize, density_w: f64, density_u: f64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }
        for d in [density_w, density_u] {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::invalid(format!("density {d} outside (0, 1]")));
            }
        }
        Ok(FastGrnnSpec {
            mode,
            hidden,
            density_w,
            density_u,
        })
    }

    /// Sparse `W`/`U` below density 1; biases, ζ, ν and the head dense.
    pub fn footprint(&self) -> Footprint {
        let h = self.hidden;
        let (wd, ws) = block_cost(h * STEP_DIM, self.density_w);
        let (ud, us) = block_cost(h * h, self.density_u);
        let cells = self.mode.cells() as u64;
        let cell_dense = wd + ud + 2 * h as u64 + 2;
        let head = (self.mode.cells() * h * NUM_CLASSES + NUM_CLASSES) as u64;
        footprint_bytes(cells * cell_dense + head, cells * (ws + us), 0)
    }

    pub fn head_inputs(&self) -> usize {
        self.mode.cells() * self.hidden
    }
}

impl fmt::Display for FastGrnnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} h={} dW={} dU={}",
            self.mode, self.hidden, self.density_w, self.density_u
        )
    }
}

pub fn fastgrnn_footprint(mode: SeqMode, hidden: usize, density_w: f64, density_u: f64) -> Result<Footprint> {
    Ok(FastGrnnSpec::new(mode, hidden, density_w, density_u)?.footprint())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellParams<T> {
    /// `hidden × input`, row-major.
    pub w: Vec<T>,
    /// `hidden × hidden`, row-major.
    pub u: Vec<T>,
    pub bz: Vec<T>,
    pub bh: Vec<T>,
    pub zeta: T,
    pub nu: T,
}

impl<T: Real> CellParams<T> {
    pub fn hidden(&self) -> usize {
        self.bz.len()
    }

    pub fn zeros(hidden: usize, input: usize) -> Self {
        CellParams {
            w: vec![T::zero(); hidden * input],
            u: vec![T::zero(); hidden * hidden],
            bz: vec![T::zero(); hidden],
            bh: vec![T::zero(); hidden],
            zeta: T::zero(),
            nu: T::zero(),
        }
    }

    fn add_assign(&mut self, o: &Self) {
        for (a, b) in [
            (&mut self.w, &o.w),
            (&mut self.u, &o.u),
            (&mut self.bz, &o.bz),
            (&mut self.bh, &o.bh),
        ] {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.zeta += o.zeta;
        self.nu += o.nu;
    }
}

/// Values saved by [`cell_step`] for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    z: Vec<T>,
    c: Vec<T>,
}

/// One recurrence step.
pub fn cell_step<T: Real>(p: &CellParams<T>, x: &[T], h_prev: &[T]) -> Result<(Vec<T>, StepCache<T>)> {
    let hd = p.hidden();
    if h_prev.len() != hd || p.w.len() != hd * x.len() || p.u.len() != hd * hd {
        return Err(Error::shape(format!(
            "cell with hidden {hd}: input {} / state {} do not match",
            x.len(),
            h_prev.len()
        )));
    }
    Ok(step_unchecked(p, x, h_prev))
}

fn step_unchecked<T: Real>(p: &CellParams<T>, x: &[T], h_prev: &[T]) -> (Vec<T>, StepCache<T>) {
    let hd = p.hidden();
    let n = x.len();
    let mut h = vec![T::zero(); hd];
    let mut z = vec![T::zero(); hd];
    let mut c = vec![T::zero(); hd];
    for i in 0..hd {
        let mut pre = T::zero();
        for (&w, &xv) in p.w[i * n..(i + 1) * n].iter().zip(x) {
            pre += w * xv;
        }
        for (&u, &hv) in p.u[i * hd..(i + 1) * hd].iter().zip(h_prev) {
            pre += u * hv;
        }
        z[i] = (pre + p.bz[i]).sigmoid();
        c[i] = (pre + p.bh[i]).tanh();
        h[i] = (p.zeta * (T::one() - z[i]) + p.nu) * c[i] + z[i] * h_prev[i];
    }
    (h, StepCache { z, c })
}

/// Backward through one step: accumulates parameter gradients into `g` and
/// returns the gradient with respect to `h_prev`.
pub fn cell_step_backward<T: Real>(
    p: &CellParams<T>,
    x: &[T],
    h_prev: &[T],
    cache: &StepCache<T>,
    dh: &[T],
    g: &mut CellParams<T>,
) -> Vec<T> {
    let hd = p.hidden();
    let n = x.len();
    let mut dh_prev = vec![T::zero(); hd];
    for i in 0..hd {
        let (z, c) = (cache.z[i], cache.c[i]);
        let coef = p.zeta * (T::one() - z) + p.nu;
        let dc = dh[i] * coef;
        let dz = dh[i] * (h_prev[i] - p.zeta * c);
        g.zeta += dh[i] * (T::one() - z) * c;
        g.nu += dh[i] * c;
        dh_prev[i] += dh[i] * z;
        let dpz = dz * z * (T::one() - z);
        let dpc = dc * (T::one() - c * c);
        let dpre = dpz + dpc;
        g.bz[i] += dpz;
        g.bh[i] += dpc;
        for (gw, &xv) in g.w[i * n..(i + 1) * n].iter_mut().zip(x) {
            *gw += dpre * xv;
        }
        let urow = &p.u[i * hd..(i + 1) * hd];
        for ((gu, dp), (&hv, &u)) in g.u[i * hd..(i + 1) * hd]
            .iter_mut()
            .zip(dh_prev.iter_mut())
            .zip(h_prev.iter().zip(urow))
        {
            *gu += dpre * hv;
            *dp += dpre * u;
        }
    }
    dh_prev
}

/// Every trainable block of a classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct GrnnParams<T> {
    pub cells: Vec<CellParams<T>>,
    /// `10 × (cells · hidden)`, row-major.
    pub head_w: Vec<T>,
    pub head_b: Vec<T>,
}

impl<T: Real> GrnnParams<T> {
    fn zeros_like(&self) -> Self {
        GrnnParams {
            cells: self
                .cells
                .iter()
                .map(|c| CellParams::zeros(c.hidden(), c.w.len() / c.hidden()))
                .collect(),
            head_w: vec![T::zero(); self.head_w.len()],
            head_b: vec![T::zero(); self.head_b.len()],
        }
    }

    fn add_assign(&mut self, o: &Self) {
        for (a, b) in self.cells.iter_mut().zip(&o.cells) {
            a.add_assign(b);
        }
        for (a, &b) in self.head_w.iter_mut().zip(&o.head_w) {
            *a += b;
        }
        for (a, &b) in self.head_b.iter_mut().zip(&o.head_b) {
            *a += b;
        }
    }
}

fn run_cell<T: Real>(p: &CellParams<T>, seq: &[Vec<T>]) -> Vec<T> {
    let mut h = vec![T::zero(); p.hidden()];
    for x in seq {
        h = step_unchecked(p, x, &h).0;
    }
    h
}

/// Logits from per-cell sequences.
pub fn classify<T: Real>(params: &GrnnParams<T>, seqs: &[Vec<Vec<T>>]) -> Vec<T> {
    let feats: Vec<T> = params
        .cells
        .iter()
        .zip(seqs)
        .flat_map(|(p, s)| run_cell(p, s))
        .collect();
    let n = feats.len();
    params
        .head_b
        .iter()
        .enumerate()
        .map(|(o, &b)| {
            params.head_w[o * n..(o + 1) * n]
                .iter()
                .zip(&feats)
                .fold(b, |a, (&w, &f)| a + w * f)
        })
        .collect()
}

/// Cross-entropy of one example and its gradients (backpropagation through
/// time from zero initial state).
pub fn example_loss_grads<T: Real>(params: &GrnnParams<T>, seqs: &[Vec<Vec<T>>], label: usize) -> (T, GrnnParams<T>) {
    let mut states = Vec::with_capacity(params.cells.len());
    let mut feats = Vec::new();
    for (p, seq) in params.cells.iter().zip(seqs) {
        let mut hs = vec![vec![T::zero(); p.hidden()]];
        let mut caches = Vec::with_capacity(seq.len());
        for x in seq {
            let (h, cache) = step_unchecked(p, x, hs.last().expect("initial state"));
            hs.push(h);
            caches.push(cache);
        }
        feats.extend_from_slice(hs.last().expect("initial state"));
        states.push((hs, caches));
    }
    let n = feats.len();
    let logits: Vec<T> = params
        .head_b
        .iter()
        .enumerate()
        .map(|(o, &b)| {
            params.head_w[o * n..(o + 1) * n]
                .iter()
                .zip(&feats)
                .fold(b, |a, (&w, &f)| a + w * f)
        })
        .collect();
    let (loss, dlogits) = softmax_cross_entropy(&logits, label);

    let mut g = params.zeros_like();
    let mut dfeat = vec![T::zero(); n];
    for (o, &dl) in dlogits.iter().enumerate() {
        g.head_b[o] = dl;
        for j in 0..n {
            g.head_w[o * n + j] = dl * feats[j];
            dfeat[j] += dl * params.head_w[o * n + j];
        }
    }
    let mut offset = 0;
    for (ci, (p, seq)) in params.cells.iter().zip(seqs).enumerate() {
        let hd = p.hidden();
        let (hs, caches) = &states[ci];
        let mut dh = dfeat[offset..offset + hd].to_vec();
        for t in (0..seq.len()).rev() {
            dh = cell_step_backward(p, &seq[t], &hs[t], &caches[t], &dh, &mut g.cells[ci]);
        }
        offset += hd;
    }
    (loss, g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastGrnnModel {
    spec: FastGrnnSpec,
    params: GrnnParams<f32>,
}

impl FastGrnnModel {
    /// Random model already projected onto the spec's densities.
    pub fn init(spec: FastGrnnSpec, seed: u64) -> Self {
        let mut m = Self::init_dense(spec, seed);
        m.threshold().expect("spec densities are valid");
        m
    }

    /// Fan-in uniform weights, unit biases, ζ = σ(1) and ν = σ(−4); dense
    /// whatever the spec, as the first training stage wants.
    fn init_dense(spec: FastGrnnSpec, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let h = spec.hidden;
        let cells = (0..spec.mode.cells())
            .map(|_| CellParams {
                w: fan_in_uniform(&mut rng, h * STEP_DIM, STEP_DIM),
                u: fan_in_uniform(&mut rng, h * h, h),
                bz: vec![1.0; h],
                bh: vec![1.0; h],
                zeta: 1.0f32.sigmoid(),
                nu: (-4.0f32).sigmoid(),
            })
            .collect();
        let fan = spec.head_inputs();
        FastGrnnModel {
            spec,
            params: GrnnParams {
                cells,
                head_w: fan_in_uniform(&mut rng, NUM_CLASSES * fan, fan),
                head_b: vec![0.0; NUM_CLASSES],
            },
        }
    }

    /// Wraps parameters, re-projecting `W` and `U` onto their densities.
    pub fn from_params(spec: FastGrnnSpec, params: GrnnParams<f32>) -> Result<Self> {
        let h = spec.hidden;
        let ok = params.cells.len() == spec.mode.cells()
            && params.cells.iter().all(|c| {
                c.w.len() == h * STEP_DIM && c.u.len() == h * h && c.bz.len() == h && c.bh.len() == h
            })
            && params.head_w.len() == NUM_CLASSES * spec.head_inputs()
            && params.head_b.len() == NUM_CLASSES;
        if !ok {
            return Err(Error::shape(format!("parameters do not match spec {spec}")));
        }
        let mut m = FastGrnnModel { spec, params };
        m.threshold()?;
        Ok(m)
    }

    /// Hard-thresholds each cell's `W` and `U`; returns their supports.
    fn threshold(&mut self) -> Result<Vec<(SupportMask, SupportMask)>> {
        let (dw, du) = (self.spec.density_w, self.spec.density_u);
        self.params
            .cells
            .iter_mut()
            .map(|c| Ok((SupportMask::threshold(&mut c.w, dw)?, SupportMask::threshold(&mut c.u, du)?)))
            .collect()
    }

    pub fn spec(&self) -> FastGrnnSpec {
        self.spec
    }

    pub fn params(&self) -> &GrnnParams<f32> {
        &self.params
    }

    pub fn footprint(&self) -> Footprint {
        self.spec.footprint()
    }

    /// Nonzeros of `(W, U)` per cell.
    pub fn nonzeros(&self) -> Vec<(usize, usize)> {
        let nz = |v: &[f32]| v.iter().filter(|x| **x != 0.0).count();
        self.params.cells.iter().map(|c| (nz(&c.w), nz(&c.u))).collect()
    }

    pub fn logits_of_sequences(&self, seqs: &[Vec<Vec<f32>>]) -> Vec<f32> {
        classify(&self.params, seqs)
    }

    fn write_block(w: &mut ParamWriter, values: &[f32], density: f64) -> Result<()> {
        if density < 1.0 {
            let mut v = values.to_vec();
            let mask = SupportMask::threshold(&mut v, density)?;
            w.sparse(&mask.to_sparse(1, v.len(), &v)?);
        } else {
            w.dense(values);
        }
        Ok(())
    }

    fn read_block(r: &mut ParamReader, len: usize, density: f64) -> Result<Vec<f32>> {
        if density < 1.0 {
            Ok(r.sparse(1, len, kept_count(len, density))?.to_dense().into_data())
        } else {
            r.dense(len)
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let s = self.spec;
        let mut w = ParamWriter::new(TAG_FASTGRNN);
        w.header_u8(s.mode.code())
            .header_u32(s.hidden as u32)
            .header_u32(density_to_permille(s.density_w))
            .header_u32(density_to_permille(s.density_u));
        for c in &self.params.cells {
            Self::write_block(&mut w, &c.w, s.density_w)?;
            Self::write_block(&mut w, &c.u, s.density_u)?;
            w.dense(&c.bz).dense(&c.bh).scalar(c.zeta).scalar(c.nu);
        }
        w.dense(&self.params.head_w).dense(&self.params.head_b);
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ParamReader::new(bytes, TAG_FASTGRNN)?;
        let mode = SeqMode::from_code(r.u8()?)?;
        let hidden = r.usize()?;
        let dw = permille_to_density(r.u32()?);
        let du = permille_to_density(r.u32()?);
        let spec = FastGrnnSpec::new(mode, hidden, dw, du)?;
        let cells = (0..mode.cells())
            .map(|_| {
                Ok(CellParams {
                    w: Self::read_block(&mut r, hidden * STEP_DIM, dw)?,
                    u: Self::read_block(&mut r, hidden * hidden, du)?,
                    bz: r.dense(hidden)?,
                    bh: r.dense(hidden)?,
                    zeta: r.f32()?,
                    nu: r.f32()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let head_w = r.dense(NUM_CLASSES * spec.head_inputs())?;
        let head_b = r.dense(NUM_CLASSES)?;
        r.finish()?;
        Ok(FastGrnnModel {
            spec,
            params: GrnnParams { cells, head_w, head_b },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        codec::write_file(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        FastGrnnModel::from_bytes(&codec::read_file(path)?)
    }
}

impl Classifier for FastGrnnModel {
    fn logits(&self, image: &ImageTensor) -> Result<Vec<f32>> {
        Ok(self.logits_of_sequences(&sequence_image(image, self.spec.mode)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastGrnnTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    /// Epoch from which the learning rate is multiplied by 0.1.
    pub decay_epoch: Option<usize>,
    pub weight_decay: f32,
    pub seed: u64,
}

impl Default for FastGrnnTrainConfig {
    fn default() -> Self {
        FastGrnnTrainConfig {
            epochs: 150,
            batch_size: 100,
            learning_rate: 0.01,
            decay_epoch: Some(100),
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl FastGrnnTrainConfig {
    /// Decay from 32KB upwards, weight decay from 64KB upwards.
    pub fn for_budget(budget_kb: u32, seed: u64) -> Self {
        FastGrnnTrainConfig {
            decay_epoch: (budget_kb >= 32).then_some(100),
            weight_decay: if budget_kb >= 64 { 5e-4 } else { 0.0 },
            seed,
            ..FastGrnnTrainConfig::default()
        }
    }

    /// Keeps the decay at the same fraction of a shorter run.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        if let Some(d) = self.decay_epoch {
            self.decay_epoch = Some(d * epochs / self.epochs.max(1));
        }
        self.epochs = epochs;
        self
    }
}

#[derive(Debug, Clone)]
pub struct FastGrnnOutcome {
    /// Best validation epoch after compression began.
    pub model: FastGrnnModel,
    pub final_model: FastGrnnModel,
    /// Parameters when the support was frozen.
    pub frozen_at: Option<FastGrnnModel>,
    pub history: History,
}

struct Sequenced {
    seqs: Vec<Vec<Vec<f32>>>,
    label: usize,
}

fn sequence_all(items: &[LabeledImage], mode: SeqMode) -> Result<Vec<Sequenced>> {
    items
        .par_iter()
        .map(|it| {
            Ok(Sequenced {
                seqs: sequence_image(&it.image, mode)?,
                label: it.label as usize,
            })
        })
        .collect()
}

fn sequenced_accuracy(model: &FastGrnnModel, items: &[Sequenced]) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    let hits: usize = items
        .par_iter()
        .map(|s| usize::from(argmax(&model.logits_of_sequences(&s.seqs)) == s.label))
        .sum();
    hits as f64 / items.len() as f64
}

fn blocks_mut(p: &mut GrnnParams<f32>) -> Vec<&mut [f32]> {
    let mut out: Vec<&mut [f32]> = Vec::new();
    for c in p.cells.iter_mut() {
        out.push(&mut c.w);
        out.push(&mut c.u);
        out.push(&mut c.bz);
        out.push(&mut c.bh);
        out.push(std::slice::from_mut(&mut c.zeta));
        out.push(std::slice::from_mut(&mut c.nu));
    }
    out.push(&mut p.head_w);
    out.push(&mut p.head_b);
    out
}

fn apply_masks(p: &mut GrnnParams<f32>, masks: &[(SupportMask, SupportMask)]) {
    for (c, (mw, mu)) in p.cells.iter_mut().zip(masks) {
        mw.apply(&mut c.w);
        mu.apply(&mut c.u);
    }
}

/// Three-stage training: dense, re-projected after every epoch, then a
/// frozen support. No early stopping; the best validation epoch from the
/// second stage on is returned.
pub fn fastgrnn_train(
    spec: FastGrnnSpec,
    train: &[LabeledImage],
    validation: &[LabeledImage],
    config: &FastGrnnTrainConfig,
) -> Result<FastGrnnOutcome> {
    if train.is_empty() {
        return Err(Error::InsufficientData("FastGRNN needs training data".into()));
    }
    let train_seq = sequence_all(train, spec.mode)?;
    let val_seq = sequence_all(validation, spec.mode)?;
    let mut model = FastGrnnModel::init_dense(spec, config.seed);
    let mut opts: Vec<AdamState> = blocks_mut(&mut model.params)
        .iter()
        .map(|b| AdamState::new(b.len(), config.learning_rate).with_weight_decay(config.weight_decay))
        .collect();
    let mut rng = seeded_rng(config.seed ^ 0xFA57);
    let mut history = History::default();
    let mut stopper = EarlyStopping::new(None);
    let mut best: Option<FastGrnnModel> = None;
    let mut frozen: Option<Vec<(SupportMask, SupportMask)>> = None;
    let mut frozen_at = None;

    for epoch in 0..config.epochs {
        let stage = stage_of(epoch, config.epochs);
        if stage == 2 && frozen.is_none() {
            frozen = Some(model.threshold()?);
            frozen_at = Some(model.clone());
        }
        let lr = match config.decay_epoch {
            Some(d) if epoch >= d => config.learning_rate * 0.1,
            _ => config.learning_rate,
        };
        let order = shuffled_indices(&mut rng, train_seq.len());
        let mut total = 0.0f64;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let (loss, mut grads) = batch_sum(
                chunk,
                |i| {
                    let s = &train_seq[i];
                    let (l, g) = example_loss_grads(&model.params, &s.seqs, s.label);
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
            if let Some(masks) = &frozen {
                apply_masks(&mut grads, masks);
            }
            for ((p, g), opt) in blocks_mut(&mut model.params)
                .into_iter()
                .zip(blocks_mut(&mut grads))
                .zip(&mut opts)
            {
                g.iter_mut().for_each(|v| *v *= scale);
                opt.learning_rate = lr;
                opt.step(p, g)?;
            }
            if let Some(masks) = &frozen {
                apply_masks(&mut model.params, masks);
            }
        }
        if stage == 1 {
            model.threshold()?;
        }
        let train_loss = total / train_seq.len() as f64;
        ensure_finite(train_loss, epoch, "FastGRNN")?;
        let val = sequenced_accuracy(&model, &val_seq);
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation_accuracy: val,
            learning_rate: lr,
        });
        if stage >= 1 && stopper.observe(val).0 {
            best = Some(model.clone());
            history.best_epoch = Some(epoch);
            history.best_validation_accuracy = val;
        }
    }
    if frozen.is_none() {
        model.threshold()?;
    }
    let best = match best {
        Some(b) => b,
        None => {
            history.best_validation_accuracy = sequenced_accuracy(&model, &val_seq);
            model.clone()
        }
    };
    Ok(FastGrnnOutcome {
        model: best,
        final_model: model,
        frozen_at,
        history,
    })
}

/// Hidden widths and density pairs swept for `mode`.
pub fn candidate_space(mode: SeqMode) -> Vec<FastGrnnSpec> {
    let mut out = Vec::new();
    match mode {
        SeqMode::Multi => {
            for hidden in (5..=100).step_by(5) {
                for dw in DENSITIES {
                    out.push(FastGrnnSpec {
                        mode,
                        hidden,
                        density_w: dw,
                        density_u: 1.0,
                    });
                }
            }
        }
        _ => {
            for hidden in (15..=225).step_by(15) {
                for dw in [0.1, 0.2, 0.3] {
                    for du in [0.1, 0.2, 0.3] {
                        out.push(FastGrnnSpec {
                            mode,
                            hidden,
                            density_w: dw,
                            density_u: du,
                        });
                    }
                }
                out.push(FastGrnnSpec {
                    mode,
                    hidden,
                    density_w: 1.0,
                    density_u: 1.0,
                });
            }
        }
    }
    out
}

/// Hand-picked Multi specs for the smallest budget.
pub fn manual_multi_8kb() -> [FastGrnnSpec; 2] {
    [
        FastGrnnSpec {
            mode: SeqMode::Multi,
            hidden: 12,
            density_w: 1.0,
            density_u: 1.0,
        },
        FastGrnnSpec {
            mode: SeqMode::Multi,
            hidden: 14,
            density_w: 0.1,
            density_u: 1.0,
        },
    ]
}

/// Up to three feasible specs closest to the budget; the Multi 8KB slot
/// holds the two manual specs plus the closest swept one.
pub fn build_candidates(budget_kb: u32, mode: SeqMode) -> Vec<FastGrnnSpec> {
    let mut feasible: Vec<(u64, usize, FastGrnnSpec)> = candidate_space(mode)
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s.footprint().total_bytes, i, s))
        .filter(|(_, _, s)| s.footprint().fits(budget_kb))
        .collect();
    // largest footprint first; sweep order breaks ties
    feasible.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<FastGrnnSpec> = Vec::new();
    if mode == SeqMode::Multi && budget_kb == 8 {
        out.extend(manual_multi_8kb());
    }
    for (_, _, s) in feasible {
        if out.len() >= 3 {
            break;
        }
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainedCandidate {
    pub budget_kb: u32,
    pub spec: FastGrnnSpec,
    pub footprint: Footprint,
    pub validation_accuracy: f64,
    pub model: FastGrnnModel,
}

/// Settings shared by every candidate of a sweep; each budget derives its
/// own decay and weight decay from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct FastGrnnSweepConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for FastGrnnSweepConfig {
    fn default() -> Self {
        FastGrnnSweepConfig {
            epochs: 150,
            batch_size: 100,
            seed: 0,
        }
    }
}

impl FastGrnnSweepConfig {
    pub fn train_config(&self, budget_kb: u32) -> FastGrnnTrainConfig {
        let mut c = FastGrnnTrainConfig::for_budget(budget_kb, self.seed).with_epochs(self.epochs);
        c.batch_size = self.batch_size;
        c
    }
}

/// Trains the candidates of every budget for `mode`.
pub fn fastgrnn_sweep(
    mode: SeqMode,
    budgets: &[u32],
    train: &[LabeledImage],
    validation: &[LabeledImage],
    config: &FastGrnnSweepConfig,
) -> Result<Vec<TrainedCandidate>> {
    let jobs: Vec<(u32, FastGrnnSpec)> = budgets
        .iter()
        .flat_map(|&b| build_candidates(b, mode).into_iter().map(move |s| (b, s)))
        .collect();
    jobs.par_iter()
        .map(|&(budget_kb, spec)| {
            let out = fastgrnn_train(spec, train, validation, &config.train_config(budget_kb))?;
            Ok(TrainedCandidate {
                budget_kb,
                spec,
                footprint: spec.footprint(),
                validation_accuracy: out.history.best_validation_accuracy,
                model: out.model,
            })
        })
        .collect()
}

/// Best validated candidate fitting `budget_kb`, including candidates
/// trained for smaller budgets. Earlier entries win ties.
pub fn select_for_budget(entries: &[TrainedCandidate], budget_kb: u32) -> Result<&TrainedCandidate> {
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
            family: "fastgrnn".into(),
            budget_kb,
        })
}

pub fn fastgrnn_search(
    budget_kb: u32,
    mode: SeqMode,
    train: &[LabeledImage],
    validation: &[LabeledImage],
    config: &FastGrnnSweepConfig,
) -> Result<TrainedCandidate> {
    let entries = fastgrnn_sweep(mode, &[budget_kb], train, validation, config)?;
    select_for_budget(&entries, budget_kb).cloned().map_err(|_| Error::NoFeasibleModel {
        family: format!("fastgrnn-{mode}"),
        budget_kb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synth_image_split;

    fn cifar_image(seed: u32) -> ImageTensor {
        let data = (0..3072).map(|i| ((i as u32 * 7 + seed * 13) % 17) as f32 / 17.0 - 0.5).collect();
        ImageTensor::new(32, 32, 3, data).unwrap()
    }

    #[test]
    fn table_footprints_for_row_and_channel() {
        let rows = [
            (SeqMode::RowMajor, 45, 0.2, 0.2, "7.57"),
            (SeqMode::RowMajor, 75, 0.1, 0.2, "14.23"),
            (SeqMode::ChannelMajor, 60, 0.3, 0.3, "15.80"),
            (SeqMode::Multi, 12, 1.0, 1.0, "7.94"),
            (SeqMode::Multi, 20, 1.0, 1.0, "15.06"),
        ];
        for (mode, h, dw, du, want) in rows {
            let fp = fastgrnn_footprint(mode, h, dw, du).unwrap();
            assert_eq!(fp.kb_label(), format!("{want}KB"), "{mode} {h}");
        }
        assert_eq!(fastgrnn_footprint(SeqMode::RowMajor, 45, 0.2, 0.2).unwrap().total_bytes, 7752);
    }

    #[test]
    fn plans_follow_each_feed_order() {
        let row = sequence_plan(SeqMode::RowMajor);
        assert_eq!(row[0][0], (0, 0));
        assert_eq!(row[0][32], (1, 0));
        let ch = sequence_plan(SeqMode::ChannelMajor);
        assert_eq!(ch[0][4], (1, 1));
        let multi = sequence_plan(SeqMode::Multi);
        assert_eq!(multi.len(), 3);
        for mode in SeqMode::ALL {
            let mut all: Vec<_> = sequence_plan(mode).concat();
            all.sort();
            assert_eq!(all.len(), 96);
            all.dedup();
            assert_eq!(all.len(), 96);
        }
    }

    #[test]
    fn step_zero_is_the_first_red_row() {
        let img = cifar_image(1);
        let s = sequence_image(&img, SeqMode::RowMajor).unwrap();
        let red0: Vec<f32> = (0..32).map(|c| img.at(0, c, 0)).collect();
        assert_eq!(s[0][0], red0);
        assert!(sequence_image(&ImageTensor::zeros(8, 8, 3), SeqMode::Multi).is_err());
    }

    #[test]
    fn leak_only_cell_scales_state_by_gate() {
        let mut p = CellParams::<f64>::zeros(3, 4);
        p.bz = vec![0.3, -1.0, 2.0];
        let h_prev = [1.0, -2.0, 0.5];
        let (h, _) = cell_step(&p, &[0.1, 0.2, 0.3, 0.4], &h_prev).unwrap();
        for i in 0..3 {
            let z = 1.0 / (1.0 + (-p.bz[i]).exp());
            assert!((h[i] - z * h_prev[i]).abs() < 1e-12);
        }
        assert!(cell_step(&p, &[0.0; 4], &[0.0; 2]).is_err());
    }

    #[test]
    fn zero_head_returns_bias() {
        let spec = FastGrnnSpec::new(SeqMode::ChannelMajor, 6, 1.0, 1.0).unwrap();
        let mut m = FastGrnnModel::init(spec, 3);
        m.params.head_w.fill(0.0);
        m.params.head_b = (0..10).map(|i| i as f32).collect();
        assert_eq!(m.logits(&cifar_image(2)).unwrap(), m.params.head_b);
    }

    #[test]
    fn candidates_fit_and_number_forty_five() {
        let mut total = 0;
        for mode in SeqMode::ALL {
            for b in [8, 16, 32, 64, 128] {
                let c = build_candidates(b, mode);
                assert!(c.iter().all(|s| s.footprint().fits(b)));
                total += c.len();
            }
        }
        assert_eq!(total, 45);
        assert!(build_candidates(8, SeqMode::Multi).contains(&manual_multi_8kb()[0]));
    }

    #[test]
    fn bytes_round_trip() {
        for (mode, dw, du) in [(SeqMode::RowMajor, 0.2, 0.3), (SeqMode::Multi, 1.0, 1.0)] {
            let spec = FastGrnnSpec::new(mode, 7, dw, du).unwrap();
            let m = FastGrnnModel::init(spec, 9);
            let bytes = m.to_bytes().unwrap();
            assert_eq!(bytes.len() - 14, m.footprint().parameter_bytes() as usize);
            assert_eq!(FastGrnnModel::from_bytes(&bytes).unwrap(), m);
        }
    }

    #[test]
    fn three_stage_training_keeps_exact_densities() {
        let split = synth_image_split(10, 12, 6, 1, 4.0, 5).unwrap();
        let spec = FastGrnnSpec::new(SeqMode::ChannelMajor, 8, 0.2, 0.3).unwrap();
        let cfg = FastGrnnTrainConfig {
            epochs: 6,
            batch_size: 20,
            ..FastGrnnTrainConfig::default()
        };
        let out = fastgrnn_train(spec, &split.train, &split.validation, &cfg).unwrap();
        let want = (kept_count(8 * 32, 0.2), kept_count(64, 0.3));
        assert_eq!(out.model.nonzeros(), vec![want]);
        assert_eq!(out.final_model.nonzeros(), vec![want]);
        let before = out.frozen_at.unwrap();
        for (a, b) in before.params.cells.iter().zip(&out.final_model.params.cells) {
            for (x, y) in a.w.iter().chain(&a.u).zip(b.w.iter().chain(&b.u)) {
                assert_eq!(*x == 0.0, *y == 0.0);
            }
        }
        assert!(out.history.best_epoch.unwrap() >= 2);
    }
}
