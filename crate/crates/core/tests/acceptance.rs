//! One verdict line per acceptance criterion.
//!
//! This target is a report: it always exits 0 so the workspace suite stays
//! green while a criterion that cannot be met is shown as FAIL. The hard
//! assertions for each criterion live in the dedicated test targets.
//! Criteria 8 and 10 need the CIFAR-10 binary batches in `$CIFAR10_DIR`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use memclass::bonsai::{self, bonsai_footprint, bonsai_train, BonsaiParams, BonsaiSpec, BonsaiTrainConfig, Regularizers};
use memclass::datasets::{load_cifar10, synth_image_split, DatasetSplit};
use memclass::directconv::kernels::{layer_backward, layer_forward};
use memclass::directconv::plan::{simulate_layer, Dependency, Layout};
use memclass::directconv::{
    catalog, forward_inplace, forward_naive, memory_plan, plan_herringbone, train_cnn, ArchSpec, CnnModel,
    CnnTrainConfig, LayerSpec, Shape,
};
use memclass::fastgrnn::{
    self, fastgrnn_footprint, fastgrnn_sweep, fastgrnn_train, CellParams, FastGrnnModel, FastGrnnSpec,
    FastGrnnTrainConfig, GrnnParams, SeqMode,
};
use memclass::harness::{prepare_split, run_experiment_scaled, Budget, CellResult, ExperimentConfig, Family, Scale};
use memclass::protonn::{loss_and_grads, protonn_footprint, protonn_grid_search, protonn_train, Blocks, ProtoNNModel, ProtoSpec, ProtoTrainConfig};
use memclass::sparse::kept_count;
use memclass::tensor::ImageTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Blocked(String),
}

use Verdict::{Blocked, Fail, Pass};

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

// ---- 1-3: footprints ------------------------------------------------------

fn centi_kb(bytes: u64) -> u64 {
    (bytes * 100 + 512) / 1024
}

const TABLE5: [(SeqMode, usize, f64, f64, u64); 15] = [
    (SeqMode::RowMajor, 45, 0.2, 0.2, 757),
    (SeqMode::RowMajor, 75, 0.1, 0.2, 1423),
    (SeqMode::RowMajor, 120, 0.1, 0.2, 3117),
    (SeqMode::RowMajor, 150, 0.1, 0.3, 6356),
    (SeqMode::RowMajor, 210, 0.1, 0.3, 11850),
    (SeqMode::ChannelMajor, 45, 0.2, 0.2, 757),
    (SeqMode::ChannelMajor, 60, 0.3, 0.3, 1580),
    (SeqMode::ChannelMajor, 105, 0.3, 0.2, 3007),
    (SeqMode::ChannelMajor, 150, 0.1, 0.3, 6356),
    (SeqMode::ChannelMajor, 150, 0.1, 0.3, 6356),
    (SeqMode::Multi, 12, 1.0, 1.0, 794),
    (SeqMode::Multi, 20, 1.0, 1.0, 1506),
    (SeqMode::Multi, 35, 0.3, 1.0, 2875),
    (SeqMode::Multi, 55, 1.0, 1.0, 6387),
    (SeqMode::Multi, 90, 0.3, 1.0, 12409),
];

fn fastgrnn_sizes() -> Verdict {
    let mut misses = Vec::new();
    for (mode, h, dw, du, published) in TABLE5 {
        let ours = centi_kb(fastgrnn_footprint(mode, h, dw, du).unwrap().total_bytes);
        if ours != published {
            misses.push(format!("{mode} h{h} {dw}/{du}: {}.{:02} vs {}.{:02}", ours / 100, ours % 100, published / 100, published % 100));
        }
    }
    let matched = TABLE5.len() - misses.len();
    verdict(misses.is_empty(), format!("{matched}/{} rows exact; {}", TABLE5.len(), misses.join("; ")))
}

fn bonsai_sizes() -> Verdict {
    let rows = [((5, 1), 7.88), ((2, 3), 15.43), ((2, 6), 30.85), ((3, 11), 60.86), ((5, 12), 94.52)];
    let mut worst: f64 = 0.0;
    for ((depth, dim), kb) in rows {
        let ours = bonsai_footprint(BonsaiSpec::new(depth, dim).unwrap()).total_bytes as f64 / 1024.0;
        worst = worst.max((ours - kb).abs() / kb);
    }
    verdict(worst <= 0.005, format!("worst relative gap {:.3}%", worst * 100.0))
}

fn protonn_size() -> Verdict {
    let ours = protonn_footprint(2, 4, 1.0).unwrap().total_bytes as f64 / 1024.0;
    let gap = (ours - 24.77).abs() / 24.77;
    verdict(gap <= 0.03, format!("{ours:.2}KB vs 24.77KB ({:.2}% gap)", gap * 100.0))
}

// ---- 4-5: executor and herringbone -----------------------------------------

fn random_image(rng: &mut ChaCha8Rng) -> ImageTensor {
    let data = (0..3072).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    ImageTensor::new(32, 32, 3, data).unwrap()
}

fn layer_kind(l: &LayerSpec) -> &'static str {
    match l {
        LayerSpec::AvgPool => "avg",
        LayerSpec::MaxPool => "max",
        LayerSpec::Dense { .. } => "dense",
        LayerSpec::Logits => "logits",
        LayerSpec::Conv { .. } => "conv",
        LayerSpec::Separable { .. } => "separable",
        LayerSpec::Dropout => "dropout",
    }
}

fn executor() -> Verdict {
    let all = catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc4);
    let mut kinds = BTreeSet::new();
    let (mut worst, mut over) = (0.0f32, 0);
    for case in 0..200 {
        let (arch, _) = &all[rng.random_range(0..all.len())];
        kinds.extend(arch.layers().iter().map(layer_kind));
        let model = CnnModel::init(arch.clone(), case);
        let image = random_image(&mut rng);
        let naive = forward_naive(&model, &image).unwrap();
        let run = forward_inplace(&model, &image).unwrap();
        for (a, b) in naive.iter().zip(&run.logits) {
            worst = worst.max((a - b).abs());
        }
        if run.measured_peak_bytes > model.footprint().unwrap().activation_peak_bytes {
            over += 1;
        }
    }
    // channel-shrinking stacks: the input buffer is the whole activation budget
    let shrinking = [
        "C1(3,3), C1(2,3), M, C1(1,5), D*",
        "C2(3,3), A, C1(2,1), C2(1,3), D*",
        "M, C1(1,3), A, D*",
    ];
    let mut extra = 0;
    for text in shrinking {
        let layers = text.split(", ").map(|t| t.parse::<LayerSpec>().unwrap()).collect();
        let arch = ArchSpec::custom(layers).unwrap();
        let model = CnnModel::init(arch.clone(), 1);
        let run = forward_inplace(&model, &random_image(&mut rng)).unwrap();
        extra += (memory_plan(&arch).unwrap().peak as u64).max(run.measured_peak_bytes) - 3072;
    }
    verdict(
        worst <= 1e-5 && over == 0 && kinds.len() == 7 && extra == 0,
        format!("max |diff| {worst:.1e}, {over} peak overruns, {} layer kinds, {extra} auxiliary bytes", kinds.len()),
    )
}

fn herringbone() -> Verdict {
    let mut bad = Vec::new();
    let mut grids = 0;
    for k in [1, 3, 5] {
        for oh in 1..=16 {
            for ow in 1..=16 {
                grids += 1;
                let (ih, iw) = (oh + k - 1, ow + k - 1);
                let p = plan_herringbone(ih, iw, 3, 8, k).unwrap();
                let need = p.buffer_need(Layout::Herringbone, 3, 8);
                let dep = Dependency::Window { kernel: k, stride: 1 };
                let safe = simulate_layer(&p, dep, Shape::new(ih, iw, 3), Layout::Herringbone, 8, need).is_ok();
                if !(p.is_permutation() && p.alternates() && p.order.len() == oh * ow && safe) {
                    bad.push(format!("{oh}x{ow} k{k}"));
                }
            }
        }
    }
    verdict(bad.is_empty(), format!("{} of {grids} plans violate an assertion {bad:?}", bad.len()))
}

// ---- 6: gradients ---------------------------------------------------------

const EPS: f64 = 1e-6;

fn randn(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Relative error of `analytic` against the central difference of `f` at
/// every coordinate of `x`; gradients below 1e-5 in magnitude are compared
/// against that floor instead.
fn worst_error(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + EPS;
        let up = f(&p);
        p[i] = x[i] - EPS;
        let down = f(&p);
        p[i] = x[i];
        let n = (up - down) / (2.0 * EPS);
        let diff = (analytic[i] - n).abs();
        worst = worst.max(diff / analytic[i].abs().max(n.abs()).max(1e-5));
    }
    worst
}

fn layer_error(layer: LayerSpec, shape: Shape, rng: &mut ChaCha8Rng) -> f64 {
    let input = randn(rng, shape.len(), 1.0);
    let params: Vec<Vec<f64>> = layer.param_blocks(shape).iter().map(|&(len, _)| randn(rng, len, 0.5)).collect();
    let r = randn(rng, layer.output_shape(shape).unwrap().len(), 1.0);
    let loss = |x: &[f64], p: &[Vec<f64>]| -> f64 { layer_forward(&layer, x, shape, p).iter().zip(&r).map(|(a, b)| a * b).sum() };
    let out = layer_forward(&layer, &input, shape, &params);
    let (gin, gp) = layer_backward(&layer, &input, shape, &params, &out, &r);
    let mut worst = worst_error(&input, &gin, |x| loss(x, &params));
    for b in 0..params.len() {
        worst = worst.max(worst_error(&params[b], &gp[b], |v| {
            let mut p = params.clone();
            p[b] = v.to_vec();
            loss(&input, &p)
        }));
    }
    worst
}

fn fastgrnn_error(rng: &mut ChaCha8Rng) -> f64 {
    let (hidden, input, cells, steps) = (4, 3, 2, 3);
    let mut cell = || CellParams {
        w: randn(rng, hidden * input, 0.7),
        u: randn(rng, hidden * hidden, 0.7),
        bz: randn(rng, hidden, 0.5),
        bh: randn(rng, hidden, 0.5),
        zeta: 0.8,
        nu: 0.05,
    };
    let cell_params: Vec<_> = (0..cells).map(|_| cell()).collect();
    let params = GrnnParams { cells: cell_params, head_w: randn(rng, 10 * cells * hidden, 0.7), head_b: randn(rng, 10, 0.5) };
    let seqs: Vec<Vec<Vec<f64>>> = (0..cells).map(|_| (0..steps).map(|_| randn(rng, input, 1.0)).collect()).collect();
    let loss = |p: &GrnnParams<f64>| fastgrnn::example_loss_grads(p, &seqs, 3).0;
    let (_, g) = fastgrnn::example_loss_grads(&params, &seqs, 3);
    let mut worst = worst_error(&params.head_w, &g.head_w, |v| loss(&GrnnParams { head_w: v.to_vec(), ..params.clone() }));
    for c in 0..cells {
        type Field = fn(&mut CellParams<f64>) -> &mut Vec<f64>;
        let fields: [(Field, &Vec<f64>); 4] =
            [(|c| &mut c.w, &g.cells[c].w), (|c| &mut c.u, &g.cells[c].u), (|c| &mut c.bz, &g.cells[c].bz), (|c| &mut c.bh, &g.cells[c].bh)];
        for (field, grad) in fields {
            let base = field(&mut params.cells[c].clone()).clone();
            worst = worst.max(worst_error(&base, grad, |v| {
                let mut q = params.clone();
                *field(&mut q.cells[c]) = v.to_vec();
                loss(&q)
            }));
        }
        let scalars = [params.cells[c].zeta, params.cells[c].nu];
        worst = worst.max(worst_error(&scalars, &[g.cells[c].zeta, g.cells[c].nu], |v| {
            let mut q = params.clone();
            q.cells[c].zeta = v[0];
            q.cells[c].nu = v[1];
            loss(&q)
        }));
    }
    worst
}

fn protonn_error(rng: &mut ChaCha8Rng) -> f64 {
    let (dim, m, input) = (3, 4, 6);
    let (w, b, z) = (randn(rng, dim * input, 0.5), randn(rng, m * dim, 0.5), randn(rng, 10 * m, 1.0));
    let x = randn(rng, input, 1.0);
    let loss = |w: &[f64], b: &[f64], z: &[f64]| loss_and_grads(w, b, z, 0.8, dim, &x, 2, Blocks::ALL).0;
    let (_, g) = loss_and_grads(&w, &b, &z, 0.8, dim, &x, 2, Blocks::ALL);
    worst_error(&w, &g.projection, |v| loss(v, &b, &z))
        .max(worst_error(&b, &g.prototypes, |v| loss(&w, v, &z)))
        .max(worst_error(&z, &g.label_scores, |v| loss(&w, &b, v)))
}

fn bonsai_error(rng: &mut ChaCha8Rng) -> f64 {
    let (spec, input) = (BonsaiSpec::new(2, 3).unwrap(), 5);
    let params = BonsaiParams {
        z: randn(rng, 3 * input, 0.7),
        w: randn(rng, spec.nodes() * 30, 0.7),
        v: randn(rng, spec.nodes() * 30, 0.7),
        theta: randn(rng, spec.internal_nodes() * 3, 0.7),
    };
    let x = randn(rng, input, 1.0);
    let reg = Regularizers { z: 1e-2, w: 2e-2, v: 3e-2, theta: 4e-2 };
    let objective = |p: &BonsaiParams<f64>| bonsai::example_loss_grads(p, spec, 1.3, 2.0, &x, 7).0 + reg.apply(p).0;
    let (_, g) = bonsai::example_loss_grads(&params, spec, 1.3, 2.0, &x, 7);
    let (_, gr) = reg.apply(&params);
    let mut worst: f64 = 0.0;
    for b in 0..4 {
        let total: Vec<f64> = g.blocks()[b].iter().zip(gr.blocks()[b]).map(|(a, c)| a + c).collect();
        worst = worst.max(worst_error(params.blocks()[b], &total, |v| {
            let mut q = params.clone();
            *q.blocks_mut()[b] = v.to_vec();
            objective(&q)
        }));
    }
    worst
}

fn gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e6);
    let rows = [
        ("conv", layer_error(LayerSpec::Conv { out: 3, kernel: 3 }, Shape::new(5, 6, 2), &mut rng)),
        ("depthwise", layer_error(LayerSpec::Separable { out: 4, kernel: 3 }, Shape::new(5, 5, 3), &mut rng)),
        ("dense", layer_error(LayerSpec::Dense { out: 5 }, Shape::new(1, 12, 1), &mut rng)),
        ("logits", layer_error(LayerSpec::Logits, Shape::new(2, 2, 3), &mut rng)),
        ("avgpool", layer_error(LayerSpec::AvgPool, Shape::new(4, 4, 2), &mut rng)),
        ("maxpool", layer_error(LayerSpec::MaxPool, Shape::new(4, 5, 2), &mut rng)),
        ("fastgrnn", fastgrnn_error(&mut rng)),
        ("protonn", protonn_error(&mut rng)),
        ("bonsai", bonsai_error(&mut rng)),
    ];
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail = rows.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    verdict(worst <= 1e-3, format!("max relative error {worst:.1e} ({detail})"))
}

// ---- 7: sparsity ----------------------------------------------------------

fn zero_pattern<'a>(blocks: impl IntoIterator<Item = &'a Vec<f32>>) -> Vec<bool> {
    blocks.into_iter().flat_map(|b| b.iter().map(|v| *v == 0.0)).collect()
}

fn grnn_pattern(m: &FastGrnnModel) -> Vec<bool> {
    zero_pattern(m.params().cells.iter().flat_map(|c| [&c.w, &c.u]))
}

fn sparsity() -> Verdict {
    let split = synth_image_split(10, 10, 4, 1, 4.0, 71).unwrap();
    let mut problems = Vec::new();
    for (mode, h, dw, du) in [(SeqMode::RowMajor, 6, 0.1, 0.3), (SeqMode::ChannelMajor, 8, 0.2, 0.2), (SeqMode::Multi, 5, 0.3, 1.0)] {
        let spec = FastGrnnSpec::new(mode, h, dw, du).unwrap();
        let cfg = FastGrnnTrainConfig { epochs: 6, batch_size: 25, ..FastGrnnTrainConfig::default() };
        let out = fastgrnn_train(spec, &split.train, &split.validation, &cfg).unwrap();
        let u = if du < 1.0 { kept_count(h * h, du) } else { h * h };
        let want = vec![(kept_count(h * 32, dw), u); mode.cells()];
        if out.final_model.nonzeros() != want || out.model.nonzeros() != want {
            problems.push(format!("{spec} densities"));
        }
        if out.frozen_at.as_ref().map(grnn_pattern) != Some(grnn_pattern(&out.final_model)) {
            problems.push(format!("{spec} support moved"));
        }
    }
    let spec = BonsaiSpec::new(2, 3).unwrap();
    let cfg = BonsaiTrainConfig { epochs: 6, batch_size: 25, ..BonsaiTrainConfig::default() };
    let out = bonsai_train(spec, &split.train, &split.validation, &cfg).unwrap();
    if out.final_model.nonzeros() != spec.nonzeros(3072) || out.best_model.nonzeros() != spec.nonzeros(3072) {
        problems.push("bonsai densities".into());
    }
    let pattern = |m: &bonsai::BonsaiModel| zero_pattern(m.params().blocks());
    if out.frozen_at.as_ref().map(pattern) != Some(pattern(&out.final_model)) {
        problems.push("bonsai support moved".into());
    }
    let spec = ProtoSpec::new(4, 10, 0.3).unwrap();
    let (model, _): (ProtoNNModel, _) =
        protonn_train(spec, &split.train, &split.validation, &ProtoTrainConfig { epochs: 4, ..ProtoTrainConfig::default() }).unwrap();
    if model.projection_nonzeros() != kept_count(4 * 3072, 0.3) {
        problems.push("protonn density".into());
    }
    verdict(problems.is_empty(), format!("3 FastGRNN modes, Bonsai, ProtoNN on synthetic data; problems {problems:?}"))
}

// ---- 8 and 10: desk-scale CIFAR-10 ---------------------------------------

fn cifar_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os(memclass::cli::DATA_ENV)?);
    dir.join(memclass::datasets::CIFAR_TEST_FILE).is_file().then_some(dir)
}

fn desk_split() -> Option<DatasetSplit> {
    let dir = cifar_dir()?;
    let (train, test) = load_cifar10(&dir).ok()?;
    prepare_split(train, test, &Scale::Desk.config(), false, 0).ok()
}

const NO_DATA: &str = "BLOCKED: CIFAR-10 binary batches not found (set CIFAR10_DIR)";

fn desk_smoke(split: Option<&DatasetSplit>) -> Verdict {
    let Some(split) = split else { return Blocked(NO_DATA.into()) };
    let epochs = 30;
    let started = Instant::now();

    let spec = FastGrnnSpec::new(SeqMode::ChannelMajor, 60, 0.3, 0.3).unwrap();
    let cfg = FastGrnnTrainConfig::for_budget(16, 0).with_epochs(epochs);
    let grnn = fastgrnn_train(spec, &split.train, &split.validation, &cfg).unwrap().history.best_validation_accuracy;

    let arch: ArchSpec = "A,C2(16,3),C1(8,3),C1(32,3),M,Dr,D*".parse().unwrap();
    let cfg = CnnTrainConfig { epochs, ..CnnTrainConfig::default() };
    let cnn = train_cnn(CnnModel::init(arch, 0), split, &cfg).unwrap().1.best_validation_accuracy;

    let cfg = BonsaiTrainConfig { epochs, ..BonsaiTrainConfig::default() };
    let tree = bonsai_train(BonsaiSpec::new(3, 11).unwrap(), &split.train, &split.validation, &cfg)
        .unwrap()
        .history
        .best_validation_accuracy;

    let scale = Scale::Desk.config();
    let proto = protonn_grid_search(128, &split.train, &split.validation, &scale.proto_grid, &scale.proto_train(0))
        .unwrap()
        .validation_accuracy;

    let ok = grnn >= 0.35 && cnn >= 0.40 && tree >= 0.18 && proto >= 0.12;
    verdict(
        ok,
        format!(
            "FastGRNN {grnn:.3} (>=0.35), Direct Conv {cnn:.3} (>=0.40), Bonsai {tree:.3} (>=0.18), ProtoNN {proto:.3} (>=0.12) in {:.0?}",
            started.elapsed()
        ),
    )
}

fn desk_ordering(split: Option<&DatasetSplit>) -> Verdict {
    let Some(split) = split else { return Blocked(NO_DATA.into()) };
    let budgets = [8, 16, 32, 64];
    let cfg = memclass::fastgrnn::FastGrnnSweepConfig { epochs: Scale::Desk.config().fastgrnn_epochs, ..Default::default() };
    let mut ok = true;
    let mut detail = Vec::new();
    for mode in SeqMode::ALL {
        let trained = fastgrnn_sweep(mode, &budgets, &split.train, &split.validation, &cfg).unwrap();
        // best candidate built for each budget, ignoring smaller budgets' models
        let accs: Vec<f64> = budgets
            .iter()
            .map(|&b| trained.iter().filter(|t| t.budget_kb == b).map(|t| t.validation_accuracy).fold(0.0, f64::max))
            .collect();
        let inversions = accs.windows(2).filter(|w| w[1] < w[0]).count();
        ok &= inversions <= 1;
        detail.push(format!("{mode} {accs:.3?} ({inversions} inversions)"));
    }
    verdict(ok, detail.join("; "))
}

// ---- 9 and 11 --------------------------------------------------------------

fn feasibility() -> Verdict {
    let split = synth_image_split(10, 2, 1, 1, 4.0, 3).unwrap();
    let config = ExperimentConfig {
        families: vec![Family::ProtoNN],
        budgets: vec![Budget::new(8).unwrap(), Budget::new(16).unwrap()],
        ..ExperimentConfig::default()
    };
    let report = run_experiment_scaled(&config, &Scale::Desk.config(), &split).unwrap();
    let empty = [8, 16].iter().all(|&b| report.cell(Family::ProtoNN, b) == Some(&CellResult::NoFeasibleModel));
    verdict(
        empty && report.evaluated_models == 0 && split.test.reads() == 0,
        format!("ProtoNN 8KB/16KB empty: {empty}, models evaluated {}", report.evaluated_models),
    )
}

fn header_len(bytes: &[u8]) -> usize {
    match bytes[0] {
        b'C' => 5 + 12 * u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize,
        b'P' => 17,
        b'B' => 21,
        _ => 14,
    }
}

fn serialization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e71);
    let all = catalog();
    let mut mismatched = 0;
    for i in 0..50 {
        let (bytes, want) = match i % 4 {
            0 => {
                let (arch, fp) = &all[rng.random_range(0..all.len())];
                (CnnModel::init(arch.clone(), i).to_bytes(), fp.parameter_bytes())
            }
            1 => {
                let spec = ProtoSpec::new(rng.random_range(1..16), rng.random_range(1..40), [0.2, 1.0][i as usize % 2]).unwrap();
                let uniform = |rng: &mut ChaCha8Rng, n: usize| (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect();
                let m = ProtoNNModel::from_parts(
                    spec,
                    64,
                    uniform(&mut rng, spec.dim * 64),
                    uniform(&mut rng, spec.prototypes * spec.dim),
                    uniform(&mut rng, 10 * spec.prototypes),
                    1.0,
                )
                .unwrap();
                (m.to_bytes().unwrap(), m.footprint().total_bytes)
            }
            2 => {
                let spec = BonsaiSpec::new(rng.random_range(1..=8), rng.random_range(1..12)).unwrap();
                let params = bonsai::random_params(spec, 3072, i);
                let m = bonsai::BonsaiModel::from_params(spec, 3072, params, 1.0, 1.0).unwrap();
                (m.to_bytes().unwrap(), spec.footprint(3072).total_bytes)
            }
            _ => {
                let mode = SeqMode::ALL[rng.random_range(0..3)];
                let spec = FastGrnnSpec::new(mode, rng.random_range(1..80), 0.2, [0.3, 1.0][i as usize % 2]).unwrap();
                (FastGrnnModel::init(spec, i).to_bytes().unwrap(), spec.footprint().total_bytes)
            }
        };
        if (bytes.len() - header_len(&bytes)) as u64 != want || memclass::cli::load_model_bytes(&bytes).is_err() {
            mismatched += 1;
        }
    }
    let texts_ok = all.iter().step_by(97).all(|(a, _)| a.to_string().parse::<ArchSpec>().ok().as_ref() == Some(a));
    verdict(
        mismatched == 0 && texts_ok,
        format!("{mismatched}/50 payload mismatches, ArchSpec text round-trip {texts_ok}"),
    )
}

fn main() {
    let split = desk_split();
    let criteria: [(&str, Box<dyn Fn() -> Verdict>); 11] = [
        ("FastGRNN footprints exact", Box::new(fastgrnn_sizes)),
        ("Bonsai footprints within 0.5%", Box::new(bonsai_sizes)),
        ("ProtoNN footprint within 3%", Box::new(protonn_size)),
        ("in-place executor equivalence", Box::new(executor)),
        ("herringbone plan properties", Box::new(herringbone)),
        ("gradient suite", Box::new(gradients)),
        ("sparsity contracts", Box::new(sparsity)),
        ("desk-scale training smoke", Box::new(|| desk_smoke(split.as_ref()))),
        ("ProtoNN feasibility cells", Box::new(feasibility)),
        ("desk-scale budget ordering", Box::new(|| desk_ordering(split.as_ref()))),
        ("serialization", Box::new(serialization)),
    ];
    for (i, (name, check)) in criteria.iter().enumerate() {
        let line = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(Pass(d)) => format!("PASS {d}"),
            Ok(Fail(d)) => format!("FAIL {d}"),
            Ok(Blocked(d)) => d,
            Err(_) => "FAIL panicked".into(),
        };
        println!("criterion {:>2} {name}: {line}", i + 1);
    }
}
