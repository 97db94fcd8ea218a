//! Structural properties of each family, checked on random inputs.

use memclass::adam::AdamState;
use memclass::bonsai::{self, indicators, BonsaiParams, BonsaiSpec, Mode};
use memclass::datasets::{decode_record, encode_record, holdout_indices};
use memclass::directconv::{catalog, forward_inplace, CnnModel};
use memclass::fastgrnn::{classify, sequence_image, CellParams, GrnnParams, SeqMode};
use memclass::protonn;
use memclass::sparse::{kept_count, SupportMask};
use memclass::tensor::ImageTensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vec_f32(rng: &mut ChaCha8Rng, n: usize, scale: f32) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn vec_f64(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn image(rng: &mut ChaCha8Rng) -> ImageTensor {
    ImageTensor::new(32, 32, 3, (0..3072).map(|_| rng.random_range(0.0f32..1.0)).collect()).unwrap()
}

fn grnn_params(rng: &mut ChaCha8Rng, cells: usize, h: usize) -> GrnnParams<f32> {
    GrnnParams {
        cells: (0..cells)
            .map(|_| CellParams {
                w: vec_f32(rng, h * 32, 0.3),
                u: vec_f32(rng, h * h, 0.3),
                bz: vec_f32(rng, h, 0.5),
                bh: vec_f32(rng, h, 0.5),
                zeta: 0.7,
                nu: 0.05,
            })
            .collect(),
        head_w: vec_f32(rng, 10 * cells * h, 0.5),
        head_b: vec_f32(rng, 10, 0.5),
    }
}

fn sorted(mut v: Vec<f32>) -> Vec<f32> {
    v.sort_by(f32::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn threshold_keeps_the_largest_magnitudes(
        values in prop::collection::vec(-10.0f32..10.0, 1..200),
        density in 0.01f64..1.0,
    ) {
        let mut kept = values.clone();
        let mask = SupportMask::threshold(&mut kept, density).unwrap();
        prop_assert_eq!(mask.count(), kept_count(values.len(), density));
        let mut min_kept = f32::INFINITY;
        let mut max_dropped = 0.0f32;
        for (i, (&a, &b)) in values.iter().zip(&kept).enumerate() {
            if mask.contains(i) {
                prop_assert_eq!(a, b);
                min_kept = min_kept.min(a.abs());
            } else {
                prop_assert_eq!(b, 0.0);
                max_dropped = max_dropped.max(a.abs());
            }
        }
        prop_assert!(mask.count() == 0 || min_kept >= max_dropped);
    }

    #[test]
    fn adam_with_zero_rate_is_identity(seed in any::<u64>(), n in 1usize..50, steps in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = vec_f32(&mut rng, n, 5.0);
        let mut p = start.clone();
        let mut opt = AdamState::new(n, 0.0);
        for _ in 0..steps {
            let g = vec_f32(&mut rng, n, 5.0);
            opt.step(&mut p, &g).unwrap();
        }
        prop_assert_eq!(p, start);
    }

    #[test]
    fn records_reencode_to_their_bytes(label in 0u8..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rec = vec![label];
        rec.extend((0..3072).map(|_| rng.random::<u8>()));
        prop_assert_eq!(encode_record(&decode_record(&rec).unwrap()).unwrap(), rec);
    }

    #[test]
    fn holdout_partitions_indices(labels in prop::collection::vec(0u8..10, 40..300), per in 0usize..4, seed in any::<u64>()) {
        let counts = (0..10u8).map(|c| labels.iter().filter(|&&l| l == c).count()).collect::<Vec<_>>();
        prop_assume!(counts.iter().all(|&c| c >= per));
        let (kept, held) = holdout_indices(&labels, per, seed).unwrap();
        let mut all: Vec<usize> = kept.iter().chain(&held).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for c in 0..10u8 {
            prop_assert_eq!(held.iter().filter(|&&i| labels[i] == c).count(), per);
        }
    }

    #[test]
    fn cnn_peak_ignores_weight_values(i in any::<prop::sample::Index>(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let all = catalog();
        let arch = all[i.index(all.len())].0.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(s1 ^ s2);
        let img = image(&mut rng);
        let a = forward_inplace(&CnnModel::init(arch.clone(), s1), &img).unwrap();
        let b = forward_inplace(&CnnModel::init(arch, s2), &img).unwrap();
        prop_assert_eq!(a.measured_peak_bytes, b.measured_peak_bytes);
        prop_assert_eq!(a.buffer_bytes, b.buffer_bytes);
    }

    #[test]
    fn protonn_scores_ignore_prototype_order(seed in any::<u64>(), d in 1usize..5, m in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = 12;
        let w = vec_f64(&mut rng, d * input);
        let b = vec_f64(&mut rng, m * d);
        let z = vec_f64(&mut rng, 10 * m);
        let x = vec_f64(&mut rng, input);
        let mut perm: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let bp: Vec<f64> = perm.iter().flat_map(|&j| b[j * d..(j + 1) * d].to_vec()).collect();
        let zp: Vec<f64> = (0..10).flat_map(|l| perm.iter().map(move |&j| (l, j))).map(|(l, j)| z[l * m + j]).collect();
        let s1 = protonn::scores(&w, &b, &z, 0.8, d, &x);
        let s2 = protonn::scores(&w, &bp, &zp, 0.8, d, &x);
        for (a, c) in s1.iter().zip(&s2) {
            prop_assert!((a - c).abs() < 1e-12);
        }
        // γ = 0 turns every similarity into 1
        let s0 = protonn::scores(&w, &b, &z, 0.0, d, &x);
        for l in 0..10 {
            let row: f64 = z[l * m..(l + 1) * m].iter().sum();
            prop_assert!((s0[l] - row).abs() < 1e-12);
        }
    }

    #[test]
    fn bonsai_soft_levels_sum_to_one_and_hard_follows_one_path(seed in any::<u64>(), depth in 1usize..6, dim in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = BonsaiSpec::new(depth, dim).unwrap();
        let theta = vec_f64(&mut rng, spec.internal_nodes() * dim);
        let xhat = vec_f64(&mut rng, dim);
        let soft = indicators(&theta, spec, 1.5, &xhat, Mode::Soft);
        for level in 0..=depth {
            let nodes = (1usize << level) - 1..(1usize << (level + 1)) - 1;
            let total: f64 = soft[nodes].iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "level {} sums to {}", level, total);
        }
        let hard = indicators(&theta, spec, 1.5, &xhat, Mode::Hard);
        prop_assert_eq!(hard.iter().filter(|&&v| v == 1.0).count(), depth + 1);
        prop_assert!(hard.iter().all(|&v| v == 0.0 || v == 1.0));

        // predictors off the path do not contribute in hard mode
        let input = 6;
        let mut params = BonsaiParams {
            z: vec_f64(&mut rng, dim * input),
            w: vec_f64(&mut rng, spec.nodes() * 10 * dim),
            v: vec_f64(&mut rng, spec.nodes() * 10 * dim),
            theta: vec_f64(&mut rng, spec.internal_nodes() * dim),
        };
        let x = vec_f64(&mut rng, input);
        let before = bonsai::scores(&params, spec, 1.0, 1.0, &x, Mode::Hard);
        let xh: Vec<f64> = (0..dim).map(|r| (0..input).map(|c| params.z[r * input + c] * x[c]).sum()).collect();
        let path = indicators(&params.theta, spec, 1.0, &xh, Mode::Hard);
        for k in 0..spec.nodes() {
            if path[k] == 0.0 {
                params.w[k * 10 * dim..(k + 1) * 10 * dim].fill(7.0);
            }
        }
        prop_assert_eq!(bonsai::scores(&params, spec, 1.0, 1.0, &x, Mode::Hard), before);
    }

    #[test]
    fn single_sequence_modes_reorder_the_same_pixels(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = image(&mut rng);
        let want = sorted(img.data().to_vec());
        for mode in [SeqMode::RowMajor, SeqMode::ChannelMajor] {
            let seqs = sequence_image(&img, mode).unwrap();
            prop_assert_eq!(seqs.len(), 1);
            prop_assert_eq!(seqs[0].len(), 96);
            prop_assert!(seqs[0].iter().all(|s| s.len() == 32));
            prop_assert_eq!(sorted(seqs[0].concat()), want.clone());
        }
        let multi = sequence_image(&img, SeqMode::Multi).unwrap();
        prop_assert_eq!(multi.len(), 3);
        for (c, seq) in multi.iter().enumerate() {
            for (r, step) in seq.iter().enumerate() {
                let row: Vec<f32> = (0..32).map(|col| img.at(r, col, c)).collect();
                prop_assert_eq!(step, &row);
            }
        }
    }

    #[test]
    fn multi_is_symmetric_under_channel_permutation(seed in any::<u64>(), h in 1usize..10, p in 0usize..6) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = perms[p];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = image(&mut rng);
        let params = grnn_params(&mut rng, 3, h);
        // channel c of the new image is channel perm[c] of the old one
        let mut data = vec![0.0; 3072];
        for r in 0..32 {
            for col in 0..32 {
                for c in 0..3 {
                    data[(r * 32 + col) * 3 + c] = img.at(r, col, perm[c]);
                }
            }
        }
        let permuted = ImageTensor::new(32, 32, 3, data).unwrap();
        let mut moved = params.clone();
        for c in 0..3 {
            moved.cells[c] = params.cells[perm[c]].clone();
            for l in 0..10 {
                let (dst, src) = (l * 3 * h + c * h, l * 3 * h + perm[c] * h);
                moved.head_w[dst..dst + h].copy_from_slice(&params.head_w[src..src + h]);
            }
        }
        let a = classify(&params, &sequence_image(&img, SeqMode::Multi).unwrap());
        let b = classify(&moved, &sequence_image(&permuted, SeqMode::Multi).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-5, "{} vs {}", x, y);
        }
    }

    #[test]
    fn row_and_channel_order_matters_unless_degenerate(seed in any::<u64>(), h in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = image(&mut rng);
        let mut params = grnn_params(&mut rng, 1, h);
        let row = classify(&params, &sequence_image(&img, SeqMode::RowMajor).unwrap());
        let chan = classify(&params, &sequence_image(&img, SeqMode::ChannelMajor).unwrap());
        prop_assert_ne!(row, chan);
        params.cells[0].u.fill(0.0);
        params.head_w.fill(0.0);
        let row = classify(&params, &sequence_image(&img, SeqMode::RowMajor).unwrap());
        let chan = classify(&params, &sequence_image(&img, SeqMode::ChannelMajor).unwrap());
        prop_assert_eq!(row, chan);
    }
}
