//! CIFAR-10 ingestion, stratified holdout splits and synthetic data.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::rng::{normal, seeded_rng, shuffled_indices};
use crate::tensor::ImageTensor;

pub const NUM_CLASSES: usize = 10;
pub const CIFAR_RECORD_BYTES: usize = 1 + ImageTensor::CIFAR_LEN;
pub const CIFAR_TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const CIFAR_TEST_FILE: &str = "test_batch.bin";

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: ImageTensor,
    pub label: u8,
}

impl LabeledImage {
    pub fn new(image: ImageTensor, label: u8) -> Result<Self> {
        if label as usize >= NUM_CLASSES {
            return Err(Error::Format(format!("label {label} is not a class id")));
        }
        Ok(LabeledImage { image, label })
    }
}

/// Decodes one CIFAR-10 record: a label byte followed by the red, green and
/// blue planes (each 32×32, row-major). Pixels are scaled by 1/255.
pub fn decode_record(record: &[u8]) -> Result<LabeledImage> {
    if record.len() != CIFAR_RECORD_BYTES {
        return Err(Error::Format(format!(
            "record of {} bytes, expected {CIFAR_RECORD_BYTES}",
            record.len()
        )));
    }
    let plane = 32 * 32;
    let mut data = vec![0.0f32; ImageTensor::CIFAR_LEN];
    for ch in 0..3 {
        let src = &record[1 + ch * plane..1 + (ch + 1) * plane];
        for (p, &b) in src.iter().enumerate() {
            data[p * 3 + ch] = b as f32 / 255.0;
        }
    }
    LabeledImage::new(ImageTensor::new(32, 32, 3, data)?, record[0])
}

/// Inverse of [`decode_record`] for unstandardized images.
pub fn encode_record(item: &LabeledImage) -> Result<Vec<u8>> {
    item.image.ensure_cifar_shape()?;
    let plane = 32 * 32;
    let mut out = vec![0u8; CIFAR_RECORD_BYTES];
    out[0] = item.label;
    for (i, &v) in item.image.data().iter().enumerate() {
        let (p, ch) = (i / 3, i % 3);
        out[1 + ch * plane + p] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
    }
    Ok(out)
}

pub fn read_batch(path: &Path) -> Result<Vec<LabeledImage>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % CIFAR_RECORD_BYTES != 0 {
        return Err(Error::Format(format!(
            "{}: length {} is not a multiple of {CIFAR_RECORD_BYTES}",
            path.display(),
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(CIFAR_RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            decode_record(rec)
                .map_err(|e| Error::Format(format!("{} record {i}: {e}", path.display())))
        })
        .collect()
}

pub fn write_batch(path: &Path, items: &[LabeledImage]) -> Result<()> {
    let mut bytes = Vec::with_capacity(items.len() * CIFAR_RECORD_BYTES);
    for item in items {
        bytes.extend(encode_record(item)?);
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads the five training batches (joined in order) and the test batch.
pub fn load_cifar10(dir: &Path) -> Result<(Vec<LabeledImage>, Vec<LabeledImage>)> {
    let mut train = Vec::new();
    for name in CIFAR_TRAIN_FILES {
        train.extend(read_batch(&dir.join(name))?);
    }
    let test = read_batch(&dir.join(CIFAR_TEST_FILE))?;
    Ok((train, test))
}

pub fn class_histogram(items: &[LabeledImage]) -> [usize; NUM_CLASSES] {
    let mut h = [0; NUM_CLASSES];
    for it in items {
        h[it.label as usize] += 1;
    }
    h
}

/// Per class, the first `per_class` indices of a seeded shuffle go to the
/// holdout; everything else stays. Both lists come back ascending.
pub fn holdout_indices(
    labels: &[u8],
    per_class: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut counts = [0usize; NUM_CLASSES];
    for &l in labels {
        counts[l as usize] += 1;
    }
    if per_class > 0 {
        if let Some(c) = (0..NUM_CLASSES).find(|&c| counts[c] < per_class) {
            return Err(Error::InsufficientData(format!(
                "class {c} has {} images, need {per_class}",
                counts[c]
            )));
        }
    }
    let mut rng = seeded_rng(seed);
    let mut taken = [0usize; NUM_CLASSES];
    let mut in_holdout = vec![false; labels.len()];
    for i in shuffled_indices(&mut rng, labels.len()) {
        let c = labels[i] as usize;
        if taken[c] < per_class {
            taken[c] += 1;
            in_holdout[i] = true;
        }
    }
    let (held, kept): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| in_holdout[i]);
    Ok((kept, held))
}

/// Test images behind an access counter, so a run can prove that search and
/// training never looked at them.
#[derive(Debug, Default)]
pub struct TestSet {
    items: Vec<LabeledImage>,
    reads: AtomicUsize,
}

impl Clone for TestSet {
    fn clone(&self) -> Self {
        TestSet {
            items: self.items.clone(),
            reads: AtomicUsize::new(self.reads()),
        }
    }
}

impl TestSet {
    pub fn new(items: Vec<LabeledImage>) -> Self {
        TestSet {
            items,
            reads: AtomicUsize::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Grants access to the images and charges the audit counter.
    pub fn read(&self) -> &[LabeledImage] {
        self.reads.fetch_add(self.items.len(), Ordering::SeqCst);
        &self.items
    }

    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<LabeledImage>,
    pub validation: Vec<LabeledImage>,
    pub test: TestSet,
}

pub fn stratified_holdout(
    train: Vec<LabeledImage>,
    test: Vec<LabeledImage>,
    per_class: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    let labels: Vec<u8> = train.iter().map(|t| t.label).collect();
    let (kept, held) = holdout_indices(&labels, per_class, seed)?;
    let mut slots: Vec<Option<LabeledImage>> = train.into_iter().map(Some).collect();
    let validation = held.iter().map(|&i| slots[i].take().unwrap()).collect();
    let train = kept.iter().map(|&i| slots[i].take().unwrap()).collect();
    Ok(DatasetSplit {
        train,
        validation,
        test: TestSet::new(test),
    })
}

/// Class-balanced subset of `items` with `per_class` images of each class.
pub fn stratified_subset(items: &[LabeledImage], per_class: usize, seed: u64) -> Result<Vec<LabeledImage>> {
    let labels: Vec<u8> = items.iter().map(|t| t.label).collect();
    let (_, held) = holdout_indices(&labels, per_class, seed)?;
    Ok(held.into_iter().map(|i| items[i].clone()).collect())
}

impl DatasetSplit {
    /// Shrinks train and validation to class-balanced subsets (desk-scale runs).
    pub fn subsample(&self, train_per_class: usize, val_per_class: usize, seed: u64) -> Result<DatasetSplit> {
        Ok(DatasetSplit {
            train: stratified_subset(&self.train, train_per_class, seed)?,
            validation: stratified_subset(&self.validation, val_per_class, seed ^ 0x5A5A)?,
            test: self.test.clone(),
        })
    }

    /// Per-channel standardization fitted on the training images and
    /// applied to every subset.
    pub fn standardize(&mut self) {
        let ch = match self.train.first() {
            Some(t) => t.image.channels(),
            None => return,
        };
        let mut sum = vec![0f64; ch];
        let mut sq = vec![0f64; ch];
        let mut n = 0usize;
        for it in &self.train {
            for (i, &v) in it.image.data().iter().enumerate() {
                sum[i % ch] += v as f64;
                sq[i % ch] += (v as f64) * (v as f64);
            }
            n += it.image.data().len() / ch;
        }
        let mean: Vec<f32> = sum.iter().map(|s| (s / n as f64) as f32).collect();
        let std: Vec<f32> = sq
            .iter()
            .zip(&sum)
            .map(|(q, s)| {
                let m = s / n as f64;
                ((q / n as f64 - m * m).max(1e-12)).sqrt() as f32
            })
            .collect();
        let apply = |items: &mut Vec<LabeledImage>| {
            for it in items.iter_mut() {
                for (i, v) in it.image.data_mut().iter_mut().enumerate() {
                    *v = (*v - mean[i % ch]) / std[i % ch];
                }
            }
        };
        apply(&mut self.train);
        apply(&mut self.validation);
        apply(&mut self.test.items);
    }
}

/// A labeled feature vector, the input of the vector-based families.
pub trait Example: Sync {
    fn features(&self) -> &[f32];
    fn label(&self) -> usize;
}

impl Example for LabeledImage {
    fn features(&self) -> &[f32] {
        self.image.data()
    }

    fn label(&self) -> usize {
        self.label as usize
    }
}

impl Example for Blob {
    fn features(&self) -> &[f32] {
        &self.features
    }

    fn label(&self) -> usize {
        self.label as usize
    }
}

/// Labeled feature vector from [`synth_blobs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub features: Vec<f32>,
    pub label: u8,
}

fn blob_means(classes: usize, dims: usize, separation: f32, rng: &mut crate::rng::SeededRng) -> Vec<Vec<f32>> {
    if separation == 0.0 {
        return vec![vec![0.0; dims]; classes];
    }
    if classes <= dims {
        // scaled axes: every pair is exactly `separation` apart
        let s = separation / std::f32::consts::SQRT_2;
        return (0..classes)
            .map(|c| (0..dims).map(|d| if d == c { s } else { 0.0 }).collect())
            .collect();
    }
    let mut means: Vec<Vec<f32>> = Vec::with_capacity(classes);
    let mut attempts = 0;
    while means.len() < classes {
        attempts += 1;
        let cand: Vec<f32> = (0..dims).map(|_| normal(rng) * separation).collect();
        let ok = means.iter().all(|m| {
            m.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum::<f32>().sqrt() >= separation
        });
        if ok || attempts > 10_000 {
            means.push(cand);
        }
    }
    means
}

/// Gaussian clusters (unit variance) whose class means are at least
/// `separation` apart.
pub fn synth_blobs(classes: usize, dims: usize, per_class: usize, separation: f32, seed: u64) -> Vec<Blob> {
    let mut rng = seeded_rng(seed);
    let means = blob_means(classes, dims, separation, &mut rng);
    let mut out = Vec::with_capacity(classes * per_class);
    for _ in 0..per_class {
        for (c, mean) in means.iter().enumerate() {
            let features = mean.iter().map(|&m| m + normal(&mut rng)).collect();
            out.push(Blob {
                features,
                label: c as u8,
            });
        }
    }
    out
}

/// Embeds blob vectors into 32×32×3 images in `[0, 1]` through a fixed random
/// linear map followed by a logistic squash.
pub fn blobs_to_images(blobs: &[Blob], seed: u64) -> Result<Vec<LabeledImage>> {
    let dims = blobs.first().map_or(0, |b| b.features.len());
    let mut rng = seeded_rng(seed);
    let scale = 1.0 / (dims.max(1) as f32).sqrt();
    let proj: Vec<f32> = (0..ImageTensor::CIFAR_LEN * dims)
        .map(|_| normal(&mut rng) * scale)
        .collect();
    blobs
        .iter()
        .map(|b| {
            let data = proj
                .chunks_exact(dims.max(1))
                .map(|row| {
                    let z: f32 = row.iter().zip(&b.features).map(|(p, x)| p * x).sum();
                    1.0 / (1.0 + (-0.5 * z).exp())
                })
                .collect();
            LabeledImage::new(ImageTensor::new(32, 32, 3, data)?, b.label)
        })
        .collect()
}

/// A complete synthetic split of CIFAR-shaped images, for tests and examples.
pub fn synth_image_split(
    classes: usize,
    train_per_class: usize,
    val_per_class: usize,
    test_per_class: usize,
    separation: f32,
    seed: u64,
) -> Result<DatasetSplit> {
    let dims = 16;
    let total = train_per_class + val_per_class + test_per_class;
    let blobs = synth_blobs(classes, dims, total, separation, seed);
    let images = blobs_to_images(&blobs, seed.wrapping_add(1))?;
    // blobs are interleaved by class, so contiguous chunks stay balanced
    let a = train_per_class * classes;
    let b = a + val_per_class * classes;
    Ok(DatasetSplit {
        train: images[..a].to_vec(),
        validation: images[a..b].to_vec(),
        test: TestSet::new(images[b..].to_vec()),
    })
}
