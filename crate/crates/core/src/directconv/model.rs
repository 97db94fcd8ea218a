use std::path::Path;

use super::arch::ArchSpec;
use super::kernels::layer_forward;
use super::layer::{LayerSpec, Shape};
use super::plan::cnn_footprint;
use crate::codec::{self, ParamReader, ParamWriter, TAG_CNN};
use crate::error::{Error, Result};
use crate::rng::{fan_in_uniform, seeded_rng};
use crate::size::Footprint;
use crate::tensor::ImageTensor;
use crate::Classifier;

/// An architecture with its dense parameter blocks, `params[layer][block]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    arch: ArchSpec,
    shapes: Vec<Shape>,
    params: Vec<Vec<Vec<f32>>>,
}

impl CnnModel {
    /// Fan-in scaled uniform weights, zero biases.
    pub fn init(arch: ArchSpec, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let shapes = arch.shapes().expect("validated at construction");
        let params = arch
            .layers()
            .iter()
            .zip(&shapes)
            .map(|(layer, &input)| {
                let blocks = layer.param_blocks(input);
                let n = blocks.len();
                blocks
                    .into_iter()
                    .enumerate()
                    .map(|(i, (len, fan))| {
                        if i + 1 == n {
                            vec![0.0; len]
                        } else {
                            fan_in_uniform(&mut rng, len, fan)
                        }
                    })
                    .collect()
            })
            .collect();
        CnnModel {
            arch,
            shapes,
            params,
        }
    }

    pub fn from_params(arch: ArchSpec, params: Vec<Vec<Vec<f32>>>) -> Result<Self> {
        let shapes = arch.shapes()?;
        if params.len() != arch.layers().len() {
            return Err(Error::shape(format!(
                "{} parameter groups for {} layers",
                params.len(),
                arch.layers().len()
            )));
        }
        for ((layer, input), blocks) in arch.layers().iter().zip(&shapes).zip(&params) {
            let want: Vec<usize> = layer.param_blocks(*input).iter().map(|b| b.0).collect();
            let got: Vec<usize> = blocks.iter().map(Vec::len).collect();
            if want != got {
                return Err(Error::shape(format!(
                    "{layer}: parameter blocks {got:?}, expected {want:?}"
                )));
            }
        }
        Ok(CnnModel {
            arch,
            shapes,
            params,
        })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    /// Input shape of each layer, then the output shape.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn params(&self) -> &[Vec<Vec<f32>>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<Vec<f32>>] {
        &mut self.params
    }

    pub fn footprint(&self) -> Result<Footprint> {
        cnn_footprint(&self.arch)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ParamWriter::new(TAG_CNN);
        w.header_u32(self.arch.layers().len() as u32);
        for layer in self.arch.layers() {
            let (kind, out, kernel) = layer.code();
            w.header_u32(kind).header_u32(out).header_u32(kernel);
        }
        for blocks in &self.params {
            for b in blocks {
                w.dense(b);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ParamReader::new(bytes, TAG_CNN)?;
        let n = r.usize()?;
        if n > 64 {
            return Err(Error::Format(format!("{n} layers is not a serial CNN")));
        }
        let layers = (0..n)
            .map(|_| LayerSpec::from_code(r.u32()?, r.u32()?, r.u32()?))
            .collect::<Result<Vec<_>>>()?;
        let arch = ArchSpec::custom(layers)?;
        let shapes = arch.shapes()?;
        let params = arch
            .layers()
            .iter()
            .zip(&shapes)
            .map(|(l, s)| {
                l.param_blocks(*s)
                    .iter()
                    .map(|&(len, _)| r.dense(len))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        CnnModel::from_params(arch, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        codec::write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        CnnModel::from_bytes(&codec::read_file(path)?)
    }
}

/// Reference executor: a fresh buffer per layer.
pub fn forward_naive(model: &CnnModel, image: &ImageTensor) -> Result<Vec<f32>> {
    image.ensure_cifar_shape()?;
    let mut x = image.data().to_vec();
    for ((layer, &shape), params) in model.arch.layers().iter().zip(&model.shapes).zip(&model.params) {
        x = layer_forward(layer, &x, shape, params);
    }
    Ok(x)
}

impl Classifier for CnnModel {
    fn logits(&self, image: &ImageTensor) -> Result<Vec<f32>> {
        forward_naive(self, image)
    }
}
