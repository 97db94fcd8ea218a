use std::fmt;
use std::str::FromStr;

use super::layer::{
    split_layers, LayerSpec, Shape, CONV_KERNELS, CONV_WIDTHS, DENSE_WIDTHS, SEPARABLE_KERNELS,
};
use crate::error::{Error, Result};

/// Slot of a serial pattern; `Conv` is filled by either convolution kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    AvgPool,
    MaxPool,
    Conv,
    Dense,
    Dropout,
    Logits,
}

impl Slot {
    fn of(layer: &LayerSpec) -> Slot {
        match layer {
            LayerSpec::AvgPool => Slot::AvgPool,
            LayerSpec::MaxPool => Slot::MaxPool,
            LayerSpec::Conv { .. } | LayerSpec::Separable { .. } => Slot::Conv,
            LayerSpec::Dense { .. } => Slot::Dense,
            LayerSpec::Dropout => Slot::Dropout,
            LayerSpec::Logits => Slot::Logits,
        }
    }

    fn expansions(self) -> Vec<LayerSpec> {
        match self {
            Slot::AvgPool => vec![LayerSpec::AvgPool],
            Slot::MaxPool => vec![LayerSpec::MaxPool],
            Slot::Dropout => vec![LayerSpec::Dropout],
            Slot::Logits => vec![LayerSpec::Logits],
            Slot::Dense => DENSE_WIDTHS
                .iter()
                .map(|&out| LayerSpec::Dense { out })
                .collect(),
            Slot::Conv => {
                let mut v = Vec::new();
                for &out in &CONV_WIDTHS {
                    for &kernel in &CONV_KERNELS {
                        v.push(LayerSpec::Conv { out, kernel });
                    }
                }
                for &out in &CONV_WIDTHS {
                    for &kernel in &SEPARABLE_KERNELS {
                        v.push(LayerSpec::Separable { out, kernel });
                    }
                }
                v
            }
        }
    }
}

use Slot::{AvgPool as A, Conv as C, Dense as D, Dropout as Dr, Logits as L, MaxPool as M};

/// The sixteen serial layouts searched over.
pub const PATTERNS: [&[Slot]; 16] = [
    &[A, C, C, C, M, Dr, L],
    &[A, C, M, D, Dr, L],
    &[A, C, D, Dr, L],
    &[A, C, M, C, Dr, L],
    &[A, C, C, M, Dr, L],
    &[A, C, C, Dr, L],
    &[A, D, D, D, Dr, L],
    &[A, C, M, C, D, Dr, L],
    &[A, C, D, D, Dr, L],
    &[A, C, M, D, D, L],
    &[A, C, C, M, D, L],
    &[A, C, C, D, L],
    &[A, C, M, C, C, Dr, L],
    &[A, C, C, M, C, Dr, L],
    &[A, D, D, Dr, L],
    &[A, C, C, C, Dr, L],
];

/// A serial CNN classifying 32×32×3 images into 10 classes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArchSpec {
    layers: Vec<LayerSpec>,
}

impl ArchSpec {
    /// Validated against the serial patterns and the candidate-layer domains.
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let arch = ArchSpec::custom(layers)?;
        if arch.pattern_index().is_none() {
            return Err(Error::invalid(format!(
                "{arch} does not match any serial pattern"
            )));
        }
        if let Some(l) = arch.layers.iter().find(|l| !l.in_search_domain()) {
            return Err(Error::invalid(format!(
                "{l} is outside the candidate-layer domain"
            )));
        }
        Ok(arch)
    }

    /// Any shape-valid serial stack ending in the 10-way logits layer.
    pub fn custom(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.last() != Some(&LayerSpec::Logits) {
            return Err(Error::invalid("architecture must end in D*"));
        }
        let arch = ArchSpec { layers };
        arch.shapes()?;
        Ok(arch)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Input shape of every layer followed by the final output shape.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut shapes = vec![Shape::CIFAR];
        for layer in &self.layers {
            let next = layer.output_shape(*shapes.last().expect("non-empty"))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn param_count(&self) -> usize {
        let shapes = self.shapes().expect("validated at construction");
        self.layers
            .iter()
            .zip(&shapes)
            .map(|(l, s)| l.param_count(*s))
            .sum()
    }

    pub fn pattern_index(&self) -> Option<usize> {
        let slots: Vec<Slot> = self.layers.iter().map(Slot::of).collect();
        PATTERNS.iter().position(|p| *p == slots.as_slice())
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for ArchSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let layers = split_layers(s)
            .into_iter()
            .map(str::parse)
            .collect::<Result<Vec<LayerSpec>>>()?;
        ArchSpec::new(layers)
    }
}

/// Every shape-valid expansion of the serial patterns, deduplicated, in
/// pattern order then lexicographic slot order.
pub fn enumerate_models() -> Vec<ArchSpec> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for pattern in PATTERNS {
        for layers in expand(pattern) {
            let arch = ArchSpec { layers };
            if arch.shapes().is_ok() && seen.insert(arch.clone()) {
                out.push(arch);
            }
        }
    }
    out
}

/// Cartesian product of slot expansions, including shape-invalid stacks.
pub fn expand(pattern: &[Slot]) -> Vec<Vec<LayerSpec>> {
    let mut acc: Vec<Vec<LayerSpec>> = vec![Vec::new()];
    for slot in pattern {
        let options = slot.expansions();
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(*o);
                    p
                })
            })
            .collect();
    }
    acc
}
