//! Memory-constrained image classification.
//!
//! Four model families are implemented from scratch: direct-convolution
//! CNNs executed in place, ProtoNN, Bonsai and FastGRNN. Every family prices
//! its parameters with the same byte convention (see [`size`]), exposes a
//! budget-driven search, and serializes to a payload whose length equals its
//! footprint.

pub mod adam;
pub mod bonsai;
pub mod cli;
pub mod codec;
pub mod datasets;
pub mod directconv;
pub mod error;
pub mod fastgrnn;
pub mod harness;
pub mod history;
pub mod protonn;
pub mod real;
pub mod rng;
pub mod size;
pub mod sparse;
pub mod tensor;

pub use error::{Error, Result};
pub use size::{footprint_bytes, Footprint};
pub use tensor::{DenseMatrix, ImageTensor, SparseMatrix};

/// Anything that maps an image to ten class scores.
pub trait Classifier: Sync {
    fn logits(&self, image: &ImageTensor) -> Result<Vec<f32>>;

    /// Predicted class; ties go to the lowest class index.
    fn predict(&self, image: &ImageTensor) -> Result<usize> {
        Ok(real::argmax(&self.logits(image)?))
    }
}
