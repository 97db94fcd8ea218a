//! Byte accounting shared by every model family.
//!
//! Dense parameters cost 4 bytes (one `f32`). A sparse nonzero costs 8 bytes:
//! a 4-byte value plus a 4-byte flat index. CNNs additionally pay for their
//! peak live activations. All arithmetic is integral.

use std::fmt;

pub const DENSE_PARAM_BYTES: u64 = 4;
pub const SPARSE_ENTRY_BYTES: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Footprint {
    pub dense_param_count: u64,
    pub sparse_nonzero_count: u64,
    pub activation_peak_bytes: u64,
    pub total_bytes: u64,
}

pub fn footprint_bytes(dense_count: u64, sparse_nnz: u64, activation_peak: u64) -> Footprint {
    Footprint {
        dense_param_count: dense_count,
        sparse_nonzero_count: sparse_nnz,
        activation_peak_bytes: activation_peak,
        total_bytes: DENSE_PARAM_BYTES * dense_count
            + SPARSE_ENTRY_BYTES * sparse_nnz
            + activation_peak,
    }
}

impl Footprint {
    /// Size in hundredths of a kilobyte (1KB = 1024 bytes), rounded half-up.
    pub fn centi_kb(&self) -> u64 {
        (self.total_bytes * 100 + 512) / 1024
    }

    pub fn total_kb(&self) -> f64 {
        self.centi_kb() as f64 / 100.0
    }

    /// Bytes of stored parameters, i.e. everything but activations.
    pub fn parameter_bytes(&self) -> u64 {
        self.total_bytes - self.activation_peak_bytes
    }

    pub fn fits(&self, budget_kb: u32) -> bool {
        self.total_bytes <= budget_kb as u64 * 1024
    }

    /// Accumulates another block of parameters into this footprint.
    pub fn add(self, other: Footprint) -> Footprint {
        footprint_bytes(
            self.dense_param_count + other.dense_param_count,
            self.sparse_nonzero_count + other.sparse_nonzero_count,
            self.activation_peak_bytes + other.activation_peak_bytes,
        )
    }

    pub fn kb_label(&self) -> String {
        format_centi_kb(self.centi_kb())
    }
}

impl fmt::Display for Footprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} B ({})", self.total_bytes, self.kb_label())
    }
}

pub fn format_centi_kb(centi: u64) -> String {
    format!("{}.{:02}KB", centi / 100, centi % 100)
}

/// Cost of one parameter matrix: sparse when `density < 1`, dense otherwise.
pub fn matrix_footprint(elements: usize, density: f64) -> Footprint {
    if density < 1.0 {
        footprint_bytes(0, crate::sparse::kept_count(elements, density) as u64, 0)
    } else {
        footprint_bytes(elements as u64, 0, 0)
    }
}
