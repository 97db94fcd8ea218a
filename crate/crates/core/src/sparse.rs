//! Hard thresholding: keep the `k` largest-magnitude entries.

use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, SparseMatrix};

/// Number of entries kept at `density`: `round(density × elements)`.
pub fn kept_count(elements: usize, density: f64) -> usize {
    ((density * elements as f64).round() as usize).min(elements)
}

fn check_density(density: f64) -> Result<()> {
    if density > 0.0 && density <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("density {density} not in (0, 1]")))
    }
}

/// Indices of the `k` largest `|value|` entries, ascending. Ties in magnitude
/// go to the lower index.
pub fn top_k_support(values: &[f32], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    if k < values.len() {
        order.select_nth_unstable_by(k, |&a, &b| {
            values[b]
                .abs()
                .total_cmp(&values[a].abs())
                .then(a.cmp(&b))
        });
        order.truncate(k);
    }
    order.sort_unstable();
    order
}

pub fn hard_threshold(matrix: &DenseMatrix, density: f64) -> Result<SparseMatrix> {
    check_density(density)?;
    let k = kept_count(matrix.len(), density);
    let data = matrix.data();
    let entries = top_k_support(data, k)
        .into_iter()
        .map(|i| (i as u32, data[i]))
        .collect();
    SparseMatrix::new(matrix.rows(), matrix.cols(), entries)
}

/// Boolean support mask used while training sparse parameters in place.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask {
    keep: Vec<bool>,
}

impl SupportMask {
    pub fn dense(len: usize) -> Self {
        SupportMask {
            keep: vec![true; len],
        }
    }

    /// Zeroes all but the top `round(density × len)` entries of `values` and
    /// returns the resulting support.
    pub fn threshold(values: &mut [f32], density: f64) -> Result<Self> {
        check_density(density)?;
        let k = kept_count(values.len(), density);
        let mut keep = vec![false; values.len()];
        for i in top_k_support(values, k) {
            keep[i] = true;
        }
        let mask = SupportMask { keep };
        mask.apply(values);
        Ok(mask)
    }

    pub fn apply(&self, values: &mut [f32]) {
        for (v, &k) in values.iter_mut().zip(&self.keep) {
            if !k {
                *v = 0.0;
            }
        }
    }

    pub fn count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.keep[i]
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    /// Sparse view of `values` restricted to this support. The entry count
    /// equals the support size even where a kept value happens to be zero.
    pub fn to_sparse(&self, rows: usize, cols: usize, values: &[f32]) -> Result<SparseMatrix> {
        let entries = self
            .keep
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .map(|(i, _)| (i as u32, values[i]))
            .collect();
        SparseMatrix::new(rows, cols, entries)
    }

    pub fn from_sparse(sparse: &SparseMatrix) -> Self {
        let mut keep = vec![false; sparse.rows() * sparse.cols()];
        for &(i, _) in sparse.entries() {
            keep[i as usize] = true;
        }
        SupportMask { keep }
    }
}
