use crate::error::{Error, Result};

/// Height × width × channels grid of `f32` pixels stored height-major,
/// then width, then channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub const CIFAR_SIDE: usize = 32;
    pub const CIFAR_CHANNELS: usize = 3;
    pub const CIFAR_LEN: usize = 32 * 32 * 3;

    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "{height}x{width}x{channels} image needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        ImageTensor {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    pub fn is_cifar_shape(&self) -> bool {
        self.dims() == (Self::CIFAR_SIDE, Self::CIFAR_SIDE, Self::CIFAR_CHANNELS)
    }

    pub fn ensure_cifar_shape(&self) -> Result<()> {
        if self.is_cifar_shape() {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "expected a 32x32x3 image, got {}x{}x{}",
                self.height, self.width, self.channels
            )))
        }
    }

    /// One row of one channel, as a `width`-long vector.
    pub fn channel_row(&self, channel: usize, row: usize) -> Vec<f32> {
        (0..self.width).map(|c| self.at(row, c, channel)).collect()
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f32]) -> Result<Vec<f32>> {
        if x.len() != self.cols {
            return Err(Error::shape(format!(
                "matvec: {} columns vs vector of {}",
                self.cols,
                x.len()
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Sparse matrix stored as `(flat index, value)` pairs over a fixed dense
/// shape. Indices are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(u32, f32)>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<(u32, f32)>) -> Result<Self> {
        let len = rows * cols;
        if len > u32::MAX as usize {
            return Err(Error::shape("sparse matrix too large for 32-bit indices"));
        }
        for pair in entries.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(Error::Format(format!(
                    "sparse indices not strictly increasing at {}",
                    pair[1].0
                )));
            }
        }
        if let Some(&(last, _)) = entries.last() {
            if last as usize >= len {
                return Err(Error::Format(format!(
                    "sparse index {last} out of range for {rows}x{cols}"
                )));
            }
        }
        Ok(SparseMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(u32, f32)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for &(i, v) in &self.entries {
            data[i as usize] = v;
        }
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn matvec(&self, x: &[f32]) -> Result<Vec<f32>> {
        if x.len() != self.cols {
            return Err(Error::shape(format!(
                "sparse matvec: {} columns vs vector of {}",
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for &(i, v) in &self.entries {
            let (r, c) = (i as usize / self.cols, i as usize % self.cols);
            out[r] += v * x[c];
        }
        Ok(out)
    }
}
