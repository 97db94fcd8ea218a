//! Layer arithmetic, generic over the float type so gradients can be checked
//! in `f64`.
//!
//! Output pixels are computed by per-pixel kernels that read their inputs
//! through a [`PixelSource`]. Both executors call the same kernels, so the
//! naive and in-place results are bitwise identical.
//!
//! Parameter blocks per layer:
//! - `C1`: weights `[dy][dx][in_c][out_c]`, bias `[out_c]`
//! - `C2`: depthwise `[dy][dx][in_c]`, pointwise `[in_c][out_c]`, bias `[out_c]`
//! - `D`, `D*`: weights `[in][out]` over the HWC-flattened input, bias `[out]`

use super::layer::{LayerSpec, Shape};
use crate::real::Real;

/// Read access to the `c` values of an input pixel.
pub trait PixelSource<T> {
    fn pixel(&self, r: usize, c: usize) -> &[T];
}

/// A feature map stored height, width, channel.
#[derive(Debug, Clone, Copy)]
pub struct Hwc<'a, T> {
    pub data: &'a [T],
    pub shape: Shape,
}

impl<T> PixelSource<T> for Hwc<'_, T> {
    fn pixel(&self, r: usize, c: usize) -> &[T] {
        let ch = self.shape.c;
        let at = (r * self.shape.w + c) * ch;
        &self.data[at..at + ch]
    }
}

fn relu<T: Real>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

pub fn conv_pixel<T: Real>(
    src: &impl PixelSource<T>,
    at: (usize, usize),
    kernel: usize,
    in_c: usize,
    weights: &[T],
    bias: &[T],
    out: &mut [T],
) {
    let out_c = bias.len();
    out.copy_from_slice(bias);
    for dy in 0..kernel {
        for dx in 0..kernel {
            let px = src.pixel(at.0 + dy, at.1 + dx);
            for (ci, &x) in px.iter().enumerate() {
                let base = ((dy * kernel + dx) * in_c + ci) * out_c;
                for (o, &w) in out.iter_mut().zip(&weights[base..base + out_c]) {
                    *o += x * w;
                }
            }
        }
    }
}

/// `depth` is per-pixel scratch of length `in_c`.
#[allow(clippy::too_many_arguments)]
pub fn separable_pixel<T: Real>(
    src: &impl PixelSource<T>,
    at: (usize, usize),
    kernel: usize,
    depthwise: &[T],
    pointwise: &[T],
    bias: &[T],
    depth: &mut [T],
    out: &mut [T],
) {
    let in_c = depth.len();
    let out_c = bias.len();
    depth.fill(T::zero());
    for dy in 0..kernel {
        for dx in 0..kernel {
            let px = src.pixel(at.0 + dy, at.1 + dx);
            let base = (dy * kernel + dx) * in_c;
            for ((d, &x), &w) in depth.iter_mut().zip(px).zip(&depthwise[base..base + in_c]) {
                *d += x * w;
            }
        }
    }
    out.copy_from_slice(bias);
    for (ci, &d) in depth.iter().enumerate() {
        let row = &pointwise[ci * out_c..(ci + 1) * out_c];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += d * w;
        }
    }
    for o in out.iter_mut() {
        *o = relu(*o);
    }
}

pub fn avg_pool_pixel<T: Real>(src: &impl PixelSource<T>, at: (usize, usize), out: &mut [T]) {
    let (r, c) = (at.0 * 2, at.1 * 2);
    let (a, b) = (src.pixel(r, c), src.pixel(r, c + 1));
    let (d, e) = (src.pixel(r + 1, c), src.pixel(r + 1, c + 1));
    let quarter = T::lit(0.25);
    for (i, o) in out.iter_mut().enumerate() {
        *o = (a[i] + b[i] + d[i] + e[i]) * quarter;
    }
}

pub fn max_pool_pixel<T: Real>(src: &impl PixelSource<T>, at: (usize, usize), out: &mut [T]) {
    let (r, c) = (at.0 * 2, at.1 * 2);
    out.copy_from_slice(src.pixel(r, c));
    for px in [src.pixel(r, c + 1), src.pixel(r + 1, c), src.pixel(r + 1, c + 1)] {
        for (o, &v) in out.iter_mut().zip(px) {
            if v > *o {
                *o = v;
            }
        }
    }
}

/// Output unit `o` of a dense layer, reading the input in HWC order.
pub fn dense_unit<T: Real>(
    src: &impl PixelSource<T>,
    input: Shape,
    o: usize,
    weights: &[T],
    bias: &[T],
    activate: bool,
) -> T {
    let n = bias.len();
    let mut acc = bias[o];
    let mut i = 0;
    for r in 0..input.h {
        for c in 0..input.w {
            for &x in src.pixel(r, c) {
                acc += x * weights[i * n + o];
                i += 1;
            }
        }
    }
    if activate {
        relu(acc)
    } else {
        acc
    }
}

/// Forward pass of one layer over an HWC map. Dropout is the identity.
pub fn layer_forward<T: Real>(
    layer: &LayerSpec,
    input: &[T],
    shape: Shape,
    params: &[Vec<T>],
) -> Vec<T> {
    let out_shape = layer
        .output_shape(shape)
        .expect("layer shapes are validated by the architecture");
    let src = Hwc { data: input, shape };
    let oc = out_shape.c;
    let mut out = vec![T::zero(); out_shape.len()];
    let pixels = || (0..out_shape.h).flat_map(|r| (0..out_shape.w).map(move |c| (r, c)));
    match *layer {
        LayerSpec::Conv { kernel, .. } => {
            for (i, at) in pixels().enumerate() {
                conv_pixel(&src, at, kernel, shape.c, &params[0], &params[1], &mut out[i * oc..(i + 1) * oc]);
            }
        }
        LayerSpec::Separable { kernel, .. } => {
            let mut depth = vec![T::zero(); shape.c];
            for (i, at) in pixels().enumerate() {
                separable_pixel(
                    &src,
                    at,
                    kernel,
                    &params[0],
                    &params[1],
                    &params[2],
                    &mut depth,
                    &mut out[i * oc..(i + 1) * oc],
                );
            }
        }
        LayerSpec::AvgPool => {
            for (i, at) in pixels().enumerate() {
                avg_pool_pixel(&src, at, &mut out[i * oc..(i + 1) * oc]);
            }
        }
        LayerSpec::MaxPool => {
            for (i, at) in pixels().enumerate() {
                max_pool_pixel(&src, at, &mut out[i * oc..(i + 1) * oc]);
            }
        }
        LayerSpec::Dense { .. } | LayerSpec::Logits => {
            // same per-unit summation order as `dense_unit`
            let activate = matches!(layer, LayerSpec::Dense { .. });
            let (w, b) = (&params[0], &params[1]);
            let n = b.len();
            out.copy_from_slice(b);
            for (i, &x) in input.iter().enumerate() {
                for (o, &wv) in out.iter_mut().zip(&w[i * n..(i + 1) * n]) {
                    *o += x * wv;
                }
            }
            if activate {
                for o in &mut out {
                    *o = relu(*o);
                }
            }
        }
        LayerSpec::Dropout => out.copy_from_slice(input),
    }
    out
}

/// Gradients of one layer given its input, its output and the loss gradient
/// at the output. Returns the input gradient and one gradient per parameter
/// block.
pub fn layer_backward<T: Real>(
    layer: &LayerSpec,
    input: &[T],
    shape: Shape,
    params: &[Vec<T>],
    output: &[T],
    grad_out: &[T],
) -> (Vec<T>, Vec<Vec<T>>) {
    let out_shape = layer
        .output_shape(shape)
        .expect("layer shapes are validated by the architecture");
    let mut gin = vec![T::zero(); input.len()];
    let (iw, ic) = (shape.w, shape.c);
    let (oh, ow, oc) = (out_shape.h, out_shape.w, out_shape.c);
    let idx = |r: usize, c: usize, ch: usize, w: usize, cc: usize| (r * w + c) * cc + ch;
    match *layer {
        LayerSpec::Conv { kernel, .. } => {
            let w = &params[0];
            let mut gw = vec![T::zero(); w.len()];
            let mut gb = vec![T::zero(); oc];
            for r in 0..oh {
                for c in 0..ow {
                    let g = &grad_out[idx(r, c, 0, ow, oc)..][..oc];
                    for (b, &gv) in gb.iter_mut().zip(g) {
                        *b += gv;
                    }
                    for dy in 0..kernel {
                        for dx in 0..kernel {
                            for ci in 0..ic {
                                let ii = idx(r + dy, c + dx, ci, iw, ic);
                                let x = input[ii];
                                let base = ((dy * kernel + dx) * ic + ci) * oc;
                                let mut acc = T::zero();
                                for o in 0..oc {
                                    gw[base + o] += x * g[o];
                                    acc += w[base + o] * g[o];
                                }
                                gin[ii] += acc;
                            }
                        }
                    }
                }
            }
            (gin, vec![gw, gb])
        }
        LayerSpec::Separable { kernel, .. } => {
            let (dw, pw) = (&params[0], &params[1]);
            let mut gdw = vec![T::zero(); dw.len()];
            let mut gpw = vec![T::zero(); pw.len()];
            let mut gb = vec![T::zero(); oc];
            let mut depth = vec![T::zero(); ic];
            let mut gdepth = vec![T::zero(); ic];
            for r in 0..oh {
                for c in 0..ow {
                    depth.fill(T::zero());
                    for dy in 0..kernel {
                        for dx in 0..kernel {
                            for ci in 0..ic {
                                depth[ci] += input[idx(r + dy, c + dx, ci, iw, ic)]
                                    * dw[(dy * kernel + dx) * ic + ci];
                            }
                        }
                    }
                    let at = idx(r, c, 0, ow, oc);
                    gdepth.fill(T::zero());
                    for o in 0..oc {
                        if output[at + o] <= T::zero() {
                            continue;
                        }
                        let g = grad_out[at + o];
                        gb[o] += g;
                        for ci in 0..ic {
                            gpw[ci * oc + o] += depth[ci] * g;
                            gdepth[ci] += pw[ci * oc + o] * g;
                        }
                    }
                    for dy in 0..kernel {
                        for dx in 0..kernel {
                            for ci in 0..ic {
                                let ii = idx(r + dy, c + dx, ci, iw, ic);
                                let k = (dy * kernel + dx) * ic + ci;
                                gdw[k] += input[ii] * gdepth[ci];
                                gin[ii] += dw[k] * gdepth[ci];
                            }
                        }
                    }
                }
            }
            (gin, vec![gdw, gpw, gb])
        }
        LayerSpec::AvgPool => {
            let quarter = T::lit(0.25);
            for r in 0..oh {
                for c in 0..ow {
                    for ch in 0..oc {
                        let g = grad_out[idx(r, c, ch, ow, oc)] * quarter;
                        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            gin[idx(2 * r + dy, 2 * c + dx, ch, iw, ic)] += g;
                        }
                    }
                }
            }
            (gin, vec![])
        }
        LayerSpec::MaxPool => {
            for r in 0..oh {
                for c in 0..ow {
                    for ch in 0..oc {
                        // first maximum in window order wins, as in the forward pass
                        let mut best = idx(2 * r, 2 * c, ch, iw, ic);
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let i = idx(2 * r + dy, 2 * c + dx, ch, iw, ic);
                            if input[i] > input[best] {
                                best = i;
                            }
                        }
                        gin[best] += grad_out[idx(r, c, ch, ow, oc)];
                    }
                }
            }
            (gin, vec![])
        }
        LayerSpec::Dense { .. } | LayerSpec::Logits => {
            let activate = matches!(layer, LayerSpec::Dense { .. });
            let w = &params[0];
            let n = oc * ow;
            let g: Vec<T> = grad_out
                .iter()
                .zip(output)
                .map(|(&g, &y)| if activate && y <= T::zero() { T::zero() } else { g })
                .collect();
            let mut gw = vec![T::zero(); w.len()];
            for (i, &x) in input.iter().enumerate() {
                let row = &w[i * n..(i + 1) * n];
                let grow = &mut gw[i * n..(i + 1) * n];
                let mut acc = T::zero();
                for o in 0..n {
                    grow[o] += x * g[o];
                    acc += row[o] * g[o];
                }
                gin[i] = acc;
            }
            (gin, vec![gw, g])
        }
        LayerSpec::Dropout => (grad_out.to_vec(), vec![]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_bias() {
        let layer = LayerSpec::Conv { out: 2, kernel: 3 };
        let shape = Shape::new(4, 4, 3);
        let input: Vec<f32> = (0..48).map(|i| i as f32).collect();
        let params = vec![vec![0.0; 54], vec![0.5, -1.0]];
        let out = layer_forward(&layer, &input, shape, &params);
        assert_eq!(out, vec![0.5, -1.0, 0.5, -1.0, 0.5, -1.0, 0.5, -1.0]);
    }

    #[test]
    fn pointwise_identity_scales_input() {
        let layer = LayerSpec::Conv { out: 3, kernel: 1 };
        let shape = Shape::new(2, 2, 3);
        let input: Vec<f32> = (0..12).map(|i| i as f32).collect();
        let mut w = vec![0.0; 9];
        for c in 0..3 {
            w[c * 3 + c] = 2.0;
        }
        let out = layer_forward(&layer, &input, shape, &[w, vec![0.0; 3]]);
        let want: Vec<f32> = input.iter().map(|x| 2.0 * x).collect();
        assert_eq!(out, want);
    }

    #[test]
    fn pools_halve_spatial_dims() {
        let shape = Shape::new(4, 4, 1);
        let input: Vec<f32> = (0..16).map(|i| i as f32).collect();
        assert_eq!(
            layer_forward(&LayerSpec::MaxPool, &input, shape, &[]),
            vec![5.0, 7.0, 13.0, 15.0]
        );
        assert_eq!(
            layer_forward(&LayerSpec::AvgPool, &input, shape, &[]),
            vec![2.5, 4.5, 10.5, 12.5]
        );
    }

    #[test]
    fn dense_matches_unit_kernel() {
        let shape = Shape::new(2, 3, 2);
        let input: Vec<f32> = (0..12).map(|i| (i as f32 * 0.37).sin()).collect();
        let w: Vec<f32> = (0..48).map(|i| (i as f32 * 0.11).cos()).collect();
        let b = vec![0.1, -0.2, 0.3, 0.0];
        let params = vec![w.clone(), b.clone()];
        let out = layer_forward(&LayerSpec::Dense { out: 4 }, &input, shape, &params);
        let src = Hwc { data: &input, shape };
        for (o, &v) in out.iter().enumerate() {
            assert_eq!(v, dense_unit(&src, shape, o, &w, &b, true));
        }
    }
}
