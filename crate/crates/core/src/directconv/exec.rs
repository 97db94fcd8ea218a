//! Single-buffer executor.
//!
//! Runs the memory plan on one buffer of `peak` values. Every read, free and
//! write goes through an [`AddressTracker`]; touching a stale address or
//! overwriting live input is a plan bug and panics.

use super::kernels::{
    avg_pool_pixel, conv_pixel, dense_unit, max_pool_pixel, separable_pixel, PixelSource,
};
use super::layer::{LayerSpec, Shape};
use super::model::CnnModel;
use super::plan::{memory_plan, plan_layer, AddressTracker, Layout, ACTIVATION_BYTES};
use crate::error::Result;
use crate::tensor::ImageTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct InplaceRun {
    pub logits: Vec<f32>,
    /// Most activation bytes live at once, input image included.
    pub measured_peak_bytes: u64,
    /// Bytes allocated for the single buffer.
    pub buffer_bytes: u64,
}

/// A feature map stored as pixel slots at `base` in layout order.
struct SlotView<'a> {
    buf: &'a [f32],
    mem: &'a AddressTracker,
    base: usize,
    slot_of: &'a [usize],
    width: usize,
    channels: usize,
}

impl PixelSource<f32> for SlotView<'_> {
    fn pixel(&self, r: usize, c: usize) -> &[f32] {
        let at = self.base + self.slot_of[r * self.width + c] * self.channels;
        if let Err(e) = self.mem.check_read(at, self.channels) {
            panic!("in-place plan violation: {e}");
        }
        &self.buf[at..at + self.channels]
    }
}

fn must(r: Result<()>) {
    if let Err(e) = r {
        panic!("in-place plan violation: {e}");
    }
}

pub fn forward_inplace(model: &CnnModel, image: &ImageTensor) -> Result<InplaceRun> {
    image.ensure_cifar_shape()?;
    let plan = memory_plan(model.arch())?;
    let n = plan.peak;
    let mut buf = vec![0.0f32; n];
    let mut mem = AddressTracker::new(n);

    let mut shape = Shape::CIFAR;
    let mut layout = Layout::RowMajor;
    let mut base = n - shape.len();
    buf[base..].copy_from_slice(image.data());
    must(mem.reset_input(base, shape.len()));

    let layers = model.arch().layers();
    for (i, layer) in layers.iter().enumerate() {
        if *layer == LayerSpec::Dropout {
            continue;
        }
        let step_plan = plan.layers[i];
        debug_assert_eq!(step_plan.input_layout, layout);
        let len = shape.len();
        if base != n - len {
            buf.copy_within(base..base + len, n - len);
            base = n - len;
        }
        must(mem.reset_input(base, len));

        let out_shape = layer.output_shape(shape)?;
        let trav = plan_layer(layer, shape, step_plan.traversal)?;
        let out_c = out_shape.len() / trav.len();
        let mut slot_of = vec![0usize; shape.pixels()];
        for (s, (r, c)) in layout.order(shape.h, shape.w).into_iter().enumerate() {
            slot_of[r * shape.w + c] = s;
        }
        let addr = |(r, c): (usize, usize)| base + slot_of[r * shape.w + c] * shape.c;
        for &px in &trav.initially_stale {
            must(mem.free(addr(px), shape.c));
        }

        let params = &model.params()[i];
        let mut acc = vec![0.0f32; out_c];
        let mut depth = vec![0.0f32; shape.c];
        for (t, &at) in trav.order.iter().enumerate() {
            {
                let src = SlotView {
                    buf: &buf,
                    mem: &mem,
                    base,
                    slot_of: &slot_of,
                    width: shape.w,
                    channels: shape.c,
                };
                match *layer {
                    LayerSpec::Conv { kernel, .. } => {
                        conv_pixel(&src, at, kernel, shape.c, &params[0], &params[1], &mut acc)
                    }
                    LayerSpec::Separable { kernel, .. } => separable_pixel(
                        &src,
                        at,
                        kernel,
                        &params[0],
                        &params[1],
                        &params[2],
                        &mut depth,
                        &mut acc,
                    ),
                    LayerSpec::AvgPool => avg_pool_pixel(&src, at, &mut acc),
                    LayerSpec::MaxPool => max_pool_pixel(&src, at, &mut acc),
                    LayerSpec::Dense { .. } | LayerSpec::Logits => {
                        let activate = matches!(layer, LayerSpec::Dense { .. });
                        acc[0] = dense_unit(&src, shape, at.1, &params[0], &params[1], activate);
                    }
                    LayerSpec::Dropout => unreachable!("skipped above"),
                }
            }
            for &px in &trav.stale_after[t] {
                must(mem.free(addr(px), shape.c));
            }
            must(mem.write(t * out_c, out_c));
            buf[t * out_c..(t + 1) * out_c].copy_from_slice(&acc);
        }
        shape = out_shape;
        layout = step_plan.traversal;
        base = 0;
    }

    // the logits map is 1×10 and row-major
    let logits = buf[base..base + shape.len()].to_vec();
    Ok(InplaceRun {
        logits,
        measured_peak_bytes: mem.peak() as u64 * ACTIVATION_BYTES,
        buffer_bytes: n as u64 * ACTIVATION_BYTES,
    })
}
