//! Traversal orders and the single-buffer activation plan.
//!
//! A feature map lives in one buffer as pixel slots (each `c` values wide)
//! in the layout order of the traversal that produced it. Before a layer the
//! map is moved to the top of the buffer; outputs are written upward from
//! address 0, one slot per traversal step, and may only land on input slots
//! that are already stale. The buffer size a layer needs is therefore
//!
//! `max(in_len, max_t in_len − freed(t)·in_c + (t+1)·out_c)`
//!
//! where `freed(t)` is the length of the stale prefix of the input layout
//! after step `t`. Each layer picks row-major or herringbone traversal to
//! minimise the peak over the whole network.

use std::collections::HashMap;

use super::arch::ArchSpec;
use super::layer::{LayerSpec, Shape};
use crate::error::{Error, Result};
use crate::size::{footprint_bytes, Footprint};

/// Bytes charged per live activation value.
pub const ACTIVATION_BYTES: u64 = 1;

pub type Pixel = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layout {
    RowMajor,
    Herringbone,
}

impl Layout {
    pub const ALL: [Layout; 2] = [Layout::RowMajor, Layout::Herringbone];

    pub fn order(self, h: usize, w: usize) -> Vec<Pixel> {
        match self {
            Layout::RowMajor => (0..h).flat_map(|r| (0..w).map(move |c| (r, c))).collect(),
            Layout::Herringbone => herringbone_segments(h, w)
                .into_iter()
                .flat_map(|(_, px)| px)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Row,
    Column,
}

/// Consecutive run of traversal steps, `order[start..start + len]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub len: usize,
}

/// Ring `m` of the untouched region: row `m` from column `m`, then column
/// `m` from row `m + 1`. Empty segments are dropped.
fn herringbone_segments(h: usize, w: usize) -> Vec<(SegmentKind, Vec<Pixel>)> {
    let mut segs = Vec::new();
    for m in 0..h.min(w) {
        segs.push((SegmentKind::Row, (m..w).map(|c| (m, c)).collect::<Vec<_>>()));
        let col: Vec<Pixel> = (m + 1..h).map(|r| (r, m)).collect();
        if !col.is_empty() {
            segs.push((SegmentKind::Column, col));
        }
    }
    segs
}

/// Which input pixels an output pixel reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dependency {
    /// `k×k` window at stride `s`.
    Window { kernel: usize, stride: usize },
    /// Every input pixel; the output grid is `1 × n`.
    All,
}

impl Dependency {
    pub fn of(layer: &LayerSpec) -> Option<Dependency> {
        match *layer {
            LayerSpec::Conv { kernel, .. } | LayerSpec::Separable { kernel, .. } => {
                Some(Dependency::Window { kernel, stride: 1 })
            }
            LayerSpec::AvgPool | LayerSpec::MaxPool => {
                Some(Dependency::Window { kernel: 2, stride: 2 })
            }
            LayerSpec::Dense { .. } | LayerSpec::Logits => Some(Dependency::All),
            LayerSpec::Dropout => None,
        }
    }

    /// Input pixels read by output `(r, c)`, row-major within the window.
    pub fn inputs_of(self, input: Shape, out: Pixel) -> Vec<Pixel> {
        match self {
            Dependency::Window { kernel, stride } => {
                let (r0, c0) = (out.0 * stride, out.1 * stride);
                (0..kernel)
                    .flat_map(|dy| (0..kernel).map(move |dx| (r0 + dy, c0 + dx)))
                    .collect()
            }
            Dependency::All => Layout::RowMajor.order(input.h, input.w),
        }
    }
}

/// Visiting order over an output grid plus the input pixels each step frees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraversalPlan {
    pub input: (usize, usize),
    pub output: (usize, usize),
    pub order: Vec<Pixel>,
    pub segments: Vec<Segment>,
    /// Input pixels that become stale once step `t` has been computed.
    pub stale_after: Vec<Vec<Pixel>>,
    /// Input pixels no output reads.
    pub initially_stale: Vec<Pixel>,
}

impl TraversalPlan {
    fn build(
        input: (usize, usize),
        output: (usize, usize),
        segments: Vec<(SegmentKind, Vec<Pixel>)>,
        dep: Dependency,
    ) -> Self {
        let mut order = Vec::new();
        let mut segs = Vec::new();
        for (kind, px) in segments {
            segs.push(Segment {
                kind,
                start: order.len(),
                len: px.len(),
            });
            order.extend(px);
        }
        let (oh, ow) = output;
        let mut pos = vec![0usize; oh * ow];
        for (t, &(r, c)) in order.iter().enumerate() {
            pos[r * ow + c] = t;
        }
        let mut stale_after = vec![Vec::new(); order.len()];
        let mut initially_stale = Vec::new();
        for i in 0..input.0 {
            for j in 0..input.1 {
                let step = match dep {
                    Dependency::All => order.len().checked_sub(1),
                    Dependency::Window { kernel, stride } => {
                        let rows = window_range(i, kernel, stride, oh);
                        let cols = window_range(j, kernel, stride, ow);
                        rows.flat_map(|r| cols.clone().map(move |c| (r, c)))
                            .map(|(r, c)| pos[r * ow + c])
                            .max()
                    }
                };
                match step {
                    Some(t) => stale_after[t].push((i, j)),
                    None => initially_stale.push((i, j)),
                }
            }
        }
        TraversalPlan {
            input,
            output,
            order,
            segments: segs,
            stale_after,
            initially_stale,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_permutation(&self) -> bool {
        let (oh, ow) = self.output;
        let mut seen = vec![false; oh * ow];
        for &(r, c) in &self.order {
            if r >= oh || c >= ow || std::mem::replace(&mut seen[r * ow + c], true) {
                return false;
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Segments are non-empty and alternate row, column, row, ...
    pub fn alternates(&self) -> bool {
        self.segments.iter().enumerate().all(|(i, s)| {
            let want = if i % 2 == 0 {
                SegmentKind::Row
            } else {
                SegmentKind::Column
            };
            s.len > 0 && s.kind == want
        })
    }

    /// Stale step per input pixel in `layout` order; `None` if never read.
    fn stale_steps(&self, layout: Layout) -> Vec<Option<usize>> {
        let (ih, iw) = self.input;
        let mut step = vec![None; ih * iw];
        for (t, px) in self.stale_after.iter().enumerate() {
            for &(r, c) in px {
                step[r * iw + c] = Some(t);
            }
        }
        layout
            .order(ih, iw)
            .into_iter()
            .map(|(r, c)| step[r * iw + c])
            .collect()
    }

    /// Buffer length, in values, this layer needs when its input is stored
    /// in `input_layout`.
    pub fn buffer_need(&self, input_layout: Layout, in_c: usize, out_c: usize) -> usize {
        let steps = self.stale_steps(input_layout);
        let in_len = steps.len() * in_c;
        let mut need = in_len;
        let mut freed = 0usize;
        for t in 0..self.order.len() {
            while freed < steps.len() && steps[freed].is_none_or(|s| s <= t) {
                freed += 1;
            }
            need = need.max(in_len - freed * in_c + (t + 1) * out_c);
        }
        need
    }
}

fn window_range(i: usize, kernel: usize, stride: usize, out_len: usize) -> std::ops::Range<usize> {
    // outputs o with o*stride <= i < o*stride + kernel
    let lo = (i + 1).saturating_sub(kernel).div_ceil(stride);
    let hi = (i / stride + 1).min(out_len);
    lo..hi.max(lo)
}

fn output_grid(dep: Dependency, input: Shape, out_pixels: usize) -> Result<(usize, usize)> {
    match dep {
        Dependency::All => Ok((1, out_pixels)),
        Dependency::Window { kernel, stride } => {
            if kernel == 0 || stride == 0 || input.h < kernel || input.w < kernel {
                return Err(Error::shape(format!(
                    "{kernel}x{kernel} window does not fit a {}x{} grid",
                    input.h, input.w
                )));
            }
            Ok(((input.h - kernel) / stride + 1, (input.w - kernel) / stride + 1))
        }
    }
}

/// Plan for one layer under the given traversal.
pub fn plan_layer(layer: &LayerSpec, input: Shape, traversal: Layout) -> Result<TraversalPlan> {
    let dep = Dependency::of(layer)
        .ok_or_else(|| Error::invalid(format!("{layer} has no traversal")))?;
    let out = layer.output_shape(input)?;
    plan_window(dep, input, out.pixels(), traversal)
}

fn plan_window(
    dep: Dependency,
    input: Shape,
    out_pixels: usize,
    traversal: Layout,
) -> Result<TraversalPlan> {
    let (oh, ow) = output_grid(dep, input, out_pixels)?;
    let segments = match traversal {
        Layout::RowMajor => (0..oh)
            .map(|r| (SegmentKind::Row, (0..ow).map(|c| (r, c)).collect()))
            .collect(),
        Layout::Herringbone => herringbone_segments(oh, ow),
    };
    Ok(TraversalPlan::build((input.h, input.w), (oh, ow), segments, dep))
}

/// Row-major plan for a stride-1 `k×k` convolution.
pub fn plan_row_major(in_h: usize, in_w: usize, kernel: usize) -> Result<TraversalPlan> {
    let dep = Dependency::Window { kernel, stride: 1 };
    plan_window(dep, Shape::new(in_h, in_w, 1), 0, Layout::RowMajor)
}

/// Herringbone plan for a channel-growing stride-1 `k×k` convolution.
pub fn plan_herringbone(
    in_h: usize,
    in_w: usize,
    in_c: usize,
    out_c: usize,
    kernel: usize,
) -> Result<TraversalPlan> {
    if in_c == 0 || out_c <= in_c {
        return Err(Error::invalid(format!(
            "herringbone needs out_c > in_c > 0, got in_c {in_c}, out_c {out_c}"
        )));
    }
    let dep = Dependency::Window { kernel, stride: 1 };
    plan_window(dep, Shape::new(in_h, in_w, in_c), 0, Layout::Herringbone)
}

/// Per-slot buffer state used to police in-place execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Free,
    Input,
    Output,
}

#[derive(Debug, Clone)]
pub struct AddressTracker {
    cells: Vec<Cell>,
    live: usize,
    peak: usize,
}

impl AddressTracker {
    pub fn new(len: usize) -> Self {
        AddressTracker {
            cells: vec![Cell::Free; len],
            live: 0,
            peak: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn peak(&self) -> usize {
        self.peak
    }

    pub fn live(&self) -> usize {
        self.live
    }

    fn range(&self, start: usize, len: usize) -> Result<std::ops::Range<usize>> {
        if start + len > self.cells.len() {
            return Err(Error::invalid(format!(
                "slot [{start}, {}) outside a {}-value buffer",
                start + len,
                self.cells.len()
            )));
        }
        Ok(start..start + len)
    }

    /// Everything becomes free, then `[start, start + len)` holds layer input.
    pub fn reset_input(&mut self, start: usize, len: usize) -> Result<()> {
        let r = self.range(start, len)?;
        self.cells.fill(Cell::Free);
        self.cells[r].fill(Cell::Input);
        self.live = len;
        self.peak = self.peak.max(len);
        Ok(())
    }

    pub fn check_read(&self, start: usize, len: usize) -> Result<()> {
        let r = self.range(start, len)?;
        match self.cells[r.clone()].iter().position(|&c| c != Cell::Input) {
            None => Ok(()),
            Some(i) => Err(Error::invalid(format!(
                "read of stale address {}",
                r.start + i
            ))),
        }
    }

    pub fn free(&mut self, start: usize, len: usize) -> Result<()> {
        let r = self.range(start, len)?;
        for c in &mut self.cells[r] {
            if *c == Cell::Input {
                *c = Cell::Free;
                self.live -= 1;
            }
        }
        Ok(())
    }

    pub fn write(&mut self, start: usize, len: usize) -> Result<()> {
        let r = self.range(start, len)?;
        if let Some(i) = self.cells[r.clone()].iter().position(|&c| c == Cell::Input) {
            return Err(Error::invalid(format!(
                "write over live input at address {}",
                r.start + i
            )));
        }
        for c in &mut self.cells[r] {
            if *c == Cell::Free {
                *c = Cell::Output;
                self.live += 1;
            }
        }
        self.peak = self.peak.max(self.live);
        Ok(())
    }
}

/// Replays one layer's reads, frees and writes on a buffer of `buffer_len`
/// values without computing anything. Returns the peak live count.
pub fn simulate_layer(
    plan: &TraversalPlan,
    dep: Dependency,
    input: Shape,
    input_layout: Layout,
    out_c: usize,
    buffer_len: usize,
) -> Result<usize> {
    let in_c = input.c;
    let in_len = input.len();
    if in_len > buffer_len {
        return Err(Error::invalid("input does not fit the buffer"));
    }
    let base = buffer_len - in_len;
    let mut slot_of = vec![0usize; input.pixels()];
    for (s, (r, c)) in input_layout.order(input.h, input.w).into_iter().enumerate() {
        slot_of[r * input.w + c] = s;
    }
    let addr = |(r, c): Pixel| base + slot_of[r * input.w + c] * in_c;
    let mut mem = AddressTracker::new(buffer_len);
    mem.reset_input(base, in_len)?;
    for &px in &plan.initially_stale {
        mem.free(addr(px), in_c)?;
    }
    for (t, &out) in plan.order.iter().enumerate() {
        for px in dep.inputs_of(input, out) {
            mem.check_read(addr(px), in_c)?;
        }
        for &px in &plan.stale_after[t] {
            mem.free(addr(px), in_c)?;
        }
        mem.write(t * out_c, out_c)?;
    }
    Ok(mem.peak())
}

/// Traversal chosen for one layer and the buffer it needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerMemory {
    pub input_layout: Layout,
    pub traversal: Layout,
    pub need: usize,
}

/// Per-layer traversals minimising the peak buffer length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryPlan {
    pub layers: Vec<LayerMemory>,
    /// Buffer length in values, input image included.
    pub peak: usize,
}

impl MemoryPlan {
    pub fn peak_bytes(&self) -> u64 {
        self.peak as u64 * ACTIVATION_BYTES
    }
}

type NeedKey = (Dependency, Shape, usize, Layout, Layout);

/// Memoises per-layer buffer needs across many architectures.
#[derive(Debug, Default, Clone)]
pub struct FootprintCache {
    needs: HashMap<NeedKey, usize>,
}

impl FootprintCache {
    pub fn new() -> Self {
        FootprintCache::default()
    }

    fn need(
        &mut self,
        layer: &LayerSpec,
        input: Shape,
        input_layout: Layout,
        traversal: Layout,
    ) -> Result<usize> {
        let Some(dep) = Dependency::of(layer) else {
            return Ok(input.len());
        };
        let out = layer.output_shape(input)?;
        let key = (dep, input, out.len(), input_layout, traversal);
        if let Some(&n) = self.needs.get(&key) {
            return Ok(n);
        }
        let plan = plan_layer(layer, input, traversal)?;
        let out_c = out.len() / plan.len().max(1);
        let n = plan.buffer_need(input_layout, input.c, out_c);
        self.needs.insert(key, n);
        Ok(n)
    }

    pub fn memory_plan(&mut self, arch: &ArchSpec) -> Result<MemoryPlan> {
        self.plan_stack(arch.layers())
    }

    /// Plans any serial stack applied to a 32×32×3 image.
    pub fn plan_stack(&mut self, stack: &[LayerSpec]) -> Result<MemoryPlan> {
        let mut shapes = vec![Shape::CIFAR];
        for layer in stack {
            shapes.push(layer.output_shape(*shapes.last().expect("non-empty"))?);
        }
        const NONE: usize = usize::MAX;
        // best peak reaching each layout of the current map; the image is row-major
        let mut best = [Shape::CIFAR.len(), NONE];
        let mut back: Vec<[(Layout, usize); 2]> = Vec::new();
        for (layer, &input) in stack.iter().zip(&shapes) {
            let mut next = [NONE; 2];
            let mut from = [(Layout::RowMajor, 0usize); 2];
            let travs: &[Layout] = match layer {
                LayerSpec::Dropout | LayerSpec::Dense { .. } | LayerSpec::Logits => {
                    &[Layout::RowMajor]
                }
                _ => &Layout::ALL,
            };
            for (li, &lin) in Layout::ALL.iter().enumerate() {
                if best[li] == NONE {
                    continue;
                }
                for &trav in travs {
                    // dropout keeps the layout it was given
                    let (trav, out_layout) = if *layer == LayerSpec::Dropout {
                        (lin, lin)
                    } else {
                        (trav, trav)
                    };
                    let need = self.need(layer, input, lin, trav)?;
                    let peak = best[li].max(need);
                    let oi = out_layout as usize;
                    if peak < next[oi] {
                        next[oi] = peak;
                        from[oi] = (lin, need);
                    }
                }
            }
            back.push(from);
            best = next;
        }
        let mut state = if best[1] < best[0] {
            Layout::Herringbone
        } else {
            Layout::RowMajor
        };
        let peak = best[state as usize];
        let mut layers = Vec::with_capacity(back.len());
        for (i, from) in back.iter().enumerate().rev() {
            let (lin, need) = from[state as usize];
            let traversal = if stack[i] == LayerSpec::Dropout {
                lin
            } else {
                state
            };
            layers.push(LayerMemory {
                input_layout: lin,
                traversal,
                need,
            });
            state = lin;
        }
        layers.reverse();
        Ok(MemoryPlan { layers, peak })
    }

    pub fn footprint(&mut self, arch: &ArchSpec) -> Result<Footprint> {
        let plan = self.memory_plan(arch)?;
        Ok(footprint_bytes(
            arch.param_count() as u64,
            0,
            plan.peak_bytes(),
        ))
    }
}

pub fn memory_plan(arch: &ArchSpec) -> Result<MemoryPlan> {
    FootprintCache::new().memory_plan(arch)
}

/// Four bytes per parameter plus the peak activation buffer.
pub fn cnn_footprint(arch: &ArchSpec) -> Result<Footprint> {
    FootprintCache::new().footprint(arch)
}
