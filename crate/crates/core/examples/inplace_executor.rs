//! Runs one network through the single-buffer executor and the two-buffer
//! reference, and shows where the activation bytes go.
//!
//! Run with `cargo run --release --example inplace_executor [ARCH]`.

use memclass::directconv::{forward_inplace, forward_naive, memory_plan, ArchSpec, CnnModel};
use memclass::tensor::ImageTensor;

fn main() -> memclass::Result<()> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "A,C2(16,3),C1(8,3),C1(32,3),M,Dr,D*".into());
    let arch: ArchSpec = text.parse()?;
    let model = CnnModel::init(arch.clone(), 7);
    let fp = model.footprint()?;
    println!("{arch}");
    println!("  footprint {fp} ({} parameter + {} activation bytes)", fp.parameter_bytes(), fp.activation_peak_bytes);

    let plan = memory_plan(&arch)?;
    for (layer, mem) in arch.layers().iter().zip(&plan.layers) {
        println!(
            "  {:<10} input {:?}, traversal {:?}, needs {} values",
            layer.to_string(),
            mem.input_layout,
            mem.traversal,
            mem.need
        );
    }

    let data = (0..3072).map(|i| ((i * 37) % 101) as f32 / 101.0).collect();
    let image = ImageTensor::new(32, 32, 3, data)?;
    let naive = forward_naive(&model, &image)?;
    let run = forward_inplace(&model, &image)?;
    let worst = naive
        .iter()
        .zip(&run.logits)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    println!("  max |in-place - reference| = {worst:e}");
    println!(
        "  buffer {} B, measured peak {} B, declared peak {} B",
        run.buffer_bytes, run.measured_peak_bytes, fp.activation_peak_bytes
    );
    Ok(())
}
