//! Byte counts for each family, and the largest model of each kind under
//! every budget.
//!
//! Run with `cargo run --release --example footprints`.

use memclass::bonsai::{sweep_specs, BonsaiSpec};
use memclass::directconv::feasible_models;
use memclass::fastgrnn::{FastGrnnSpec, SeqMode};
use memclass::harness::BUDGETS_KB;
use memclass::protonn::{ProtoGrid, ProtoSpec};

const INPUT: usize = 3072;

fn main() -> memclass::Result<()> {
    println!("FastGRNN");
    for (mode, h, dw, du) in [
        (SeqMode::RowMajor, 45, 0.2, 0.2),
        (SeqMode::ChannelMajor, 60, 0.3, 0.3),
        (SeqMode::Multi, 12, 1.0, 1.0),
    ] {
        let spec = FastGrnnSpec::new(mode, h, dw, du)?;
        println!("  {spec}: {}", spec.footprint());
    }
    println!("Bonsai");
    for (depth, dim) in [(5, 1), (2, 3), (3, 11)] {
        println!("  depth {depth}, dim {dim}: {}", BonsaiSpec::new(depth, dim)?.footprint(INPUT));
    }
    println!("ProtoNN");
    println!("  d=2, m=4: {}", ProtoSpec::new(2, 4, 1.0)?.footprint(INPUT));

    println!("\nbudget  cnn-archs  bonsai-specs  protonn-cells  largest cnn");
    let depths: Vec<usize> = (1..=8).collect();
    let grid = ProtoGrid::full();
    for kb in BUDGETS_KB {
        let cnn = feasible_models(kb);
        let largest = cnn.iter().max_by_key(|(_, fp)| fp.total_bytes);
        println!(
            "{kb:>4}KB  {:>9}  {:>12}  {:>13}  {}",
            cnn.len(),
            sweep_specs(&depths, kb, INPUT).len(),
            grid.feasible_cells(kb, INPUT).len(),
            largest.map_or("-".into(), |(a, fp)| format!("{a} {fp}"))
        );
    }
    Ok(())
}
