//! Enumerates the serial CNN search space and prices every architecture.
//!
//! Run with `cargo run --release --example cnn_search_space`.

use std::time::Instant;

use memclass::directconv::{catalog, memory_plan, ArchSpec, FootprintCache, Layout};

fn main() -> memclass::Result<()> {
    let started = Instant::now();
    let all = catalog();
    println!(
        "{} shape-valid architectures priced in {:.1?}",
        all.len(),
        started.elapsed()
    );
    for budget in [8u32, 16, 32, 64, 128] {
        let n = all.iter().filter(|(_, fp)| fp.fits(budget)).count();
        println!("  <= {budget:>3}KB: {n:>6} feasible");
    }

    let mut cache = FootprintCache::new();
    let herringbone = all
        .iter()
        .filter(|(a, _)| {
            cache
                .memory_plan(a)
                .map(|p| p.layers.iter().any(|l| l.traversal == Layout::Herringbone))
                .unwrap_or(false)
        })
        .count();
    println!("{herringbone} plans use a herringbone traversal somewhere");

    for text in [
        "A,C2(16,3),C1(8,3),C1(32,3),M,Dr,D*",
        "A,C1(6,3),C1(32,1),M,C2(64,3),Dr,D*",
        "A,C1(8,1),C2(16,3),C1(64,5),M,Dr,D*",
        "A,C1(64,3),M,C1(64,1),C1(64,5),Dr,D*",
    ] {
        let arch: ArchSpec = text.parse()?;
        let plan = memory_plan(&arch)?;
        let fp = all
            .iter()
            .find(|(a, _)| *a == arch)
            .map(|(_, fp)| *fp)
            .expect("reference architectures are enumerated");
        println!("\n{arch}\n  {fp}, {} params, peak {} B", arch.param_count(), plan.peak);
        for (layer, lm) in arch.layers().iter().zip(&plan.layers) {
            println!("  {layer:<10} {:?} -> {:?}, needs {}", lm.input_layout, lm.traversal, lm.need);
        }
    }
    Ok(())
}
