//! Renders the published comparison cells as markdown and CSV.
//!
//! Run with `cargo run --release --example report_table`.

use memclass::harness::{emit_report, parse_report_csv, reference_report, ReportFormat};

fn main() -> memclass::Result<()> {
    let report = reference_report();
    println!("{}", emit_report(&report, ReportFormat::Markdown)?);
    let csv = emit_report(&report, ReportFormat::Csv)?;
    assert_eq!(parse_report_csv(&csv)?.entries, report.entries);
    print!("{csv}");
    for kb in [8, 64] {
        println!("best at {kb}KB: {:?}", report.column_best(kb));
    }
    Ok(())
}
