//! Draw the figure set for a results table.
//!
//!     cargo run --example report [results_dir]

use std::path::PathBuf;

use doa_defense::harness::{emit_report, read_results, ReportFormat};

fn main() -> anyhow::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "results/end_to_end/snr_sweep".into());
    let rows = read_results(&dir)?;
    println!("{} rows", rows.len());
    for p in emit_report(&rows, ReportFormat::Plots, &dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
