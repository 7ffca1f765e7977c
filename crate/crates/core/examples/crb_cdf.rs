//! Which path shape is most informative? CRB maps over every direction for
//! a helix, a circle and a line of equal length, plus their CDFs.
//!
//! `cargo run --release --example crb_cdf -- [out_dir]`

use std::path::PathBuf;

use wsr::experiments::{run_crb_cdf, CrbCdfConfig, RunOptions};
use wsr::ingest::Format;

fn main() -> wsr::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("wsr_crb_cdf"));
    let opts = RunOptions {
        out: Some(out.clone()),
        format: Format::Csv,
        ..Default::default()
    };
    let run = run_crb_cdf(&CrbCdfConfig::default(), &opts)?;
    for (k, v) in &run.report.summary {
        if k.contains("median") || k.contains("inf_mass") {
            println!("{k:<28} {v:.4e}");
        }
    }
    for note in &run.report.notes {
        println!("{note}");
    }
    println!("plot-ready CSVs in {}", out.display());
    Ok(())
}
