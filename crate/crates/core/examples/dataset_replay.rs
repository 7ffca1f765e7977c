//! Record a dataset to CSV, read it back and run the pipeline from a
//! scenario file that points at it, as one would with captured data.
//!
//! `cargo run --release --example dataset_replay -- [out_dir]`

use std::path::PathBuf;

use wsr::channel::{simulate_dataset, ChannelParams, Transmitter};
use wsr::experiments::{run_profile, RunOptions};
use wsr::geometry::Direction;
use wsr::ingest::{parse_scenario, read_dataset, write_dataset, Format};
use wsr::trajgen::{gen_circle, GeometrySpec};

fn main() -> wsr::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("wsr_replay"));
    std::fs::create_dir_all(&dir).map_err(|e| wsr::Error::io(&dir, e))?;

    let rx = gen_circle(&GeometrySpec::circle(0.5, 400))?;
    let params = ChannelParams { noise_variance: 1e-6, cfo_hz: 2e3, ..ChannelParams::default() };
    let ds = simulate_dataset(&rx, &Transmitter::fixed(Direction::new(120.0, 70.0)?, 100.0), &params, 3)?;
    let path = dir.join("capture.csv");
    write_dataset(&ds, &path)?;
    assert_eq!(read_dataset(&path)?, ds);
    println!("{} records round-tripped through {}", ds.len(), path.display());

    let scenario = parse_scenario(r#"{"rx": {"dataset_file": "capture.csv"}, "truth": {"phi": 120, "theta": 70}}"#)?;
    let opts = RunOptions { out: Some(dir.join("run")), format: Format::Csv, ..Default::default() };
    let run = run_profile(&scenario, &dir, &opts)?;
    let t = &run.report.trials[0];
    println!("estimate {:?}, error {:?}", t.estimate.map(|e| e.direction), t.error.map(|e| e.l2));
    Ok(())
}
