//! AOA error grows with odometry error. Channel samples stay clean; the
//! steering path carries a random walk scaled to each target ATE.
//!
//! `cargo run --release --example ate_sweep -- [trials]`

use std::path::Path;

use wsr::experiments::{default_ate_scenario, run_ate_sweep, AteSweepConfig, RunOptions};

fn main() -> wsr::Result<()> {
    let trials = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let cfg = AteSweepConfig {
        targets: vec![0.0, 0.05, 0.1, 0.15, 0.2],
        trials,
    };
    let report = run_ate_sweep(&default_ate_scenario(), &cfg, Path::new("."), &RunOptions::default())?;
    println!("target  median|dphi|  median|dtheta|");
    for t in &cfg.targets {
        let p = report.aggregate[&format!("ate={t}/abs_dphi")];
        let q = report.aggregate[&format!("ate={t}/abs_dtheta")];
        println!("{t:>6} {:>13} {:>15}", p.median, q.median);
    }
    println!("{:?}", report.summary);
    Ok(())
}
