//! A constant angular error in the odometry moves the AOA peak by the same
//! angle in the opposite direction, without smearing it.
//!
//! `cargo run --release --example lemma1_constant_offset`

use wsr::experiments::{run_lemma1, Lemma1Config, RunOptions};

fn main() -> wsr::Result<()> {
    let report = run_lemma1(&Lemma1Config::default(), &RunOptions::default())?;
    println!("kappa_phi kappa_theta  shift_phi shift_theta");
    for t in &report.trials {
        println!(
            "{:>9} {:>11}  {:>9} {:>11}",
            t.params["kappa_phi"], t.params["kappa_theta"], t.metrics["shift_phi"], t.metrics["shift_theta"]
        );
    }
    println!("max residual: {:?}", report.summary);
    Ok(())
}
