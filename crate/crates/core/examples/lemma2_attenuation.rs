//! Bounded, alternating angular errors only attenuate the peak, by at most
//! cos((δ_max + μ_max) / 2).
//!
//! `cargo run --release --example lemma2_attenuation`

use wsr::experiments::{run_lemma2, Lemma2Config, RunOptions};

fn main() -> wsr::Result<()> {
    let cfg = Lemma2Config {
        total_deviation: vec![0.0, 2.0, 4.0, 10.0, 16.0, 20.0],
        ..Default::default()
    };
    let report = run_lemma2(&cfg, &RunOptions::default())?;
    println!("delta+mu   ratio      bound");
    for t in &report.trials {
        println!("{:>8} {:.6} >= {:.6}", t.params["total_deviation"], t.metrics["ratio"], t.metrics["bound"]);
    }
    Ok(())
}
