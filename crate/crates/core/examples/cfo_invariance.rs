//! Oscillator offsets rotate forward and reverse channels in opposite
//! directions, so their product (and the profile) does not change.
//!
//! `cargo run --release --example cfo_invariance`

use wsr::aoa::{bartlett_profile, find_peak};
use wsr::channel::{simulate_dataset, ChannelModel, ChannelParams, Transmitter};
use wsr::geometry::Direction;
use wsr::trajgen::{gen_helix, GeometrySpec};

fn main() -> wsr::Result<()> {
    let rx = gen_helix(&GeometrySpec::helix(0.3, 400))?;
    let tx = Transmitter::fixed(Direction::new(40.0, 60.0)?, 100.0);
    let base = ChannelParams::with_model(ChannelModel::PlanarFarfield);
    let reference = {
        let ds = simulate_dataset(&rx, &tx, &base, 0)?;
        bartlett_profile(&ds, &ds.trajectory()?, base.wavelength)?
    };
    for cfo_hz in [1e3, 1e4, 5e4] {
        let params = ChannelParams { cfo_hz, ..base };
        let ds = simulate_dataset(&rx, &tx, &params, 0)?;
        let profile = bartlett_profile(&ds, &ds.trajectory()?, params.wavelength)?;
        let max = reference.max();
        let worst = profile
            .values()
            .iter()
            .zip(reference.values())
            .map(|(a, b)| (a - b).abs() / max)
            .fold(0.0, f64::max);
        let peak = find_peak(&profile).direction;
        println!("cfo {:>6} Hz: peak ({}, {}), max relative deviation {worst:.2e}", cfo_hz, peak.phi, peak.theta);
    }
    Ok(())
}
