//! Two arrival paths of different strength: the profile shows both, and
//! non-maximum suppression lists them in order.
//!
//! `cargo run --release --example multipath_peaks`

use wsr::aoa::{coherent_profile, top_k_peaks, SteeringModel};
use wsr::channel::{cfo_cancelled_product, simulate_dataset, ChannelModel, ChannelParams, Transmitter};
use wsr::geometry::{rebase, Direction};
use wsr::trajgen::{gen_helix, GeometrySpec};

fn main() -> wsr::Result<()> {
    let rx = gen_helix(&GeometrySpec::helix(0.3, 400))?;
    let params = ChannelParams::with_model(ChannelModel::PlanarFarfield);
    let direct = simulate_dataset(&rx, &Transmitter::fixed(Direction::new(-90.0, 91.0)?, 100.0), &params, 0)?;
    let reflected = simulate_dataset(&rx, &Transmitter::fixed(Direction::new(30.0, 45.0)?, 100.0), &params, 0)?;
    // products of each path add up; the reflection is 0.6 times as strong
    let values: Vec<_> = direct
        .records()
        .iter()
        .zip(reflected.records())
        .map(|(a, b)| cfo_cancelled_product(a) + cfo_cancelled_product(b) * 0.6)
        .collect();
    let positions = rebase(&rx)?.positions();
    let profile = coherent_profile(&values, &positions, params.wavelength / 2.0, SteeringModel::Planar)?;
    for p in top_k_peaks(&profile, 2, 15.0)? {
        println!("path at ({}, {}), {:.2} of the strongest", p.direction.phi, p.direction.theta, p.profile_max_ratio);
    }
    Ok(())
}
