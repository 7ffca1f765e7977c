//! Both robots move: steering over the receiver's path relative to the
//! transmitter recovers the direction at the first timestamp. A static
//! receiver that follows that relative path sees the same profile, and
//! shifting one robot's frame changes nothing.
//!
//! `cargo run --release --example moving_ends`

use wsr::aoa::{bartlett_profile, find_peak};
use wsr::channel::{simulate_dataset, ChannelModel, ChannelParams, Transmitter, TxPath};
use wsr::geometry::{relative_trajectory, Direction, DEFAULT_TIME_TOLERANCE_S};
use wsr::ingest::FrameAlignment;
use wsr::trajgen::{gen_helix, gen_line, GeometrySpec};

fn main() -> wsr::Result<()> {
    let params = ChannelParams::with_model(ChannelModel::PlanarFarfield);
    let truth = Direction::new(-90.0, 91.0)?;
    let rx = gen_helix(&GeometrySpec::helix(0.3, 400))?;
    // 0.1 m/s along x for 3 s
    let tx_path = gen_line(&GeometrySpec::line(90.0, 0.0, 0.3, 400))?;

    let mobile = Transmitter { direction: truth, distance: 100.0, path: TxPath::Moving(tx_path.clone()) };
    let ds = simulate_dataset(&rx, &mobile, &params, 0)?;
    let rel = relative_trajectory(&rx, &tx_path, DEFAULT_TIME_TOLERANCE_S)?;
    let moving = bartlett_profile(&ds, &rel, params.wavelength)?;
    let peak = find_peak(&moving).direction;
    println!("moving ends peak: ({}, {}), truth ({}, {})", peak.phi, peak.theta, truth.phi, truth.theta);

    let static_ds = simulate_dataset(&rel, &Transmitter::fixed(truth, 100.0), &params, 0)?;
    let fixed = bartlett_profile(&static_ds, &static_ds.trajectory()?, params.wavelength)?;
    println!("static equivalent identical: {}", fixed == moving);

    let shifted = FrameAlignment { yaw_deg: 0.0, translation: [3.0, -2.0, 0.5] }.apply(&tx_path)?;
    let rel_shifted = relative_trajectory(&rx, &shifted, DEFAULT_TIME_TOLERANCE_S)?;
    let other = bartlett_profile(&ds, &rel_shifted, params.wavelength)?;
    let worst = other.values().iter().zip(moving.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("frame translation: max cell change {:.2e} of {:.3e}", worst, moving.max());
    Ok(())
}
