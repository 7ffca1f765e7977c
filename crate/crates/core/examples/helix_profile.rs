//! Simulate a helical receiver path, build the 360×180 AOA profile and
//! write it next to a peak report.
//!
//! `cargo run --release --example helix_profile -- [out_dir]`

use std::path::PathBuf;

use wsr::aoa::{aoa_error, bartlett_profile, find_peak, top_k_peaks};
use wsr::channel::{simulate_dataset, ChannelModel, ChannelParams, Transmitter};
use wsr::geometry::Direction;
use wsr::ingest::{write_profile, Format, OutputMeta};
use wsr::trajgen::{gen_helix, GeometrySpec};

fn main() -> wsr::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("wsr_helix_profile"));
    std::fs::create_dir_all(&out).map_err(|e| wsr::Error::io(&out, e))?;

    let rx = gen_helix(&GeometrySpec::helix(0.3, 400))?;
    let truth = Direction::new(-90.0, 91.0)?;
    let params = ChannelParams::with_model(ChannelModel::PlanarFarfield);
    let dataset = simulate_dataset(&rx, &Transmitter::fixed(truth, 100.0), &params, 7)?;

    let profile = bartlett_profile(&dataset, &dataset.trajectory()?, params.wavelength)?;
    let peak = find_peak(&profile);
    let err = aoa_error(&truth, &peak.direction);
    println!("peak at phi={} theta={}, error {:.2} deg", peak.direction.phi, peak.direction.theta, err.l2);
    for p in top_k_peaks(&profile, 3, 20.0)? {
        println!("  candidate ({}, {}) at {:.3} of max", p.direction.phi, p.direction.theta, p.profile_max_ratio);
    }

    let meta = OutputMeta { seed: 7, config_hash: "example".into() };
    write_profile(&profile, &meta, &out.join("profile.json"), Format::Json)?;
    write_profile(&profile.normalized(), &meta, &out.join("profile.csv"), Format::Csv)?;
    println!("wrote {}", out.display());
    Ok(())
}
