//! Path generators, trajectory files and the odometry error metrics.
//!
//! `cargo run --release --example trajectories -- [out_dir]`

use std::path::PathBuf;

use wsr::geometry::{angular_drift, ate_trans, rebase};
use wsr::ingest::{read_trajectory, write_trajectory};
use wsr::noise::{apply_noise, NoiseSpec};
use wsr::trajgen::{check_min_aperture, generate, GeometryKind, GeometrySpec};

fn main() -> wsr::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("wsr_traj"));
    std::fs::create_dir_all(&dir).map_err(|e| wsr::Error::io(&dir, e))?;
    let lambda = wsr::channel::DEFAULT_WAVELENGTH_M;
    for kind in [GeometryKind::Helix, GeometryKind::Circle, GeometryKind::Line] {
        let spec = GeometrySpec::new(kind);
        let traj = rebase(&generate(&spec)?)?;
        let path = dir.join(format!("{kind:?}.csv").to_lowercase());
        write_trajectory(&traj, &path)?;
        assert_eq!(read_trajectory(&path)?, traj);

        let noisy = apply_noise(&traj, &NoiseSpec::cumulative(0.002, Some(0.05)), 1)?;
        let drift = angular_drift(&traj, &noisy)?;
        // angles near the start are ill-conditioned, so report the median
        let mut per_pose: Vec<f64> = drift.iter().map(|d| d.phi.abs().max(d.theta.abs())).collect();
        per_pose.sort_by(f64::total_cmp);
        let median = per_pose[per_pose.len() / 2];
        println!(
            "{kind:?}: length {:.3} m, aperture ok {}, ATE {:.3} m, median angular drift {:.1} deg",
            traj.path_length(),
            check_min_aperture(&traj, lambda),
            ate_trans(&traj, &noisy)?,
            median
        );
    }
    Ok(())
}
