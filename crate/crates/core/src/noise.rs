//! Corruptions applied to a ground-truth trajectory to mimic odometry error.
//!
//! Angular offsets follow `estimate = truth − κ`: a pose at spherical angles
//! `(φ_u, ξ_u)` is reported at `(φ_u − κ_φ, ξ_u − κ_θ)`, which moves the
//! profile peak to `(φ − κ_φ, θ − κ_θ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ate_trans, cart_to_sph, spherical_point, CartesianPosition, Trajectory};

/// Varying deviations must stay below this, degrees.
pub const MAX_DEVIATION_DEG: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    ConstantOffset,
    VaryingOffset,
    CumulativeGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    #[serde(default)]
    pub kappa_phi: f64,
    #[serde(default)]
    pub kappa_theta: f64,
    #[serde(default)]
    pub delta_max: f64,
    #[serde(default)]
    pub mu_max: f64,
    /// Alternate `±(δ_max, μ_max)` by pose index instead of drawing uniformly.
    #[serde(default)]
    pub extremal: bool,
    #[serde(default)]
    pub sigma_step: f64,
    #[serde(default)]
    pub target_ate: Option<f64>,
    /// Falls back to the caller's per-trial seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind) -> Self {
        Self {
            kind,
            kappa_phi: 0.0,
            kappa_theta: 0.0,
            delta_max: 0.0,
            mu_max: 0.0,
            extremal: false,
            sigma_step: 0.0,
            target_ate: None,
            seed: None,
        }
    }

    pub fn constant(kappa_phi: f64, kappa_theta: f64) -> Self {
        Self {
            kappa_phi,
            kappa_theta,
            ..Self::new(NoiseKind::ConstantOffset)
        }
    }

    pub fn varying(kappa_phi: f64, kappa_theta: f64, delta_max: f64, mu_max: f64, extremal: bool) -> Self {
        Self {
            kappa_phi,
            kappa_theta,
            delta_max,
            mu_max,
            extremal,
            ..Self::new(NoiseKind::VaryingOffset)
        }
    }

    pub fn cumulative(sigma_step: f64, target_ate: Option<f64>) -> Self {
        Self {
            sigma_step,
            target_ate,
            ..Self::new(NoiseKind::CumulativeGaussian)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kappa_phi, self.kappa_theta, self.delta_max, self.mu_max, self.sigma_step];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("noise parameters must be finite".into()));
        }
        if self.delta_max < 0.0 || self.mu_max < 0.0 {
            return Err(Error::Config("delta_max and mu_max must be >= 0".into()));
        }
        if self.kind == NoiseKind::VaryingOffset
            && (self.delta_max >= MAX_DEVIATION_DEG || self.mu_max >= MAX_DEVIATION_DEG)
        {
            return Err(Error::Config(format!(
                "delta_max and mu_max must be below {MAX_DEVIATION_DEG} degrees"
            )));
        }
        if self.sigma_step < 0.0 {
            return Err(Error::Config("sigma_step must be >= 0".into()));
        }
        if let Some(t) = self.target_ate {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Config(format!("target_ate must be >= 0, got {t}")));
            }
        }
        Ok(())
    }

    fn seed_or(&self, fallback: u64) -> u64 {
        self.seed.unwrap_or(fallback)
    }
}

/// Shifts every pose's angles by `−(κ_φ + δ_u, κ_θ + μ_u)` about the frame origin.
fn shift_angles(traj: &Trajectory, offsets: impl Fn(usize) -> (f64, f64)) -> Result<Trajectory> {
    let positions = traj
        .positions()
        .iter()
        .enumerate()
        .map(|(u, p)| {
            let s = cart_to_sph(*p);
            if s.rho == 0.0 {
                return Ok(*p);
            }
            let (dphi, dtheta) = offsets(u);
            let xi = s.xi - dtheta;
            if !(0.0..=180.0).contains(&xi) {
                return Err(Error::invalid(format!(
                    "offset moves pose {u} to elevation {xi:.3} outside [0, 180]"
                )));
            }
            Ok(spherical_point(s.rho, s.varphi - dphi, xi))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(traj.with_positions(&positions))
}

pub fn add_constant_offset(traj: &Trajectory, spec: &NoiseSpec) -> Result<Trajectory> {
    spec.validate()?;
    shift_angles(traj, |_| (spec.kappa_phi, spec.kappa_theta))
}

/// Per-pose `(δ_u, μ_u)` for a varying offset.
///
/// Extremal mode pairs consecutive poses as `+(δ_max, μ_max)`,
/// `−(δ_max, μ_max)`; an unpaired last pose gets no deviation.
pub fn varying_deviations(n: usize, spec: &NoiseSpec, fallback_seed: u64) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    if spec.extremal {
        return Ok((0..n)
            .map(|u| {
                if n % 2 == 1 && u == n - 1 {
                    (0.0, 0.0)
                } else if u % 2 == 0 {
                    (spec.delta_max, spec.mu_max)
                } else {
                    (-spec.delta_max, -spec.mu_max)
                }
            })
            .collect());
    }
    let seed = spec.seed_or(fallback_seed);
    Ok((0..n)
        .map(|u| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u as u64);
            let d = if spec.delta_max > 0.0 {
                rng.random_range(-spec.delta_max..=spec.delta_max)
            } else {
                0.0
            };
            let m = if spec.mu_max > 0.0 {
                rng.random_range(-spec.mu_max..=spec.mu_max)
            } else {
                0.0
            };
            (d, m)
        })
        .collect())
}

pub fn add_varying_offset(traj: &Trajectory, spec: &NoiseSpec, fallback_seed: u64) -> Result<Trajectory> {
    let dev = varying_deviations(traj.len(), spec, fallback_seed)?;
    shift_angles(traj, |u| (spec.kappa_phi + dev[u].0, spec.kappa_theta + dev[u].1))
}

/// Random walk with `N(0, sigma_step²)` increments per axis; the first pose is left alone.
pub fn add_cumulative_gaussian(traj: &Trajectory, spec: &NoiseSpec, fallback_seed: u64) -> Result<Trajectory> {
    spec.validate()?;
    if spec.sigma_step == 0.0 {
        return Ok(traj.clone());
    }
    let normal = Normal::new(0.0, spec.sigma_step).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed_or(fallback_seed));
    let mut drift = CartesianPosition::ORIGIN;
    let positions: Vec<_> = traj
        .positions()
        .iter()
        .enumerate()
        .map(|(u, p)| {
            if u > 0 {
                drift = drift
                    + CartesianPosition::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
            }
            *p + drift
        })
        .collect();
    Ok(traj.with_positions(&positions))
}

/// Rescales the residuals `noisy − traj` so the ATE equals `target_ate`.
pub fn scale_to_target_ate(traj: &Trajectory, noisy: &Trajectory, target_ate: f64) -> Result<Trajectory> {
    if !(target_ate.is_finite() && target_ate >= 0.0) {
        return Err(Error::invalid(format!("target ATE must be >= 0, got {target_ate}")));
    }
    let ate = ate_trans(traj, noisy)?;
    if ate == 0.0 {
        return Err(Error::invalid("noisy trajectory has zero residual"));
    }
    let k = target_ate / ate;
    let positions: Vec<_> = traj
        .positions()
        .iter()
        .zip(noisy.positions())
        .map(|(p, q)| *p + (q - *p) * k)
        .collect();
    Ok(noisy.with_positions(&positions))
}

/// Applies `spec` to `traj`; the cumulative model is rescaled to `target_ate` when set.
pub fn apply_noise(traj: &Trajectory, spec: &NoiseSpec, fallback_seed: u64) -> Result<Trajectory> {
    match spec.kind {
        NoiseKind::ConstantOffset => add_constant_offset(traj, spec),
        NoiseKind::VaryingOffset => add_varying_offset(traj, spec, fallback_seed),
        NoiseKind::CumulativeGaussian => {
            let noisy = add_cumulative_gaussian(traj, spec, fallback_seed)?;
            match spec.target_ate {
                Some(t) => scale_to_target_ate(traj, &noisy, t),
                None => Ok(noisy),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rebase, yaw_rotation};
    use crate::trajgen::{gen_circle, gen_helix, GeometrySpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn helix(m: usize) -> Trajectory {
        rebase(&gen_helix(&GeometrySpec::helix(0.3, m)).unwrap()).unwrap()
    }

    fn max_gap(a: &Trajectory, b: &Trajectory) -> f64 {
        a.positions()
            .iter()
            .zip(b.positions())
            .map(|(p, q)| (*p - q).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_offset_is_identity() {
        let t = helix(50);
        let out = add_constant_offset(&t, &NoiseSpec::constant(0.0, 0.0)).unwrap();
        assert!(max_gap(&t, &out) < 1e-15);
    }

    #[test]
    fn azimuth_offset_rotates_about_z() {
        let c = gen_circle(&GeometrySpec::circle(0.5, 36)).unwrap();
        let out = add_constant_offset(&c, &NoiseSpec::constant(5.0, 0.0)).unwrap();
        let r = yaw_rotation(-5.0);
        for (p, q) in c.positions().iter().zip(out.positions()) {
            let want = CartesianPosition::from_vector(&(r * p.to_vector()));
            assert!((want - q).norm() < 1e-12);
        }
    }

    #[test]
    fn offset_then_inverse_restores() {
        let t = gen_circle(&GeometrySpec::circle(0.5, 40)).unwrap();
        let there = add_constant_offset(&t, &NoiseSpec::constant(7.0, 3.0)).unwrap();
        let back = add_constant_offset(&there, &NoiseSpec::constant(-7.0, -3.0)).unwrap();
        assert!(max_gap(&t, &back) < 1e-9);
    }

    #[test]
    fn elevation_overflow_is_rejected() {
        let t = helix(40);
        assert!(add_constant_offset(&t, &NoiseSpec::constant(0.0, -60.0)).is_err());
    }

    #[test]
    fn varying_without_deviation_matches_constant() {
        let t = gen_circle(&GeometrySpec::circle(0.5, 40)).unwrap();
        let a = add_varying_offset(&t, &NoiseSpec::varying(4.0, -2.0, 0.0, 0.0, false), 3).unwrap();
        let b = add_constant_offset(&t, &NoiseSpec::constant(4.0, -2.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_deviation_means_are_centered() {
        let n = 100_000;
        let spec = NoiseSpec::varying(0.0, 0.0, 6.0, 3.0, false).with_seed(77);
        let dev = varying_deviations(n, &spec, 0).unwrap();
        for (max, pick) in [(6.0, 0usize), (3.0, 1)] {
            let vals: Vec<f64> = dev.iter().map(|d| if pick == 0 { d.0 } else { d.1 }).collect();
            assert!(vals.iter().all(|v| v.abs() <= max));
            let mean = vals.iter().sum::<f64>() / n as f64;
            let sigma = max / 3f64.sqrt() / (n as f64).sqrt();
            assert!(mean.abs() < 3.0 * sigma, "mean {mean}");
        }
    }

    #[test]
    fn extremal_mode_alternates() {
        let spec = NoiseSpec::varying(0.0, 0.0, 2.0, 3.0, true);
        let dev = varying_deviations(5, &spec, 0).unwrap();
        assert_eq!(dev, vec![(2.0, 3.0), (-2.0, -3.0), (2.0, 3.0), (-2.0, -3.0), (0.0, 0.0)]);
        assert!(varying_deviations(4, &NoiseSpec::varying(0.0, 0.0, 15.0, 0.0, true), 0).is_err());
    }

    #[test]
    fn zero_sigma_is_identity() {
        let t = helix(30);
        assert_eq!(add_cumulative_gaussian(&t, &NoiseSpec::cumulative(0.0, None), 1).unwrap(), t);
    }

    #[test]
    fn cumulative_keeps_first_pose_and_is_seeded() {
        let t = helix(30);
        let spec = NoiseSpec::cumulative(0.01, None);
        let a = add_cumulative_gaussian(&t, &spec, 5).unwrap();
        assert_eq!(a.positions()[0], t.positions()[0]);
        assert_eq!(a, add_cumulative_gaussian(&t, &spec, 5).unwrap());
        assert_ne!(a, add_cumulative_gaussian(&t, &spec, 6).unwrap());
        // an explicit seed wins over the fallback
        let pinned = spec.clone().with_seed(5);
        assert_eq!(a, add_cumulative_gaussian(&t, &pinned, 99).unwrap());
    }

    #[test]
    fn random_walk_ate_grows_with_length() {
        let spec = NoiseSpec::cumulative(0.002, None);
        let mut prev = 0.0;
        for m in [25, 50, 100, 200, 400] {
            let t = helix(m);
            let mean: f64 = (0..100)
                .map(|s| ate_trans(&t, &add_cumulative_gaussian(&t, &spec, s).unwrap()).unwrap())
                .sum::<f64>()
                / 100.0;
            // E|walk_u|² = 3σ²u, so the RMS over u < M is about σ·sqrt(1.5·M)
            let expected = 0.002 * (1.5 * m as f64).sqrt();
            assert!((mean / expected - 1.0).abs() < 0.2, "M={m}: {mean} vs {expected}");
            assert!(mean > prev);
            prev = mean;
        }
    }

    #[test]
    fn scaling_hits_target() {
        let t = helix(100);
        let noisy = add_cumulative_gaussian(&t, &NoiseSpec::cumulative(0.003, None), 11).unwrap();
        let ate = ate_trans(&t, &noisy).unwrap();
        let same = scale_to_target_ate(&t, &noisy, ate).unwrap();
        assert!(max_gap(&same, &noisy) < 1e-15);
        let out = scale_to_target_ate(&t, &noisy, 0.2).unwrap();
        assert_relative_eq!(ate_trans(&t, &out).unwrap(), 0.2, max_relative = 1e-9);
        let doubled = scale_to_target_ate(&t, &noisy, 2.0 * ate).unwrap();
        assert_relative_eq!(ate_trans(&t, &doubled).unwrap(), 2.0 * ate, max_relative = 1e-12);
        assert!(scale_to_target_ate(&t, &t, 0.1).is_err());
    }

    #[test]
    fn spec_validation_and_serde() {
        assert!(NoiseSpec::varying(0.0, 0.0, -1.0, 0.0, false).validate().is_err());
        assert!(NoiseSpec::cumulative(-0.1, None).validate().is_err());
        assert!(NoiseSpec::cumulative(0.1, Some(-1.0)).validate().is_err());
        let s: NoiseSpec = serde_json::from_str(r#"{"kind":"cumulative_gaussian","sigma_step":0.01,"target_ate":0.2}"#).unwrap();
        assert_eq!(s, NoiseSpec::cumulative(0.01, Some(0.2)));
        assert!(serde_json::from_str::<NoiseSpec>(r#"{"kind":"constant_offset","kapa_phi":1}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn constant_offset_preserves_range(kp in -30.0..30.0f64, kt in -8.0..8.0f64) {
            let t = gen_circle(&GeometrySpec::circle(0.5, 24)).unwrap();
            let out = add_constant_offset(&t, &NoiseSpec::constant(kp, kt)).unwrap();
            for (p, q) in t.positions().iter().zip(out.positions()) {
                prop_assert!((p.norm() - q.norm()).abs() < 1e-12);
            }
        }
    }
}
