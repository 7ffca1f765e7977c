//! Coordinate conventions, pose containers and trajectory metrics.
//!
//! Angles cross the public API in degrees. Azimuth (`varphi`, `phi`) is
//! measured counter-clockwise from +x and lives in `[-180, 180)`; elevation
//! (`xi`, `theta`) is measured from +z and lives in `[0, 180]`.

use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `RᵀR = I` and `det R = 1` for rotation inputs.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Default nearest-timestamp pairing tolerance between two robots' logs.
pub const DEFAULT_TIME_TOLERANCE_S: f64 = 5e-3;

/// Wraps an azimuth to `[-180, 180)`.
pub fn wrap_azimuth(deg: f64) -> f64 {
    let w = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Wraps an angular difference to `(-180, 180]`.
pub fn wrap_difference(deg: f64) -> f64 {
    let w = wrap_azimuth(deg);
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartesianPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartesianPosition {
    pub const ORIGIN: CartesianPosition = CartesianPosition {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for CartesianPosition {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for CartesianPosition {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for CartesianPosition {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

/// Position in spherical coordinates: range, azimuth and elevation (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalPosition {
    pub rho: f64,
    pub varphi: f64,
    pub xi: f64,
}

impl SphericalPosition {
    pub fn new(rho: f64, varphi: f64, xi: f64) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::invalid(format!("range must be finite and >= 0, got {rho}")));
        }
        check_azimuth(varphi)?;
        check_elevation(xi)?;
        Ok(Self { rho, varphi, xi })
    }
}

/// Direction of arrival: azimuth `phi` and elevation `theta`, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Direction {
    pub phi: f64,
    pub theta: f64,
}

impl Direction {
    pub fn new(phi: f64, theta: f64) -> Result<Self> {
        check_azimuth(phi)?;
        check_elevation(theta)?;
        Ok(Self { phi, theta })
    }

    pub fn validate(&self) -> Result<()> {
        check_azimuth(self.phi)?;
        check_elevation(self.theta)
    }

    /// Unit vector pointing from the receiver towards the source.
    pub fn unit_vector(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.to_radians().sin_cos();
        let (sp, cp) = self.phi.to_radians().sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    /// Great-circle angle between two directions, degrees.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let c = self.unit_vector().dot(&other.unit_vector()).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }
}

fn check_azimuth(deg: f64) -> Result<()> {
    if deg.is_finite() && (-180.0..180.0).contains(&deg) {
        Ok(())
    } else {
        Err(Error::invalid(format!("azimuth {deg} outside [-180, 180)")))
    }
}

fn check_elevation(deg: f64) -> Result<()> {
    if deg.is_finite() && (0.0..=180.0).contains(&deg) {
        Ok(())
    } else {
        Err(Error::invalid(format!("elevation {deg} outside [0, 180]")))
    }
}

/// Converts Cartesian to spherical coordinates. The origin maps to `(0, 0°, 0°)`.
pub fn cart_to_sph(p: CartesianPosition) -> SphericalPosition {
    let rho = p.norm();
    if rho == 0.0 {
        return SphericalPosition {
            rho: 0.0,
            varphi: 0.0,
            xi: 0.0,
        };
    }
    let varphi = wrap_azimuth(p.y.atan2(p.x).to_degrees());
    // atan2 keeps full precision near the poles, where acos(z/ρ) does not
    let xi = p.x.hypot(p.y).atan2(p.z).to_degrees();
    SphericalPosition { rho, varphi, xi }
}

pub fn sph_to_cart(s: SphericalPosition) -> CartesianPosition {
    spherical_point(s.rho, s.varphi, s.xi)
}

/// `(ρ sinξ cosφ, ρ sinξ sinφ, ρ cosξ)` without range checks on the angles.
///
/// Parametric curves sweep elevation past 180°, which [`SphericalPosition`]
/// rejects; generators go through this instead.
pub(crate) fn spherical_point(rho: f64, varphi_deg: f64, xi_deg: f64) -> CartesianPosition {
    let (sx, cx) = xi_deg.to_radians().sin_cos();
    let (sp, cp) = varphi_deg.to_radians().sin_cos();
    CartesianPosition::new(rho * sx * cp, rho * sx * sp, rho * cx)
}

/// Checks that `m` is a proper rotation.
pub fn validate_rotation(m: &Matrix3<f64>) -> Result<()> {
    let err = (m.transpose() * m - Matrix3::identity()).abs().max();
    let det = m.determinant();
    if !(err <= ROTATION_TOLERANCE && (det - 1.0).abs() <= ROTATION_TOLERANCE) {
        return Err(Error::invalid(format!(
            "matrix is not a proper rotation (orthonormality error {err:e}, det {det})"
        )));
    }
    Ok(())
}

/// Rotation about +z by `deg` degrees.
pub fn yaw_rotation(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub time: f64,
    pub position: CartesianPosition,
    pub orientation: Matrix3<f64>,
}

impl Pose {
    pub fn new(time: f64, position: CartesianPosition, orientation: Matrix3<f64>) -> Result<Self> {
        if !time.is_finite() || !position.is_finite() {
            return Err(Error::invalid("pose time and position must be finite"));
        }
        validate_rotation(&orientation)?;
        Ok(Self {
            time,
            position,
            orientation,
        })
    }

    /// Pose with identity orientation.
    pub fn at(time: f64, position: CartesianPosition) -> Self {
        Self {
            time,
            position,
            orientation: Matrix3::identity(),
        }
    }
}

/// Time-ordered poses in one local frame; the virtual antenna array.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
    frame_label: String,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>, frame_label: impl Into<String>) -> Result<Self> {
        for (i, p) in poses.iter().enumerate() {
            if !p.time.is_finite() || !p.position.is_finite() {
                return Err(Error::invalid(format!("pose {i} has non-finite fields")));
            }
        }
        if let Some(i) = poses.windows(2).position(|w| !(w[1].time > w[0].time)) {
            return Err(Error::invalid(format!(
                "timestamps must be strictly increasing (pose {} at {} s after {} s)",
                i + 1,
                poses[i + 1].time,
                poses[i].time
            )));
        }
        Ok(Self {
            poses,
            frame_label: frame_label.into(),
        })
    }

    /// Builds a trajectory with identity orientations.
    pub fn from_positions(
        times: &[f64],
        positions: &[CartesianPosition],
        frame_label: impl Into<String>,
    ) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                actual: positions.len(),
            });
        }
        let poses = times
            .iter()
            .zip(positions)
            .map(|(&t, &p)| Pose::at(t, p))
            .collect();
        Self::new(poses, frame_label)
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn frame_label(&self) -> &str {
        &self.frame_label
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.poses.iter().map(|p| p.time).collect()
    }

    pub fn positions(&self) -> Vec<CartesianPosition> {
        self.poses.iter().map(|p| p.position).collect()
    }

    /// Same poses with positions replaced; times and orientations are kept.
    pub(crate) fn with_positions(&self, positions: &[CartesianPosition]) -> Trajectory {
        debug_assert_eq!(positions.len(), self.poses.len());
        let poses = self
            .poses
            .iter()
            .zip(positions)
            .map(|(p, &q)| Pose {
                time: p.time,
                position: q,
                orientation: p.orientation,
            })
            .collect();
        Trajectory {
            poses,
            frame_label: self.frame_label.clone(),
        }
    }

    /// Sum of segment lengths.
    pub fn path_length(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }
}

/// Expresses every position relative to the first pose.
pub fn rebase(traj: &Trajectory) -> Result<Trajectory> {
    let origin = traj
        .poses
        .first()
        .ok_or_else(|| Error::invalid("cannot rebase an empty trajectory"))?
        .position;
    let shifted: Vec<_> = traj.poses.iter().map(|p| p.position - origin).collect();
    Ok(traj.with_positions(&shifted))
}

/// Applies a frame correction: positions are left-multiplied by `rot` and
/// orientations composed as `rot · R`.
pub fn align_north_down(traj: &Trajectory, rot: &Matrix3<f64>) -> Result<Trajectory> {
    validate_rotation(rot)?;
    let poses = traj
        .poses
        .iter()
        .map(|p| Pose {
            time: p.time,
            position: CartesianPosition::from_vector(&(rot * p.position.to_vector())),
            orientation: rot * p.orientation,
        })
        .collect();
    Ok(Trajectory {
        poses,
        frame_label: traj.frame_label.clone(),
    })
}

/// Pairs each receiver pose with the transmitter pose nearest in time.
fn pair_by_time(rx: &Trajectory, tx: &Trajectory, tolerance: f64) -> Result<Vec<usize>> {
    if rx.len() != tx.len() {
        return Err(Error::LengthMismatch {
            expected: rx.len(),
            actual: tx.len(),
        });
    }
    let tx_times = tx.times();
    rx.poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let j = tx_times.partition_point(|&t| t < p.time);
            let nearest = [j.checked_sub(1), (j < tx_times.len()).then_some(j)]
                .into_iter()
                .flatten()
                .min_by(|&a, &b| {
                    (tx_times[a] - p.time)
                        .abs()
                        .total_cmp(&(tx_times[b] - p.time).abs())
                })
                .ok_or_else(|| Error::invalid("empty transmitter trajectory"))?;
            let gap = (tx_times[nearest] - p.time).abs();
            if gap > tolerance {
                return Err(Error::TimestampMismatch {
                    index: i,
                    rx: p.time,
                    tx: tx_times[nearest],
                    tolerance,
                });
            }
            Ok(nearest)
        })
        .collect()
}

/// Displacement of the receiver relative to a moving transmitter,
/// `(p_rx(t) − p_tx(t)) − (p_rx(t_k) − p_tx(t_k))`, on the receiver's clock.
///
/// Evaluated as `(p_rx(t) − p_rx(t_k)) − (p_tx(t) − p_tx(t_k))` so that a
/// static transmitter reproduces [`rebase`] bit for bit.
pub fn relative_trajectory(rx: &Trajectory, tx: &Trajectory, tolerance: f64) -> Result<Trajectory> {
    if rx.is_empty() {
        return Err(Error::invalid("empty receiver trajectory"));
    }
    let pairs = pair_by_time(rx, tx, tolerance)?;
    let rx0 = rx.poses[0].position;
    let tx0 = tx.poses[pairs[0]].position;
    let rel: Vec<_> = rx
        .poses
        .iter()
        .zip(&pairs)
        .map(|(p, &j)| (p.position - rx0) - (tx.poses[j].position - tx0))
        .collect();
    Ok(rx.with_positions(&rel))
}

/// Translational absolute trajectory error (RMS of position residual norms).
pub fn ate_trans(gt: &Trajectory, est: &Trajectory) -> Result<f64> {
    if gt.len() != est.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: est.len(),
        });
    }
    if gt.is_empty() {
        return Err(Error::invalid("ATE of empty trajectories"));
    }
    let sum: f64 = gt
        .poses
        .iter()
        .zip(&est.poses)
        .map(|(a, b)| {
            let d = a.position - b.position;
            d.dot(d)
        })
        .sum();
    Ok((sum / gt.len() as f64).sqrt())
}

/// Per-pose spherical error `gt − est`: range (m), azimuth and elevation (deg).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularDrift {
    pub rho: f64,
    pub phi: f64,
    pub theta: f64,
}

pub fn angular_drift(gt: &Trajectory, est: &Trajectory) -> Result<Vec<AngularDrift>> {
    if gt.len() != est.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: est.len(),
        });
    }
    Ok(gt
        .poses
        .iter()
        .zip(&est.poses)
        .map(|(a, b)| {
            let sa = cart_to_sph(a.position);
            let sb = cart_to_sph(b.position);
            AngularDrift {
                rho: sa.rho - sb.rho,
                phi: wrap_difference(sa.varphi - sb.varphi),
                theta: sa.xi - sb.xi,
            }
        })
        .collect())
}
