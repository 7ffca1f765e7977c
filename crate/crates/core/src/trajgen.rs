//! Parametric receiver paths: spherical helix, planar circle, line and
//! arbitrary waypoint polylines.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{spherical_point, CartesianPosition, Trajectory};

pub const DEFAULT_NUM_SAMPLES: usize = 400;
pub const DEFAULT_DURATION_S: f64 = 3.0;
pub const DEFAULT_RADIUS_M: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Helix,
    Circle,
    Line,
    Waypoints,
}

/// Description of a generated path.
///
/// `line_angles` is `[a, b]`: the line's elevation `a` and azimuth `b` in
/// degrees. When `line_length` is absent a line spans `2π·radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_climb_rate")]
    pub climb_rate: f64,
    #[serde(default = "default_line_angles")]
    pub line_angles: [f64; 2],
    #[serde(default)]
    pub line_length: Option<f64>,
    #[serde(default = "default_num_samples")]
    pub num_samples: usize,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub waypoints: Option<Vec<CartesianPosition>>,
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS_M
}
fn default_climb_rate() -> f64 {
    1.0
}
fn default_line_angles() -> [f64; 2] {
    [90.0, 0.0]
}
fn default_num_samples() -> usize {
    DEFAULT_NUM_SAMPLES
}
fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}

impl GeometrySpec {
    pub fn new(kind: GeometryKind) -> Self {
        Self {
            kind,
            radius: DEFAULT_RADIUS_M,
            climb_rate: 1.0,
            line_angles: default_line_angles(),
            line_length: None,
            num_samples: DEFAULT_NUM_SAMPLES,
            duration: DEFAULT_DURATION_S,
            waypoints: None,
        }
    }

    pub fn helix(radius: f64, num_samples: usize) -> Self {
        Self {
            radius,
            num_samples,
            ..Self::new(GeometryKind::Helix)
        }
    }

    pub fn circle(radius: f64, num_samples: usize) -> Self {
        Self {
            radius,
            num_samples,
            ..Self::new(GeometryKind::Circle)
        }
    }

    /// Line from the origin at elevation `a`, azimuth `b` (degrees).
    pub fn line(a: f64, b: f64, length: f64, num_samples: usize) -> Self {
        Self {
            line_angles: [a, b],
            line_length: Some(length),
            num_samples,
            ..Self::new(GeometryKind::Line)
        }
    }

    pub fn waypoints(points: Vec<CartesianPosition>, num_samples: usize) -> Self {
        Self {
            waypoints: Some(points),
            num_samples,
            ..Self::new(GeometryKind::Waypoints)
        }
    }

    pub fn effective_line_length(&self) -> f64 {
        self.line_length.unwrap_or(2.0 * PI * self.radius)
    }

    /// Copy with every optional field made explicit.
    pub fn resolved(&self) -> Self {
        let mut s = self.clone();
        if s.kind == GeometryKind::Line {
            s.line_length = Some(self.effective_line_length());
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 2 {
            return Err(Error::Config(format!(
                "num_samples must be >= 2, got {}",
                self.num_samples
            )));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config(format!("duration must be > 0, got {}", self.duration)));
        }
        match self.kind {
            GeometryKind::Helix | GeometryKind::Circle => {
                if !(self.radius.is_finite() && self.radius > 0.0) {
                    return Err(Error::Config(format!("radius must be > 0, got {}", self.radius)));
                }
                if !self.climb_rate.is_finite() {
                    return Err(Error::Config("climb_rate must be finite".into()));
                }
            }
            GeometryKind::Line => {
                let len = self.effective_line_length();
                if !(len.is_finite() && len > 0.0) {
                    return Err(Error::Config(format!("line_length must be > 0, got {len}")));
                }
                if !self.line_angles.iter().all(|a| a.is_finite()) {
                    return Err(Error::Config("line_angles must be finite".into()));
                }
            }
            GeometryKind::Waypoints => {
                let pts = self
                    .waypoints
                    .as_ref()
                    .ok_or_else(|| Error::Config("waypoints geometry needs a waypoint list".into()))?;
                if pts.len() < 2 {
                    return Err(Error::Config("at least two waypoints are required".into()));
                }
                if !pts.iter().all(|p| p.is_finite()) {
                    return Err(Error::Config("waypoints must be finite".into()));
                }
                if let Some(i) = pts.windows(2).position(|w| w[0] == w[1]) {
                    return Err(Error::Config(format!(
                        "duplicate consecutive waypoints at index {}",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    fn expect_kind(&self, kind: GeometryKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Config(format!(
                "expected a {kind:?} spec, got {:?}",
                self.kind
            )));
        }
        self.validate()
    }

    fn timestamps(&self) -> Vec<f64> {
        let m = self.num_samples;
        (0..m)
            .map(|u| self.duration * u as f64 / (m - 1) as f64)
            .collect()
    }
}

/// Builds the trajectory described by `spec`.
pub fn generate(spec: &GeometrySpec) -> Result<Trajectory> {
    match spec.kind {
        GeometryKind::Helix => gen_helix(spec),
        GeometryKind::Circle => gen_circle(spec),
        GeometryKind::Line => gen_line(spec),
        GeometryKind::Waypoints => gen_waypoints(spec),
    }
}

/// Spherical helix: elevation `τ`, azimuth `c·τ`, range `r`, with
/// `τ_u = u·360°/M`. Starts at the +z pole.
pub fn gen_helix(spec: &GeometrySpec) -> Result<Trajectory> {
    spec.expect_kind(GeometryKind::Helix)?;
    let m = spec.num_samples;
    let pos: Vec<_> = (0..m)
        .map(|u| {
            let tau = 360.0 * u as f64 / m as f64;
            spherical_point(spec.radius, spec.climb_rate * tau, tau)
        })
        .collect();
    Trajectory::from_positions(&spec.timestamps(), &pos, "helix")
}

/// Circle of radius `r` in the z = 0 plane: elevation 90°, azimuth `τ_u`.
pub fn gen_circle(spec: &GeometrySpec) -> Result<Trajectory> {
    spec.expect_kind(GeometryKind::Circle)?;
    let m = spec.num_samples;
    let pos: Vec<_> = (0..m)
        .map(|u| {
            let (s, c) = (2.0 * PI * u as f64 / m as f64).sin_cos();
            CartesianPosition::new(spec.radius * c, spec.radius * s, 0.0)
        })
        .collect();
    Trajectory::from_positions(&spec.timestamps(), &pos, "circle")
}

/// Straight segment from the origin along elevation `a`, azimuth `b`.
pub fn gen_line(spec: &GeometrySpec) -> Result<Trajectory> {
    spec.expect_kind(GeometryKind::Line)?;
    let [a, b] = spec.line_angles;
    let dir = spherical_point(1.0, b, a);
    let len = spec.effective_line_length();
    let m = spec.num_samples;
    let pos: Vec<_> = (0..m)
        .map(|u| dir * (len * u as f64 / (m - 1) as f64))
        .collect();
    Trajectory::from_positions(&spec.timestamps(), &pos, "line")
}

/// Piecewise-linear path through the waypoints, resampled to `M` points at
/// uniform arc length.
pub fn gen_waypoints(spec: &GeometrySpec) -> Result<Trajectory> {
    spec.expect_kind(GeometryKind::Waypoints)?;
    let pts = spec.waypoints.as_deref().unwrap_or_default();
    let pos = resample_polyline(pts, spec.num_samples);
    Trajectory::from_positions(&spec.timestamps(), &pos, "waypoints")
}

fn resample_polyline(pts: &[CartesianPosition], m: usize) -> Vec<CartesianPosition> {
    let mut cumulative = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in pts.windows(2) {
        acc += (w[1] - w[0]).norm();
        cumulative.push(acc);
    }
    let total = acc;
    let mut seg = 0;
    (0..m)
        .map(|u| {
            if u == m - 1 {
                return pts[pts.len() - 1];
            }
            let s = total * u as f64 / (m - 1) as f64;
            while seg + 2 < cumulative.len() && cumulative[seg + 1] <= s {
                seg += 1;
            }
            let frac = (s - cumulative[seg]) / (cumulative[seg + 1] - cumulative[seg]);
            pts[seg] + (pts[seg + 1] - pts[seg]) * frac
        })
        .collect()
}

/// Arc length of the spherical helix with climb rate `c` per unit radius:
/// `∫₀^{2π} √(1 + c² sin²τ) dτ`.
pub fn helix_length_factor(climb_rate: f64) -> f64 {
    // composite Simpson; the integrand is smooth and periodic
    let n = 20_000;
    let h = 2.0 * PI / n as f64;
    let f = |t: f64| (1.0 + climb_rate * climb_rate * t.sin().powi(2)).sqrt();
    let mut s = f(0.0) + f(2.0 * PI);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Whether the path spans at least two wavelengths; logs a warning otherwise.
pub fn check_min_aperture(traj: &Trajectory, wavelength: f64) -> bool {
    let len = traj.path_length();
    let ok = len >= 2.0 * wavelength;
    if !ok {
        log::warn!(
            "path length {len:.4} m is below the 2λ = {:.4} m needed for a full-resolution profile",
            2.0 * wavelength
        );
    }
    ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cart_to_sph;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn close(p: CartesianPosition, q: (f64, f64, f64)) {
        assert_abs_diff_eq!(p.to_vector(), Vector3::new(q.0, q.1, q.2), epsilon = 1e-12);
    }

    #[test]
    fn helix_four_samples() {
        let t = gen_helix(&GeometrySpec::helix(1.0, 4)).unwrap();
        let p = t.positions();
        close(p[0], (0.0, 0.0, 1.0));
        close(p[1], (0.0, 1.0, 0.0));
        close(p[2], (0.0, 0.0, -1.0));
        // τ = 270°: sin ξ = −1 and sin φ = −1, so y = +1
        close(p[3], (0.0, 1.0, 0.0));
    }

    #[test]
    fn helix_stays_on_sphere() {
        let spec = GeometrySpec {
            climb_rate: 2.5,
            ..GeometrySpec::helix(0.7, 333)
        };
        let t = gen_helix(&spec).unwrap();
        assert_eq!(t.positions()[0], CartesianPosition::new(0.0, 0.0, 0.7));
        for p in t.positions() {
            assert_abs_diff_eq!(p.norm(), 0.7, epsilon = 1e-12);
        }
        let times = t.times();
        assert_eq!(times.len(), 333);
        assert_abs_diff_eq!(times[332], DEFAULT_DURATION_S, epsilon = 1e-12);
    }

    #[test]
    fn circle_examples() {
        let t = gen_circle(&GeometrySpec::circle(2.0, 4)).unwrap();
        let p = t.positions();
        close(p[0], (2.0, 0.0, 0.0));
        close(p[1], (0.0, 2.0, 0.0));
        close(p[2], (-2.0, 0.0, 0.0));
        close(p[3], (0.0, -2.0, 0.0));
        let t = gen_circle(&GeometrySpec::circle(0.5, 100)).unwrap();
        for p in t.positions() {
            assert_eq!(p.z, 0.0);
            assert_abs_diff_eq!(p.norm(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn circle_is_the_equator_of_the_helix_sphere() {
        // shared sample indices: helix samples with ξ = 90° lie on the circle
        let m = 8;
        let helix = gen_helix(&GeometrySpec::helix(1.0, m)).unwrap().positions();
        let circle = gen_circle(&GeometrySpec::circle(1.0, m)).unwrap().positions();
        // u = M/4 → τ = 90°: both at azimuth 90° on the equator
        assert_abs_diff_eq!((helix[m / 4] - circle[m / 4]).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn line_examples() {
        let t = gen_line(&GeometrySpec::line(90.0, 0.0, 3.0, 4)).unwrap();
        for (u, p) in t.positions().iter().enumerate() {
            close(*p, (u as f64, 0.0, 0.0));
        }
        let t = gen_line(&GeometrySpec::line(0.0, 37.0, 2.0, 5)).unwrap();
        for (u, p) in t.positions().iter().enumerate() {
            close(*p, (0.0, 0.0, 0.5 * u as f64));
        }
        let t = gen_line(&GeometrySpec::line(60.0, -30.0, 1.7, 11)).unwrap();
        let p = t.positions();
        for w in p.windows(2) {
            assert_abs_diff_eq!((w[1] - w[0]).norm(), 0.17, epsilon = 1e-12);
        }
        let default_len = GeometrySpec::new(GeometryKind::Line).effective_line_length();
        assert_abs_diff_eq!(default_len, 2.0 * PI * DEFAULT_RADIUS_M, epsilon = 1e-15);
    }

    #[test]
    fn waypoints_two_points_match_line() {
        let end = crate::geometry::spherical_point(2.5, 20.0, 70.0);
        let wp = gen_waypoints(&GeometrySpec::waypoints(vec![CartesianPosition::ORIGIN, end], 9)).unwrap();
        let line = gen_line(&GeometrySpec::line(70.0, 20.0, 2.5, 9)).unwrap();
        for (a, b) in wp.positions().iter().zip(line.positions()) {
            assert_abs_diff_eq!((*a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn waypoints_preserve_arc_length() {
        let pts = vec![
            CartesianPosition::new(0.0, 0.0, 0.0),
            CartesianPosition::new(1.0, 0.0, 0.0),
            CartesianPosition::new(1.0, 2.0, 0.0),
            CartesianPosition::new(1.0, 2.0, 1.5),
        ];
        // 4.5 m total; sample spacing 0.5 m lands on every corner
        let t = gen_waypoints(&GeometrySpec::waypoints(pts, 10)).unwrap();
        let len = t.path_length();
        assert!((len - 4.5).abs() <= 1e-9 * 4.5);
    }

    #[test]
    fn uniform_polyline_resampling_is_idempotent() {
        // zigzag with equal 1 m segments is already uniform in arc length
        let pts: Vec<_> = (0..7)
            .map(|i| {
                let x = i as f64 * 0.6;
                let y = if i % 2 == 0 { 0.0 } else { 0.8 };
                CartesianPosition::new(x, y, 0.0)
            })
            .collect();
        for w in pts.windows(2) {
            assert_abs_diff_eq!((w[1] - w[0]).norm(), 1.0, epsilon = 1e-12);
        }
        let once = gen_waypoints(&GeometrySpec::waypoints(pts.clone(), pts.len())).unwrap();
        for (a, b) in once.positions().iter().zip(&pts) {
            assert_abs_diff_eq!((*a - *b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(gen_helix(&GeometrySpec::helix(0.0, 10)).is_err());
        assert!(gen_circle(&GeometrySpec::circle(-1.0, 10)).is_err());
        assert!(gen_helix(&GeometrySpec::helix(1.0, 1)).is_err());
        assert!(gen_line(&GeometrySpec::line(90.0, 0.0, 0.0, 10)).is_err());
        assert!(gen_helix(&GeometrySpec::circle(1.0, 10)).is_err());
        let dup = vec![CartesianPosition::ORIGIN, CartesianPosition::ORIGIN];
        assert!(gen_waypoints(&GeometrySpec::waypoints(dup, 5)).is_err());
        assert!(gen_waypoints(&GeometrySpec::waypoints(vec![CartesianPosition::ORIGIN], 5)).is_err());
    }

    #[test]
    fn helix_length_factor_matches_polyline() {
        let m = 200_000;
        let t = gen_helix(&GeometrySpec::helix(1.0, m)).unwrap();
        let closing = (t.positions()[0] - t.positions()[m - 1]).norm();
        let polyline = t.path_length() + closing;
        assert!((polyline - helix_length_factor(1.0)).abs() < 1e-6);
        assert_abs_diff_eq!(helix_length_factor(0.0), 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn aperture_check() {
        let t = gen_circle(&GeometrySpec::circle(0.3, 400)).unwrap();
        assert!(check_min_aperture(&t, 0.06));
        let tiny = gen_circle(&GeometrySpec::circle(0.001, 400)).unwrap();
        assert!(!check_min_aperture(&tiny, 0.06));
    }

    #[test]
    fn helix_with_zero_climb_is_a_meridian() {
        let spec = GeometrySpec {
            climb_rate: 0.0,
            ..GeometrySpec::helix(1.0, 12)
        };
        for p in gen_helix(&spec).unwrap().positions() {
            assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-15);
            let s = cart_to_sph(p);
            assert!(s.varphi == 0.0 || s.varphi == -180.0);
        }
    }
}
