//! Fisher information and Cramér-Rao bounds on (θ, φ) for a virtual array.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::aoa::{AoaProfile, ELEVATION_CELLS, GRID_CELLS};
use crate::error::{Error, Result};
use crate::geometry::{CartesianPosition, Direction, Trajectory};
use crate::trajgen::{GeometryKind, GeometrySpec};

/// Below this share of `max(C²)` the parameters are treated as decoupled.
const DECOUPLED_TOL: f64 = 1e-20;
/// An information term this small relative to the other is zero.
const ZERO_INFO_TOL: f64 = 1e-12;
/// `AB − C²` this small relative to `AB` is a singular matrix.
const SINGULAR_TOL: f64 = 1e-10;

/// Entries of the 2×2 information matrix `[[A, C], [C, B]]` for (θ, φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FimTerms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FimTerms {
    pub fn det(&self) -> f64 {
        self.a * self.b - self.c * self.c
    }

    pub fn scaled(&self, k: f64) -> FimTerms {
        FimTerms {
            a: self.a * k,
            b: self.b * k,
            c: self.c * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrbMode {
    /// Diagonal of the inverse matrix.
    #[default]
    Canonical,
    /// `1/(snr·det·A)` and `1/(snr·det·B)`.
    DeterminantScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrbResult {
    #[serde(serialize_with = "finite_or_null")]
    pub crb_theta: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub crb_phi: f64,
    pub snr: f64,
}

/// JSON has no infinity; non-finite values are written as `null`.
pub(crate) fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Derivatives of `û·p` with respect to θ and φ.
fn direction_derivatives(d: &Direction) -> ([f64; 3], [f64; 3]) {
    let (st, ct) = d.theta.to_radians().sin_cos();
    let (sp, cp) = d.phi.to_radians().sin_cos();
    ([ct * cp, ct * sp, -st], [-st * sp, st * cp, 0.0])
}

fn fim_from_positions(positions: &[CartesianPosition], direction: &Direction, wavelength: f64) -> FimTerms {
    let (gt, gp) = direction_derivatives(direction);
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for p in positions {
        let dt = gt[0] * p.x + gt[1] * p.y + gt[2] * p.z;
        let dp = gp[0] * p.x + gp[1] * p.y + gp[2] * p.z;
        a += dt * dt;
        b += dp * dp;
        c += dt * dp;
    }
    let k2 = (2.0 * PI / wavelength).powi(2);
    FimTerms {
        a: k2 * a,
        b: k2 * b,
        c: k2 * c,
    }
}

/// Sums over every pose of the steering-derivative products.
///
/// Per element, the θ-derivative factor is
/// `ρ(cosθ sinξ cos(φ−φ_u) − cosξ sinθ)` and the φ-derivative factor is
/// `−ρ sinθ sinξ sin(φ−φ_u)`; `A`, `B`, `C` are their squares and cross
/// product scaled by `(2π/λ)²`. Positions are used as given.
pub fn fim_numeric(traj: &Trajectory, direction: &Direction, wavelength: f64) -> Result<FimTerms> {
    if traj.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    check_wavelength(wavelength)?;
    direction.validate()?;
    Ok(fim_from_positions(&traj.positions(), direction, wavelength))
}

fn check_wavelength(wavelength: f64) -> Result<()> {
    if wavelength.is_finite() && wavelength > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("wavelength must be > 0, got {wavelength}")))
    }
}

pub fn crb_from_fim(terms: &FimTerms, snr: f64, mode: CrbMode) -> Result<CrbResult> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::invalid(format!("snr must be > 0, got {snr}")));
    }
    let FimTerms { a, b, c } = *terms;
    if !(a.is_finite() && b.is_finite() && c.is_finite()) || a < 0.0 || b < 0.0 {
        return Err(Error::Numeric(format!("invalid information terms {terms:?}")));
    }
    let inf = f64::INFINITY;
    let scale = a.max(b);
    let (crb_theta, crb_phi) = if scale == 0.0 {
        (inf, inf)
    } else {
        let decoupled = c * c <= DECOUPLED_TOL * scale * scale;
        let a_zero = a <= ZERO_INFO_TOL * scale;
        let b_zero = b <= ZERO_INFO_TOL * scale;
        let det = if decoupled { a * b } else { terms.det() };
        let singular = a_zero || b_zero || det <= SINGULAR_TOL * a * b;
        match mode {
            CrbMode::Canonical if decoupled => (
                if a_zero { inf } else { 1.0 / (snr * a) },
                if b_zero { inf } else { 1.0 / (snr * b) },
            ),
            CrbMode::Canonical if singular => (inf, inf),
            CrbMode::Canonical => (b / (snr * det), a / (snr * det)),
            CrbMode::DeterminantScaled if singular => (inf, inf),
            CrbMode::DeterminantScaled => (1.0 / (snr * det * a), 1.0 / (snr * det * b)),
        }
    };
    Ok(CrbResult { crb_theta, crb_phi, snr })
}

/// Continuum limit for the unit-climb spherical helix of radius `r`.
///
/// These are integrals over `τ ∈ [0, 2π)`: the discrete sums over `M`
/// uniform samples approach them after multiplying by `2π/M`.
pub fn closed_form_helix(r: f64, wavelength: f64, direction: &Direction) -> FimTerms {
    let (st, ct) = direction.theta.to_radians().sin_cos();
    let (sp, cp) = direction.phi.to_radians().sin_cos();
    let (c2t, c2p) = ((2.0 * direction.theta).to_radians().cos(), (2.0 * direction.phi).to_radians().cos());
    let k = PI.powi(3) * r * r / (wavelength * wavelength);
    FimTerms {
        a: k * (3.0 - c2t - ct * ct * c2p),
        b: k * st * st * (c2p + 2.0),
        c: 2.0 * k * st * ct * sp * cp,
    }
}

/// Per-element average for the horizontal circle of radius `r`: the
/// discrete sums over `M` uniform samples divided by `M`.
pub fn closed_form_circle(r: f64, wavelength: f64, direction: &Direction) -> FimTerms {
    let (st, ct) = direction.theta.to_radians().sin_cos();
    let k = 2.0 * PI * PI * r * r / (wavelength * wavelength);
    FimTerms {
        a: k * ct * ct,
        b: k * st * st,
        c: 0.0,
    }
}

/// Finite sums for a straight segment at elevation `a`, azimuth `b`, with
/// element ranges `ρ_u = L(u−1)/(M−1)`.
pub fn line_terms(spec: &GeometrySpec, wavelength: f64, direction: &Direction) -> Result<FimTerms> {
    if spec.kind != GeometryKind::Line {
        return Err(Error::Config("line_terms needs a line spec".into()));
    }
    spec.validate()?;
    check_wavelength(wavelength)?;
    let [a, b] = spec.line_angles;
    let (sa, ca) = a.to_radians().sin_cos();
    let (st, ct) = direction.theta.to_radians().sin_cos();
    let (sd, cd) = (direction.phi - b).to_radians().sin_cos();
    let ft = ct * sa * cd - ca * st;
    let fp = -st * sa * sd;
    let m = spec.num_samples;
    let step = spec.effective_line_length() / (m - 1) as f64;
    let rho2: f64 = (0..m).map(|u| (step * u as f64).powi(2)).sum();
    let k2 = (2.0 * PI / wavelength).powi(2) * rho2;
    Ok(FimTerms {
        a: k2 * ft * ft,
        b: k2 * fp * fp,
        c: k2 * ft * fp,
    })
}

/// What the information terms are computed from.
#[derive(Debug, Clone, Copy)]
pub enum FimSource<'a> {
    Trajectory(&'a Trajectory),
    HelixClosedForm { radius: f64 },
    CircleClosedForm { radius: f64 },
    Line(&'a GeometrySpec),
}

/// CRB grids over the 360×180 azimuth/elevation grid, same layout as [`AoaProfile`].
#[derive(Debug, Clone, PartialEq)]
pub struct InformativenessMap {
    pub crb_theta: Vec<f64>,
    pub crb_phi: Vec<f64>,
}

impl InformativenessMap {
    pub fn get(&self, azimuth_idx: usize, elevation_idx: usize) -> (f64, f64) {
        let i = azimuth_idx * ELEVATION_CELLS + elevation_idx;
        (self.crb_theta[i], self.crb_phi[i])
    }
}

pub fn informativeness_map(source: FimSource<'_>, wavelength: f64, snr: f64, mode: CrbMode) -> Result<InformativenessMap> {
    check_wavelength(wavelength)?;
    let positions = match source {
        FimSource::Trajectory(t) if t.is_empty() => return Err(Error::invalid("empty trajectory")),
        FimSource::Trajectory(t) => t.positions(),
        FimSource::HelixClosedForm { radius } | FimSource::CircleClosedForm { radius }
            if !(radius.is_finite() && radius > 0.0) =>
        {
            return Err(Error::Config(format!("radius must be > 0, got {radius}")))
        }
        FimSource::Line(spec) => {
            line_terms(spec, wavelength, &Direction { phi: 0.0, theta: 0.0 })?;
            Vec::new()
        }
        _ => Vec::new(),
    };
    let terms = |d: &Direction| -> Result<FimTerms> {
        Ok(match source {
            FimSource::Trajectory(_) => fim_from_positions(&positions, d, wavelength),
            FimSource::HelixClosedForm { radius } => closed_form_helix(radius, wavelength, d),
            FimSource::CircleClosedForm { radius } => closed_form_circle(radius, wavelength, d),
            FimSource::Line(spec) => line_terms(spec, wavelength, d)?,
        })
    };
    let cells: Vec<CrbResult> = (0..GRID_CELLS)
        .into_par_iter()
        .map(|i| {
            let d = AoaProfile::direction_of(i / ELEVATION_CELLS, i % ELEVATION_CELLS);
            crb_from_fim(&terms(&d)?, snr, mode)
        })
        .collect::<Result<_>>()?;
    Ok(InformativenessMap {
        crb_theta: cells.iter().map(|c| c.crb_theta).collect(),
        crb_phi: cells.iter().map(|c| c.crb_phi).collect(),
    })
}

/// Empirical distribution of CRB values; infinities sort last.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbCdf {
    finite: Vec<f64>,
    total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    #[serde(serialize_with = "finite_or_null")]
    pub p5: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub p25: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub p50: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub p75: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub p95: f64,
    pub inf_mass: f64,
}

impl CrbCdf {
    /// Finite values, ascending.
    pub fn sorted_finite(&self) -> &[f64] {
        &self.finite
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn inf_mass(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            (self.total - self.finite.len()) as f64 / self.total as f64
        }
    }

    /// Lower nearest-rank quantile over all values (`+∞` included).
    pub fn quantile(&self, p: f64) -> f64 {
        if self.total == 0 {
            return f64::NAN;
        }
        let rank = (p.clamp(0.0, 1.0) * self.total as f64).ceil() as usize;
        let idx = rank.saturating_sub(1);
        self.finite.get(idx).copied().unwrap_or(f64::INFINITY)
    }

    /// Share of values `<= x`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.finite.partition_point(|v| *v <= x);
        let n = if x == f64::INFINITY { self.total } else { n };
        n as f64 / self.total as f64
    }

    pub fn quantiles(&self) -> Quantiles {
        Quantiles {
            p5: self.quantile(0.05),
            p25: self.quantile(0.25),
            p50: self.quantile(0.5),
            p75: self.quantile(0.75),
            p95: self.quantile(0.95),
            inf_mass: self.inf_mass(),
        }
    }
}

pub fn crb_cdf(values: &[f64]) -> Result<CrbCdf> {
    if values.iter().any(|v| v.is_nan() || *v < 0.0 || *v == f64::NEG_INFINITY) {
        return Err(Error::Numeric("CRB values must be >= 0 or +inf".into()));
    }
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    Ok(CrbCdf {
        finite,
        total: values.len(),
    })
}

/// Radius of a unit-climb helix whose path has the given length.
pub fn helix_radius_for_length(length: f64) -> f64 {
    length / crate::trajgen::helix_length_factor(1.0)
}
