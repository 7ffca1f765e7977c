//! Bartlett spatial spectrum over the 360×180 azimuth/elevation grid.
//!
//! The estimator consumes forward×reverse products, whose phase is twice the
//! one-way phase, so steering for product records uses `λ/2`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{arc_projection, cfo_cancelled_product, Complex, Dataset};
use crate::error::{Error, Result};
use crate::geometry::{
    cart_to_sph, rebase, wrap_difference, CartesianPosition, Direction, SphericalPosition, Trajectory,
    DEFAULT_TIME_TOLERANCE_S,
};
use crate::phasor;

pub const AZIMUTH_CELLS: usize = 360;
pub const ELEVATION_CELLS: usize = 180;
pub const GRID_CELLS: usize = AZIMUTH_CELLS * ELEVATION_CELLS;

/// How candidate directions map to per-element phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteeringModel {
    /// `ρ[sinθ sinξ cos(φ−φ_u) + cosθ cosξ]`, i.e. `û·p`.
    #[default]
    Planar,
    /// `ρ cos(φ−φ_u) cos(θ−ξ_u)`.
    Arc,
}

/// `(2πρ_u/λ)[sinθ sinξ_u cos(φ−φ_u) + cosξ_u cosθ]`.
pub fn steering_phase(element: &SphericalPosition, candidate: &Direction, wavelength: f64) -> f64 {
    let (st, ct) = candidate.theta.to_radians().sin_cos();
    let (sx, cx) = element.xi.to_radians().sin_cos();
    let dphi = (candidate.phi - element.varphi).to_radians();
    2.0 * PI * element.rho / wavelength * (st * sx * dphi.cos() + cx * ct)
}

/// Unit phasors `exp(j·steering_phase)` for each element.
pub fn steering_vector(elements: &[SphericalPosition], candidate: &Direction, wavelength: f64) -> Vec<Complex> {
    elements
        .iter()
        .map(|e| Complex::from_polar(1.0, steering_phase(e, candidate, wavelength)))
        .collect()
}

/// Azimuth of column `i`, degrees.
pub fn azimuth_of(i: usize) -> f64 {
    i as f64 - 180.0
}

/// Elevation of row `j`, degrees.
pub fn elevation_of(j: usize) -> f64 {
    j as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoaProfile {
    // index = azimuth_idx * ELEVATION_CELLS + elevation_idx
    values: Vec<f64>,
}

impl AoaProfile {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != GRID_CELLS {
            return Err(Error::LengthMismatch {
                expected: GRID_CELLS,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Numeric(format!("profile cell {i} is negative or not finite")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, azimuth_idx: usize, elevation_idx: usize) -> f64 {
        self.values[azimuth_idx * ELEVATION_CELLS + elevation_idx]
    }

    /// Grid indices of an integer-degree direction.
    pub fn cell_of(direction: &Direction) -> Option<(usize, usize)> {
        let (p, t) = (direction.phi + 180.0, direction.theta);
        if p.fract() != 0.0 || t.fract() != 0.0 || !(0.0..360.0).contains(&p) || !(0.0..180.0).contains(&t) {
            return None;
        }
        Some((p as usize, t as usize))
    }

    pub fn direction_of(azimuth_idx: usize, elevation_idx: usize) -> Direction {
        Direction {
            phi: azimuth_of(azimuth_idx),
            theta: elevation_of(elevation_idx),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Copy scaled so the largest cell is 1 (unchanged if all zero).
    pub fn normalized(&self) -> AoaProfile {
        let m = self.max();
        if m == 0.0 {
            return self.clone();
        }
        AoaProfile {
            values: self.values.iter().map(|v| v / m).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub direction: Direction,
    pub magnitude: f64,
    pub profile_max_ratio: f64,
}

/// Element data laid out for the inner loop: 4 projection coefficients per
/// element (already scaled by the wavenumber) and the weight to steer.
struct Elements {
    k: [Vec<f64>; 4],
    re: Vec<f64>,
    im: Vec<f64>,
    fast: bool,
}

const LANES: usize = 8;

impl Elements {
    fn new(values: &[Complex], positions: &[CartesianPosition], wavenumber: f64, model: SteeringModel) -> Self {
        let n = values.len().div_ceil(LANES) * LANES;
        let mut k: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        let mut reach: f64 = 0.0;
        for (u, (v, p)) in values.iter().zip(positions).enumerate() {
            re[u] = v.re;
            im[u] = v.im;
            let coeffs = match model {
                SteeringModel::Planar => [p.x, p.y, p.z, 0.0],
                SteeringModel::Arc => {
                    let s = cart_to_sph(*p);
                    let (sp, cp) = s.varphi.to_radians().sin_cos();
                    let (sx, cx) = s.xi.to_radians().sin_cos();
                    [s.rho * cp * cx, s.rho * cp * sx, s.rho * sp * cx, s.rho * sp * sx]
                }
            };
            for (dst, c) in k.iter_mut().zip(coeffs) {
                dst[u] = wavenumber * c;
            }
            reach = reach.max(wavenumber * p.norm());
        }
        Self {
            k,
            re,
            im,
            fast: 2.0 * reach < phasor::MAX_ARGUMENT,
        }
    }

    /// `|Σ_u w_u·exp(−j·basis·k_u)|²`, summed in a fixed order.
    fn power(&self, basis: [f64; 4]) -> f64 {
        if self.fast {
            self.power_fast(basis)
        } else {
            self.power_std(basis)
        }
    }

    fn power_fast(&self, b: [f64; 4]) -> f64 {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the feature was detected at runtime
                return unsafe { self.power_fast_avx2(b) };
            }
        }
        self.power_fast_generic(b)
    }

    // Same instruction sequence per lane, only wider registers: results
    // are bit-identical to the generic path.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn power_fast_avx2(&self, b: [f64; 4]) -> f64 {
        self.power_fast_generic(b)
    }

    #[inline(always)]
    fn power_fast_generic(&self, b: [f64; 4]) -> f64 {
        let [k0, k1, k2, k3] = &self.k;
        let mut acc_re = [0.0; LANES];
        let mut acc_im = [0.0; LANES];
        let blocks = k0
            .chunks_exact(LANES)
            .zip(k1.chunks_exact(LANES))
            .zip(k2.chunks_exact(LANES))
            .zip(k3.chunks_exact(LANES))
            .zip(self.re.chunks_exact(LANES).zip(self.im.chunks_exact(LANES)));
        for ((((k0, k1), k2), k3), (re, im)) in blocks {
            let ph: [f64; LANES] = std::array::from_fn(|j| b[0] * k0[j] + b[1] * k1[j] + b[2] * k2[j] + b[3] * k3[j]);
            let (s, co) = phasor::sincos_block(&ph);
            for j in 0..LANES {
                acc_re[j] += re[j] * co[j] + im[j] * s[j];
                acc_im[j] += im[j] * co[j] - re[j] * s[j];
            }
        }
        finish(acc_re, acc_im)
    }

    fn power_std(&self, b: [f64; 4]) -> f64 {
        let [k0, k1, k2, k3] = &self.k;
        let mut acc_re = [0.0; LANES];
        let mut acc_im = [0.0; LANES];
        for u in 0..self.re.len() {
            let ph = b[0] * k0[u] + b[1] * k1[u] + b[2] * k2[u] + b[3] * k3[u];
            let (s, co) = ph.sin_cos();
            acc_re[u % LANES] += self.re[u] * co + self.im[u] * s;
            acc_im[u % LANES] += self.im[u] * co - self.re[u] * s;
        }
        finish(acc_re, acc_im)
    }
}

fn finish(acc_re: [f64; LANES], acc_im: [f64; LANES]) -> f64 {
    let re: f64 = acc_re.iter().sum();
    let im: f64 = acc_im.iter().sum();
    re * re + im * im
}

fn basis(model: SteeringModel, azimuth_idx: usize, elevation_idx: usize) -> [f64; 4] {
    let (sp, cp) = azimuth_of(azimuth_idx).to_radians().sin_cos();
    let (st, ct) = elevation_of(elevation_idx).to_radians().sin_cos();
    match model {
        SteeringModel::Planar => [st * cp, st * sp, ct, 0.0],
        SteeringModel::Arc => [cp * ct, cp * st, sp * ct, sp * st],
    }
}

/// Coherent power `|Σ_u v_u·exp(−j·2π/λ·proj_u(φ,θ))|²` at every grid cell.
///
/// `wavelength` is the effective one: pass `λ/2` for forward×reverse products.
/// Each cell sums its elements sequentially, so the grid does not depend on
/// the size of the thread pool.
pub fn coherent_profile(
    values: &[Complex],
    positions: &[CartesianPosition],
    wavelength: f64,
    model: SteeringModel,
) -> Result<AoaProfile> {
    if values.len() != positions.len() {
        return Err(Error::LengthMismatch {
            expected: positions.len(),
            actual: values.len(),
        });
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::invalid(format!("wavelength must be > 0, got {wavelength}")));
    }
    if values.iter().any(|v| !v.is_finite()) || positions.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("non-finite channel or position input".into()));
    }
    let elements = Elements::new(values, positions, 2.0 * PI / wavelength, model);
    let mut grid = vec![0.0; GRID_CELLS];
    grid.par_chunks_mut(ELEVATION_CELLS).enumerate().for_each(|(i, row)| {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = elements.power(basis(model, i, j));
        }
    });
    AoaProfile::from_values(grid)
}

fn check_alignment(dataset: &Dataset, traj: &Trajectory) -> Result<()> {
    if dataset.len() != traj.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: traj.len(),
        });
    }
    for (i, (r, p)) in dataset.records().iter().zip(traj.poses()).enumerate() {
        if (r.time - p.time).abs() > DEFAULT_TIME_TOLERANCE_S {
            return Err(Error::TimestampMismatch {
                index: i,
                rx: r.time,
                tx: p.time,
                tolerance: DEFAULT_TIME_TOLERANCE_S,
            });
        }
    }
    Ok(())
}

/// `F(φ,θ) = |Σ_t ĥ·ĥ_r·a(φ,θ)(t)|²` with planar steering.
pub fn bartlett_profile(dataset: &Dataset, traj: &Trajectory, wavelength: f64) -> Result<AoaProfile> {
    bartlett_profile_with(dataset, traj, wavelength, SteeringModel::Planar)
}

pub fn bartlett_profile_with(
    dataset: &Dataset,
    traj: &Trajectory,
    wavelength: f64,
    model: SteeringModel,
) -> Result<AoaProfile> {
    check_alignment(dataset, traj)?;
    if dataset.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let traj = rebase(traj)?;
    let products: Vec<Complex> = dataset.records().iter().map(cfo_cancelled_product).collect();
    coherent_profile(&products, &traj.positions(), wavelength / 2.0, model)
}

/// Coherent sum steered towards a single direction (no grid).
pub fn steered_sum(
    values: &[Complex],
    elements: &[SphericalPosition],
    candidate: &Direction,
    wavelength: f64,
    model: SteeringModel,
) -> Complex {
    values
        .iter()
        .zip(elements)
        .map(|(v, e)| {
            let phase = match model {
                SteeringModel::Planar => steering_phase(e, candidate, wavelength),
                SteeringModel::Arc => 2.0 * PI * e.rho / wavelength * arc_projection(candidate, e.varphi, e.xi),
            };
            v * Complex::from_polar(1.0, -phase)
        })
        .sum()
}

/// Global maximum; ties go to the smallest azimuth, then smallest elevation.
pub fn find_peak(profile: &AoaProfile) -> PeakEstimate {
    let mut best = 0;
    for (i, v) in profile.values.iter().enumerate() {
        if *v > profile.values[best] {
            best = i;
        }
    }
    PeakEstimate {
        direction: AoaProfile::direction_of(best / ELEVATION_CELLS, best % ELEVATION_CELLS),
        magnitude: profile.values[best],
        profile_max_ratio: 1.0,
    }
}

/// Greedy non-maximum suppression by great-circle distance.
pub fn top_k_peaks(profile: &AoaProfile, k: usize, min_separation_deg: f64) -> Result<Vec<PeakEstimate>> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let mut order: Vec<usize> = (0..GRID_CELLS).collect();
    // stable: equal values keep scan order
    order.sort_by(|&a, &b| profile.values[b].total_cmp(&profile.values[a]));
    let top = profile.values[order[0]];
    let mut peaks: Vec<PeakEstimate> = Vec::with_capacity(k);
    for idx in order {
        if peaks.len() == k {
            break;
        }
        let d = AoaProfile::direction_of(idx / ELEVATION_CELLS, idx % ELEVATION_CELLS);
        if peaks.iter().all(|p| p.direction.angle_to(&d) >= min_separation_deg) {
            let magnitude = profile.values[idx];
            peaks.push(PeakEstimate {
                direction: d,
                magnitude,
                profile_max_ratio: if top > 0.0 { magnitude / top } else { 1.0 },
            });
        }
    }
    Ok(peaks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaError {
    pub dphi: f64,
    pub dtheta: f64,
    pub l2: f64,
}

pub fn aoa_error(truth: &Direction, est: &Direction) -> AoaError {
    let dphi = wrap_difference(truth.phi - est.phi);
    let dtheta = truth.theta - est.theta;
    AoaError {
        dphi,
        dtheta,
        l2: dphi.hypot(dtheta),
    }
}
