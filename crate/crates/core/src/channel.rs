//! Complex channel synthesis between a moving receiver and a transmitter.
//!
//! Phases follow `h = (1/d)·exp(−2πj·d/λ)`. A source at range `D` along
//! unit vector `û` is at distance `≈ D − û·p` from an element at `p`, so
//! the far-field element phase is `+2π(û·p)/λ` up to a global constant.
//! Forward and reverse channels carry opposite carrier-frequency offsets,
//! which cancel in their product.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cart_to_sph, rebase, relative_trajectory, CartesianPosition, Direction, Trajectory,
    DEFAULT_TIME_TOLERANCE_S,
};

pub use num_complex::Complex64 as Complex;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wavelength of a 5 GHz carrier.
pub const DEFAULT_WAVELENGTH_M: f64 = SPEED_OF_LIGHT / 5.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// Spherical wavefront at the true 3D distance.
    #[default]
    ExactDistance,
    /// Plane wave; only the projection of the element onto the source direction matters.
    PlanarFarfield,
    /// Separable `cos(φ−φ_u)·cos(θ−ξ_u)` projection used by the drift lemmas.
    ArcModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(default)]
    pub noise_variance: f64,
    #[serde(default)]
    pub cfo_hz: f64,
    #[serde(default)]
    pub model: ChannelModel,
    #[serde(default)]
    pub arc_distance: Option<f64>,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH_M
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            wavelength: DEFAULT_WAVELENGTH_M,
            noise_variance: 0.0,
            cfo_hz: 0.0,
            model: ChannelModel::ExactDistance,
            arc_distance: None,
        }
    }
}

impl ChannelParams {
    pub fn with_model(model: ChannelModel) -> Self {
        Self {
            model,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::Config(format!("wavelength must be > 0, got {}", self.wavelength)));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::Config(format!(
                "noise_variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        if !self.cfo_hz.is_finite() {
            return Err(Error::Config("cfo_hz must be finite".into()));
        }
        match (self.model, self.arc_distance) {
            (ChannelModel::ArcModel, Some(d)) if d.is_finite() && d > 0.0 => Ok(()),
            (ChannelModel::ArcModel, _) => Err(Error::Config(
                "arc_model requires a positive arc_distance".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// One emulated antenna element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub time: f64,
    pub rx_position: CartesianPosition,
    pub fwd: Complex,
    pub rev: Complex,
}

impl PacketRecord {
    fn is_finite(&self) -> bool {
        self.time.is_finite() && self.rx_position.is_finite() && self.fwd.is_finite() && self.rev.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub rx_frame: String,
    pub tx_frame: Option<String>,
}

/// Packet/position history of one capture.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<PacketRecord>,
    params: Option<ChannelParams>,
    meta: DatasetMeta,
}

impl Dataset {
    pub fn new(records: Vec<PacketRecord>, params: Option<ChannelParams>, meta: DatasetMeta) -> Result<Self> {
        if let Some(i) = records.iter().position(|r| !r.is_finite()) {
            return Err(Error::invalid(format!("record {i} has non-finite fields")));
        }
        if let Some(i) = records.windows(2).position(|w| !(w[1].time > w[0].time)) {
            return Err(Error::invalid(format!(
                "record times must be strictly increasing (record {})",
                i + 1
            )));
        }
        Ok(Self { records, params, meta })
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn params(&self) -> Option<&ChannelParams> {
        self.params.as_ref()
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Receiver positions as a trajectory with identity orientations.
    pub fn trajectory(&self) -> Result<Trajectory> {
        let times: Vec<f64> = self.records.iter().map(|r| r.time).collect();
        let pos: Vec<_> = self.records.iter().map(|r| r.rx_position).collect();
        Trajectory::from_positions(&times, &pos, self.meta.rx_frame.clone())
    }

    /// Copy with every record multiplied by `factor` (both directions).
    pub fn scaled(&self, factor: Complex) -> Dataset {
        let records = self
            .records
            .iter()
            .map(|r| PacketRecord {
                fwd: r.fwd * factor,
                rev: r.rev * factor,
                ..*r
            })
            .collect();
        Dataset {
            records,
            params: self.params,
            meta: self.meta.clone(),
        }
    }
}

/// `exp(−2πj·cycles)` with the integer part of `cycles` removed first.
fn phasor_cycles(cycles: f64) -> Complex {
    let frac = cycles - cycles.round();
    Complex::from_polar(1.0, -2.0 * PI * frac)
}

/// Free-space channel at distance `d`: `(1/d)·exp(−2πj·d/λ)`.
pub fn ideal_channel(d: f64, wavelength: f64) -> Result<Complex> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid(format!("distance must be > 0, got {d}")));
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::invalid(format!("wavelength must be > 0, got {wavelength}")));
    }
    Ok(phasor_cycles(d / wavelength) / d)
}

/// Separable projection `cos(φ−φ_u)·cos(θ−ξ_u)` of an element onto a direction.
pub(crate) fn arc_projection(direction: &Direction, varphi_u: f64, xi_u: f64) -> f64 {
    (direction.phi - varphi_u).to_radians().cos() * (direction.theta - xi_u).to_radians().cos()
}

fn arc_one_way(distance: f64, rho: f64, direction: &Direction, varphi_u: f64, xi_u: f64, wavelength: f64) -> Complex {
    let path = rho * arc_projection(direction, varphi_u, xi_u);
    phasor_cycles(distance / wavelength) * phasor_cycles(-path / wavelength) / distance
}

/// Forward-reverse product under the arc model at element `(varphi_u, xi_u)`
/// of range `rho`:
/// `(1/D²)·exp(−4πj·D/λ)·exp(+4πj·ρ·cos(φ−φ_u)·cos(θ−ξ_u)/λ)`.
///
/// The element sits at distance `D − ρ·cos(φ−φ_u)·cos(θ−ξ_u)` from the source.
pub fn arc_channel(
    distance: f64,
    rho: f64,
    direction: &Direction,
    element: (f64, f64),
    wavelength: f64,
) -> Result<Complex> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::invalid(format!("arc distance must be > 0, got {distance}")));
    }
    let h = arc_one_way(distance, rho, direction, element.0, element.1, wavelength);
    Ok(h * h)
}

/// Rotates `h` by `sign·(−2π)·Δf·(t − t_k)`: `sign = +1` for the forward link,
/// `−1` for the reverse link.
pub fn apply_cfo(h: Complex, t: f64, t_k: f64, cfo_hz: f64, sign: f64) -> Complex {
    h * Complex::from_polar(1.0, -sign * 2.0 * PI * cfo_hz * (t - t_k))
}

/// Forward × reverse; offsets of opposite sign cancel.
pub fn cfo_cancelled_product(r: &PacketRecord) -> Complex {
    r.fwd * r.rev
}

/// How the transmitter moves during capture.
#[derive(Debug, Clone, PartialEq)]
pub enum TxPath {
    Static,
    /// Transmitter displacement in its own (already aligned) frame.
    Moving(Trajectory),
}

/// Transmitter placement: direction and range from the receiver's first
/// position at the first timestamp, plus its motion.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmitter {
    pub direction: Direction,
    pub distance: f64,
    pub path: TxPath,
}

impl Transmitter {
    pub fn fixed(direction: Direction, distance: f64) -> Self {
        Self {
            direction,
            distance,
            path: TxPath::Static,
        }
    }

    /// Receiver displacement relative to the transmitter, starting at the origin.
    pub fn relative_positions(&self, rx: &Trajectory) -> Result<Trajectory> {
        match &self.path {
            TxPath::Static => rebase(rx),
            TxPath::Moving(tx) => relative_trajectory(rx, tx, DEFAULT_TIME_TOLERANCE_S),
        }
    }
}

fn circular_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(s * re, s * im)
}

/// Generates one record per receiver pose.
///
/// Each record carries the displacement used for steering (the receiver
/// relative to the transmitter, starting at the origin). Noise for record
/// `u` comes from stream `u` of a ChaCha8 generator keyed by `seed`, so the
/// output does not depend on evaluation order.
pub fn simulate_dataset(
    rx: &Trajectory,
    tx: &Transmitter,
    params: &ChannelParams,
    seed: u64,
) -> Result<Dataset> {
    params.validate()?;
    tx.direction.validate()?;
    if !(tx.distance.is_finite() && tx.distance > 0.0) {
        return Err(Error::invalid(format!("transmitter distance must be > 0, got {}", tx.distance)));
    }
    let rel = tx.relative_positions(rx)?;
    let t_k = rel
        .poses()
        .first()
        .ok_or_else(|| Error::invalid("empty receiver trajectory"))?
        .time;
    let lambda = params.wavelength;
    let unit = tx.direction.unit_vector();
    let source = CartesianPosition::new(unit.x, unit.y, unit.z) * tx.distance;

    let records = rel
        .poses()
        .iter()
        .enumerate()
        .map(|(u, pose)| {
            let p = pose.position;
            let h = match params.model {
                ChannelModel::ExactDistance => {
                    let d = (source - p).norm();
                    if d == 0.0 {
                        return Err(Error::invalid(format!("receiver pose {u} coincides with the transmitter")));
                    }
                    ideal_channel(d, lambda)?
                }
                ChannelModel::PlanarFarfield => {
                    let proj = unit.x * p.x + unit.y * p.y + unit.z * p.z;
                    phasor_cycles(tx.distance / lambda) * phasor_cycles(-proj / lambda) / tx.distance
                }
                ChannelModel::ArcModel => {
                    let d = params.arc_distance.unwrap_or(tx.distance);
                    let s = cart_to_sph(p);
                    arc_one_way(d, s.rho, &tx.direction, s.varphi, s.xi, lambda)
                }
            };
            let mut fwd = apply_cfo(h, pose.time, t_k, params.cfo_hz, 1.0);
            let mut rev = apply_cfo(h, pose.time, t_k, params.cfo_hz, -1.0);
            if params.noise_variance > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u as u64);
                fwd += circular_gaussian(&mut rng, params.noise_variance);
                rev += circular_gaussian(&mut rng, params.noise_variance);
            }
            Ok(PacketRecord {
                time: pose.time,
                rx_position: p,
                fwd,
                rev,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let meta = DatasetMeta {
        rx_frame: rx.frame_label().to_string(),
        tx_frame: match &tx.path {
            TxPath::Static => None,
            TxPath::Moving(t) => Some(t.frame_label().to_string()),
        },
    };
    Dataset::new(records, Some(*params), meta)
}
