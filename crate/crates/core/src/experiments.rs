//! Reproducible experiment runners behind the `wsr` subcommands.
//!
//! Every runner is a pure function of its configuration and seed. Trial `i`
//! uses seed `base + i`; channel noise and odometry noise draw from
//! separate streams derived from that seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::aoa::{
    aoa_error, bartlett_profile_with, find_peak, steered_sum, AoaError, AoaProfile, PeakEstimate, SteeringModel,
    ELEVATION_CELLS,
};
use crate::channel::{
    cfo_cancelled_product, simulate_dataset, ChannelModel, ChannelParams, Complex, Transmitter, TxPath,
    DEFAULT_WAVELENGTH_M,
};
use crate::crb::{crb_cdf, helix_radius_for_length, informativeness_map, CrbMode, FimSource, InformativenessMap};
use crate::error::{Error, Result};
use crate::geometry::{ate_trans, cart_to_sph, rebase, spherical_point, wrap_difference, CartesianPosition, Direction, Trajectory};
use crate::ingest::{
    config_hash, load_inputs, write_cdf, write_map, write_profile, Format, Inputs, OutputMeta, RxSource, Scenario,
    TxSource,
};
use crate::noise::{add_cumulative_gaussian, apply_noise, scale_to_target_ate, NoiseKind, NoiseSpec};
use crate::trajgen::{GeometryKind, GeometrySpec, DEFAULT_DURATION_S, DEFAULT_NUM_SAMPLES};

pub const REPORT_FORMAT: &str = "wsr_report_v1";

/// The direction most examples are built around.
pub fn canonical_direction() -> Direction {
    Direction { phi: -90.0, theta: 91.0 }
}

/// Count, mean, median and 95th percentile (nearest rank) of the finite values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Some(Stats {
            count: n,
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            p95: v[rank - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<PeakEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<AoaError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ate: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

/// Machine-readable outcome of one subcommand run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    /// The resolved configuration, enough to rerun.
    pub config: serde_json::Value,
    pub trials: Vec<TrialRecord>,
    pub aggregate: BTreeMap<String, Stats>,
    pub summary: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl RunReport {
    fn new<C: Serialize>(command: &str, seed: u64, config: &C) -> Self {
        RunReport {
            format: REPORT_FORMAT.into(),
            command: command.into(),
            seed,
            config_hash: config_hash(config),
            config: serde_json::to_value(config).expect("config serializes"),
            trials: Vec::new(),
            aggregate: BTreeMap::new(),
            summary: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn meta(&self) -> OutputMeta {
        OutputMeta {
            seed: self.seed,
            config_hash: self.config_hash.clone(),
        }
    }

    fn add_stats(&mut self, key: impl Into<String>, values: &[f64]) {
        if let Some(s) = Stats::of(values) {
            self.aggregate.insert(key.into(), s);
        }
    }

    /// Writes `report.json`, plus `trials.csv` for the CSV format.
    pub fn write(&self, dir: &Path, format: Format) -> Result<()> {
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        if format == Format::Csv {
            self.write_trials_csv(&dir.join("trials.csv"))?;
        }
        Ok(())
    }

    fn write_trials_csv(&self, path: &Path) -> Result<()> {
        let mut params: Vec<&String> = self.trials.iter().flat_map(|t| t.params.keys()).collect();
        let mut metrics: Vec<&String> = self.trials.iter().flat_map(|t| t.metrics.keys()).collect();
        params.sort();
        params.dedup();
        metrics.sort();
        metrics.dedup();
        let mut out = String::from("index,seed,truth_phi,truth_theta,est_phi,est_theta,dphi,dtheta,l2,ate");
        for k in params.iter().chain(&metrics) {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for t in &self.trials {
            let cells = [
                opt(t.truth.map(|d| d.phi)),
                opt(t.truth.map(|d| d.theta)),
                opt(t.estimate.map(|e| e.direction.phi)),
                opt(t.estimate.map(|e| e.direction.theta)),
                opt(t.error.map(|e| e.dphi)),
                opt(t.error.map(|e| e.dtheta)),
                opt(t.error.map(|e| e.l2)),
                opt(t.ate),
            ];
            out.push_str(&format!("{},{},{}", t.index, t.seed, cells.join(",")));
            for k in &params {
                out.push(',');
                out.push_str(&opt(t.params.get(*k).copied()));
            }
            for k in &metrics {
                out.push(',');
                out.push_str(&opt(t.metrics.get(*k).copied()));
            }
            out.push('\n');
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the configured base seed.
    pub seed: Option<u64>,
    /// Overrides the configured trial count where one applies.
    pub trials: Option<usize>,
    pub format: Format,
    /// Output directory; nothing is written when absent.
    pub out: Option<PathBuf>,
}

impl RunOptions {
    fn prepare_out(&self) -> Result<Option<&Path>> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                Ok(Some(dir))
            }
            None => Ok(None),
        }
    }

    fn trial_count(&self, default: usize) -> Result<usize> {
        match self.trials.unwrap_or(default) {
            0 => Err(Error::Config("--trials must be >= 1".into())),
            n => Ok(n),
        }
    }
}

/// Reads a JSON config, rejecting unknown keys.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn trial_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// Seed for odometry noise, decorrelated from the channel-noise streams.
fn odometry_seed(seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng.next_u64()
}

fn write_config_dump<T: Serialize>(dir: &Path, config: &T) -> Result<()> {
    let path = dir.join("config.json");
    let text = serde_json::to_string_pretty(config).map_err(|e| Error::Numeric(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

// ---------------------------------------------------------------- profile

/// Noiseless helix scenario looking at the canonical direction from 100 m.
///
/// Closer in, the spherical wavefront biases planar steering: at 10 m the
/// elevation estimate is off by 2°.
pub fn default_profile_scenario() -> Scenario {
    Scenario {
        rx: RxSource::Geometry(GeometrySpec::new(GeometryKind::Helix)),
        rx_frame: Default::default(),
        tx: Some(TxSource::Static {
            direction: canonical_direction(),
            distance: 100.0,
        }),
        channel: ChannelParams::default(),
        steering: None,
        noise: None,
        truth: None,
        seed: 0,
    }
    .resolved()
}

/// Helix receiver with a transmitter drifting at 0.1 m/s along +x.
pub fn default_moving_ends_scenario() -> Scenario {
    let rx = GeometrySpec::new(GeometryKind::Helix);
    let tx = GeometrySpec::line(90.0, 0.0, 0.1 * rx.duration, rx.num_samples);
    Scenario {
        rx: RxSource::Geometry(rx),
        rx_frame: Default::default(),
        tx: Some(TxSource::Geometry {
            spec: tx,
            direction: canonical_direction(),
            distance: 100.0,
            frame: Default::default(),
        }),
        channel: ChannelParams::with_model(ChannelModel::PlanarFarfield),
        steering: None,
        noise: None,
        truth: None,
        seed: 0,
    }
    .resolved()
}

pub struct ProfileRun {
    pub profiles: Vec<AoaProfile>,
    pub report: RunReport,
}

fn profile_file_name(i: usize, trials: usize, format: Format) -> String {
    if trials == 1 {
        format!("profile.{}", format.extension())
    } else {
        format!("profile_{i:03}.{}", format.extension())
    }
}

/// One pass of simulate (or replay) → steer → peak → error.
fn profile_trial(s: &Scenario, inputs: &Inputs, index: usize, seed: u64) -> Result<(AoaProfile, TrialRecord)> {
    let (dataset, steering) = match (&inputs.dataset, &inputs.tx) {
        (Some(ds), _) => (ds.clone(), inputs.rx.clone()),
        (None, Some(tx)) => {
            let ds = simulate_dataset(&inputs.rx, tx, &s.channel, seed)?;
            let traj = ds.trajectory()?;
            (ds, traj)
        }
        (None, None) => return Err(Error::Config("scenario has neither a dataset nor a transmitter".into())),
    };
    let mut record = TrialRecord {
        index,
        seed,
        truth: s.truth_direction(),
        ..Default::default()
    };
    let steering = match &s.noise {
        Some(spec) => {
            let noisy = apply_noise(&steering, spec, odometry_seed(seed))?;
            record.ate = Some(ate_trans(&steering, &noisy)?);
            noisy
        }
        None => steering,
    };
    let profile = bartlett_profile_with(&dataset, &steering, s.channel.wavelength, s.steering_model())?;
    let peak = find_peak(&profile);
    record.estimate = Some(peak);
    record.error = record.truth.map(|t| aoa_error(&t, &peak.direction));
    Ok((profile, record))
}

fn run_profile_like(command: &str, s: &Scenario, base_dir: &Path, opts: &RunOptions) -> Result<ProfileRun> {
    let s = match opts.seed {
        Some(seed) => s.with_seed(seed),
        None => s.clone(),
    }
    .resolved();
    s.validate()?;
    let trials = opts.trial_count(1)?;
    let inputs = load_inputs(&s, base_dir)?;
    let mut report = RunReport::new(command, s.seed, &s);
    if s.tx.is_some() && !crate::trajgen::check_min_aperture(&inputs.rx, s.channel.wavelength) {
        report.notes.push("receiver path is shorter than two wavelengths".into());
    }
    let out = opts.prepare_out()?;
    let mut profiles = Vec::with_capacity(trials);
    for i in 0..trials {
        let (profile, record) = profile_trial(&s, &inputs, i, trial_seed(s.seed, i))?;
        if let Some(dir) = out {
            write_profile(&profile, &report.meta(), &dir.join(profile_file_name(i, trials, opts.format)), opts.format)?;
        }
        report.trials.push(record);
        profiles.push(profile);
    }
    let errs = |f: fn(&AoaError) -> f64| -> Vec<f64> { report.trials.iter().filter_map(|t| t.error.as_ref().map(f)).collect() };
    let (dphi, dtheta, l2) = (errs(|e| e.dphi.abs()), errs(|e| e.dtheta.abs()), errs(|e| e.l2));
    report.add_stats("abs_dphi", &dphi);
    report.add_stats("abs_dtheta", &dtheta);
    report.add_stats("l2", &l2);
    let ates: Vec<f64> = report.trials.iter().filter_map(|t| t.ate).collect();
    report.add_stats("ate", &ates);
    if let Some(dir) = out {
        write_config_dump(dir, &s)?;
        report.write(dir, opts.format)?;
    }
    Ok(ProfileRun { profiles, report })
}

/// End-to-end pipeline for one scenario.
///
/// Relative file paths in the scenario resolve against `base_dir`.
pub fn run_profile(s: &Scenario, base_dir: &Path, opts: &RunOptions) -> Result<ProfileRun> {
    run_profile_like("profile", s, base_dir, opts)
}

/// Same pipeline for two moving robots: steering runs over the receiver's
/// displacement relative to the transmitter, after each robot's frame
/// correction, and the estimate is scored against the direction at the
/// first timestamp.
pub fn run_moving_ends(s: &Scenario, base_dir: &Path, opts: &RunOptions) -> Result<ProfileRun> {
    let Some(tx) = &s.tx else {
        return Err(Error::Config("moving_ends needs a transmitter".into()));
    };
    let mut run = run_profile_like("moving_ends", s, base_dir, opts)?;
    if let TxSource::Geometry { .. } | TxSource::TrajectoryFile { .. } = tx {
        let inputs = load_inputs(s, base_dir)?;
        if let Some(Transmitter { path: TxPath::Moving(t), .. }) = &inputs.tx {
            run.report.summary.insert("tx_path_length".into(), t.path_length());
            run.report.summary.insert("rx_path_length".into(), inputs.rx.path_length());
        }
        if let Some(dir) = &opts.out {
            run.report.write(dir, opts.format)?;
        }
    }
    Ok(run)
}

// ----------------------------------------------------------------- lemmas

/// Setup shared by both drift lemmas: the receiver starts at the origin and
/// then visits points at range `radius` sweeping the full azimuth while its
/// elevation swings ±45° around the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSetup {
    pub radius: f64,
    pub num_samples: usize,
    pub duration: f64,
    pub distance: f64,
    pub wavelength: f64,
    pub truth: Direction,
}

impl Default for LemmaSetup {
    fn default() -> Self {
        Self {
            radius: 0.3,
            num_samples: DEFAULT_NUM_SAMPLES,
            duration: DEFAULT_DURATION_S,
            distance: 100.0,
            wavelength: DEFAULT_WAVELENGTH_M,
            truth: canonical_direction(),
        }
    }
}

impl LemmaSetup {
    fn validate(&self) -> Result<()> {
        let positive = [self.radius, self.duration, self.distance, self.wavelength];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("radius, duration, distance and wavelength must be > 0".into()));
        }
        if self.num_samples < 2 {
            return Err(Error::Config("num_samples must be >= 2".into()));
        }
        self.truth.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let m = self.num_samples;
        let times: Vec<f64> = (0..m).map(|u| self.duration * u as f64 / (m - 1) as f64).collect();
        let positions: Vec<CartesianPosition> = (0..m)
            .map(|u| {
                if u == 0 {
                    return CartesianPosition::ORIGIN;
                }
                let frac = u as f64 / m as f64;
                let azimuth = 360.0 * frac - 180.0;
                let elevation = 90.0 + 45.0 * (4.0 * PI * frac).sin();
                spherical_point(self.radius, azimuth, elevation)
            })
            .collect();
        Trajectory::from_positions(&times, &positions, "lemma")
    }

    fn products(&self, traj: &Trajectory) -> Result<Vec<Complex>> {
        let params = ChannelParams {
            wavelength: self.wavelength,
            model: ChannelModel::ArcModel,
            arc_distance: Some(self.distance),
            ..ChannelParams::default()
        };
        let tx = Transmitter::fixed(self.truth, self.distance);
        let ds = simulate_dataset(traj, &tx, &params, 0)?;
        Ok(ds.records().iter().map(cfo_cancelled_product).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lemma1Config {
    pub setup: LemmaSetup,
    pub kappa_phi: Vec<f64>,
    pub kappa_theta: Vec<f64>,
    pub seed: u64,
}

impl Default for Lemma1Config {
    fn default() -> Self {
        Self {
            setup: LemmaSetup::default(),
            kappa_phi: vec![-10.0, 0.0, 10.0],
            kappa_theta: vec![-10.0, 0.0, 10.0],
            seed: 0,
        }
    }
}

/// Constant angular offset sweep: the profile peak should move by exactly
/// `(−κ_φ, −κ_θ)`.
pub fn run_lemma1(cfg: &Lemma1Config, opts: &RunOptions) -> Result<RunReport> {
    cfg.setup.validate()?;
    let mut cfg = cfg.clone();
    cfg.seed = opts.seed.unwrap_or(cfg.seed);
    let traj = cfg.setup.trajectory()?;
    let dataset = {
        let params = ChannelParams {
            wavelength: cfg.setup.wavelength,
            model: ChannelModel::ArcModel,
            arc_distance: Some(cfg.setup.distance),
            ..ChannelParams::default()
        };
        simulate_dataset(&traj, &Transmitter::fixed(cfg.setup.truth, cfg.setup.distance), &params, cfg.seed)?
    };
    let clean = dataset.trajectory()?;
    let truth = cfg.setup.truth;
    let mut report = RunReport::new("lemma1", cfg.seed, &cfg);
    let mut index = 0;
    for &kp in &cfg.kappa_phi {
        for &kt in &cfg.kappa_theta {
            let noisy = apply_noise(&clean, &NoiseSpec::constant(kp, kt), cfg.seed)?;
            let profile = bartlett_profile_with(&dataset, &noisy, cfg.setup.wavelength, SteeringModel::Arc)?;
            let peak = find_peak(&profile);
            let shift_phi = wrap_difference(peak.direction.phi - truth.phi);
            let shift_theta = peak.direction.theta - truth.theta;
            let residual_phi = wrap_difference(shift_phi + kp);
            let residual_theta = shift_theta + kt;
            report.trials.push(TrialRecord {
                index,
                seed: cfg.seed,
                truth: Some(truth),
                estimate: Some(peak),
                error: Some(aoa_error(&truth, &peak.direction)),
                params: BTreeMap::from([("kappa_phi".into(), kp), ("kappa_theta".into(), kt)]),
                metrics: BTreeMap::from([
                    ("shift_phi".into(), shift_phi),
                    ("shift_theta".into(), shift_theta),
                    ("expected_shift_phi".into(), -kp),
                    ("expected_shift_theta".into(), -kt),
                    ("residual_phi".into(), residual_phi),
                    ("residual_theta".into(), residual_theta),
                ]),
                ..Default::default()
            });
            index += 1;
        }
    }
    let col = |k: &str| -> Vec<f64> { report.trials.iter().map(|t| t.metrics[k].abs()).collect() };
    let (rp, rt) = (col("residual_phi"), col("residual_theta"));
    report.summary.insert("max_abs_residual_phi".into(), rp.iter().copied().fold(0.0, f64::max));
    report.summary.insert("max_abs_residual_theta".into(), rt.iter().copied().fold(0.0, f64::max));
    report.add_stats("abs_residual_phi", &rp);
    report.add_stats("abs_residual_theta", &rt);
    report.notes.push("shift = estimate − truth; expected (−kappa_phi, −kappa_theta)".into());
    if let Some(dir) = opts.prepare_out()? {
        report.write(dir, opts.format)?;
    }
    Ok(report)
}

/// Range at which a unit change in the arc projection moves the
/// forward×reverse phase by one radian.
pub fn unit_phase_radius(wavelength: f64) -> f64 {
    wavelength / (4.0 * PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lemma2Config {
    pub setup: LemmaSetup,
    /// Values of `δ_max + μ_max` in degrees, split evenly between the two.
    pub total_deviation: Vec<f64>,
    pub seed: u64,
}

impl Default for Lemma2Config {
    fn default() -> Self {
        let setup = LemmaSetup::default();
        Self {
            setup: LemmaSetup {
                radius: unit_phase_radius(setup.wavelength),
                ..setup
            },
            total_deviation: vec![0.0, 4.0, 10.0, 20.0],
            seed: 0,
        }
    }
}

/// Alternating worst-case deviations: the coherent sum at the true
/// direction keeps at least `cos((δ_max+μ_max)/2)` of its clean modulus.
pub fn run_lemma2(cfg: &Lemma2Config, opts: &RunOptions) -> Result<RunReport> {
    cfg.setup.validate()?;
    let mut cfg = cfg.clone();
    cfg.seed = opts.seed.unwrap_or(cfg.seed);
    let traj = cfg.setup.trajectory()?;
    let products = cfg.setup.products(&traj)?;
    let truth = cfg.setup.truth;
    let effective = cfg.setup.wavelength / 2.0;
    let modulus = |t: &Trajectory| -> Result<f64> {
        let elements: Vec<_> = rebase(t)?.positions().into_iter().map(cart_to_sph).collect();
        Ok(steered_sum(&products, &elements, &truth, effective, SteeringModel::Arc).norm())
    };
    let clean = modulus(&traj)?;
    if clean == 0.0 {
        return Err(Error::Numeric("clean coherent sum vanished".into()));
    }
    let mut report = RunReport::new("lemma2", cfg.seed, &cfg);
    for (index, &total) in cfg.total_deviation.iter().enumerate() {
        let half = total / 2.0;
        let spec = NoiseSpec::varying(0.0, 0.0, half, half, true);
        let noisy = apply_noise(&traj, &spec, cfg.seed)?;
        let ratio = modulus(&noisy)? / clean;
        let bound = (total / 2.0).to_radians().cos();
        report.trials.push(TrialRecord {
            index,
            seed: cfg.seed,
            truth: Some(truth),
            params: BTreeMap::from([
                ("delta_max".into(), half),
                ("mu_max".into(), half),
                ("total_deviation".into(), total),
            ]),
            metrics: BTreeMap::from([
                ("ratio".into(), ratio),
                ("bound".into(), bound),
                ("margin".into(), ratio - bound),
            ]),
            ..Default::default()
        });
    }
    let margins: Vec<f64> = report.trials.iter().map(|t| t.metrics["margin"]).collect();
    report.summary.insert("min_margin".into(), margins.iter().copied().fold(f64::INFINITY, f64::min));
    report.add_stats("margin", &margins);
    report.notes.push("ratio = |sum with deviations| / |clean sum|, both steered at the truth".into());
    if let Some(dir) = opts.prepare_out()? {
        report.write(dir, opts.format)?;
    }
    Ok(report)
}

// -------------------------------------------------------------------- crb

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrbCdfConfig {
    pub geometries: Vec<GeometryKind>,
    /// Every geometry is sized to this path length, metres.
    pub path_length: f64,
    /// Sample count for the line's finite sums.
    pub num_samples: usize,
    pub line_angles: [f64; 2],
    pub wavelength: f64,
    pub snr: f64,
    pub mode: CrbMode,
    pub seed: u64,
}

impl Default for CrbCdfConfig {
    fn default() -> Self {
        Self {
            geometries: vec![GeometryKind::Helix, GeometryKind::Circle, GeometryKind::Line],
            path_length: 3.14,
            num_samples: DEFAULT_NUM_SAMPLES,
            line_angles: [90.0, 0.0],
            wavelength: DEFAULT_WAVELENGTH_M,
            snr: 1.0,
            mode: CrbMode::Canonical,
            seed: 0,
        }
    }
}

pub struct CrbRun {
    pub maps: Vec<(GeometryKind, InformativenessMap)>,
    pub report: RunReport,
}

fn kind_name(kind: GeometryKind) -> &'static str {
    match kind {
        GeometryKind::Helix => "helix",
        GeometryKind::Circle => "circle",
        GeometryKind::Line => "line",
        GeometryKind::Waypoints => "waypoints",
    }
}

/// Informativeness maps and CRB distributions for equal-length geometries.
///
/// Helix and circle use their closed forms, the line its finite sums.
pub fn run_crb_cdf(cfg: &CrbCdfConfig, opts: &RunOptions) -> Result<CrbRun> {
    let mut cfg = cfg.clone();
    cfg.seed = opts.seed.unwrap_or(cfg.seed);
    if cfg.geometries.is_empty() {
        return Err(Error::Config("no geometries requested".into()));
    }
    if !(cfg.path_length.is_finite() && cfg.path_length > 0.0) {
        return Err(Error::Config("path_length must be > 0".into()));
    }
    let out = opts.prepare_out()?;
    let mut report = RunReport::new("crb_cdf", cfg.seed, &cfg);
    let meta = report.meta();
    let mut maps = Vec::new();
    for (index, &kind) in cfg.geometries.iter().enumerate() {
        let line = GeometrySpec::line(cfg.line_angles[0], cfg.line_angles[1], cfg.path_length, cfg.num_samples);
        let (source, size) = match kind {
            GeometryKind::Helix => {
                let r = helix_radius_for_length(cfg.path_length);
                (FimSource::HelixClosedForm { radius: r }, r)
            }
            GeometryKind::Circle => {
                let r = cfg.path_length / (2.0 * PI);
                (FimSource::CircleClosedForm { radius: r }, r)
            }
            GeometryKind::Line => (FimSource::Line(&line), cfg.path_length),
            GeometryKind::Waypoints => {
                return Err(Error::Config("crb_cdf supports helix, circle and line".into()))
            }
        };
        let map = informativeness_map(source, cfg.wavelength, cfg.snr, cfg.mode)?;
        let name = kind_name(kind);
        let cdf_theta = crb_cdf(&map.crb_theta)?;
        let cdf_phi = crb_cdf(&map.crb_phi)?;
        if let Some(dir) = out {
            let ext = opts.format.extension();
            write_map(&map, &meta, &dir.join(format!("crb_map_{name}.{ext}")), opts.format)?;
            write_cdf(&cdf_theta, "crb_theta", &meta, &dir.join(format!("crb_cdf_{name}_theta.{ext}")), opts.format)?;
            write_cdf(&cdf_phi, "crb_phi", &meta, &dir.join(format!("crb_cdf_{name}_phi.{ext}")), opts.format)?;
        }
        let row90 = (0..360).filter(|&i| map.crb_theta[i * ELEVATION_CELLS + 90].is_infinite()).count();
        let metrics = BTreeMap::from([
            ("median_crb_theta".into(), cdf_theta.quantile(0.5)),
            ("median_crb_phi".into(), cdf_phi.quantile(0.5)),
            ("inf_mass_theta".into(), cdf_theta.inf_mass()),
            ("inf_mass_phi".into(), cdf_phi.inf_mass()),
            ("row90_inf_fraction_theta".into(), row90 as f64 / 360.0),
        ]);
        for (k, v) in &metrics {
            report.summary.insert(format!("{name}/{k}"), *v);
        }
        report.add_stats(format!("{name}/crb_theta"), &map.crb_theta);
        report.add_stats(format!("{name}/crb_phi"), &map.crb_phi);
        let size_key = if kind == GeometryKind::Line { "length" } else { "radius" };
        report.trials.push(TrialRecord {
            index,
            seed: cfg.seed,
            params: BTreeMap::from([(size_key.into(), size)]),
            metrics,
            ..Default::default()
        });
        maps.push((kind, map));
    }
    // pairwise dominance on the median crb_phi, in the requested order
    for (i, a) in cfg.geometries.iter().enumerate() {
        for b in &cfg.geometries[i + 1..] {
            let (ma, mb) = (
                report.summary[&format!("{}/median_crb_phi", kind_name(*a))],
                report.summary[&format!("{}/median_crb_phi", kind_name(*b))],
            );
            report.notes.push(format!(
                "median crb_phi {} < {}: {}",
                kind_name(*a),
                kind_name(*b),
                ma < mb
            ));
        }
    }
    if let Some(i) = cfg.geometries.iter().position(|k| *k == GeometryKind::Circle) {
        let frac = report.trials[i].metrics["row90_inf_fraction_theta"];
        report.notes.push(format!("circle crb_theta infinite on the theta=90 row: {:.1}%", 100.0 * frac));
    }
    if let Some(dir) = out {
        report.write(dir, opts.format)?;
    }
    Ok(CrbRun { maps, report })
}

// -------------------------------------------------------------- ATE sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AteSweepConfig {
    pub targets: Vec<f64>,
    pub trials: usize,
}

impl Default for AteSweepConfig {
    fn default() -> Self {
        Self {
            targets: vec![0.1, 0.15, 0.2],
            trials: 100,
        }
    }
}

/// Helix with a 3.14 m path and 500 samples, transmitter 100 m away along
/// the canonical direction, odometry corrupted by a Gaussian random walk.
pub fn default_ate_scenario() -> Scenario {
    let radius = helix_radius_for_length(3.14);
    Scenario {
        rx: RxSource::Geometry(GeometrySpec::helix(radius, 500)),
        rx_frame: Default::default(),
        tx: Some(TxSource::Static {
            direction: canonical_direction(),
            distance: 100.0,
        }),
        channel: ChannelParams::default(),
        steering: None,
        noise: Some(NoiseSpec::cumulative(0.01, None)),
        truth: None,
        seed: 0,
    }
    .resolved()
}

/// Least-squares slope of `y` against `x`; NaN when `x` is constant.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// AOA error against odometry quality. Channel samples stay clean; only the
/// steering trajectory carries the random walk, rescaled to each target
/// ATE. Trial `i` reuses the same walk shape at every target.
pub fn run_ate_sweep(s: &Scenario, cfg: &AteSweepConfig, base_dir: &Path, opts: &RunOptions) -> Result<RunReport> {
    let s = match opts.seed {
        Some(seed) => s.with_seed(seed),
        None => s.clone(),
    }
    .resolved();
    s.validate()?;
    let noise = match &s.noise {
        Some(n) if n.kind == NoiseKind::CumulativeGaussian && n.sigma_step > 0.0 => n.clone(),
        _ => return Err(Error::Config("ate_sweep needs cumulative_gaussian noise with sigma_step > 0".into())),
    };
    if cfg.targets.is_empty() || cfg.targets.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Config("targets must be a non-empty list of values >= 0".into()));
    }
    let Some(truth) = s.truth_direction() else {
        return Err(Error::Config("ate_sweep needs a truth direction".into()));
    };
    let mut cfg = cfg.clone();
    cfg.trials = opts.trial_count(cfg.trials)?;
    let inputs = load_inputs(&s, base_dir)?;
    let Some(tx) = &inputs.tx else {
        return Err(Error::Config("ate_sweep simulates its channel and needs a transmitter".into()));
    };

    #[derive(Serialize)]
    struct Config<'a> {
        scenario: &'a Scenario,
        sweep: &'a AteSweepConfig,
    }
    let mut report = RunReport::new("ate_sweep", s.seed, &Config { scenario: &s, sweep: &cfg });
    let model = s.steering_model();
    let mut index = 0;
    let mut per_target: Vec<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    for &target in &cfg.targets {
        let (mut dphi, mut dtheta, mut l2) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..cfg.trials {
            let seed = trial_seed(s.seed, i);
            let ds = simulate_dataset(&inputs.rx, tx, &s.channel, seed)?;
            let clean = ds.trajectory()?;
            let steering = if target == 0.0 {
                clean.clone()
            } else {
                let walk = add_cumulative_gaussian(&clean, &noise, odometry_seed(seed))?;
                scale_to_target_ate(&clean, &walk, target)?
            };
            let ate = ate_trans(&clean, &steering)?;
            let profile = bartlett_profile_with(&ds, &steering, s.channel.wavelength, model)?;
            let peak = find_peak(&profile);
            let err = aoa_error(&truth, &peak.direction);
            dphi.push(err.dphi.abs());
            dtheta.push(err.dtheta.abs());
            l2.push(err.l2);
            report.trials.push(TrialRecord {
                index,
                seed,
                truth: Some(truth),
                estimate: Some(peak),
                error: Some(err),
                ate: Some(ate),
                params: BTreeMap::from([("target_ate".into(), target)]),
                ..Default::default()
            });
            index += 1;
        }
        log::info!("target ATE {target} m done");
        per_target.push((target, dphi, dtheta, l2));
    }
    let mut medians: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let targets: Vec<f64> = per_target.iter().map(|p| p.0).collect();
    for (target, dphi, dtheta, l2) in &per_target {
        for (name, v) in [("abs_dphi", dphi), ("abs_dtheta", dtheta), ("l2", l2)] {
            let st = Stats::of(v).expect("trials >= 1");
            report.aggregate.insert(format!("ate={target}/{name}"), st);
            medians.entry(name).or_default().push(st.median);
            if name == "l2" {
                medians.entry("l2_p95").or_default().push(st.p95);
            }
        }
    }
    if targets.len() > 1 {
        for (name, v) in &medians {
            let key = if name.ends_with("p95") { format!("slope_{name}") } else { format!("slope_median_{name}") };
            report.summary.insert(key, linear_slope(&targets, v));
        }
        let xs: Vec<f64> = report.trials.iter().map(|t| t.ate.unwrap_or(0.0)).collect();
        let ys: Vec<f64> = report.trials.iter().filter_map(|t| t.error.map(|e| e.l2)).collect();
        report.summary.insert("slope_l2_all_trials".into(), linear_slope(&xs, &ys));
        for name in ["abs_dphi", "abs_dtheta"] {
            let m = &medians[name];
            let monotone = m.windows(2).all(|w| w[1] > w[0]);
            report.notes.push(format!("median {name} strictly increasing with ATE: {monotone}"));
        }
    }
    if let Some(dir) = opts.prepare_out()? {
        write_config_dump(dir, &s)?;
        report.write(dir, opts.format)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn stats_use_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        let s = Stats::of(&v).unwrap();
        assert_eq!(s.count, 20);
        assert_eq!(s.median, 10.5);
        assert_eq!(s.p95, 19.0);
        assert_eq!(s.mean, 10.5);
        assert_eq!(Stats::of(&[3.0, f64::INFINITY]).unwrap().count, 1);
        assert!(Stats::of(&[]).is_none());
    }

    #[test]
    fn slope_of_a_line() {
        assert!((linear_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
        assert!(linear_slope(&[1.0, 1.0], &[0.0, 2.0]).is_nan());
    }

    #[test]
    fn canonical_profile_is_within_grid_quantization() {
        let run = run_profile(&default_profile_scenario(), Path::new("."), &RunOptions::default()).unwrap();
        let err = run.report.trials[0].error.unwrap();
        assert!(err.l2 <= 1.5, "{err:?}");
    }

    #[test]
    fn cfo_does_not_move_the_peak() {
        let base = default_profile_scenario();
        let mut shifted = base.clone();
        shifted.channel.cfo_hz = 20e3;
        let a = run_profile(&base, Path::new("."), &RunOptions::default()).unwrap();
        let b = run_profile(&shifted, Path::new("."), &RunOptions::default()).unwrap();
        assert_eq!(a.report.trials[0].estimate.unwrap().direction, b.report.trials[0].estimate.unwrap().direction);
    }

    #[test]
    fn dataset_without_truth_has_no_error_field() {
        let dir = tempdir().unwrap();
        let s = default_profile_scenario();
        let inputs = load_inputs(&s, dir.path()).unwrap();
        let ds = simulate_dataset(&inputs.rx, inputs.tx.as_ref().unwrap(), &s.channel, 0).unwrap();
        crate::ingest::write_dataset(&ds, &dir.path().join("d.csv")).unwrap();
        let replay = crate::ingest::parse_scenario(r#"{"rx": {"dataset_file": "d.csv"}}"#).unwrap();
        let opts = RunOptions {
            out: Some(dir.path().join("out")),
            ..Default::default()
        };
        let run = run_profile(&replay, dir.path(), &opts).unwrap();
        let t = &run.report.trials[0];
        assert!(t.estimate.is_some() && t.error.is_none() && t.truth.is_none());
        let json = fs::read_to_string(dir.path().join("out/report.json")).unwrap();
        assert!(!json.contains("\"error\""));
        assert!(dir.path().join("out/profile.json").exists());
    }

    #[test]
    fn lemma2_without_deviation_is_lossless() {
        let cfg = Lemma2Config {
            total_deviation: vec![0.0],
            ..Default::default()
        };
        let r = run_lemma2(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(r.trials[0].metrics["ratio"], 1.0);
    }

    #[test]
    fn lemma1_small_offset() {
        let cfg = Lemma1Config {
            kappa_phi: vec![5.0],
            kappa_theta: vec![3.0],
            ..Default::default()
        };
        let r = run_lemma1(&cfg, &RunOptions::default()).unwrap();
        let m = &r.trials[0].metrics;
        assert!(m["residual_phi"].abs() <= 1.0 && m["residual_theta"].abs() <= 1.0, "{m:?}");
    }

    #[test]
    fn single_geometry_writes_one_cdf_pair() {
        let dir = tempdir().unwrap();
        let cfg = CrbCdfConfig {
            geometries: vec![GeometryKind::Circle],
            ..Default::default()
        };
        let opts = RunOptions {
            out: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let run = run_crb_cdf(&cfg, &opts).unwrap();
        assert_eq!(run.maps.len(), 1);
        let mut names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(
            names,
            ["crb_cdf_circle_phi.json", "crb_cdf_circle_theta.json", "crb_map_circle.json", "report.json"]
        );
        assert_eq!(run.report.summary["circle/row90_inf_fraction_theta"], 1.0);
    }

    #[test]
    fn zero_target_matches_noiseless_baseline() {
        let s = default_ate_scenario();
        let cfg = AteSweepConfig {
            targets: vec![0.0],
            trials: 1,
        };
        let r = run_ate_sweep(&s, &cfg, Path::new("."), &RunOptions::default()).unwrap();
        let mut clean = s.clone();
        clean.noise = None;
        let base = run_profile(&clean, Path::new("."), &RunOptions::default()).unwrap();
        assert_eq!(r.trials[0].estimate, base.report.trials[0].estimate);
        assert_eq!(r.trials[0].ate, Some(0.0));
    }

    #[test]
    fn static_moving_ends_equals_profile() {
        let s = default_profile_scenario();
        let a = run_profile(&s, Path::new("."), &RunOptions::default()).unwrap();
        let b = run_moving_ends(&s, Path::new("."), &RunOptions::default()).unwrap();
        assert_eq!(a.profiles, b.profiles);
    }
}
