//! File formats: datasets, trajectories, scenarios and result grids.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aoa::{azimuth_of, elevation_of, AoaProfile, SteeringModel, AZIMUTH_CELLS, ELEVATION_CELLS, GRID_CELLS};
use crate::channel::{ChannelModel, ChannelParams, Complex, Dataset, DatasetMeta, PacketRecord, Transmitter, TxPath};
use crate::crb::{crb_cdf, CrbCdf, InformativenessMap, Quantiles};
use crate::error::{Error, Result};
use crate::geometry::{align_north_down, yaw_rotation, CartesianPosition, Direction, Pose, Trajectory};
use crate::noise::NoiseSpec;
use crate::trajgen::{generate, GeometrySpec};

pub const DATASET_FORMAT: &str = "wsr_dataset_v1";
pub const TRAJECTORY_FORMAT: &str = "wsr_trajectory_v1";
pub const PROFILE_FORMAT: &str = "wsr_profile_v1";
pub const MAP_FORMAT: &str = "wsr_crb_map_v1";
pub const CDF_FORMAT: &str = "wsr_crb_cdf_v1";

const DATASET_HEADER: [&str; 8] = ["t", "x", "y", "z", "fwd_re", "fwd_im", "rev_re", "rev_im"];
const TRAJECTORY_HEADER: [&str; 13] = [
    "t", "x", "y", "z", "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// `inf` for infinities, otherwise the shortest text that parses back to `v`.
fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

struct NumericCsv {
    comments: Vec<String>,
    rows: Vec<(u64, Vec<f64>)>,
}

/// Reads a `#`-commented numeric CSV whose header must equal `header`.
fn read_numeric_csv(path: &Path, header: &[&str]) -> Result<NumericCsv> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let comments = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l[1..].trim().to_string())
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let first = records
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing header"))?
        .map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
    let line = first.position().map_or(1, |p| p.line());
    if first.iter().ne(header.iter().copied()) {
        return Err(parse_err(path, line, format!("expected header `{}`", header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, got {}", header.len(), rec.len()),
            ));
        }
        let vals = rec
            .iter()
            .zip(header)
            .map(|(field, name)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(parse_err(path, line, format!("non-finite `{name}`"))),
                Err(_) => Err(parse_err(path, line, format!("`{name}` is not a number: {field:?}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some((prev_line, prev)) = rows.last() {
            let prev: &Vec<f64> = prev;
            if !(vals[0] > prev[0]) {
                return Err(parse_err(
                    path,
                    line,
                    format!("time {} does not increase after line {prev_line}", vals[0]),
                ));
            }
        }
        rows.push((line, vals));
    }
    Ok(NumericCsv { comments, rows })
}

fn comment_value<'a>(comments: &'a [String], key: &str) -> Option<&'a str> {
    comments.iter().find_map(|c| c.strip_prefix(key)?.strip_prefix('='))
}

fn check_version(path: &Path, comments: &[String], expected: &str) -> Result<()> {
    match comments.first() {
        Some(c) if c.starts_with("wsr_") && c != expected => {
            Err(parse_err(path, 1, format!("unsupported format `{c}`, expected `{expected}`")))
        }
        _ => Ok(()),
    }
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut head = format!("# {DATASET_FORMAT}\n");
    if let Some(p) = ds.params() {
        let json = serde_json::to_string(p).map_err(|e| Error::Numeric(e.to_string()))?;
        head.push_str(&format!("# channel={json}\n"));
    }
    head.push_str(&format!("# rx_frame={}\n", ds.meta().rx_frame));
    if let Some(tx) = &ds.meta().tx_frame {
        head.push_str(&format!("# tx_frame={tx}\n"));
    }
    head.push_str(&DATASET_HEADER.join(","));
    head.push('\n');
    w.write_all(head.as_bytes()).map_err(|e| Error::io(path, e))?;
    for r in ds.records() {
        let p = r.rx_position;
        let row = [r.time, p.x, p.y, p.z, r.fwd.re, r.fwd.im, r.rev.re, r.rev.im]
            .map(fmt_f64)
            .join(",");
        writeln!(w, "{row}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let csv = read_numeric_csv(path, &DATASET_HEADER)?;
    check_version(path, &csv.comments, DATASET_FORMAT)?;
    let params = match comment_value(&csv.comments, "channel") {
        Some(json) => Some(
            serde_json::from_str::<ChannelParams>(json)
                .map_err(|e| parse_err(path, 0, format!("bad channel comment: {e}")))?,
        ),
        None => None,
    };
    let meta = DatasetMeta {
        rx_frame: comment_value(&csv.comments, "rx_frame").unwrap_or("rx").to_string(),
        tx_frame: comment_value(&csv.comments, "tx_frame").map(str::to_string),
    };
    let records = csv
        .rows
        .into_iter()
        .map(|(_, v)| PacketRecord {
            time: v[0],
            rx_position: CartesianPosition::new(v[1], v[2], v[3]),
            fwd: Complex::new(v[4], v[5]),
            rev: Complex::new(v[6], v[7]),
        })
        .collect();
    Dataset::new(records, params, meta)
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let head = format!(
        "# {TRAJECTORY_FORMAT}\n# frame={}\n{}\n",
        traj.frame_label(),
        TRAJECTORY_HEADER.join(",")
    );
    w.write_all(head.as_bytes()).map_err(|e| Error::io(path, e))?;
    for p in traj.poses() {
        let r = &p.orientation;
        let mut row = vec![p.time, p.position.x, p.position.y, p.position.z];
        for i in 0..3 {
            for j in 0..3 {
                row.push(r[(i, j)]);
            }
        }
        let row: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let csv = read_numeric_csv(path, &TRAJECTORY_HEADER)?;
    check_version(path, &csv.comments, TRAJECTORY_FORMAT)?;
    let poses = csv
        .rows
        .iter()
        .map(|(line, v)| {
            let rot = Matrix3::from_row_slice(&v[4..13]);
            Pose::new(v[0], CartesianPosition::new(v[1], v[2], v[3]), rot)
                .map_err(|e| parse_err(path, *line, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let label = comment_value(&csv.comments, "frame").unwrap_or("local");
    Trajectory::new(poses, label)
}

/// Yaw and translation taking a robot's local frame into the shared frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameAlignment {
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default)]
    pub translation: [f64; 3],
}

impl FrameAlignment {
    pub fn apply(&self, traj: &Trajectory) -> Result<Trajectory> {
        if !self.yaw_deg.is_finite() || self.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("frame alignment must be finite".into()));
        }
        let rotated = if self.yaw_deg == 0.0 {
            traj.clone()
        } else {
            align_north_down(traj, &yaw_rotation(self.yaw_deg))?
        };
        if self.translation == [0.0; 3] {
            return Ok(rotated);
        }
        let [x, y, z] = self.translation;
        let shift = CartesianPosition::new(x, y, z);
        let moved: Vec<_> = rotated.positions().iter().map(|p| *p + shift).collect();
        Ok(rotated.with_positions(&moved))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RxSource {
    Geometry(GeometrySpec),
    TrajectoryFile(PathBuf),
    DatasetFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TxSource {
    Static {
        direction: Direction,
        distance: f64,
    },
    Geometry {
        spec: GeometrySpec,
        direction: Direction,
        distance: f64,
        #[serde(default)]
        frame: FrameAlignment,
    },
    TrajectoryFile {
        path: PathBuf,
        direction: Direction,
        distance: f64,
        #[serde(default)]
        frame: FrameAlignment,
    },
}

impl TxSource {
    pub fn direction(&self) -> Direction {
        match self {
            TxSource::Static { direction, .. }
            | TxSource::Geometry { direction, .. }
            | TxSource::TrajectoryFile { direction, .. } => *direction,
        }
    }

    pub fn distance(&self) -> f64 {
        match self {
            TxSource::Static { distance, .. }
            | TxSource::Geometry { distance, .. }
            | TxSource::TrajectoryFile { distance, .. } => *distance,
        }
    }
}

/// One experiment: where the receiver path comes from, where the
/// transmitter is, how the channel behaves and how the odometry is corrupted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub rx: RxSource,
    #[serde(default)]
    pub rx_frame: FrameAlignment,
    #[serde(default)]
    pub tx: Option<TxSource>,
    #[serde(default)]
    pub channel: ChannelParams,
    /// Defaults to arc steering for arc-model channels and planar otherwise.
    #[serde(default)]
    pub steering: Option<SteeringModel>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub truth: Option<Direction>,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        match &self.rx {
            RxSource::Geometry(spec) => spec.validate().map_err(cfg)?,
            RxSource::TrajectoryFile(_) | RxSource::DatasetFile(_) => {}
        }
        match (&self.rx, &self.tx) {
            (RxSource::DatasetFile(_), Some(_)) => {
                return Err(Error::Config("tx must be omitted when rx is a dataset_file".into()))
            }
            (RxSource::Geometry(_) | RxSource::TrajectoryFile(_), None) => {
                return Err(Error::Config("tx is required to simulate a receiver path".into()))
            }
            _ => {}
        }
        if let Some(tx) = &self.tx {
            tx.direction().validate().map_err(cfg)?;
            let d = tx.distance();
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Config(format!("tx distance must be > 0, got {d}")));
            }
            if let TxSource::Geometry { spec, .. } = tx {
                spec.validate().map_err(cfg)?;
            }
        }
        self.channel.validate()?;
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        if let Some(t) = &self.truth {
            t.validate().map_err(cfg)?;
        }
        Ok(())
    }

    pub fn steering_model(&self) -> SteeringModel {
        self.steering.unwrap_or(match self.channel.model {
            ChannelModel::ArcModel => SteeringModel::Arc,
            _ => SteeringModel::Planar,
        })
    }

    /// Copy with every default written out explicitly.
    pub fn resolved(&self) -> Scenario {
        let mut s = self.clone();
        if let RxSource::Geometry(spec) = &mut s.rx {
            *spec = spec.resolved();
        }
        if let Some(TxSource::Geometry { spec, .. }) = &mut s.tx {
            *spec = spec.resolved();
        }
        if s.channel.model == ChannelModel::ArcModel && s.channel.arc_distance.is_none() {
            s.channel.arc_distance = s.tx.as_ref().map(TxSource::distance);
        }
        s.steering = Some(self.steering_model());
        s
    }

    pub fn with_seed(&self, seed: u64) -> Scenario {
        let mut s = self.clone();
        s.seed = seed;
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn config_hash(&self) -> String {
        config_hash(self)
    }

    /// Truth to score against: explicit, else the simulated transmitter direction.
    pub fn truth_direction(&self) -> Option<Direction> {
        self.truth.or_else(|| self.tx.as_ref().map(TxSource::direction))
    }
}

/// SHA-256 of the compact JSON form, hex encoded.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Parses, validates and resolves a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let s = s.resolved();
    s.validate()?;
    Ok(s)
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_scenario(s: &Scenario, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", s.to_json()).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// Trajectories and data a scenario refers to, in the shared frame.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub rx: Trajectory,
    pub tx: Option<Transmitter>,
    pub dataset: Option<Dataset>,
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads every referenced file (relative to `base_dir`) and generates
/// parametric paths.
pub fn load_inputs(s: &Scenario, base_dir: &Path) -> Result<Inputs> {
    let (rx, dataset) = match &s.rx {
        RxSource::Geometry(spec) => (generate(spec)?, None),
        RxSource::TrajectoryFile(p) => (read_trajectory(&resolve_path(base_dir, p))?, None),
        RxSource::DatasetFile(p) => {
            let ds = read_dataset(&resolve_path(base_dir, p))?;
            (ds.trajectory()?, Some(ds))
        }
    };
    let rx = s.rx_frame.apply(&rx)?;
    let tx = match &s.tx {
        None => None,
        Some(TxSource::Static { direction, distance }) => Some(Transmitter::fixed(*direction, *distance)),
        Some(TxSource::Geometry {
            spec,
            direction,
            distance,
            frame,
        }) => Some(Transmitter {
            direction: *direction,
            distance: *distance,
            path: TxPath::Moving(frame.apply(&generate(spec)?)?),
        }),
        Some(TxSource::TrajectoryFile {
            path,
            direction,
            distance,
            frame,
        }) => Some(Transmitter {
            direction: *direction,
            distance: *distance,
            path: TxPath::Moving(frame.apply(&read_trajectory(&resolve_path(base_dir, path))?)?),
        }),
    };
    Ok(Inputs { rx, tx, dataset })
}

/// Provenance stamped into every result file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputMeta {
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

fn azimuth_axis() -> Axis {
    Axis {
        start: azimuth_of(0),
        step: 1.0,
        count: AZIMUTH_CELLS,
    }
}

fn elevation_axis() -> Axis {
    Axis {
        start: elevation_of(0),
        step: 1.0,
        count: ELEVATION_CELLS,
    }
}

const LAYOUT: &str = "azimuth_major";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    format: String,
    azimuth: Axis,
    elevation: Axis,
    layout: String,
    seed: u64,
    config_hash: String,
    values: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct MapFile<'a> {
    format: &'static str,
    azimuth: Axis,
    elevation: Axis,
    layout: &'static str,
    seed: u64,
    config_hash: &'a str,
    crb_theta: Vec<Option<f64>>,
    crb_phi: Vec<Option<f64>>,
    quantiles: MapQuantiles,
}

#[derive(Debug, Serialize)]
struct MapQuantiles {
    crb_theta: Quantiles,
    crb_phi: Quantiles,
}

#[derive(Debug, Serialize)]
struct CdfFile<'a> {
    format: &'static str,
    metric: &'a str,
    seed: u64,
    config_hash: &'a str,
    total: usize,
    inf_mass: f64,
    quantiles: Quantiles,
    sorted: &'a [f64],
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, value).map_err(|e| Error::Numeric(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

fn write_grid_csv(path: &Path, header: &str, columns: &[&[f64]]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for i in 0..GRID_CELLS {
        let (a, e) = (azimuth_of(i / ELEVATION_CELLS), elevation_of(i % ELEVATION_CELLS));
        let mut row = format!("{a},{e}");
        for col in columns {
            row.push(',');
            row.push_str(&fmt_f64(col[i]));
        }
        writeln!(w, "{row}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn write_profile(profile: &AoaProfile, meta: &OutputMeta, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(
            &ProfileFile {
                format: PROFILE_FORMAT.into(),
                azimuth: azimuth_axis(),
                elevation: elevation_axis(),
                layout: LAYOUT.into(),
                seed: meta.seed,
                config_hash: meta.config_hash.clone(),
                values: profile.values().to_vec(),
            },
            path,
        ),
        Format::Csv => write_grid_csv(path, "phi,theta,value", &[profile.values()]),
    }
}

pub fn read_profile_json(path: &Path) -> Result<(AoaProfile, OutputMeta)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: ProfileFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))?;
    if f.format != PROFILE_FORMAT || f.azimuth != azimuth_axis() || f.elevation != elevation_axis() || f.layout != LAYOUT {
        return Err(parse_err(path, 1, "not a 360x180 profile file"));
    }
    let meta = OutputMeta {
        seed: f.seed,
        config_hash: f.config_hash,
    };
    Ok((AoaProfile::from_values(f.values)?, meta))
}

fn nullable(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|x| x.is_finite().then_some(*x)).collect()
}

pub fn write_map(map: &InformativenessMap, meta: &OutputMeta, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(
            &MapFile {
                format: MAP_FORMAT,
                azimuth: azimuth_axis(),
                elevation: elevation_axis(),
                layout: LAYOUT,
                seed: meta.seed,
                config_hash: &meta.config_hash,
                crb_theta: nullable(&map.crb_theta),
                crb_phi: nullable(&map.crb_phi),
                quantiles: MapQuantiles {
                    crb_theta: crb_cdf(&map.crb_theta)?.quantiles(),
                    crb_phi: crb_cdf(&map.crb_phi)?.quantiles(),
                },
            },
            path,
        ),
        Format::Csv => write_grid_csv(path, "phi,theta,crb_theta,crb_phi", &[&map.crb_theta, &map.crb_phi]),
    }
}

pub fn write_cdf(cdf: &CrbCdf, metric: &str, meta: &OutputMeta, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(
            &CdfFile {
                format: CDF_FORMAT,
                metric,
                seed: meta.seed,
                config_hash: &meta.config_hash,
                total: cdf.total(),
                inf_mass: cdf.inf_mass(),
                quantiles: cdf.quantiles(),
                sorted: cdf.sorted_finite(),
            },
            path,
        ),
        Format::Csv => {
            let mut w = create(path)?;
            writeln!(w, "value,cdf").map_err(|e| Error::io(path, e))?;
            let n = cdf.total() as f64;
            for (i, v) in cdf.sorted_finite().iter().enumerate() {
                writeln!(w, "{},{}", fmt_f64(*v), fmt_f64((i + 1) as f64 / n)).map_err(|e| Error::io(path, e))?;
            }
            if cdf.inf_mass() > 0.0 {
                writeln!(w, "inf,1").map_err(|e| Error::io(path, e))?;
            }
            finish(w, path)
        }
    }
}
