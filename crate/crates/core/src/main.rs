use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wsr::experiments::{
    default_ate_scenario, default_moving_ends_scenario, default_profile_scenario, read_config, run_ate_sweep,
    run_crb_cdf, run_lemma1, run_lemma2, run_moving_ends, run_profile, AteSweepConfig, CrbCdfConfig, Lemma1Config,
    Lemma2Config, RunOptions, RunReport,
};
use wsr::ingest::{read_scenario, Format, Scenario};
use wsr::{Error, Result};

#[derive(Parser)]
#[command(name = "wsr", version, about = "Synthetic-aperture AOA experiments from robot motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate or replay a dataset, build the AOA profile and report the peak.
    Profile(Common),
    /// Constant angular offset sweep under the arc model.
    Lemma1(Common),
    /// Worst-case alternating deviations against the cosine attenuation bound.
    Lemma2(Common),
    /// Informativeness maps and CRB distributions for helix, circle and line.
    CrbCdf(Common),
    /// AOA error against odometry ATE with clean channel samples.
    AteSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated target ATE values in metres.
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<f64>>,
    },
    /// Profile over the receiver's path relative to a moving transmitter.
    MovingEnds(Common),
}

#[derive(Copy, Clone, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Scenario (profile, ate-sweep, moving-ends) or sweep config JSON; built-in defaults otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Worker threads; 0 uses every core. Never changes the output.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            trials: self.trials,
            format: match self.format {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
            },
            out: Some(self.out.clone()),
        }
    }

    fn scenario(&self, default: fn() -> Scenario) -> Result<(Scenario, PathBuf)> {
        match &self.scenario {
            Some(p) => Ok((read_scenario(p)?, base_dir(p))),
            None => Ok((default(), PathBuf::from("."))),
        }
    }

    fn config<T: serde::de::DeserializeOwned + Default>(&self) -> Result<T> {
        self.scenario.as_deref().map_or_else(|| Ok(T::default()), read_config)
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> Result<RunReport> {
    let common = match &cli.command {
        Command::Profile(c)
        | Command::Lemma1(c)
        | Command::Lemma2(c)
        | Command::CrbCdf(c)
        | Command::MovingEnds(c)
        | Command::AteSweep { common: c, .. } => c,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    let opts = common.options();
    match &cli.command {
        Command::Profile(c) => {
            let (s, dir) = c.scenario(default_profile_scenario)?;
            Ok(run_profile(&s, &dir, &opts)?.report)
        }
        Command::MovingEnds(c) => {
            let (s, dir) = c.scenario(default_moving_ends_scenario)?;
            Ok(run_moving_ends(&s, &dir, &opts)?.report)
        }
        Command::Lemma1(c) => run_lemma1(&c.config::<Lemma1Config>()?, &opts),
        Command::Lemma2(c) => run_lemma2(&c.config::<Lemma2Config>()?, &opts),
        Command::CrbCdf(c) => Ok(run_crb_cdf(&c.config::<CrbCdfConfig>()?, &opts)?.report),
        Command::AteSweep { common: c, targets } => {
            let (s, dir) = c.scenario(default_ate_scenario)?;
            let mut cfg = AteSweepConfig::default();
            if let Some(t) = targets {
                cfg.targets = t.clone();
            }
            run_ate_sweep(&s, &cfg, &dir, &opts)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let started = Instant::now();
    match run(cli) {
        Ok(report) => {
            for note in &report.notes {
                eprintln!("{note}");
            }
            for (k, v) in &report.summary {
                eprintln!("{k} = {v}");
            }
            eprintln!(
                "{}: {} trial(s), config {}, {:.2} s",
                report.command,
                report.trials.len(),
                &report.config_hash[..12],
                started.elapsed().as_secs_f64()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
