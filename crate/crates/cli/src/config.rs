//! Flag and config-file resolution.
//!
//! Precedence, lowest first: built-in defaults, the selected profile, the
//! TOML file given by `--config`, then command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ordreg_core::montecarlo::CheckToggles;
use ordreg_core::{
    BaseNoise, DistributionSpec, InitialState, MarkovChain, McConfig, NoiseModel, RegressionConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "ordreg",
    version,
    about = "Empirical bridges for regression on order statistics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a simulated regression sample as CSV.
    Simulate(Flags),
    /// Write the empirical bridge of a simulated sample as CSV.
    Bridge(Flags),
    /// Write the limit covariance kernel on a grid as CSV.
    Kernel(Flags),
    /// Write Monte Carlo critical values of the limit sup-statistic.
    Limit(Flags),
    /// Run the Monte Carlo validation suite.
    Validate(Flags),
    /// Test a linear model on external (x, y) data.
    Test(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Simulate,
    Bridge,
    Kernel,
    Limit,
    Validate,
    Test,
}

impl Command {
    pub fn split(self) -> (CommandKind, Flags) {
        match self {
            Command::Simulate(f) => (CommandKind::Simulate, f),
            Command::Bridge(f) => (CommandKind::Bridge, f),
            Command::Kernel(f) => (CommandKind::Kernel, f),
            Command::Limit(f) => (CommandKind::Limit, f),
            Command::Validate(f) => (CommandKind::Validate, f),
            Command::Test(f) => (CommandKind::Test, f),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with any of the settings below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `desk` (n=2000, R=2000, G=256) or `quick`.
    #[arg(long)]
    pub profile: Option<String>,
    /// Regressor law: uniform(lo,hi), exp(rate), normal(mean,sd), empirical(path).
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte Carlo replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Grid segments for the limit kernel.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Transition matrix: a CSV file, or inline rows such as `0.9,0.1;0.2,0.8`.
    #[arg(long)]
    pub transition: Option<String>,
    /// Per-state noise scales, e.g. `1,2`.
    #[arg(long)]
    pub sigmas: Option<String>,
    /// Base noise law: gaussian, uniform or rademacher.
    #[arg(long)]
    pub noise: Option<String>,
    /// Initial chain state: `stationary` or a 1-based state index.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Probe times for the covariance check, e.g. `0.25,0.5,0.75`.
    #[arg(long)]
    pub probes: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write reports as JSON.
    #[arg(long)]
    pub json: bool,
    /// Input CSV with `x` and `y` columns (for `test`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Worker threads for Monte Carlo replications.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Levels for critical values, e.g. `0.9,0.95,0.99`.
    #[arg(long)]
    pub levels: Option<String>,
    /// Significance level for `test`.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Use the Brownian-bridge kernel (Lorenz term zeroed).
    #[arg(long)]
    pub brownian: bool,
    /// Subset of validation checks, e.g. `covariance,supstat`.
    #[arg(long)]
    pub checks: Option<String>,
}

/// Settings as read from a config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub profile: Option<String>,
    pub dist: Option<String>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub grid: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub transition: Option<String>,
    pub sigmas: Option<Vec<f64>>,
    pub noise: Option<String>,
    pub init: Option<String>,
    pub seed: Option<u64>,
    pub probes: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub json: Option<bool>,
    pub data: Option<PathBuf>,
    pub threads: Option<usize>,
    pub levels: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub brownian: Option<bool>,
    pub checks: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::io(path, e))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Fully resolved settings. This is what gets echoed to `config.toml`, and
/// it parses back as a [`FileConfig`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub profile: String,
    pub dist: String,
    pub n: usize,
    pub reps: usize,
    pub grid: usize,
    pub a: f64,
    pub b: f64,
    pub transition: String,
    pub sigmas: Vec<f64>,
    pub noise: String,
    pub init: String,
    pub seed: u64,
    pub probes: Vec<f64>,
    pub out: PathBuf,
    pub json: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub threads: usize,
    pub levels: Vec<f64>,
    pub alpha: f64,
    pub brownian: bool,
    pub checks: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Quick,
}

impl Profile {
    fn parse(name: &str) -> CliResult<Self> {
        match name {
            "desk" => Ok(Profile::Desk),
            "quick" => Ok(Profile::Quick),
            other => Err(CliError::config(
                "profile",
                format!("unknown profile `{other}`"),
                "desk",
            )),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Quick => "quick",
        }
    }

    /// `(n, reps, grid)`
    fn sizes(self) -> (usize, usize, usize) {
        match self {
            Profile::Desk => (2000, 2000, 256),
            Profile::Quick => (500, 200, 64),
        }
    }
}

pub const CHECK_NAMES: [&str; 6] = [
    "covariance",
    "sigma_hat",
    "supstat",
    "lorenz",
    "replacement_hoeffding",
    "degenerate_chain",
];

/// A validated run: raw settings plus the domain objects built from them.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub settings: Settings,
    pub profile: Profile,
    pub regression: RegressionConfig,
    pub checks: CheckToggles,
}

impl RunConfig {
    pub fn out_dir(&self) -> &Path {
        &self.settings.out
    }

    /// Monte Carlo suite configuration for `validate`.
    pub fn mc_config(&self) -> CliResult<McConfig> {
        let s = &self.settings;
        let mut mc = McConfig::new(self.regression.clone(), s.reps, s.seed);
        mc.probes = s.probes.clone();
        mc.grid_size = s.grid;
        mc.threads = s.threads;
        mc.checks = self.checks;
        if self.profile == Profile::Quick {
            mc.lorenz_n = 2000;
            mc.lorenz_seeds = 10;
            mc.pilot_reps = 50;
        }
        mc.validate().map_err(|e| match e {
            ordreg_core::Error::InvalidConfig(msg) if msg.contains("reps") => {
                CliError::config("reps", msg, "2000")
            }
            ordreg_core::Error::InvalidConfig(msg) if msg.contains("probe") => {
                CliError::config("probes", msg, "0.25,0.5,0.75")
            }
            other => other.into(),
        })?;
        Ok(mc)
    }

    /// The resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.settings).expect("settings serialize")
    }
}

fn parse_list(key: &'static str, text: &str, example: &'static str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| {
                CliError::config(key, format!("`{}` is not a number", t.trim()), example)
            })
        })
        .collect()
}

fn read_transition(spec: &str) -> CliResult<Vec<Vec<f64>>> {
    let path = Path::new(spec);
    let text = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?
    } else {
        spec.replace(';', "\n")
    };
    MarkovChain::parse_csv(&text).map_err(|e| CliError::config("transition", e, "0.9,0.1;0.2,0.8"))
}

fn inline_rows(rows: &[Vec<f64>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Resolves flags against an optional config file and validates every value
/// before any computation starts.
pub fn parse_config(command: CommandKind, flags: Flags) -> CliResult<RunConfig> {
    let file = match &flags.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    resolve(command, flags, file)
}

pub fn resolve(command: CommandKind, flags: Flags, file: FileConfig) -> CliResult<RunConfig> {
    let profile = Profile::parse(
        flags
            .profile
            .as_deref()
            .or(file.profile.as_deref())
            .unwrap_or("desk"),
    )?;
    let (n0, reps0, grid0) = profile.sizes();

    let dist = flags
        .dist
        .or(file.dist)
        .unwrap_or_else(|| "uniform(0,1)".into());
    let n = flags.n.or(file.n).unwrap_or(n0);
    let reps = flags.reps.or(file.reps).unwrap_or(reps0);
    let grid = flags.grid.or(file.grid).unwrap_or(grid0);
    let a = flags.a.or(file.a).unwrap_or(0.0);
    let b = flags.b.or(file.b).unwrap_or(1.0);
    let transition = flags
        .transition
        .or(file.transition)
        .unwrap_or_else(|| "1".into());
    let sigmas = match flags.sigmas {
        Some(text) => parse_list("sigmas", &text, "1,2")?,
        None => file.sigmas.unwrap_or_else(|| vec![1.0]),
    };
    let noise = flags
        .noise
        .or(file.noise)
        .unwrap_or_else(|| "gaussian".into());
    let init = flags
        .init
        .or(file.init)
        .unwrap_or_else(|| "stationary".into());
    let seed = flags.seed.or(file.seed).unwrap_or(0);
    let probes = match flags.probes {
        Some(text) => parse_list("probes", &text, "0.25,0.5,0.75")?,
        None => file.probes.unwrap_or_else(|| vec![0.25, 0.5, 0.75]),
    };
    let out = flags
        .out
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("out"));
    let json = flags.json || file.json.unwrap_or(false);
    let data = flags.data.or(file.data);
    let threads = flags
        .threads
        .or(file.threads)
        .unwrap_or_else(default_threads);
    let levels = match flags.levels {
        Some(text) => parse_list("levels", &text, "0.9,0.95,0.99")?,
        None => file.levels.unwrap_or_else(|| vec![0.9, 0.95, 0.99]),
    };
    let alpha = flags.alpha.or(file.alpha).unwrap_or(0.05);
    let brownian = flags.brownian || file.brownian.unwrap_or(false);
    let checks = match flags.checks {
        Some(text) => text.split(',').map(|c| c.trim().to_string()).collect(),
        None => file
            .checks
            .unwrap_or_else(|| CHECK_NAMES.iter().map(|c| c.to_string()).collect()),
    };

    let dist_spec: DistributionSpec = dist
        .parse()
        .map_err(|e| CliError::config("dist", e, "uniform(0,1)"))?;
    dist_spec
        .ensure_positive_variance()
        .map_err(|e| CliError::config("dist", e, "uniform(0,1)"))?;
    let rows = read_transition(&transition)?;
    let initial = match init.as_str() {
        "stationary" => InitialState::Stationary,
        other => match other.parse::<usize>() {
            Ok(k) if k >= 1 && k <= rows.len() => InitialState::Fixed(k - 1),
            _ => {
                return Err(CliError::config(
                    "init",
                    format!(
                        "`{other}` is neither `stationary` nor a state in 1..={}",
                        rows.len()
                    ),
                    "stationary",
                ))
            }
        },
    };
    let chain = MarkovChain::with_initial(rows.clone(), initial)
        .map_err(|e| CliError::config("transition", e, "0.9,0.1;0.2,0.8"))?;
    let base: BaseNoise = noise
        .parse()
        .map_err(|e| CliError::config("noise", e, "gaussian"))?;
    let noise_model = NoiseModel::new(chain, sigmas.clone(), base)
        .map_err(|e| CliError::config("sigmas", e, "1,2"))?;
    if n < 3 {
        return Err(CliError::config(
            "n",
            format!("n = {n} but at least 3 are required"),
            "2000",
        ));
    }
    let regression = RegressionConfig::new(a, b, n, dist_spec, noise_model)
        .map_err(|e| CliError::config("a", e, "0"))?;
    if grid < 2 {
        return Err(CliError::config(
            "grid",
            format!("grid = {grid} but at least 2 is required"),
            "256",
        ));
    }
    if threads == 0 {
        return Err(CliError::config(
            "threads",
            "at least one thread is required",
            "4",
        ));
    }
    if levels.is_empty() || levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(CliError::config(
            "levels",
            "levels must lie strictly inside (0, 1)",
            "0.9,0.95,0.99",
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::config(
            "alpha",
            format!("{alpha} is outside (0, 1)"),
            "0.05",
        ));
    }
    let mut toggles = CheckToggles {
        covariance: false,
        sigma_hat: false,
        supstat: false,
        lorenz: false,
        replacement: false,
        degenerate_chain: false,
    };
    for c in &checks {
        match c.as_str() {
            "covariance" => toggles.covariance = true,
            "sigma_hat" => toggles.sigma_hat = true,
            "supstat" => toggles.supstat = true,
            "lorenz" => toggles.lorenz = true,
            "replacement_hoeffding" => toggles.replacement = true,
            "degenerate_chain" => toggles.degenerate_chain = true,
            other => {
                return Err(CliError::config(
                    "checks",
                    format!("unknown check `{other}`; known: {}", CHECK_NAMES.join(", ")),
                    "covariance,supstat",
                ))
            }
        }
    }
    if matches!(command, CommandKind::Limit | CommandKind::Test) && reps < 1000 {
        return Err(CliError::config(
            "reps",
            format!("reps = {reps} but critical values need at least 1000"),
            "2000",
        ));
    }
    if command == CommandKind::Test && data.is_none() {
        return Err(CliError::config(
            "data",
            "`test` needs an input CSV",
            "data.csv",
        ));
    }

    let settings = Settings {
        profile: profile.name().into(),
        dist,
        n,
        reps,
        grid,
        a,
        b,
        transition: inline_rows(&rows),
        sigmas,
        noise,
        init,
        seed,
        probes,
        out,
        json,
        data,
        threads,
        levels,
        alpha,
        brownian,
        checks,
    };
    let run = RunConfig {
        command,
        settings,
        profile,
        regression,
        checks: toggles,
    };
    if command == CommandKind::Validate {
        run.mc_config()?;
    }
    Ok(run)
}
