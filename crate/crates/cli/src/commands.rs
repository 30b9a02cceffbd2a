use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ordreg_core::montecarlo::run_suite;
use ordreg_core::regression::residual_process_xy;
use ordreg_core::rng::{derive_stream, label};
use ordreg_core::{
    critical_values, empirical_bridge, generate_sample, limit::critical_values_csv, ols_fit,
    residual_process, DistributionSpec, Kernel, KernelGrid, OlsFit,
};
use rand::RngCore;
use serde::Serialize;

use crate::config::{CommandKind, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    /// A validation check failed or `test` rejected the model.
    Failure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failure => 1,
        }
    }
}

pub const CAVEAT: &str =
    "plug-in approximation: the kernel uses the empirical law of x in place of the \
unknown regressor law, and the noise enters only through the pooled variance estimate";

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn sample_stream(seed: u64) -> ordreg_core::rng::Stream {
    derive_stream(seed, &[label("sample")])
}

/// Routes a resolved configuration to its subcommand. Every output
/// directory receives the resolved `config.toml`.
pub fn cmd_dispatch(run: &RunConfig) -> CliResult<ExitStatus> {
    let out = run.out_dir();
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_file(&out.join("config.toml"), &run.to_toml())?;
    let s = &run.settings;
    match run.command {
        CommandKind::Simulate => {
            let sample = generate_sample(&run.regression, &mut sample_stream(s.seed));
            write_file(&out.join("sample.csv"), &sample.to_csv())?;
            Ok(ExitStatus::Success)
        }
        CommandKind::Bridge => {
            let sample = generate_sample(&run.regression, &mut sample_stream(s.seed));
            let fit = ols_fit(&sample)?;
            let bridge = empirical_bridge(&residual_process(&sample, &fit))?;
            write_file(&out.join("bridge.csv"), &bridge.to_csv())?;
            Ok(ExitStatus::Success)
        }
        CommandKind::Kernel => {
            let grid = KernelGrid::new(&kernel_for(run)?, s.grid)?;
            write_file(&out.join("kernel.csv"), &grid.to_csv())?;
            Ok(ExitStatus::Success)
        }
        CommandKind::Limit => {
            let grid = KernelGrid::new(&kernel_for(run)?, s.grid)?;
            let mut rng = derive_stream(s.seed, &[label("limit")]);
            let values = critical_values(&grid, &s.levels, s.reps, &mut rng)?;
            write_file(
                &out.join("critical_values.csv"),
                &critical_values_csv(&s.levels, &values, s.reps, s.seed),
            )?;
            Ok(ExitStatus::Success)
        }
        CommandKind::Validate => {
            let report = run_suite(&run.mc_config()?)?;
            write_file(&out.join("report.csv"), &report.to_csv())?;
            write_file(&out.join("report.txt"), &report.to_text(false))?;
            if s.json {
                write_file(&out.join("report.json"), &report.to_json())?;
            }
            print!("{}", report.to_text(true));
            Ok(if report.all_passed() {
                ExitStatus::Success
            } else {
                ExitStatus::Failure
            })
        }
        CommandKind::Test => {
            let data = s.data.as_deref().expect("validated");
            let (x, y) = read_xy(data)?;
            let opts = TestOptions {
                reps: s.reps,
                grid: s.grid,
                seed: s.seed,
                levels: s.levels.clone(),
                alpha: s.alpha,
            };
            let (mut report, bridge_csv) = cmd_test(&x, &y, &opts)?;
            let bridge_path = out.join("bridge.csv");
            write_file(&bridge_path, &bridge_csv)?;
            report.bridge_csv = Some(bridge_path);
            write_file(&out.join("test_report.txt"), &report.to_text())?;
            if s.json {
                let json = serde_json::to_string_pretty(&report).expect("report serializes");
                write_file(&out.join("test_report.json"), &json)?;
            }
            print!("{}", report.to_text());
            Ok(if report.reject {
                ExitStatus::Failure
            } else {
                ExitStatus::Success
            })
        }
    }
}

fn kernel_for(run: &RunConfig) -> CliResult<Kernel> {
    if run.settings.brownian {
        Ok(Kernel::brownian_bridge())
    } else {
        Ok(Kernel::new(run.regression.dist.clone())?)
    }
}

/// Reads the `x` and `y` columns of a headered CSV file.
pub fn read_xy(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_xy(file, &path.display().to_string())
}

pub fn parse_xy<R: std::io::Read>(input: R, name: &str) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let data_err = |line: usize, message: String| CliError::Data {
        path: name.to_string(),
        line,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| data_err(1, e.to_string()))?
        .clone();
    let column = |want: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(want))
            .ok_or_else(|| data_err(1, format!("missing `{want}` column in header")))
    };
    let (ix, iy) = (column("x")?, column("y")?);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            data_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize, col: &str| -> CliResult<f64> {
            let raw = record.get(i).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(data_err(
                    line,
                    format!("`{raw}` in column {col} is not a finite number"),
                )),
            }
        };
        x.push(field(ix, "x")?);
        y.push(field(iy, "y")?);
    }
    Ok((x, y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOptions {
    pub reps: usize,
    pub grid: usize,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub n: usize,
    pub a_hat: f64,
    pub b_hat: f64,
    pub sigma_hat2: f64,
    pub statistic: f64,
    pub levels: Vec<f64>,
    pub critical_values: Vec<f64>,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub reps: usize,
    pub grid: usize,
    pub seed: u64,
    pub kernel_jitter: f64,
    pub bridge_csv: Option<PathBuf>,
    pub caveat: &'static str,
}

impl TestReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "linear model check on {} observations", self.n);
        let _ = writeln!(out, "  fit: y = {} + {} x", self.a_hat, self.b_hat);
        let _ = writeln!(out, "  sigma_hat^2 = {}", self.sigma_hat2);
        let _ = writeln!(out, "  statistic T = sup|bridge| = {}", self.statistic);
        for (l, v) in self.levels.iter().zip(&self.critical_values) {
            let _ = writeln!(out, "  critical value at {l}: {v}");
        }
        let _ = writeln!(
            out,
            "  p-value = {} ({} limit paths, G = {}, seed {})",
            self.p_value, self.reps, self.grid, self.seed
        );
        let _ = writeln!(
            out,
            "  {} at alpha = {}",
            if self.reject {
                "REJECT"
            } else {
                "do not reject"
            },
            self.alpha
        );
        if let Some(p) = &self.bridge_csv {
            let _ = writeln!(out, "  bridge: {}", p.display());
        }
        let _ = writeln!(out, "  note: {}", self.caveat);
        out
    }
}

/// Model check on external data. Returns the report and the bridge CSV.
pub fn cmd_test(x: &[f64], y: &[f64], opts: &TestOptions) -> CliResult<(TestReport, String)> {
    if x.len() != y.len() {
        return Err(ordreg_core::Error::Precondition(format!(
            "{} x values but {} y values",
            x.len(),
            y.len()
        ))
        .into());
    }
    if x.len() < 3 {
        return Err(ordreg_core::Error::Precondition(format!(
            "{} rows but at least 3 are required",
            x.len()
        ))
        .into());
    }
    let mut rows: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    rows.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();

    let fit = OlsFit::from_xy(&xs, &ys)?;
    let process = residual_process_xy(&xs, &ys, &fit);
    let bridge = empirical_bridge(&process)?;
    let statistic = bridge.sup_abs();

    let kernel = Kernel::new(DistributionSpec::empirical(xs)?)?;
    let grid = KernelGrid::new(&kernel, opts.grid)?;
    let limit_seed = derive_stream(opts.seed, &[label("test")]).next_u64();
    let sample = grid.sup_statistics(opts.reps, limit_seed);
    let critical_values = sample.quantiles(&opts.levels)?;
    let p_value = sample.p_value(statistic);

    let report = TestReport {
        n: x.len(),
        a_hat: fit.a_hat,
        b_hat: fit.b_hat,
        sigma_hat2: process.sigma_hat2,
        statistic,
        levels: opts.levels.clone(),
        critical_values,
        p_value,
        alpha: opts.alpha,
        reject: p_value < opts.alpha,
        reps: opts.reps,
        grid: opts.grid,
        seed: opts.seed,
        kernel_jitter: grid.jitter_used(),
        bridge_csv: None,
        caveat: CAVEAT,
    };
    Ok((report, bridge.to_csv()))
}
