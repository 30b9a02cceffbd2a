//! Simple regression against order statistics: simulation, least-squares
//! fit, residual partial sums, the random polygon and the empirical bridge.

use std::fmt::Write as _;

use rand::Rng;

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::rng::child_stream;
use crate::sum::{self, CompensatedSum};

/// Residual variance at or below this multiple of the mean squared response
/// is treated as a perfect fit.
const PERFECT_FIT_RATIO: f64 = 1e-28;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionConfig {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub dist: DistributionSpec,
    pub noise: NoiseModel,
}

impl RegressionConfig {
    pub fn new(
        a: f64,
        b: f64,
        n: usize,
        dist: DistributionSpec,
        noise: NoiseModel,
    ) -> Result<Self> {
        let config = Self {
            a,
            b,
            n,
            dist,
            noise,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidConfig(format!(
                "n = {} but at least 3 is required",
                self.n
            )));
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::InvalidConfig("a and b must be finite".into()));
        }
        self.dist.ensure_positive_variance()
    }
}

/// One simulated data set, indexed by rank of the regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    /// Order statistics `ξ_{1:n} ≤ … ≤ ξ_{n:n}`.
    pub x: Vec<f64>,
    /// Chain states, 0-based.
    pub states: Vec<usize>,
    /// Noise actually added, `ε_i^{V_i}`.
    pub noise: Vec<f64>,
    pub y: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl RegressionSample {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Columns `i,x,state,y` with 1-based index and state.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,x,state,y\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                self.x[i],
                self.states[i] + 1,
                self.y[i]
            );
        }
        out
    }
}

/// Draws `n` regressors and sorts them, then walks the chain along rank
/// order and adds the matching noise. Regressors, chain and noise use three
/// independent child streams of `rng`.
pub fn generate_sample<R: Rng + ?Sized>(
    config: &RegressionConfig,
    rng: &mut R,
) -> RegressionSample {
    let mut xi_rng = child_stream(rng);
    let mut chain_rng = child_stream(rng);
    let mut noise_rng = child_stream(rng);

    let mut x = config.dist.sample(config.n, &mut xi_rng);
    x.sort_by(f64::total_cmp);
    let states = config.noise.chain().simulate(config.n, &mut chain_rng);
    let noise = config.noise.sample_noise(&states, &mut noise_rng);
    let y = x
        .iter()
        .zip(&noise)
        .map(|(xi, e)| config.a + config.b * xi + e)
        .collect();
    RegressionSample {
        x,
        states,
        noise,
        y,
        a: config.a,
        b: config.b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit {
    pub a_hat: f64,
    pub b_hat: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_x2: f64,
    pub mean_xy: f64,
}

impl OlsFit {
    /// Least-squares intercept and slope. The slope
    /// `(mean(xy) − mean(x)·mean(y)) / (mean(x²) − mean(x)²)` is evaluated in
    /// its centered form `Σ(x−x̄)(y−ȳ) / Σ(x−x̄)²`, which is the same quantity
    /// without the cancellation.
    pub fn from_xy(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Precondition(format!(
                "x has {} values but y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::DegenerateDesign);
        }
        let n = x.len() as f64;
        let mean_x = sum::mean(x);
        let mean_y = sum::mean(y);
        let mean_x2 = sum::sum(x.iter().map(|v| v * v)) / n;
        let mean_xy = sum::sum(x.iter().zip(y).map(|(a, b)| a * b)) / n;

        let sxx = sum::sum(x.iter().map(|v| (v - mean_x) * (v - mean_x)));
        if sxx.is_nan() || sxx <= f64::EPSILON * n * mean_x2 {
            return Err(Error::DegenerateDesign);
        }
        let sxy = sum::sum(x.iter().zip(y).map(|(a, b)| (a - mean_x) * (b - mean_y)));
        let b_hat = sxy / sxx;
        let a_hat = mean_y - b_hat * mean_x;
        Ok(Self {
            a_hat,
            b_hat,
            mean_x,
            mean_y,
            mean_x2,
            mean_xy,
        })
    }
}

pub fn ols_fit(sample: &RegressionSample) -> Result<OlsFit> {
    OlsFit::from_xy(&sample.x, &sample.y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualProcess {
    pub residuals: Vec<f64>,
    /// `Δ̂⁰_k` for `k = 0..=n`, with `Δ̂⁰_0 = 0`.
    pub partial_sums: Vec<f64>,
    /// `mean(ε̂²) − mean(ε̂)²`, population convention.
    pub sigma_hat2: f64,
    mean_y2: f64,
}

impl ResidualProcess {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    /// True when the fit is exact up to rounding.
    pub fn is_perfect_fit(&self) -> bool {
        self.sigma_hat2 <= PERFECT_FIT_RATIO * self.mean_y2
    }
}

pub fn residual_process_xy(x: &[f64], y: &[f64], fit: &OlsFit) -> ResidualProcess {
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| yi - (fit.a_hat + fit.b_hat * xi))
        .collect();
    let mut partial_sums = Vec::with_capacity(residuals.len() + 1);
    partial_sums.push(0.0);
    let mut acc = CompensatedSum::new();
    for &r in &residuals {
        acc.add(r);
        partial_sums.push(acc.value());
    }
    let n = residuals.len() as f64;
    let mean_r = acc.value() / n;
    let mean_r2 = sum::sum(residuals.iter().map(|r| r * r)) / n;
    let sigma_hat2 = (mean_r2 - mean_r * mean_r).max(0.0);
    let mean_y2 = sum::sum(y.iter().map(|v| v * v)) / n;
    ResidualProcess {
        residuals,
        partial_sums,
        sigma_hat2,
        mean_y2,
    }
}

pub fn residual_process(sample: &RegressionSample, fit: &OlsFit) -> ResidualProcess {
    residual_process_xy(&sample.x, &sample.y, fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolygonKind {
    RandomPolygon,
    EmpiricalBridge,
    /// A path of the limit process sampled on a grid.
    LimitPath,
}

/// Piecewise-linear path on `[0, 1]` with equally spaced nodes at `k/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePolygon {
    pub nodes: Vec<f64>,
    pub kind: PolygonKind,
}

impl BridgePolygon {
    pub fn new(nodes: Vec<f64>, kind: PolygonKind) -> Self {
        assert!(nodes.len() >= 2, "a polygon needs at least two nodes");
        Self { nodes, kind }
    }

    /// Number of segments.
    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain {
                what: "t",
                value: t,
                domain: "[0, 1]",
            });
        }
        let n = self.segments();
        let x = t * n as f64;
        let r = x.round();
        if (x - r).abs() <= 4.0 * f64::EPSILON * x.max(1.0) {
            return Ok(self.nodes[r as usize]);
        }
        let k = (x.floor() as usize).min(n - 1);
        let w = x - k as f64;
        Ok(self.nodes[k] + w * (self.nodes[k + 1] - self.nodes[k]))
    }

    /// `sup_t |path(t)|`, attained at a node.
    pub fn sup_abs(&self) -> f64 {
        self.nodes.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max_j |P(j/G)|` over the uniform grid with `G` segments, the same
    /// functional a limit path sampled on that grid yields.
    pub fn sup_abs_on_grid(&self, grid_size: usize) -> Result<f64> {
        if grid_size == 0 {
            return Err(Error::Precondition("grid size must be positive".into()));
        }
        (0..=grid_size).try_fold(0.0f64, |m, j| {
            Ok(m.max(self.eval(j as f64 / grid_size as f64)?.abs()))
        })
    }

    /// Columns `t,value`, one row per node.
    pub fn to_csv(&self) -> String {
        let n = self.segments() as f64;
        let mut out = String::from("t,value\n");
        for (k, v) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{},{}", k as f64 / n, v);
        }
        out
    }
}

/// Nodes `Δ̂⁰_k / (σ√n)` using the true noise scale `σ`.
pub fn random_polygon(process: &ResidualProcess, sigma: f64) -> Result<BridgePolygon> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            what: "sigma",
            value: sigma,
            domain: "(0, ∞)",
        });
    }
    let scale = sigma * (process.n() as f64).sqrt();
    let nodes = process.partial_sums.iter().map(|d| d / scale).collect();
    Ok(BridgePolygon::new(nodes, PolygonKind::RandomPolygon))
}

/// Nodes `(Δ̂⁰_k − (k/n)·Δ̂⁰_n) / √(n·σ̂²)`, pinned to zero at both ends.
pub fn empirical_bridge(process: &ResidualProcess) -> Result<BridgePolygon> {
    if process.is_perfect_fit() {
        return Err(Error::DegenerateBridge);
    }
    let n = process.n();
    let last = process.partial_sums[n];
    let norm = (n as f64 * process.sigma_hat2).sqrt();
    let nodes = process
        .partial_sums
        .iter()
        .enumerate()
        .map(|(k, d)| (d - (k as f64 / n as f64) * last) / norm)
        .collect();
    Ok(BridgePolygon::new(nodes, PolygonKind::EmpiricalBridge))
}

/// Prefix sums of sorted values, for evaluating `GL_n(t) = (1/n)·Σ_{i≤⌊nt⌋} ξ_{i:n}`.
#[derive(Debug, Clone)]
pub struct EmpiricalLorenz {
    prefix: Vec<f64>,
}

impl EmpiricalLorenz {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition(
                "empirical Lorenz curve of an empty sample".into(),
            ));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        let mut acc = CompensatedSum::new();
        for v in sorted {
            acc.add(v);
            prefix.push(acc.value());
        }
        Ok(Self { prefix })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain {
                what: "t",
                value: t,
                domain: "[0, 1]",
            });
        }
        let n = self.prefix.len() - 1;
        let x = t * n as f64;
        let r = x.round();
        let k = if (x - r).abs() <= 4.0 * f64::EPSILON * x.max(1.0) {
            r as usize
        } else {
            x.floor() as usize
        };
        Ok(self.prefix[k.min(n)] / n as f64)
    }
}

pub fn empirical_lorenz(values: &[f64], t: f64) -> Result<f64> {
    EmpiricalLorenz::new(values)?.eval(t)
}
