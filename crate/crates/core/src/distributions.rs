//! The regressor law: quantile function, inverse-transform sampling, moments
//! and general Lorenz curves.
//!
//! Quantiles use the left-continuous generalized inverse
//! `F⁻¹(s) = sup{x : F(x) < s}` for `s ∈ (0, 1]`. For an empirical law with
//! sorted atoms `v₁ ≤ … ≤ vₙ` this is `v_k` with `k = ⌈s·n⌉`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureOptions};
use crate::sum::{self, CompensatedSum};

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Sorted ascending, non-empty.
    Empirical(Arc<[f64]>),
}

/// A validated regressor law.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    family: Family,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub second_moment: f64,
}

fn std_normal_quantile(p: f64) -> f64 {
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    // Halley polish
    for _ in 0..2 {
        if !z.is_finite() {
            break;
        }
        let e = std_normal_cdf(z) - p;
        let u = e / std_normal_pdf(z);
        z -= u / (1.0 + 0.5 * z * u);
    }
    z
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

impl DistributionSpec {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidDistribution(format!(
                "uniform({lo},{hi}) requires finite lo < hi"
            )));
        }
        Ok(Self {
            family: Family::Uniform { lo, hi },
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "exp({rate}) requires a finite rate > 0"
            )));
        }
        Ok(Self {
            family: Family::Exponential { rate },
        })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "normal({mean},{sd}) requires finite mean and sd > 0"
            )));
        }
        Ok(Self {
            family: Family::Normal { mean, sd },
        })
    }

    /// Plug-in law of a sample. The values are sorted; a single repeated value
    /// is accepted here but rejected by [`Self::ensure_positive_variance`].
    pub fn empirical(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution(
                "empirical sample is empty".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "empirical sample value #{} is not finite",
                i + 1
            )));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            family: Family::Empirical(values.into()),
        })
    }

    /// Reads an empirical sample, one value per line. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn empirical_from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::ParseDistribution {
                input: path.display().to_string(),
                reason: format!("line {}: `{line}` is not a number", lineno + 1),
            })?;
            values.push(v);
        }
        Self::empirical(values)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_empirical(&self) -> bool {
        matches!(self.family, Family::Empirical(_))
    }

    pub fn ensure_positive_variance(&self) -> Result<()> {
        let var = self.moments().variance;
        if var > 0.0 && var.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(format!(
                "{self} has variance {var}; a finite positive variance is required"
            )))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.family {
            Family::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Family::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Family::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            Family::Empirical(v) => v.partition_point(|&a| a <= x) as f64 / v.len() as f64,
        }
    }

    /// `sup{x : F(x) < s}` for `s ∈ (0, 1]`.
    pub fn quantile(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Domain {
                what: "s",
                value: s,
                domain: "(0, 1]",
            });
        }
        let q = self.quantile_unchecked(s);
        if q.is_finite() {
            Ok(q)
        } else {
            Err(Error::Range {
                family: self.to_string(),
                s,
            })
        }
    }

    fn quantile_unchecked(&self, s: f64) -> f64 {
        match &self.family {
            Family::Uniform { lo, hi } => lo + s * (hi - lo),
            Family::Exponential { rate } => -(-s).ln_1p() / rate,
            Family::Normal { mean, sd } => mean + sd * std_normal_quantile(s),
            Family::Empirical(v) => v[empirical_rank(s, v.len()) - 1],
        }
    }

    /// Draws `count` i.i.d. values by inverse transform of open-interval uniforms.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count)
            .map(|_| {
                let u: f64 = rng.sample(Open01);
                self.quantile_unchecked(u)
            })
            .collect()
    }

    pub fn moments(&self) -> Moments {
        let (mean, variance) = match &self.family {
            Family::Uniform { lo, hi } => (0.5 * (lo + hi), (hi - lo) * (hi - lo) / 12.0),
            Family::Exponential { rate } => (1.0 / rate, 1.0 / (rate * rate)),
            Family::Normal { mean, sd } => (*mean, sd * sd),
            Family::Empirical(v) => {
                let m = sum::mean(v);
                let var = sum::sum(v.iter().map(|x| (x - m) * (x - m))) / v.len() as f64;
                (m, var)
            }
        };
        let second_moment = match &self.family {
            Family::Empirical(v) => sum::sum(v.iter().map(|x| x * x)) / v.len() as f64,
            _ => variance + mean * mean,
        };
        Moments {
            mean,
            variance,
            second_moment,
        }
    }

    fn gl_closed(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::Uniform { lo, hi } => lo * t + 0.5 * (hi - lo) * t * t,
            Family::Exponential { rate } => {
                if t == 1.0 {
                    1.0 / rate
                } else {
                    ((1.0 - t) * (-t).ln_1p() + t) / rate
                }
            }
            Family::Normal { mean, sd } => {
                if t == 1.0 {
                    *mean
                } else {
                    // ∫₀ᵗ Φ⁻¹(s) ds = -φ(Φ⁻¹(t))
                    mean * t - sd * std_normal_pdf(std_normal_quantile(t))
                }
            }
            Family::Empirical(v) => empirical_gl(v, t),
        }
    }
}

/// `k = ⌈s·n⌉`, with `s·n` snapped to the nearest integer when it is within
/// rounding distance of one.
fn empirical_rank(s: f64, n: usize) -> usize {
    let x = s * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 4.0 * f64::EPSILON * x.max(1.0) {
        r
    } else {
        x.ceil()
    };
    (k as usize).clamp(1, n)
}

/// Exact integral of the empirical step quantile over `[0, t]`.
fn empirical_gl(v: &[f64], t: f64) -> f64 {
    let n = v.len();
    let nt = t * n as f64;
    let full = (nt.floor() as usize).min(n);
    let mut acc = CompensatedSum::new();
    for &x in &v[..full] {
        acc.add(x);
    }
    let mut total = acc.value() / n as f64;
    if full < n {
        let frac = t - full as f64 / n as f64;
        total += frac * v[full];
    }
    total
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            Family::Exponential { rate } => write!(f, "exp({rate})"),
            Family::Normal { mean, sd } => write!(f, "normal({mean},{sd})"),
            Family::Empirical(v) => write!(f, "empirical(<{} values>)", v.len()),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// Parses `uniform(lo,hi)`, `exp(rate)`, `normal(mean,sd)` or
    /// `empirical(path)`.
    fn from_str(input: &str) -> Result<Self> {
        let err = |reason: &str| Error::ParseDistribution {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let s = input.trim();
        let open = s.find('(').ok_or_else(|| err("missing `(`"))?;
        if !s.ends_with(')') {
            return Err(err("missing closing `)`"));
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let inner = s[open + 1..s.len() - 1].trim();
        if name == "empirical" {
            if inner.is_empty() {
                return Err(err("empirical needs a file path"));
            }
            return Self::empirical_from_file(Path::new(inner));
        }
        let args: Vec<f64> = inner
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err("arguments must be numbers"))?;
        match (name.as_str(), args.as_slice()) {
            ("uniform", [lo, hi]) => Self::uniform(*lo, *hi),
            ("exp" | "exponential", [rate]) => Self::exponential(*rate),
            ("normal" | "gaussian", [mean, sd]) => Self::normal(*mean, *sd),
            ("uniform" | "exp" | "exponential" | "normal" | "gaussian", _) => {
                Err(err("wrong number of arguments"))
            }
            _ => Err(err("unknown family")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LorenzMode {
    ClosedForm,
    Quadrature(QuadratureOptions),
}

/// General Lorenz curve `GL(t) = ∫₀ᵗ F⁻¹(s) ds` of a distribution.
///
/// Every family here has a closed form; the quadrature mode exists as an
/// independent route for cross-checking. Empirical laws always use the exact
/// piecewise-linear integral.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzCurve {
    spec: DistributionSpec,
    mode: LorenzMode,
}

impl LorenzCurve {
    pub fn new(spec: DistributionSpec) -> Self {
        Self {
            spec,
            mode: LorenzMode::ClosedForm,
        }
    }

    pub fn with_quadrature(spec: DistributionSpec, opts: QuadratureOptions) -> Self {
        Self {
            spec,
            mode: LorenzMode::Quadrature(opts),
        }
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn mode(&self) -> LorenzMode {
        self.mode
    }

    pub fn gl(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        match self.mode {
            LorenzMode::Quadrature(opts) if !self.spec.is_empirical() => {
                let spec = &self.spec;
                quadrature::integrate(|s| spec.quantile_unchecked(s), 0.0, t, opts)
            }
            _ => Ok(self.spec.gl_closed(t)),
        }
    }

    /// `GL⁰(t) = GL(t) − t·GL(1)`, exactly zero at both endpoints.
    pub fn gl_centered(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        if t == 0.0 || t == 1.0 {
            return Ok(0.0);
        }
        Ok(self.gl(t)? - t * self.gl(1.0)?)
    }
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "t",
            value: t,
            domain: "[0, 1]",
        })
    }
}
