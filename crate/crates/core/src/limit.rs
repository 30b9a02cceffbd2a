//! The limit Gaussian process of the empirical bridge.
//!
//! Its covariance kernel is
//!
//! ```text
//! K⁰(t, s) = min(t, s) − t·s − GL⁰(t)·GL⁰(s) / Var ξ
//! ```
//!
//! i.e. the Brownian-bridge kernel minus a rank-one term built from the
//! centered general Lorenz curve. Paths are sampled on a uniform grid through
//! a Cholesky factor of the interior block; both endpoints are pinned to zero
//! because the kernel vanishes there.

use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::distributions::{DistributionSpec, LorenzCurve};
use crate::error::{Error, Result};
use crate::regression::{BridgePolygon, PolygonKind};
use crate::rng::derive_stream;

/// Diagonal jitter tried in order when factorizing the interior block.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];
pub const DEFAULT_GRID: usize = 256;
const SAMPLE_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
enum KernelMode {
    Lorenz {
        curve: LorenzCurve,
        variance: f64,
    },
    /// Lorenz term forced to zero. Corresponds to no admissible regressor law;
    /// used only as a known-answer harness.
    BrownianBridge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    mode: KernelMode,
}

impl Kernel {
    pub fn new(dist: DistributionSpec) -> Result<Self> {
        Self::from_curve(LorenzCurve::new(dist))
    }

    pub fn from_curve(curve: LorenzCurve) -> Result<Self> {
        curve.spec().ensure_positive_variance()?;
        let variance = curve.spec().moments().variance;
        Ok(Self {
            mode: KernelMode::Lorenz { curve, variance },
        })
    }

    pub fn brownian_bridge() -> Self {
        Self {
            mode: KernelMode::BrownianBridge,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.mode, KernelMode::BrownianBridge)
    }

    fn centered_gl(&self, t: f64) -> Result<f64> {
        match &self.mode {
            KernelMode::Lorenz { curve, .. } => curve.gl_centered(t),
            KernelMode::BrownianBridge => Ok(0.0),
        }
    }

    fn variance(&self) -> f64 {
        match &self.mode {
            KernelMode::Lorenz { variance, .. } => *variance,
            KernelMode::BrownianBridge => 1.0,
        }
    }

    fn combine(&self, t: f64, s: f64, gt: f64, gs: f64) -> f64 {
        t.min(s) - t * s - gt * gs / self.variance()
    }

    pub fn value(&self, t: f64, s: f64) -> Result<f64> {
        for v in [t, s] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain {
                    what: "t",
                    value: v,
                    domain: "[0, 1]",
                });
            }
        }
        Ok(self.combine(t, s, self.centered_gl(t)?, self.centered_gl(s)?))
    }
}

pub fn kernel_value(dist: &DistributionSpec, t: f64, s: f64) -> Result<f64> {
    Kernel::new(dist.clone())?.value(t, s)
}

/// Kernel matrix on `t_j = j/G`, `j = 0..=G`, with a Cholesky factor of the
/// interior `(G−1)×(G−1)` block.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    grid_size: usize,
    times: Vec<f64>,
    matrix: DMatrix<f64>,
    factor: DMatrix<f64>,
    jitter_used: f64,
}

impl KernelGrid {
    pub fn new(kernel: &Kernel, grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::Precondition(format!(
                "grid size {grid_size} must be at least 2"
            )));
        }
        let g = grid_size;
        let times: Vec<f64> = (0..=g).map(|j| j as f64 / g as f64).collect();
        let gl0 = times
            .iter()
            .map(|&t| kernel.centered_gl(t))
            .collect::<Result<Vec<_>>>()?;
        let matrix = DMatrix::from_fn(g + 1, g + 1, |i, j| {
            kernel.combine(times[i], times[j], gl0[i], gl0[j])
        });

        let interior = matrix.view((1, 1), (g - 1, g - 1)).into_owned();
        let mut factored = None;
        for &jitter in &JITTER_LADDER {
            let mut block = interior.clone();
            for d in 0..g - 1 {
                block[(d, d)] += jitter;
            }
            if let Some(chol) = Cholesky::new(block) {
                factored = Some((chol.unpack(), jitter));
                break;
            }
        }
        let (factor, jitter_used) = factored.ok_or(Error::KernelNotPsd {
            max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
        })?;
        Ok(Self {
            grid_size,
            times,
            matrix,
            factor,
            jitter_used,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular factor of the (jittered) interior block.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Smallest eigenvalue of the symmetrized interior block, before jitter.
    pub fn min_interior_eigenvalue(&self) -> f64 {
        let g = self.grid_size;
        let block = self.matrix.view((1, 1), (g - 1, g - 1));
        let sym = (block.clone_owned() + block.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.min()
    }

    fn pin(&self, interior: impl Iterator<Item = f64>) -> BridgePolygon {
        let mut nodes = Vec::with_capacity(self.grid_size + 1);
        nodes.push(0.0);
        nodes.extend(interior);
        nodes.push(0.0);
        BridgePolygon::new(nodes, PolygonKind::LimitPath)
    }

    /// One path: factor × standard normal vector on the interior, zero at the ends.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> BridgePolygon {
        let m = self.grid_size - 1;
        let z = nalgebra::DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
        let path = &self.factor * z;
        self.pin(path.iter().copied())
    }

    /// Paths `[start, start + count)` of the stream keyed by `seed`. Path `r`
    /// depends only on `(seed, r)` through its batch, so any split of a range
    /// reproduces the same values.
    fn sample_batch(&self, seed: u64, batch: usize) -> DMatrix<f64> {
        let m = self.grid_size - 1;
        let mut rng = derive_stream(seed, &[batch as u64]);
        let z = DMatrix::from_fn(m, SAMPLE_BATCH, |_, _| StandardNormal.sample(&mut rng));
        &self.factor * z
    }

    /// Sup-statistics of `reps` independent paths, in replication order.
    pub fn sup_statistics(&self, reps: usize, seed: u64) -> SupStatisticSample {
        let batches = reps.div_ceil(SAMPLE_BATCH);
        let per_batch: Vec<Vec<f64>> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let paths = self.sample_batch(seed, b);
                paths
                    .column_iter()
                    .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                    .collect()
            })
            .collect();
        let values: Vec<f64> = per_batch.into_iter().flatten().take(reps).collect();
        SupStatisticSample {
            values,
            source: SupSource::LimitProcess {
                grid_size: self.grid_size,
            },
        }
    }

    /// Row-major CSV: a header line of grid times, then one row per time.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.times.iter().map(|t| t.to_string()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.matrix.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn kernel_matrix(dist: &DistributionSpec, grid_size: usize) -> Result<KernelGrid> {
    KernelGrid::new(&Kernel::new(dist.clone())?, grid_size)
}

pub fn sample_limit_path<R: Rng + ?Sized>(grid: &KernelGrid, rng: &mut R) -> BridgePolygon {
    grid.sample_path(rng)
}

pub fn sup_statistic(poly: &BridgePolygon) -> f64 {
    poly.sup_abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupSource {
    LimitProcess { grid_size: usize },
    EmpiricalBridge { n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupStatisticSample {
    pub values: Vec<f64>,
    pub source: SupSource,
}

impl SupStatisticSample {
    pub fn reps(&self) -> usize {
        self.values.len()
    }

    /// Empirical quantiles (inverse of the empirical cdf) at each level.
    pub fn quantiles(&self, levels: &[f64]) -> Result<Vec<f64>> {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        levels
            .iter()
            .map(|&p| {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Domain {
                        what: "level",
                        value: p,
                        domain: "(0, 1)",
                    });
                }
                let k = (p * sorted.len() as f64).ceil() as usize;
                Ok(sorted[k.clamp(1, sorted.len()) - 1])
            })
            .collect()
    }

    /// `(r + 1) / (R + 1)` where `r` counts draws at least as large as `stat`.
    pub fn p_value(&self, stat: f64) -> f64 {
        let r = self.values.iter().filter(|&&v| v >= stat).count();
        (r + 1) as f64 / (self.values.len() + 1) as f64
    }
}

/// Monte Carlo quantiles of `sup|Z|` over `reps ≥ 1000` sampled paths.
pub fn critical_values<R: Rng + ?Sized>(
    grid: &KernelGrid,
    levels: &[f64],
    reps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if reps < 1000 {
        return Err(Error::Precondition(format!(
            "reps = {reps} but at least 1000 are required"
        )));
    }
    let seed = rng.next_u64();
    grid.sup_statistics(reps, seed).quantiles(levels)
}

/// CSV with columns `level,value,reps,seed`.
pub fn critical_values_csv(levels: &[f64], values: &[f64], reps: usize, seed: u64) -> String {
    let mut out = String::from("level,value,reps,seed\n");
    for (l, v) in levels.iter().zip(values) {
        let _ = writeln!(out, "{l},{v},{reps},{seed}");
    }
    out
}
