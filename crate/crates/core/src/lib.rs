//! Residual partial-sum processes for simple linear regression against order
//! statistics with Markov-modulated noise.
//!
//! The crate simulates `Y_i = a + b·ξ_{i:n} + ε_i^{V_i}`, fits it by least
//! squares, and turns the residual partial sums into an *empirical bridge*
//! pinned at both ends. As `n` grows the bridge approaches a centered Gaussian
//! process whose kernel is the Brownian-bridge kernel minus a rank-one term
//! built from the regressor's general Lorenz curve:
//!
//! ```text
//! K⁰(t, s) = min(t, s) − t·s − GL⁰(t)·GL⁰(s) / Var ξ
//! ```
//!
//! Modules:
//!
//! - [`distributions`]: regressor laws, quantiles, Lorenz curves
//! - [`noise`]: Markov chains and state-dependent noise
//! - [`regression`]: simulation, fit, residual polygons
//! - [`limit`]: the kernel, path sampling, sup-statistics
//! - [`montecarlo`]: convergence checks and reports

pub mod distributions;
pub mod error;
pub mod limit;
pub mod montecarlo;
pub mod noise;
pub mod quadrature;
pub mod regression;
pub mod rng;
pub mod stats;
pub mod sum;

pub use distributions::{DistributionSpec, Family, LorenzCurve, Moments};
pub use error::{Error, Result};
pub use limit::{
    critical_values, kernel_matrix, kernel_value, sample_limit_path, sup_statistic, Kernel,
    KernelGrid, SupStatisticSample,
};
pub use montecarlo::{McConfig, McReport};
pub use noise::{BaseNoise, InitialState, MarkovChain, NoiseModel};
pub use regression::{
    empirical_bridge, empirical_lorenz, generate_sample, ols_fit, random_polygon, residual_process,
    BridgePolygon, OlsFit, PolygonKind, RegressionConfig, RegressionSample, ResidualProcess,
};
