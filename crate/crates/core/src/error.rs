use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain where the operation is defined.
    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },
    /// The quantile at probability 1 is infinite for unbounded support.
    #[error("quantile at s = {s} is not finite for {family}")]
    Range { family: String, s: f64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("cannot parse distribution spec `{input}`: {reason} (expected e.g. `uniform(0,1)`, `exp(1)`, `normal(0,1)`, `empirical(data.csv)`)")]
    ParseDistribution { input: String, reason: String },
    #[error("adaptive quadrature did not reach tolerance {requested:e} (achieved {achieved:e}) within {subdivisions} subdivisions")]
    Quadrature {
        requested: f64,
        achieved: f64,
        subdivisions: usize,
    },

    #[error("transition matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("transition matrix row {row} is not stochastic: {reason}")]
    NonStochastic { row: usize, reason: String },
    #[error("Markov chain is reducible: states {unreachable:?} cannot be reached from state {from} or cannot return to it")]
    Reducible {
        from: usize,
        unreachable: Vec<usize>,
    },
    #[error("Markov chain is periodic with period {period}")]
    Periodic { period: usize },
    #[error("stationary distribution could not be solved: {0}")]
    Structural(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid regression configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate design: all regressor values are equal")]
    DegenerateDesign,
    #[error("degenerate bridge: residual variance estimate is zero (perfect fit)")]
    DegenerateBridge,

    #[error("kernel matrix is not positive semi-definite: factorization failed with jitter up to {max_jitter:e}")]
    KernelNotPsd { max_jitter: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}
