//! Markov-modulated noise: a finite irreducible aperiodic chain `V` selects,
//! index by index, which noise scale `σ_v` multiplies a zero-mean
//! unit-variance base draw.
//!
//! States are 0-based in code and 1-based in exported files.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    Fixed(usize),
    Stationary,
}

/// A validated row-stochastic, irreducible, aperiodic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    transition: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
    initial: InitialState,
    stationary: Vec<f64>,
    stationary_cumulative: Vec<f64>,
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    row.iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn draw_index(cum: &[f64], u: f64) -> usize {
    // The last bucket absorbs any rounding shortfall in the cumulative sum.
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

fn reachable(adj: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible chain: gcd of `level(u) + 1 − level(v)` over all
/// edges, with BFS levels from state 0.
fn period(adj: &[Vec<usize>]) -> usize {
    let m = adj.len();
    let mut level = vec![usize::MAX; m];
    let mut queue = std::collections::VecDeque::from([0usize]);
    level[0] = 0;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for (u, targets) in adj.iter().enumerate() {
        for &v in targets {
            let diff = (level[u] + 1).abs_diff(level[v]);
            g = gcd(g, diff);
        }
    }
    g
}

/// Solves `πP = π`, `Σπ = 1` with the normalization row replacing the last
/// balance equation.
fn solve_stationary(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = transition.len();
    // Rows of A are the balance equations: Σ_u π_u (P_uv − δ_uv) = 0.
    let mut a = DMatrix::<f64>::zeros(m, m);
    for v in 0..m {
        for u in 0..m {
            a[(v, u)] = transition[u][v] - if u == v { 1.0 } else { 0.0 };
        }
    }
    for u in 0..m {
        a[(m - 1, u)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(m);
    rhs[m - 1] = 1.0;
    let lu = a.lu();
    let pi = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Structural("balance system is singular".into()))?;
    if pi.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return Err(Error::Structural(format!(
            "solution has non-positive entries: {:?}",
            pi.as_slice()
        )));
    }
    let total: f64 = pi.iter().sum();
    Ok(pi.iter().map(|p| p / total).collect())
}

impl MarkovChain {
    /// Validates a transition matrix: rows stochastic, strongly connected
    /// positive-entry graph, period 1. Starts from the stationary law.
    pub fn new(transition: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_initial(transition, InitialState::Stationary)
    }

    pub fn with_initial(transition: Vec<Vec<f64>>, initial: InitialState) -> Result<Self> {
        let m = transition.len();
        if m == 0 {
            return Err(Error::NotSquare {
                row: 0,
                len: 0,
                expected: 1,
            });
        }
        for (row, entries) in transition.iter().enumerate() {
            if entries.len() != m {
                return Err(Error::NotSquare {
                    row: row + 1,
                    len: entries.len(),
                    expected: m,
                });
            }
            if let Some(p) = entries
                .iter()
                .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
            {
                return Err(Error::NonStochastic {
                    row: row + 1,
                    reason: format!("entry {p} is not a probability"),
                });
            }
            let total: f64 = entries.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NonStochastic {
                    row: row + 1,
                    reason: format!("row sums to {total}"),
                });
            }
        }
        if let InitialState::Fixed(s) = initial {
            if s >= m {
                return Err(Error::Precondition(format!(
                    "initial state {} is outside 1..={m}",
                    s + 1
                )));
            }
        }

        let adj: Vec<Vec<usize>> = transition
            .iter()
            .map(|r| (0..m).filter(|&v| r[v] > 0.0).collect())
            .collect();
        let mut reverse = vec![Vec::new(); m];
        for (u, targets) in adj.iter().enumerate() {
            for &v in targets {
                reverse[v].push(u);
            }
        }
        let fwd = reachable(&adj, 0);
        let back = reachable(&reverse, 0);
        let unreachable: Vec<usize> = (0..m)
            .filter(|&v| !(fwd[v] && back[v]))
            .map(|v| v + 1)
            .collect();
        if !unreachable.is_empty() {
            return Err(Error::Reducible {
                from: 1,
                unreachable,
            });
        }
        let period = period(&adj);
        if period != 1 {
            return Err(Error::Periodic { period });
        }

        let stationary = solve_stationary(&transition)?;
        Ok(Self {
            cumulative: transition.iter().map(|r| cumulative(r)).collect(),
            stationary_cumulative: cumulative(&stationary),
            transition,
            initial,
            stationary,
        })
    }

    /// The single-state chain.
    pub fn degenerate() -> Self {
        Self::new(vec![vec![1.0]]).expect("single state chain is valid")
    }

    /// Parses a CSV of `M` rows with `M` comma-separated probabilities.
    pub fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::NonStochastic {
                    row: lineno + 1,
                    reason: format!("`{line}` is not a list of numbers"),
                })?;
            rows.push(row);
        }
        Ok(rows)
    }

    pub fn state_count(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn initial(&self) -> InitialState {
        self.initial
    }

    pub fn stationary_distribution(&self) -> &[f64] {
        &self.stationary
    }

    /// Draws `n` states: the first from the initial law, each next one from
    /// the row of its predecessor. Consumes one uniform per step, except that
    /// a single-state chain consumes nothing.
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        if self.state_count() == 1 {
            return vec![0; n];
        }
        let mut states = Vec::with_capacity(n);
        if n == 0 {
            return states;
        }
        let mut current = match self.initial {
            InitialState::Fixed(s) => s,
            InitialState::Stationary => draw_index(&self.stationary_cumulative, rng.random()),
        };
        states.push(current);
        for _ in 1..n {
            current = draw_index(&self.cumulative[current], rng.random());
            states.push(current);
        }
        states
    }
}

/// Zero-mean, unit-variance base law scaled by `σ_v` per state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaseNoise {
    #[default]
    Gaussian,
    /// Uniform on `[-√3, √3]`.
    CenteredUniform,
    /// ±1 with equal probability.
    Rademacher,
}

impl BaseNoise {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            BaseNoise::Gaussian => StandardNormal.sample(rng),
            BaseNoise::CenteredUniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            BaseNoise::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseNoise::Gaussian => "gaussian",
            BaseNoise::CenteredUniform => "uniform",
            BaseNoise::Rademacher => "rademacher",
        }
    }
}

impl std::str::FromStr for BaseNoise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(BaseNoise::Gaussian),
            "uniform" => Ok(BaseNoise::CenteredUniform),
            "rademacher" => Ok(BaseNoise::Rademacher),
            other => Err(Error::InvalidNoise(format!(
                "unknown noise law `{other}` (expected gaussian, uniform or rademacher)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    chain: MarkovChain,
    state_sd: Vec<f64>,
    base: BaseNoise,
}

impl NoiseModel {
    pub fn new(chain: MarkovChain, state_sd: Vec<f64>, base: BaseNoise) -> Result<Self> {
        if state_sd.len() != chain.state_count() {
            return Err(Error::InvalidNoise(format!(
                "{} noise scales given for {} states",
                state_sd.len(),
                chain.state_count()
            )));
        }
        if let Some(s) = state_sd.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InvalidNoise(format!(
                "noise scale {s} must be finite and >= 0"
            )));
        }
        if state_sd.iter().map(|s| s * s).sum::<f64>() <= 0.0 {
            return Err(Error::InvalidNoise(
                "at least one state must carry noise (sum of variances is zero)".into(),
            ));
        }
        Ok(Self {
            chain,
            state_sd,
            base,
        })
    }

    /// Single-state noise with scale `sd`.
    pub fn iid(sd: f64, base: BaseNoise) -> Result<Self> {
        Self::new(MarkovChain::degenerate(), vec![sd], base)
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn state_sd(&self) -> &[f64] {
        &self.state_sd
    }

    pub fn base(&self) -> BaseNoise {
        self.base
    }

    /// `σ² = Σ_v σ_v² π_v`.
    pub fn composite_variance(&self) -> f64 {
        self.state_sd
            .iter()
            .zip(self.chain.stationary_distribution())
            .map(|(s, p)| s * s * p)
            .sum()
    }

    /// One base draw per index, scaled by the state's `σ_v`.
    pub fn sample_noise<R: Rng + ?Sized>(&self, states: &[usize], rng: &mut R) -> Vec<f64> {
        states
            .iter()
            .map(|&v| self.state_sd[v] * self.base.draw(rng))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> MarkovChain {
        MarkovChain::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    // Oracle: power iteration from the uniform vector.
    fn power_iteration(p: &[Vec<f64>]) -> Vec<f64> {
        let m = p.len();
        let mut pi = vec![1.0 / m as f64; m];
        for _ in 0..10_000 {
            let mut next = vec![0.0; m];
            for u in 0..m {
                for v in 0..m {
                    next[v] += pi[u] * p[u][v];
                }
            }
            pi = next;
        }
        pi
    }

    #[test]
    fn stationary_examples() {
        assert_eq!(MarkovChain::degenerate().stationary_distribution(), &[1.0]);
        let sym = MarkovChain::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(sym.stationary_distribution()[0], 0.5, epsilon = 1e-15);
        let pi = two_state().stationary_distribution().to_vec();
        let oracle = power_iteration(two_state().transition());
        assert_abs_diff_eq!(oracle[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            MarkovChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap_err(),
            Error::Periodic { period: 2 }
        );
        assert!(matches!(
            MarkovChain::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            Err(Error::Reducible { .. })
        ));
        assert!(matches!(
            MarkovChain::new(vec![vec![0.5, 0.4], vec![0.2, 0.8]]),
            Err(Error::NonStochastic { row: 1, .. })
        ));
        assert!(matches!(
            MarkovChain::new(vec![vec![0.5, 0.5], vec![1.0]]),
            Err(Error::NotSquare { row: 2, .. })
        ));
        // Three-cycle is periodic even though strongly connected.
        assert_eq!(
            MarkovChain::new(vec![
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0]
            ])
            .unwrap_err(),
            Error::Periodic { period: 3 }
        );
        // One-way edge: state 2 cannot return to state 1.
        assert_eq!(
            MarkovChain::new(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap_err(),
            Error::Reducible {
                from: 1,
                unreachable: vec![2]
            }
        );
    }

    #[test]
    fn two_state_chain_square_is_positive() {
        let p = two_state();
        let t = p.transition();
        for i in 0..2 {
            for j in 0..2 {
                let p2: f64 = (0..2).map(|k| t[i][k] * t[k][j]).sum();
                assert!(p2 > 0.0);
            }
        }
    }

    #[test]
    fn simulate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            MarkovChain::degenerate().simulate(4, &mut rng),
            vec![0, 0, 0, 0]
        );
        let states = two_state().simulate(1_000_000, &mut rng);
        let freq = states.iter().filter(|&&s| s == 0).count() as f64 / states.len() as f64;
        assert!((freq - 2.0 / 3.0).abs() < 0.005, "{freq}");
    }

    #[test]
    fn fixed_initial_state() {
        let chain =
            MarkovChain::with_initial(vec![vec![0.9, 0.1], vec![0.2, 0.8]], InitialState::Fixed(1))
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            assert_eq!(chain.simulate(3, &mut rng)[0], 1);
        }
        assert!(MarkovChain::with_initial(vec![vec![1.0]], InitialState::Fixed(1)).is_err());
    }

    #[test]
    fn noise_examples() {
        let chain = MarkovChain::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(NoiseModel::new(chain.clone(), vec![0.0, 0.0], BaseNoise::Gaussian).is_err());
        assert!(NoiseModel::new(chain.clone(), vec![1.0], BaseNoise::Gaussian).is_err());

        let model = NoiseModel::new(chain.clone(), vec![1.0, 2.0], BaseNoise::Gaussian).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = model.sample_noise(&vec![1; 100_000], &mut rng);
        let m = crate::sum::mean(&draws);
        let var = draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / draws.len() as f64;
        assert!((var - 4.0).abs() / 4.0 < 0.03, "{var}");

        let rad = NoiseModel::iid(1.0, BaseNoise::Rademacher).unwrap();
        let draws = rad.sample_noise(&[0; 1000], &mut rng);
        assert!(draws.iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn base_laws_have_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for base in [
            BaseNoise::Gaussian,
            BaseNoise::CenteredUniform,
            BaseNoise::Rademacher,
        ] {
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| base.draw(&mut rng)).collect();
            let m = crate::sum::mean(&xs);
            let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
            // mean se = 1/√n, variance se ≤ √(2/n) for these laws
            assert!(m.abs() < 5.0 / (n as f64).sqrt(), "{base:?} mean {m}");
            assert!(
                (var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(),
                "{base:?} var {var}"
            );
        }
    }

    #[test]
    fn noise_is_uncorrelated_at_lag_one() {
        let model = NoiseModel::new(two_state(), vec![1.0, 2.0], BaseNoise::Gaussian).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let states = model.chain().simulate(100_000, &mut rng);
        let eps = model.sample_noise(&states, &mut rng);
        let prods: Vec<f64> = eps.windows(2).map(|w| w[0] * w[1]).collect();
        let m = crate::sum::mean(&prods);
        let sd = (prods.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / prods.len() as f64).sqrt();
        assert!(m.abs() <= 5.0 * sd / (prods.len() as f64).sqrt());
    }

    #[test]
    fn composite_variance_examples() {
        let one = NoiseModel::iid(1.5, BaseNoise::Gaussian).unwrap();
        assert_eq!(one.composite_variance(), 2.25);
        let two = NoiseModel::new(two_state(), vec![1.0, 2.0], BaseNoise::Gaussian).unwrap();
        assert_abs_diff_eq!(two.composite_variance(), 2.0, epsilon = 1e-12);
        let sym = MarkovChain::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let sym = NoiseModel::new(sym, vec![0.0, 2.0], BaseNoise::Gaussian).unwrap();
        assert_abs_diff_eq!(sym.composite_variance(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn parse_transition_csv() {
        let rows = MarkovChain::parse_csv("0.9, 0.1\n0.2,0.8\n").unwrap();
        assert_eq!(rows, vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        assert!(MarkovChain::parse_csv("0.9,x\n").is_err());
    }

    proptest! {
        #[test]
        fn accepted_chains_are_stationary(
            m in 1usize..6,
            raw in proptest::collection::vec(0.0f64..1.0, 36),
            zero_mask in proptest::collection::vec(any::<bool>(), 36),
        ) {
            let mut rows = Vec::new();
            for i in 0..m {
                let mut row: Vec<f64> = (0..m)
                    .map(|j| if zero_mask[i * 6 + j] { 0.0 } else { raw[i * 6 + j] + 1e-3 })
                    .collect();
                if row.iter().all(|&p| p == 0.0) {
                    row[i] = 1.0;
                }
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= total);
                // Re-normalize the last entry so the row sums to 1 within rounding.
                let head: f64 = row[..m - 1].iter().sum();
                row[m - 1] = (1.0 - head).max(0.0);
                rows.push(row);
            }
            match MarkovChain::new(rows.clone()) {
                Ok(chain) => {
                    let pi = chain.stationary_distribution();
                    prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    for v in 0..m {
                        let lhs: f64 = (0..m).map(|u| pi[u] * rows[u][v]).sum();
                        prop_assert!((lhs - pi[v]).abs() <= 1e-12, "{lhs} vs {}", pi[v]);
                        prop_assert!(pi[v] > 0.0);
                    }
                }
                Err(Error::Reducible { .. }) | Err(Error::Periodic { .. }) | Err(Error::NonStochastic { .. }) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
