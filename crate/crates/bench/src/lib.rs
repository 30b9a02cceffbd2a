//! Benchmark fixtures.

use ordreg_core::{BaseNoise, DistributionSpec, MarkovChain, NoiseModel, RegressionConfig};

/// Uniform regressors with a two-state modulated Gaussian noise.
pub fn two_state_config(n: usize) -> RegressionConfig {
    let chain = MarkovChain::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).expect("valid chain");
    let noise = NoiseModel::new(chain, vec![1.0, 2.0], BaseNoise::Gaussian).expect("valid noise");
    let dist = DistributionSpec::uniform(0.0, 1.0).expect("valid law");
    RegressionConfig::new(1.0, 2.0, n, dist, noise).expect("valid config")
}
