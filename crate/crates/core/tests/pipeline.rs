use ordreg_core::rng::derive_stream;
use ordreg_core::{
    empirical_bridge, generate_sample, kernel_value, ols_fit, residual_process, BaseNoise,
    DistributionSpec, Kernel, KernelGrid, MarkovChain, NoiseModel, RegressionConfig,
};
use proptest::prelude::*;

fn dist_strategy() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (-5.0..5.0f64, 0.1..10.0f64)
            .prop_map(|(lo, w)| DistributionSpec::uniform(lo, lo + w).unwrap()),
        (0.1..10.0f64).prop_map(|r| DistributionSpec::exponential(r).unwrap()),
        (-5.0..5.0f64, 0.1..5.0f64).prop_map(|(m, s)| DistributionSpec::normal(m, s).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_is_symmetric_and_pinned(dist in dist_strategy(), t in 0.0..=1.0f64, s in 0.0..=1.0f64) {
        let k = kernel_value(&dist, t, s).unwrap();
        prop_assert_eq!(k.to_bits(), kernel_value(&dist, s, t).unwrap().to_bits());
        prop_assert_eq!(kernel_value(&dist, 0.0, s).unwrap(), 0.0);
        prop_assert_eq!(kernel_value(&dist, 1.0, s).unwrap(), 0.0);
        // bounded by the Brownian-bridge kernel on the diagonal
        prop_assert!(kernel_value(&dist, t, t).unwrap() <= t - t * t + 1e-12);
    }

    #[test]
    fn bridges_are_pinned_and_grid_sup_is_a_lower_bound(
        dist in dist_strategy(),
        n in 3usize..400,
        seed in any::<u64>(),
        g in 2usize..64,
        p in 0.05..0.95f64,
    ) {
        let chain = MarkovChain::new(vec![vec![1.0 - p, p], vec![0.5, 0.5]]).unwrap();
        let noise = NoiseModel::new(chain, vec![0.5, 2.0], BaseNoise::CenteredUniform).unwrap();
        let cfg = RegressionConfig::new(0.3, -1.2, n, dist, noise).unwrap();
        let sample = generate_sample(&cfg, &mut derive_stream(seed, &[]));
        let fit = ols_fit(&sample).unwrap();
        let bridge = empirical_bridge(&residual_process(&sample, &fit)).unwrap();
        prop_assert_eq!(bridge.nodes.len(), n + 1);
        prop_assert_eq!(bridge.nodes[0], 0.0);
        prop_assert_eq!(bridge.nodes[n], 0.0);
        prop_assert!(bridge.sup_abs_on_grid(g).unwrap() <= bridge.sup_abs());
    }
}

#[test]
fn limit_paths_are_pinned_for_each_family() {
    for dist in ["uniform(-1,3)", "exp(0.5)", "normal(2,3)"] {
        let kernel = Kernel::new(dist.parse().unwrap()).unwrap();
        let grid = KernelGrid::new(&kernel, 64).unwrap();
        let path = grid.sample_path(&mut derive_stream(1, &[]));
        assert_eq!(path.nodes.len(), 65);
        assert_eq!(path.nodes[0], 0.0);
        assert_eq!(path.nodes[64], 0.0);
        assert!(
            grid.jitter_used() <= 1e-10,
            "{dist}: {}",
            grid.jitter_used()
        );
    }
}

#[test]
fn sample_stream_is_reproducible() {
    let chain = MarkovChain::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    let noise = NoiseModel::new(chain, vec![1.0, 2.0], BaseNoise::Gaussian).unwrap();
    let cfg = RegressionConfig::new(
        1.0,
        2.0,
        100,
        DistributionSpec::uniform(0.0, 1.0).unwrap(),
        noise,
    )
    .unwrap();
    let a = generate_sample(&cfg, &mut derive_stream(5, &[1, 2]));
    let b = generate_sample(&cfg, &mut derive_stream(5, &[1, 2]));
    let c = generate_sample(&cfg, &mut derive_stream(5, &[1, 3]));
    assert_eq!(a.to_csv(), b.to_csv());
    assert_ne!(a.to_csv(), c.to_csv());
}
