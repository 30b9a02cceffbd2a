use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ordreg_bench::two_state_config;
use ordreg_core::rng::derive_stream;
use ordreg_core::{
    empirical_bridge, generate_sample, ols_fit, residual_process, DistributionSpec, Kernel,
    KernelGrid,
};

fn kernel_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_grid");
    group.sample_size(10);
    for dist in ["uniform(0,1)", "exp(1)"] {
        let kernel = Kernel::new(dist.parse::<DistributionSpec>().unwrap()).unwrap();
        for g in [64usize, 256] {
            group.bench_with_input(BenchmarkId::new(dist, g), &g, |b, &g| {
                b.iter(|| KernelGrid::new(black_box(&kernel), g).unwrap())
            });
        }
    }
    group.finish();
}

fn limit_paths(c: &mut Criterion) {
    let grid = KernelGrid::new(
        &Kernel::new(DistributionSpec::uniform(0.0, 1.0).unwrap()).unwrap(),
        256,
    )
    .unwrap();
    let mut group = c.benchmark_group("limit_paths");
    group.sample_size(10);
    group.bench_function("sup_statistics/G=256/R=1000", |b| {
        b.iter(|| grid.sup_statistics(1000, black_box(1)))
    });
    group.finish();
}

fn sample_and_bridge(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_and_bridge");
    for n in [200usize, 2000, 20_000] {
        let cfg = two_state_config(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cfg, |b, cfg| {
            let mut rng = derive_stream(3, &[n as u64]);
            b.iter(|| {
                let sample = generate_sample(cfg, &mut rng);
                let fit = ols_fit(&sample).unwrap();
                empirical_bridge(&residual_process(&sample, &fit))
                    .unwrap()
                    .sup_abs()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, kernel_grid, limit_paths, sample_and_bridge);
criterion_main!(benches);
