//! Step throughput of the chain runner across kernels and minibatch sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use langevin_bench::toy_model;
use langevin_core::{
    run_chain, ChainSpec, CovSource, Kernel, MinibatchScheme, Model, SamplingMode, ToyAnalytic,
};
use nalgebra::DMatrix;

fn bench_run_chain(c: &mut Criterion) {
    let model = toy_model(1000);
    let (_, _, a) = model.posterior_params();
    let h = 0.1 / a;
    let steps = 10_000u64;

    let mut group = c.benchmark_group("run_chain");
    group.throughput(Throughput::Elements(steps));

    for n in [1usize, 10, 100, 1000] {
        let scheme = MinibatchScheme::new(n, SamplingMode::WithoutReplacement);
        let ta = ToyAnalytic::new(&model, &scheme).unwrap();
        let msgld = Kernel::Msgld(CovSource::Fixed(DMatrix::from_element(1, 1, ta.var_b)));
        let spec = ChainSpec::new(h, steps, vec![0.0], 1);
        group.bench_with_input(BenchmarkId::new("sgld", n), &n, |b, _| {
            b.iter(|| run_chain(&Kernel::Sgld, &model, Some(&scheme), &spec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("msgld_fixed_cov", n), &n, |b, _| {
            b.iter(|| run_chain(&msgld, &model, Some(&scheme), &spec).unwrap())
        });
    }

    let spec = ChainSpec::new(h, steps, vec![0.0], 1);
    group.bench_function("euler", |b| {
        b.iter(|| run_chain(&Kernel::Euler, &model, None, &spec).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_run_chain);
criterion_main!(benches);
