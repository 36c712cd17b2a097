use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use resoflow::lab::verify::synthetic_suite;
use resoflow::lab::ExperimentConfig;
use resoflow::scattering::{assemble, Pair, SMatrixFamily};
use resoflow::Execution;

fn energy_sweep(c: &mut Criterion) {
    let cfg = ExperimentConfig::default_model();
    let triple = cfg.build_triple().unwrap();
    let hbar = 0.15;
    let mut group = c.benchmark_group("energy_sweep");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| {
                let assembly = cfg.assembly(exec);
                let family = cfg.family(exec);
                b.iter(|| {
                    let eval = |e: f64| assemble(&triple, Pair::HextH0, e, hbar, &assembly);
                    SMatrixFamily::build(Pair::HextH0, 0.9, 1.1, eval, &family).unwrap()
                })
            },
        );
    }
    group.finish();
}

fn synthetic(c: &mut Criterion) {
    let cfg = ExperimentConfig::default_model();
    let flow = cfg.flow(Execution::Sequential);
    let mut group = c.benchmark_group("synthetic_suite");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| synthetic_suite(cfg.seed, 8, 1000, &flow, exec)),
        );
    }
    group.finish();
}

criterion_group!(benches, energy_sweep, synthetic);
criterion_main!(benches);
