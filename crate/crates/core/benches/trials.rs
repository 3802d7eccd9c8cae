use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hyposel::harness::{run_experiment_with, Execution, ExperimentConfig, InstanceKind};
use hyposel::sampling::OracleMode;
use hyposel::selectors::{Algorithm, RefinedParams};

fn config(trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        master_seed: 11,
        n: 8,
        domain_size: 16,
        eps: 0.2,
        delta: 0.1,
        algorithms: vec![Algorithm::Basic, Algorithm::Refined],
        trials,
        instance_kind: InstanceKind::RandomDirichlet,
        params: RefinedParams::default(),
        oracle_mode: OracleMode::Sampled,
        instances: None,
        record_timing: false,
    }
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    for n_trials in [4usize, 16] {
        let cfg = config(n_trials);
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n_trials), &cfg, |b, cfg| {
                b.iter(|| run_experiment_with(cfg, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
