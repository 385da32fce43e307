use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use nonconvex_ot::ensembles::{oracle_min_path, Objective};
use nonconvex_ot::harness::{verify_with, Theorem, VerifyConfig};
use nonconvex_ot::{CostFunction, ExecMode};

const MODES: [(&str, ExecMode); 2] = [
    ("sequential", ExecMode::Sequential),
    ("parallel", ExecMode::Parallel),
];

fn oracle(c: &mut Criterion) {
    let cost = CostFunction::power(0.5).unwrap();
    let speeds = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];
    let mut g = c.benchmark_group("oracle_k8");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                oracle_min_path(
                    0.0,
                    black_box(1.0),
                    &cost,
                    Objective::L1,
                    8,
                    &speeds,
                    None,
                    mode,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn suites(c: &mut Criterion) {
    let mut g = c.benchmark_group("verify");
    g.sample_size(10);
    for theorem in [Theorem::Thm2_1, Theorem::Thm2_6] {
        let cfg = VerifyConfig {
            trials: 32,
            n_atoms: 5,
            ..VerifyConfig::new(theorem, "power:0.5".parse().unwrap())
        };
        for (name, mode) in MODES {
            g.bench_function(BenchmarkId::new(theorem.as_str(), name), |b| {
                b.iter(|| verify_with(black_box(&cfg), mode).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, oracle, suites);
criterion_main!(benches);
