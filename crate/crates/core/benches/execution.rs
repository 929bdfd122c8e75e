//! Sequential vs parallel execution of the batch workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use cvxtau::concentration::{verify_corr1, ConvexSet, MonteCarlo, ProductMeasure};
use cvxtau::infconv::{infconv_sorted, GridMethod};
use cvxtau::tau::{certify_tau, tau_constant, SuiteConfig};
use cvxtau::{Cost, Execution, Measure1D, PLConvex};

const STRATEGIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn tau_suite(c: &mut Criterion) {
    let mu = Measure1D::exponential(1.0).unwrap();
    let c_tau = tau_constant(1.0, (-1f64).exp());
    let mut group = c.benchmark_group("certify_tau");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        let cfg = SuiteConfig { exec, ..SuiteConfig::new(100, 1) };
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| certify_tau(&mu, c_tau, black_box(&cfg))));
    }
    group.finish();
}

fn quadratic_scan(c: &mut Criterion) {
    let f = PLConvex::max_affine(&[(-1.5, 0.0), (0.2, 0.3), (2.0, -1.0)]).unwrap();
    let ys: Vec<f64> = (0..4000).map(|i| -10.0 + 20.0 * i as f64 / 3999.0).collect();
    let vals: Vec<f64> = ys.iter().map(|&y| f.eval(y)).collect();
    let cost = Cost::new(2.0);
    let mut group = c.benchmark_group("infconv_quadratic_scan");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| infconv_sorted(&ys, &vals, black_box(&ys), &cost, GridMethod::QuadraticScan, exec))
        });
    }
    group.finish();
}

fn enlargement_sampling(c: &mut Criterion) {
    let pm = ProductMeasure::iid(Measure1D::exponential(1.0).unwrap(), 16).unwrap();
    let set = ConvexSet::HalfSpace { a: vec![0.25; 16], c: 0.0 };
    let mut group = c.benchmark_group("two_level_monte_carlo");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        let mc = MonteCarlo { samples: 50_000, seed: 3, exec };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verify_corr1(&pm, &set, 1.0, (-1f64).exp(), &[0.5, 1.0, 2.0, 4.0], black_box(&mc)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, tau_suite, quadratic_scan, enlargement_sampling);
criterion_main!(benches);
