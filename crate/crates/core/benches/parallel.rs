use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use geoinfer::data::{builtin_soil_dataset, generate_oracle_benchmark};
use geoinfer::explain::{permutation_shap, ShapMode};
use geoinfer::predictor::{build_context, decision_grid, PredictorHyper};
use geoinfer::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn grid(c: &mut Criterion) {
    let (train, _) = builtin_soil_dataset();
    let ctx = build_context(&train, "soil", &PredictorHyper::default()).unwrap();
    let mut g = c.benchmark_group("decision_grid_100x100");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| decision_grid(&ctx, "Sand", (1.0, 60.0), (100.0, 450.0), (100, 100), exec).unwrap())
        });
    }
    g.finish();
}

fn posterior_batch(c: &mut Criterion) {
    let bench = generate_oracle_benchmark(3, 500, 40, 0.5).unwrap();
    let ctx = build_context(&bench.train, "su", &PredictorHyper::default()).unwrap();
    let t = bench.train.column_index("su").unwrap();
    let queries: Vec<Vec<f64>> = (0..200)
        .map(|r| {
            bench
                .train
                .row(r)
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != t)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect();
    let mut g = c.benchmark_group("posterior_batch_200");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ctx.predict_posterior_batch(black_box(&queries), 128, exec).unwrap())
        });
    }
    g.finish();
}

fn shap(c: &mut Criterion) {
    let bench = generate_oracle_benchmark(4, 200, 10, 0.5).unwrap();
    let ctx = build_context(&bench.train, "su", &PredictorHyper::default()).unwrap();
    let t = bench.train.column_index("su").unwrap();
    let features = |r: usize| -> Vec<f64> {
        bench
            .train
            .row(r)
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != t)
            .map(|(_, &v)| v)
            .collect()
    };
    let background: Vec<Vec<f64>> = (0..8).map(features).collect();
    let x = features(100);
    let model = |q: &[f64]| ctx.predict_posterior(q, 64).map(|p| p.mean()).unwrap_or(f64::NAN);
    let mut g = c.benchmark_group("shap_mc_64");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                permutation_shap(&model, &background, &x, ShapMode::MonteCarlo { n_perm: 64, seed: 1 }, exec).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, grid, posterior_batch, shap);
criterion_main!(benches);
