use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splq_core::distribution::draw;
use splq_core::divergence::Divergence;
use splq_core::dualsolve::{DualOptions, DualProblem};
use splq_core::estimator::{asymptotic_covariance, fit_divergence, fit_mle_gpd, FitOptions};
use splq_core::lmoments::{sample_lmoments_u, sample_lmoments_v, CovarianceQuad, SortedSample};
use splq_core::models::{Gpd, SplqModel};

fn gpd_sample(n: usize, seed: u64) -> SortedSample {
    let gpd = Gpd::new(3.0, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SortedSample::new(draw(&gpd, n, &mut rng)).unwrap()
}

fn lmoments(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_lmoments");
    for n in [100, 10_000] {
        let s = gpd_sample(n, 1);
        group.bench_with_input(BenchmarkId::new("v", n), &s, |b, s| {
            b.iter(|| sample_lmoments_v(black_box(s), 4).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("u", n), &s, |b, s| {
            b.iter(|| sample_lmoments_u(black_box(s), 4).unwrap())
        });
    }
    group.finish();
}

fn dual(c: &mut Criterion) {
    let model = SplqModel::gpd_l234();
    let s = gpd_sample(500, 2);
    let f = model.target(&[3.2, 0.25]).unwrap();
    let mut group = c.benchmark_group("dual_solve_n500");
    for div in [Divergence::Chi2, Divergence::Klm, Divergence::Kl] {
        let problem = DualProblem::new(&s, model.basis(), div);
        group.bench_function(div.to_string(), |b| {
            b.iter(|| problem.solve(black_box(&f), &DualOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn fits(c: &mut Criterion) {
    let model = SplqModel::gpd_l234();
    let s = gpd_sample(100, 3);
    let mut group = c.benchmark_group("fit_n100");
    group.sample_size(20);
    for div in [Divergence::Chi2, Divergence::Klm] {
        group.bench_function(div.to_string(), |b| {
            b.iter(|| fit_divergence(black_box(&s), &model, div, &FitOptions::default()).unwrap())
        });
    }
    group.bench_function("mle", |b| b.iter(|| fit_mle_gpd(black_box(&s)).unwrap()));
    group.finish();
}

fn covariance(c: &mut Criterion) {
    let model = SplqModel::gpd_l234();
    let gpd = Gpd::new(3.0, 0.1).unwrap();
    let mut group = c.benchmark_group("asymptotic_covariance");
    group.sample_size(10);
    group.bench_function("gpd", |b| {
        b.iter(|| asymptotic_covariance(&[3.0, 0.1], &model, black_box(&gpd), &CovarianceQuad::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, lmoments, dual, fits, covariance);
criterion_main!(benches);
