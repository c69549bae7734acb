use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lambdaq::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solver(c: &mut Criterion) {
    let normal = NormalDist::new(0.0, 1.0 / 3.0).unwrap();
    let normal_lam = PiecewiseExpLambda::continuous(1e-4, 0.06, (1e-3f64).ln(), (0.6f64).ln()).unwrap();
    let weibull = DoubleWeibull::new(5.07).unwrap();
    let weibull_lam = PiecewiseExpLambda::continuous(0.1, 0.6, -3.0, 1.0).unwrap();
    let mix = DiscontinuousMixture::two_point_masses(-65.0, -60.0, 0.2, 0.6, (3.0, 1.0), (4.0, 2.0)).unwrap();
    let mix_lam = PiecewiseExpLambda::with_jump(0.1, 0.25, 0.35, -78.0, -65.0).unwrap();
    let p = SolverParams::default();

    let mut g = c.benchmark_group("lambda_quantile");
    g.bench_function("normal", |b| b.iter(|| lambda_quantile(black_box(&normal), &normal_lam, &p).unwrap()));
    g.bench_function("double_weibull", |b| {
        b.iter(|| lambda_quantile(black_box(&weibull), &weibull_lam, &p).unwrap())
    });
    g.bench_function("mixture_bisection_only", |b| {
        b.iter(|| lambda_quantile(black_box(&mix), &mix_lam, &p).unwrap())
    });
    g.finish();
}

fn isolation(c: &mut Criterion) {
    let law = NormalDist::new(0.0, 1.0).unwrap();
    let lam = PiecewiseLinearLambda::new(vec![(-2.8, 0.01), (-1.0, 0.1), (-0.6, 0.3)], 0.01, 0.3).unwrap();
    let p = SolverParams::default();
    let mut g = c.benchmark_group("isolate_then_solve");
    for n in [8, 32, 128] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| isolate_then_solve(&law, &lam, &p, n).unwrap())
        });
    }
    g.finish();
}

fn empirical(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lam = PiecewiseExpLambda::continuous(0.01, 0.05, -1.0, 0.0).unwrap();
    let mut g = c.benchmark_group("empirical");
    for exp in [14, 17, 18] {
        let n = 1usize << exp;
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &values, |b, v| {
            b.iter_batched(
                || SampleSet::new(v.clone()).unwrap(),
                |s| empirical_lambda_quantile(&s, &lam).unwrap(),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn portfolio(c: &mut Criterion) {
    let market = MarketModel::from_sigma_corr(
        Family::Normal,
        vec![0.01, 0.02],
        &[0.1, 0.15],
        &[vec![1.0, 0.4], vec![0.4, 1.0]],
    )
    .unwrap();
    let lam: Arc<dyn LambdaFn> = Arc::new(PiecewiseLinearLambda::ramp(0.025, 0.05, -0.257, 0.277).unwrap());
    let mut g = c.benchmark_group("optimize_two_asset");
    for (name, method) in [("penalty", Method::Penalty { t: 100.0 }), ("kkt", Method::Kkt)] {
        let problem = AllocationProblem::new(market.clone(), lam.clone(), 0.015, vec![0.1, 0.9], method).unwrap();
        g.bench_function(name, |b| b.iter(|| optimize(black_box(&problem)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, solver, isolation, empirical, portfolio);
criterion_main!(benches);
