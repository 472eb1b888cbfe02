use adaptrack::engine::default_combos;
use adaptrack::{linalg, param_solve, randomize, ProblemKind, SolveConfig, TrackerConfig};
use adaptrack_bench::{start_jacobian, vision_fixture};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn kernels(c: &mut Criterion) {
    let f = vision_fixture(ProblemKind::FivePoint, 1, 1);
    let jg = start_jacobian(&f);
    let mut g = c.benchmark_group("kernels");
    g.bench_function("cond2", |b| b.iter(|| linalg::cond2(&jg)));
    g.bench_function("pseudoinverse", |b| b.iter(|| randomize::pinv_randomizer(&jg).unwrap()));
    g.bench_function("leverage", |b| b.iter(|| randomize::leverage_randomizer(&jg).unwrap()));
    g.finish();
}

fn five_point_solve(c: &mut Criterion) {
    let f = vision_fixture(ProblemKind::FivePoint, 1, 1);
    let mut g = c.benchmark_group("five_point_solve");
    g.sample_size(20);
    for combo in default_combos() {
        let config = SolveConfig {
            tracker: TrackerConfig { truncation_enabled: combo.truncation, ..TrackerConfig::default() },
            ..SolveConfig::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(combo.label()), &combo, |b, combo| {
            b.iter(|| param_solve(&f.system, &f.start, &f.targets[0], combo.strategies, &config).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kernels, five_point_solve);
criterion_main!(benches);
