use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use qrp_core::oracle::{discretize, solve_lp, LpMethod, LpOptions};
use qrp_core::random::instance_from_seed;
use qrp_core::{
    compare_policies, construct_due, instances, residual_eval, solve_dso, DueOptions, PolicySpec,
    SampleGrid, StateKind,
};

fn closed_form(c: &mut Criterion) {
    let (corridor, f) = instances::two_bottleneck();
    c.bench_function("solve_dso/ex1", |b| {
        b.iter(|| solve_dso(black_box(&corridor), black_box(&f)).unwrap())
    });
    let dso = solve_dso(&corridor, &f).unwrap();
    c.bench_function("construct_due/ex1", |b| {
        b.iter(|| construct_due(black_box(&dso), &DueOptions::default()).unwrap())
    });

    let mut group = c.benchmark_group("solve_dso/random");
    for seed in [3_u64, 11, 42] {
        let inst = instance_from_seed(seed);
        let n = inst.corridor.n_bottlenecks();
        let k = inst.corridor.n_groups();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("N{n}K{k}")),
            &inst,
            |b, inst| b.iter(|| solve_dso(&inst.corridor, &inst.schedule).unwrap()),
        );
    }
    group.finish();
}

fn policies(c: &mut Criterion) {
    let (corridor, f) = instances::two_bottleneck();
    let specs: Vec<PolicySpec> = [
        PolicySpec::full(StateKind::Dso),
        PolicySpec::full(StateKind::Due),
        PolicySpec::full(StateKind::Rm),
        PolicySpec::full(StateKind::Rp),
        PolicySpec::new(StateKind::Pbp, vec![2]),
        PolicySpec::new(StateKind::Prm, vec![2]),
        PolicySpec::new(StateKind::Prp, vec![1, 2]),
    ]
    .into();
    c.bench_function("compare_policies/ex1", |b| {
        b.iter(|| compare_policies(&corridor, &f, black_box(&specs)).unwrap())
    });
    let due = construct_due(&solve_dso(&corridor, &f).unwrap(), &DueOptions::default()).unwrap();
    c.bench_function("residual_eval/ex1_due", |b| {
        b.iter(|| residual_eval(black_box(&due.state), &SampleGrid::default()))
    });
}

fn lp_oracle(c: &mut Criterion) {
    let (corridor, f) = instances::two_bottleneck();
    let lp = discretize(&corridor, &f, 0.04, 0.5).unwrap();
    let mut group = c.benchmark_group("lp/ex1_dt0.04");
    group.sample_size(20);
    for method in [LpMethod::DenseSimplex, LpMethod::NetworkFlow] {
        let opts = LpOptions {
            method,
            ..LpOptions::default()
        };
        group.bench_function(format!("{method:?}"), |b| b.iter(|| solve_lp(&lp, &opts)));
    }
    group.finish();
}

criterion_group!(benches, closed_form, policies, lp_oracle);
criterion_main!(benches);
