use qrp_core::oracle::lp::DENSE_VAR_LIMIT;
use qrp_core::oracle::{
    certificate, compare_to_closed_form, discretize, solve_lp, LpMethod, LpOptions, LpStatus,
    Tolerances,
};
use qrp_core::random::instance_from_seed;
use qrp_core::{instances, solve_dso};

fn coarse_step(span: f64, n: usize, k: usize) -> f64 {
    // Keep the dense tableau comfortably small.
    let bins = (DENSE_VAR_LIMIT / (2 * n * k)).max(20) as f64;
    span / bins
}

#[test]
fn certificates_hold_on_random_instances() {
    for seed in 0..12 {
        let inst = instance_from_seed(seed);
        let (c, f) = (&inst.corridor, &inst.schedule);
        let dso = solve_dso(c, f).unwrap();
        let w = dso.origin_window(c.n_bottlenecks() - 1);
        let dt = coarse_step(w.t_plus - w.t_minus + 1.0, c.n_bottlenecks(), c.n_groups());
        let lp = discretize(c, f, dt, 0.5).unwrap();
        for method in [LpMethod::DenseSimplex, LpMethod::NetworkFlow] {
            let res = solve_lp(
                &lp,
                &LpOptions {
                    method,
                    ..LpOptions::default()
                },
            );
            assert_eq!(res.status, LpStatus::Optimal, "seed {seed} {method:?}");
            let cert = certificate(&lp, &res);
            let scale = res.objective.abs().max(1.0);
            assert!(
                cert.primal_infeasibility <= 1e-9,
                "seed {seed} {method:?} {cert:?}"
            );
            assert!(
                cert.dual_infeasibility <= 1e-8,
                "seed {seed} {method:?} {cert:?}"
            );
            assert!(
                cert.complementarity <= 1e-8 * scale,
                "seed {seed} {method:?} {cert:?}"
            );
            assert!(
                cert.duality_gap <= 1e-7 * scale,
                "seed {seed} {method:?} {cert:?}"
            );
        }
    }
}

#[test]
fn solvers_agree_and_approach_closed_form() {
    for seed in 20..30 {
        let inst = instance_from_seed(seed);
        let (c, f) = (&inst.corridor, &inst.schedule);
        let dso = solve_dso(c, f).unwrap();
        let w = dso.origin_window(c.n_bottlenecks() - 1);
        let dt = coarse_step(w.t_plus - w.t_minus + 1.0, c.n_bottlenecks(), c.n_groups());
        let lp = discretize(c, f, dt, 0.5).unwrap();
        let dense = solve_lp(
            &lp,
            &LpOptions {
                method: LpMethod::DenseSimplex,
                ..LpOptions::default()
            },
        );
        let flow = solve_lp(
            &lp,
            &LpOptions {
                method: LpMethod::NetworkFlow,
                ..LpOptions::default()
            },
        );
        assert!((dense.objective - flow.objective).abs() <= 1e-9 * dense.objective.abs().max(1.0));
        let rep = compare_to_closed_form(&lp, &flow, &dso, &Tolerances::default());
        // Coarse grids: only the objective is held to the default tolerance.
        assert!(rep.objective_ok(), "seed {seed}: {rep:?}");
    }
}

#[test]
fn identical_input_gives_identical_output() {
    let (c, f) = instances::two_bottleneck();
    let lp = discretize(&c, &f, 0.02, 0.5).unwrap();
    for method in [LpMethod::DenseSimplex, LpMethod::NetworkFlow] {
        let opts = LpOptions {
            method,
            ..LpOptions::default()
        };
        let (a, b) = (solve_lp(&lp, &opts), solve_lp(&lp, &opts));
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.flows, b.flows);
        assert_eq!(a.prices, b.prices);
    }
}

#[test]
fn reference_price_at_zero() {
    let (c, f) = instances::two_bottleneck();
    let lp = discretize(&c, &f, 0.01, 0.5).unwrap();
    let res = solve_lp(&lp, &LpOptions::default());
    let n0 = ((0.0 - lp.start) / lp.dt).round() as usize;
    assert!((lp.time(n0)).abs() < 1e-2);
    assert!(
        (res.prices[0][n0] - 0.415385).abs() < 0.02,
        "{}",
        res.prices[0][n0]
    );
    assert!(
        (res.prices[1][n0] - 0.415385).abs() < 0.02,
        "{}",
        res.prices[1][n0]
    );
}

#[test]
fn pivot_budget_is_reported() {
    let (c, f) = instances::two_bottleneck();
    let lp = discretize(&c, &f, 0.05, 0.5).unwrap();
    let res = solve_lp(
        &lp,
        &LpOptions {
            method: LpMethod::DenseSimplex,
            max_pivots: 3,
        },
    );
    assert_eq!(res.status, LpStatus::IterLimit);
}
