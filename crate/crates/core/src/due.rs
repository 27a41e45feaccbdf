//! User equilibrium built from the optimum by replacing every price with an
//! equal queueing delay, plus trajectories and cumulative curves.

use crate::dso::DsoSolution;
use crate::error::{Error, Result};
use crate::oracle::residual::{residual_eval, ResidualReport, SampleGrid};
use crate::schedule::{check_qrp_condition, QrpReport};
use crate::state::{slice_flows, EquilibriumState};

#[derive(Clone, Copy, Debug, Default)]
pub struct DueOptions {
    /// Build the state even when the slope condition fails (diagnostics only).
    pub force: bool,
}

#[derive(Clone, Debug)]
pub struct DueSolution {
    pub state: EquilibriumState,
    pub qrp: QrpReport,
    pub total_cost: f64,
}

/// Slope-condition check on the outer optimal window.
pub fn qrp_report(dso: &DsoSolution) -> QrpReport {
    let outer = dso.origin_window(dso.corridor.n_bottlenecks() - 1);
    check_qrp_condition(
        &dso.schedule,
        dso.corridor.capacities(),
        (outer.t_minus, outer.t_plus),
    )
}

pub fn construct_due(dso: &DsoSolution, options: &DueOptions) -> Result<DueSolution> {
    let qrp = qrp_report(dso);
    if !qrp.holds && !options.force {
        return Err(Error::QrpConditionViolated(Box::new(qrp)));
    }
    let mut state = dso.state();
    state.mainline_queues = dso.prices.clone();
    state.bottleneck_tolls = state.ramp_tolls.clone();
    state.flows = slice_flows(
        &dso.corridor,
        &dso.grid,
        &dso.windows,
        &state.mainline_queues,
    );
    let total_cost = state.sum_q_rho();
    Ok(DueSolution {
        state,
        qrp,
        total_cost,
    })
}

pub fn verify_due(s: &DueSolution, grid: &SampleGrid) -> ResidualReport {
    residual_eval(&s.state, grid)
}

/// Z^UE = Σ Q ρ: queueing is pure deadweight, nothing is collected.
pub fn total_cost_due(s: &DueSolution) -> f64 {
    s.state.sum_q_rho()
}

impl DueSolution {
    pub fn sigma(&self, i: usize, t: f64) -> f64 {
        self.state.sigma(i, t)
    }

    pub fn tau(&self, i: usize, t: f64) -> f64 {
        self.state.tau(i, t)
    }

    pub fn queue(&self, i: usize) -> &crate::curve::PiecewiseCurve {
        &self.state.mainline_queues[i]
    }
}

/// Cumulative arrivals A_i and departures D_i at bottleneck i, both counting
/// the commuters bound through bottleneck i and evaluated exactly.
#[derive(Clone, Debug)]
pub struct CumulativeCurves<'a> {
    state: &'a EquilibriumState,
    bottleneck: usize,
    upstream: crate::curve::PiecewiseCurve,
    total: f64,
}

pub fn cumulative_curves(s: &DueSolution, i: usize) -> CumulativeCurves<'_> {
    CumulativeCurves::new(&s.state, i)
}

impl<'a> CumulativeCurves<'a> {
    pub fn new(state: &'a EquilibriumState, bottleneck: usize) -> Self {
        let upstream = state.upstream_flow(bottleneck);
        let total = upstream.integral(&state.schedule);
        CumulativeCurves {
            state,
            bottleneck,
            upstream,
            total,
        }
    }

    /// Count by destination arrival time t: ∫_{-∞}^{t} Σ_{j≥i} q_j.
    pub fn count(&self, t: f64) -> f64 {
        self.upstream.integral_to(&self.state.schedule, t)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// A_i(x): commuters that reached bottleneck i by clock time x.
    pub fn arrivals(&self, x: f64) -> f64 {
        self.count(self.invert(x, |t| self.state.tau(self.bottleneck, t)))
    }

    /// D_i(x): commuters that left bottleneck i by clock time x.
    pub fn departures(&self, x: f64) -> f64 {
        self.count(self.invert(x, |t| self.state.sigma(self.bottleneck, t)))
    }

    /// Destination arrival time t with g(t) = x, for nondecreasing g.
    fn invert(&self, x: f64, g: impl Fn(f64) -> f64) -> f64 {
        let grid = &self.state.grid;
        let span = (grid[grid.len() - 1] - grid[0]).max(1.0);
        let mut lo = grid[0] - span;
        let mut hi = grid[grid.len() - 1] + span;
        // Outside the grid g(t) = t − const, so widen until bracketed.
        while g(lo) > x {
            lo -= 2.0 * span + (g(lo) - x);
        }
        while g(hi) < x {
            hi += 2.0 * span + (x - g(hi));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dso::solve_dso;
    use crate::instances;
    use crate::schedule::ScheduleDelayFn;
    use proptest::prelude::*;

    fn ex() -> (DsoSolution, DueSolution) {
        let (c, f) = instances::two_bottleneck();
        let dso = solve_dso(&c, &f).unwrap();
        let due = construct_due(&dso, &DueOptions::default()).unwrap();
        (dso, due)
    }

    #[test]
    fn queues_equal_prices() {
        let (dso, due) = ex();
        let f = &dso.schedule;
        assert_eq!(due.state.mainline_queues, dso.prices);
        assert!((due.queue(1).value(f, 0.0) - 0.415385).abs() < 1e-6);
        assert_eq!(due.state.rho, dso.rho);
        assert!((total_cost_due(&due) - 13.461538).abs() < 1e-6);
        assert!((due.total_cost - dso.total_cost - dso.revenue).abs() < 1e-12);
    }

    #[test]
    fn segment_flows_follow_exit_rates() {
        let (_, due) = ex();
        let f = &due.state.schedule;
        // Late part of the inner window: ẇ_1 = −0.9, so σ̇_2 = 1.9.
        let t = 0.15;
        let q1: f64 = due.state.flows[0].iter().map(|q| q.value(f, t)).sum();
        let q2: f64 = due.state.flows[1].iter().map(|q| q.value(f, t)).sum();
        assert!((q1 - 0.1).abs() < 1e-12 && (q2 - 1.9).abs() < 1e-12);
        // Early part: ẇ_1 = 0.4, σ̇_2 = 0.6.
        let t = -0.35;
        let q1: f64 = due.state.flows[0].iter().map(|q| q.value(f, t)).sum();
        let q2: f64 = due.state.flows[1].iter().map(|q| q.value(f, t)).sum();
        assert!((q1 - 1.4).abs() < 1e-12 && (q2 - 0.6).abs() < 1e-12);
        // Destination receives exactly μ_1 while bottleneck 1 queues.
        assert!((q1 + q2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn residuals_vanish_on_reference() {
        let (_, due) = ex();
        let r = verify_due(&due, &SampleGrid::default());
        assert!(r.max_residual() <= 1e-9, "{r:?}");
        assert!(
            (r.consistency_margin - 0.6).abs() < 1e-12,
            "{}",
            r.consistency_margin
        );
    }

    #[test]
    fn single_bottleneck_queue_is_vickrey() {
        let (c, f) = instances::single_bottleneck();
        let dso = solve_dso(&c, &f).unwrap();
        let due = construct_due(&dso, &DueOptions::default()).unwrap();
        for t in [-1.0, -0.3, 0.0, 0.4] {
            let want = dso.rho[0][0] - f.eval(t);
            assert!((due.queue(0).value(&f, t) - want).abs() < 1e-12);
        }
        let r = verify_due(&due, &SampleGrid::default());
        assert!(r.max_residual() < 1e-12);
        assert!((total_cost_due(&due) - 1.107692).abs() < 1e-6);
    }

    #[test]
    fn corrupted_queue_is_detected() {
        let (_, mut due) = ex();
        due.state.mainline_queues[0] = due.state.mainline_queues[0].scale(1.01);
        let r = verify_due(&due, &SampleGrid::default());
        assert!(r.departure_choice > 1e-4);
        assert!(r
            .first_failure(1e-8)
            .unwrap()
            .contains("departure-time choice"));
    }

    #[test]
    fn zero_flows_leave_demand_gap() {
        let (_, mut due) = ex();
        for row in &mut due.state.flows {
            for q in row {
                *q = q.scale(0.0);
            }
        }
        let r = verify_due(&due, &SampleGrid::default());
        assert!((r.conservation - 2.0).abs() < 1e-12);
    }

    #[test]
    fn optimum_prices_as_queues_give_same_choice_residual() {
        let (dso, due) = ex();
        let priced = residual_eval(&dso.state(), &SampleGrid::default());
        let mut queued = dso.state();
        queued.mainline_queues = dso.prices.clone();
        queued.bottleneck_tolls = due.state.bottleneck_tolls.clone();
        let queued = residual_eval(&queued, &SampleGrid::default());
        assert_eq!(priced.departure_choice, queued.departure_choice);
        assert!(priced.max_residual() < 1e-12);
    }

    #[test]
    fn boundary_slope_is_refused_unless_forced() {
        let (c, _) = instances::two_bottleneck();
        let f = ScheduleDelayFn::piecewise_linear(0.5, 0.9).unwrap();
        let dso = solve_dso(&c, &f).unwrap();
        let err = construct_due(&dso, &DueOptions::default()).unwrap_err();
        assert_eq!(err.code(), "QrpConditionViolated");
        let forced = construct_due(&dso, &DueOptions { force: true }).unwrap();
        assert!(!forced.qrp.holds);
    }

    #[test]
    fn cumulative_curves_reference() {
        let (_, due) = ex();
        let f = &due.state.schedule;
        let cc = cumulative_curves(&due, 0);
        assert!((cc.total() - 6.0).abs() < 1e-12);
        let lo = due.state.grid[0] - 10.0;
        let hi = due.state.grid[due.state.grid.len() - 1] + 10.0;
        assert!((cc.arrivals(hi) - cc.arrivals(lo) - 6.0).abs() < 1e-9);
        for t in [-2.0, -0.5, -0.1, 0.1, 0.25, 1.0] {
            let via_a = cc.arrivals(due.tau(0, t));
            let via_d = cc.departures(due.sigma(0, t));
            assert!((via_a - via_d).abs() < 1e-9, "FIFO at {t}");
        }
        // Departure rate equals μ_1 where bottleneck 1 queues.
        for t in [-0.5, -0.1, 0.1, 0.25] {
            assert!(due.queue(0).value(f, t) > 0.0);
            let x = due.sigma(0, t);
            let h = 1e-6;
            let rate = (cc.departures(x + h) - cc.departures(x - h)) / (2.0 * h);
            assert!((rate - 2.0).abs() < 1e-5, "rate {rate} at {t}");
        }
        let cc2 = cumulative_curves(&due, 1);
        let x = due.sigma(1, -1.0);
        let rate = (cc2.departures(x + 1e-6) - cc2.departures(x - 1e-6)) / 2e-6;
        assert!((rate - 1.0).abs() < 1e-5);
        assert!(cc2.departures(x) <= cc2.departures(x + 0.1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_instances_are_equilibria(seed in any::<u64>()) {
            let inst = crate::random::instance_from_seed(seed);
            let dso = solve_dso(&inst.corridor, &inst.schedule).unwrap();
            let due = construct_due(&dso, &DueOptions::default()).unwrap();
            let r = verify_due(&due, &SampleGrid { interior: 16, ..SampleGrid::default() });
            prop_assert!(r.passes(1e-8), "{:?}", r);
            let gap = due.total_cost - dso.total_cost;
            prop_assert!((gap - dso.revenue).abs() < 1e-8);
            prop_assert!(gap > 0.0);
        }

        #[test]
        fn fifo_holds_on_random_instances(seed in any::<u64>(), u in 0.0f64..1.0) {
            let inst = crate::random::instance_from_seed(seed);
            let dso = solve_dso(&inst.corridor, &inst.schedule).unwrap();
            let due = construct_due(&dso, &DueOptions::default()).unwrap();
            let g = &due.state.grid;
            let t = g[0] + u * (g[g.len() - 1] - g[0]);
            for i in 0..inst.corridor.n_bottlenecks() {
                let cc = cumulative_curves(&due, i);
                let a = cc.arrivals(due.tau(i, t));
                let d = cc.departures(due.sigma(i, t));
                prop_assert!((a - d).abs() < 1e-8);
                prop_assert!((cc.count(t) - d).abs() < 1e-8);
            }
        }
    }
}
