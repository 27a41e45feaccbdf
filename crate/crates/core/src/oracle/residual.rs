//! Complementarity residuals of an equilibrium state, sampled on every
//! segment interior and at both one-sided limits of every breakpoint.

use crate::curve::Piece;
use crate::schedule::Side;
use crate::state::EquilibriumState;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleGrid {
    /// Interior samples per segment, in addition to the two endpoints.
    pub interior: usize,
    /// Width of the empty margin sampled before and after the grid, as a share of its span.
    pub outer_margin: f64,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid {
            interior: 128,
            outer_margin: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Worst {
    pub location: String,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// max of max(0, min(q, cost − ρ)) plus negative parts, over (i,k) and samples.
    pub departure_choice: f64,
    pub departure_choice_at: Option<Worst>,
    /// Queue-or-toll ⊥ spare capacity at bottlenecks and controlled on-ramps.
    pub capacity: f64,
    pub capacity_at: Option<Worst>,
    /// max |∫ q_{i,k} − Q_{i,k}|.
    pub conservation: f64,
    pub conservation_at: Option<Worst>,
    /// min of dτ/dt over origins and samples; must stay positive.
    pub consistency_margin: f64,
    pub consistency_at: Option<Worst>,
    pub samples: usize,
}

impl ResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.departure_choice
            .max(self.capacity)
            .max(self.conservation)
    }

    /// Name of the first condition family that fails `tol`, if any.
    pub fn first_failure(&self, tol: f64) -> Option<String> {
        let describe = |name: &str, v: f64, at: &Option<Worst>| {
            let place = at
                .as_ref()
                .map(|w| format!(" at {} t = {:.6}", w.location, w.t))
                .unwrap_or_default();
            format!("{name} residual {v:.3e}{place}")
        };
        if self.departure_choice > tol {
            return Some(describe(
                "departure-time choice",
                self.departure_choice,
                &self.departure_choice_at,
            ));
        }
        if self.capacity > tol {
            return Some(describe(
                "queueing/capacity",
                self.capacity,
                &self.capacity_at,
            ));
        }
        if self.conservation > tol {
            return Some(describe(
                "demand conservation",
                self.conservation,
                &self.conservation_at,
            ));
        }
        if !(self.consistency_margin > 0.0) {
            return Some(describe(
                "consistency margin",
                self.consistency_margin,
                &self.consistency_at,
            ));
        }
        None
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.first_failure(tol).is_none()
    }
}

fn complementarity(x: f64, y: f64) -> f64 {
    x.min(y).max(0.0) + (-x).max(0.0) + (-y).max(0.0)
}

fn record(
    best: &mut f64,
    at: &mut Option<Worst>,
    v: f64,
    t: f64,
    loc: impl FnOnce() -> String,
    larger: bool,
) {
    let better = if larger { v > *best } else { v < *best };
    if better {
        *best = v;
        *at = Some(Worst { location: loc(), t });
    }
}

/// Evaluates every condition family of the state's equilibrium problem.
pub fn residual_eval(s: &EquilibriumState, grid: &SampleGrid) -> ResidualReport {
    let f = &s.schedule;
    let c = &s.corridor;
    let n = c.n_bottlenecks();
    let kk = c.n_groups();
    let mut rep = ResidualReport {
        departure_choice: 0.0,
        departure_choice_at: None,
        capacity: 0.0,
        capacity_at: None,
        conservation: 0.0,
        conservation_at: None,
        consistency_margin: f64::INFINITY,
        consistency_at: None,
        samples: 0,
    };

    for i in 0..n {
        for k in 0..kk {
            let gap = (s.flows[i][k].integral(f) - c.demand(i, k)).abs();
            record(
                &mut rep.conservation,
                &mut rep.conservation_at,
                gap,
                f64::NAN,
                || format!("origin {}, group {}", i + 1, k + 1),
                true,
            );
        }
    }

    let g = &s.grid;
    let span = g[g.len() - 1] - g[0];
    let margin = if span > 0.0 {
        grid.outer_margin * span
    } else {
        1.0
    };
    // Segment index into the curve grid, or None for the empty outer margins.
    let mut segments: Vec<(f64, f64, Option<usize>)> = vec![(g[0] - margin, g[0], None)];
    segments.extend(g.windows(2).enumerate().map(|(j, w)| (w[0], w[1], Some(j))));
    segments.push((g[g.len() - 1], g[g.len() - 1] + margin, None));

    let piece = |curve: &crate::curve::PiecewiseCurve, j: Option<usize>| {
        j.map_or(Piece::ZERO, |j| *curve.piece(j))
    };
    let mut wdot = vec![0.0; n];
    let mut serve_origin = vec![0.0; n];
    let mut flow = vec![vec![0.0; kk]; n];

    for &(a, b, j) in &segments {
        let m = grid.interior + 1;
        for step in 0..=m {
            let t = a + (b - a) * step as f64 / m as f64;
            let side = if step == m { Side::Left } else { Side::Right };
            let slope = f.slope(t, side);
            rep.samples += 1;

            for i in 0..n {
                let w = piece(&s.mainline_queues[i], j);
                debug_assert!(w.slope_coef == 0.0);
                wdot[i] = w.c_coef * slope;
                for k in 0..kk {
                    flow[i][k] = piece(&s.flows[i][k], j).eval(f, t, side);
                }
                serve_origin[i] = flow[i].iter().sum();
            }

            let mut upstream: f64 = serve_origin.iter().sum();
            let mut wdot_below = 0.0;
            for i in 0..n {
                // Bottleneck i: exit rate μ_i σ̇_i against the traffic it serves.
                let charge = piece(&s.mainline_queues[i], j).eval(f, t, side)
                    + piece(&s.bottleneck_tolls[i], j).eval(f, t, side);
                let slack = c.capacity(i) * (1.0 - wdot_below) - upstream;
                record(
                    &mut rep.capacity,
                    &mut rep.capacity_at,
                    complementarity(charge, slack),
                    t,
                    || format!("bottleneck {}", i + 1),
                    true,
                );
                upstream -= serve_origin[i];
                wdot_below += wdot[i];

                let ramp_wdot = piece(&s.ramp_queues[i], j).c_coef * slope;
                let ramp_charge = piece(&s.ramp_queues[i], j).eval(f, t, side)
                    + piece(&s.ramp_tolls[i], j).eval(f, t, side);
                let ramp_r = match s.ramp_capacity[i] {
                    Some(rate) => {
                        complementarity(ramp_charge, rate * (1.0 - wdot_below) - serve_origin[i])
                    }
                    None => ramp_charge.abs(),
                };
                record(
                    &mut rep.capacity,
                    &mut rep.capacity_at,
                    ramp_r,
                    t,
                    || format!("on-ramp {}*", i + 1),
                    true,
                );

                let tau_rate = 1.0 - wdot_below - ramp_wdot;
                record(
                    &mut rep.consistency_margin,
                    &mut rep.consistency_at,
                    tau_rate,
                    t,
                    || format!("origin {}", i + 1),
                    false,
                );

                for k in 0..kk {
                    let cost = match j {
                        Some(j) => s.trip_cost_piece(i, k, j).eval(f, t, side),
                        None => c.beta(k) * f.eval(t) + c.free_flow_time(i),
                    };
                    let r = complementarity(flow[i][k], cost - s.rho[i][k]);
                    record(
                        &mut rep.departure_choice,
                        &mut rep.departure_choice_at,
                        r,
                        t,
                        || format!("origin {}, group {}", i + 1, k + 1),
                        true,
                    );
                }
            }
        }
    }
    rep
}

/// Minimum sampled trip cost of every (i,k): the cost commuters actually bear.
pub fn realized_rho(s: &EquilibriumState, grid: &SampleGrid) -> Vec<Vec<f64>> {
    let f = &s.schedule;
    let n = s.n_bottlenecks();
    let kk = s.n_groups();
    let mut best = vec![vec![f64::INFINITY; kk]; n];
    let m = grid.interior + 1;
    for (j, w) in s.grid.windows(2).enumerate() {
        for step in 0..=m {
            let t = w[0] + (w[1] - w[0]) * step as f64 / m as f64;
            let side = if step == m { Side::Left } else { Side::Right };
            for (i, row) in best.iter_mut().enumerate() {
                for (k, b) in row.iter_mut().enumerate() {
                    *b = b.min(s.trip_cost_piece(i, k, j).eval(f, t, side));
                }
            }
        }
    }
    best
}
