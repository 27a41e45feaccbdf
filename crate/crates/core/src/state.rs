//! A flow pattern together with the queues and tolls that commuters face.
//!
//! One representation covers the optimum (tolls only), the user equilibrium
//! (queues only) and every policy state (any mix of mainline and on-ramp
//! queues and tolls). All curves share one breakpoint grid.

use crate::curve::{Piece, PiecewiseCurve};
use crate::dso::group_slice;
use crate::network::Corridor;
use crate::schedule::{EqualCostWindow, ScheduleDelayFn};

#[derive(Clone, Debug)]
pub struct EquilibriumState {
    pub corridor: Corridor,
    pub schedule: ScheduleDelayFn,
    pub grid: Vec<f64>,
    pub windows: Vec<Vec<EqualCostWindow>>,
    pub rho: Vec<Vec<f64>>,
    /// q_{i,k}(t), indexed by destination arrival time.
    pub flows: Vec<Vec<PiecewiseCurve>>,
    /// w_i(t) at mainline bottleneck i.
    pub mainline_queues: Vec<PiecewiseCurve>,
    /// w_{i*}(t) on the on-ramp of origin i.
    pub ramp_queues: Vec<PiecewiseCurve>,
    pub bottleneck_tolls: Vec<PiecewiseCurve>,
    pub ramp_tolls: Vec<PiecewiseCurve>,
    /// Service rate of a metered or priced on-ramp; `None` for an uncontrolled ramp.
    pub ramp_capacity: Vec<Option<f64>>,
}

/// q_{i,k} = μ_i σ̇_i − μ_{i+1} σ̇_{i+1} on the group-k slice of origin i, where
/// σ̇_i = 1 − Σ_{j<i} ẇ_j is the exit-rate factor of bottleneck i.
pub(crate) fn slice_flows(
    corridor: &Corridor,
    grid: &[f64],
    windows: &[Vec<EqualCostWindow>],
    mainline: &[PiecewiseCurve],
) -> Vec<Vec<PiecewiseCurve>> {
    let n = corridor.n_bottlenecks();
    let kk = corridor.n_groups();
    let mainline: Vec<PiecewiseCurve> = mainline.iter().map(|w| w.on_grid(grid)).collect();
    let sigma_rate = |i: usize, j: usize| -> Piece {
        let slope: f64 = mainline[..i].iter().map(|w| w.piece(j).c_coef).sum();
        Piece {
            c_coef: 0.0,
            slope_coef: -slope,
            offset: 1.0,
        }
    };
    (0..n)
        .map(|i| {
            (0..kk)
                .map(|k| {
                    PiecewiseCurve::from_segments(grid, |j, a, b| {
                        if group_slice(&windows[i], 0.5 * (a + b)) != Some(k) {
                            return Piece::ZERO;
                        }
                        let own = sigma_rate(i, j).scale(corridor.capacity(i));
                        if i + 1 < n {
                            own.add(&sigma_rate(i + 1, j).scale(-corridor.capacity(i + 1)))
                        } else {
                            own
                        }
                    })
                })
                .collect()
        })
        .collect()
}

impl EquilibriumState {
    pub fn n_bottlenecks(&self) -> usize {
        self.corridor.n_bottlenecks()
    }

    pub fn n_groups(&self) -> usize {
        self.corridor.n_groups()
    }

    /// Trip cost of an (i,k)-commuter on grid segment `j`:
    /// β^k c + d_i + w_{i*} + ramp toll_i + Σ_{j≤i} (w_j + toll_j).
    pub fn trip_cost_piece(&self, i: usize, k: usize, j: usize) -> Piece {
        let mut p = Piece::affine_in_c(self.corridor.beta(k), self.corridor.free_flow_time(i));
        p = p
            .add(self.ramp_queues[i].piece(j))
            .add(self.ramp_tolls[i].piece(j));
        for l in 0..=i {
            p = p
                .add(self.mainline_queues[l].piece(j))
                .add(self.bottleneck_tolls[l].piece(j));
        }
        p
    }

    /// Trip cost at time t (outside the grid only c and d remain).
    pub fn trip_cost(&self, i: usize, k: usize, t: f64) -> f64 {
        let f = &self.schedule;
        let mut v = self.corridor.beta(k) * f.eval(t) + self.corridor.free_flow_time(i);
        v += self.ramp_queues[i].value(f, t) + self.ramp_tolls[i].value(f, t);
        for l in 0..=i {
            v += self.mainline_queues[l].value(f, t) + self.bottleneck_tolls[l].value(f, t);
        }
        v
    }

    /// Σ_k q_{i,k}.
    pub fn origin_flow(&self, i: usize) -> PiecewiseCurve {
        PiecewiseCurve::sum(&self.grid, &self.flows[i])
    }

    /// Σ_{j≥i} Σ_k q_{j,k}: the traffic served by bottleneck i.
    pub fn upstream_flow(&self, i: usize) -> PiecewiseCurve {
        PiecewiseCurve::sum(&self.grid, self.flows[i..].iter().flatten())
    }

    /// Σ_{j<i} w_j.
    pub fn downstream_queue(&self, i: usize) -> PiecewiseCurve {
        PiecewiseCurve::sum(&self.grid, &self.mainline_queues[..i])
    }

    /// σ_i(t) = t − Σ_{j<i} w_j(t) − d_{i−1}, with d_0 = 0.
    pub fn sigma(&self, i: usize, t: f64) -> f64 {
        let f = &self.schedule;
        let d_prev = if i == 0 {
            0.0
        } else {
            self.corridor.free_flow_time(i - 1)
        };
        t - self.mainline_queues[..i]
            .iter()
            .map(|w| w.value(f, t))
            .sum::<f64>()
            - d_prev
    }

    /// τ_i(t) = t − Σ_{j≤i} w_j(t) − d_i.
    pub fn tau(&self, i: usize, t: f64) -> f64 {
        let f = &self.schedule;
        t - self.mainline_queues[..=i]
            .iter()
            .map(|w| w.value(f, t))
            .sum::<f64>()
            - self.corridor.free_flow_time(i)
    }

    /// Departure time from origin i, i.e. τ_i less any on-ramp queue.
    pub fn origin_departure(&self, i: usize, t: f64) -> f64 {
        self.tau(i, t) - self.ramp_queues[i].value(&self.schedule, t)
    }

    /// Σ_{i,k} Q_{i,k} ρ_{i,k}.
    pub fn sum_q_rho(&self) -> f64 {
        self.rho
            .iter()
            .zip(self.corridor.demands())
            .map(|(r, q)| r.iter().zip(q).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    /// Σ ∫ toll × throughput over every charged location.
    pub fn revenue(&self) -> f64 {
        let f = &self.schedule;
        let mut total = 0.0;
        for i in 0..self.n_bottlenecks() {
            if !self.bottleneck_tolls[i].is_zero() {
                total += self.bottleneck_tolls[i].integral_product(&self.upstream_flow(i), f);
            }
            if !self.ramp_tolls[i].is_zero() {
                total += self.ramp_tolls[i].integral_product(&self.origin_flow(i), f);
            }
        }
        total
    }

    /// Z = Σ Q ρ − revenue.
    pub fn total_cost(&self) -> f64 {
        self.sum_q_rho() - self.revenue()
    }

    /// Σ ∫ queue × throughput: the deadweight queueing cost.
    pub fn queueing_cost(&self) -> f64 {
        let f = &self.schedule;
        (0..self.n_bottlenecks())
            .map(|i| {
                self.mainline_queues[i].integral_product(&self.upstream_flow(i), f)
                    + self.ramp_queues[i].integral_product(&self.origin_flow(i), f)
            })
            .sum()
    }

    /// Σ ∫ (β^k c + d_i) q_{i,k}: schedule delay plus free-flow cost.
    pub fn schedule_cost(&self) -> f64 {
        let f = &self.schedule;
        let mut total = 0.0;
        for i in 0..self.n_bottlenecks() {
            for k in 0..self.n_groups() {
                let cost = PiecewiseCurve::from_segments(&self.grid, |_, _, _| {
                    Piece::affine_in_c(self.corridor.beta(k), self.corridor.free_flow_time(i))
                });
                total += cost.integral_product(&self.flows[i][k], f);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use crate::dso::solve_dso;
    use crate::instances;

    #[test]
    fn optimum_as_state_accounts_consistently() {
        let (c, f) = instances::two_bottleneck();
        let s = solve_dso(&c, &f).unwrap();
        let st = s.state();
        assert!((st.revenue() - s.revenue).abs() < 1e-12);
        assert!((st.total_cost() - s.total_cost).abs() < 1e-12);
        assert!((st.schedule_cost() + st.queueing_cost() - st.total_cost()).abs() < 1e-12);
        assert!((st.sigma(0, 0.3) - 0.3).abs() < 1e-15);
        assert!((st.tau(1, 0.3) - (0.3 - 2.0)).abs() < 1e-15);
    }
}
