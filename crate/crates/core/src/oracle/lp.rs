//! Time-discretized system-optimum LP: rate variables q_{i,k,n} on uniform
//! bins [t_n, t_n + Δt), demand rows with duals ρ̂ and capacity rows with
//! duals −p̂ Δt.

use std::io::{self, Write};

use crate::dso::compute_windows;
use crate::error::{Error, Result};
use crate::network::{require_valid, Corridor};
use crate::oracle::flow::{FlowNetwork, FlowStatus};
use crate::oracle::simplex::{self, LinearProgram, Row, Sense, SimplexOptions};
use crate::schedule::ScheduleDelayFn;

pub use crate::oracle::simplex::LpStatus;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteLp {
    pub n_bottlenecks: usize,
    pub n_groups: usize,
    pub n_bins: usize,
    pub start: f64,
    pub dt: f64,
    pub capacities: Vec<f64>,
    pub free_flow_times: Vec<f64>,
    pub betas: Vec<f64>,
    pub demands: Vec<Vec<f64>>,
    /// c(t_n) at each bin's left endpoint.
    pub schedule_costs: Vec<f64>,
}

/// Builds the LP on Γ(T_N) widened by `padding` on both sides.
pub fn discretize(c: &Corridor, f: &ScheduleDelayFn, dt: f64, padding: f64) -> Result<DiscreteLp> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if !(padding >= 0.0) || !padding.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "padding must be nonnegative, got {padding}"
        )));
    }
    let w = compute_windows(c, f)?;
    let outer = w.windows[c.n_bottlenecks() - 1][c.n_groups() - 1];
    let start = outer.t_minus - padding;
    let span = outer.t_plus + padding - start;
    let n_bins = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    let lp = DiscreteLp::on_horizon(c, f, start, dt, n_bins)?;
    for i in 0..lp.n_bottlenecks {
        let need = c.upstream_demand(i);
        let have = lp.capacities[i] * lp.dt * lp.n_bins as f64;
        if need > have {
            return Err(Error::HorizonTooSmall {
                detail: format!(
                    "bottleneck {} must serve {need} but the horizon holds {have}",
                    i + 1
                ),
            });
        }
    }
    Ok(lp)
}

impl DiscreteLp {
    /// Builds the LP on an explicit grid without any feasibility check.
    pub fn on_horizon(
        c: &Corridor,
        f: &ScheduleDelayFn,
        start: f64,
        dt: f64,
        n_bins: usize,
    ) -> Result<Self> {
        require_valid(c)?;
        if !(dt > 0.0) || n_bins == 0 {
            return Err(Error::InvalidParameter("empty time grid".into()));
        }
        Ok(DiscreteLp {
            n_bottlenecks: c.n_bottlenecks(),
            n_groups: c.n_groups(),
            n_bins,
            start,
            dt,
            capacities: c.capacities().to_vec(),
            free_flow_times: c.free_flow_times().to_vec(),
            betas: c.betas().to_vec(),
            demands: c.demands().to_vec(),
            schedule_costs: (0..n_bins).map(|n| f.eval(start + n as f64 * dt)).collect(),
        })
    }

    pub fn time(&self, n: usize) -> f64 {
        self.start + n as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.n_bins)
    }

    pub fn n_vars(&self) -> usize {
        self.n_bottlenecks * self.n_groups * self.n_bins
    }

    pub fn n_rows(&self) -> usize {
        self.n_bottlenecks * self.n_groups + self.n_bottlenecks * self.n_bins
    }

    pub fn var(&self, i: usize, k: usize, n: usize) -> usize {
        (i * self.n_groups + k) * self.n_bins + n
    }

    /// β^k c(t_n) + d_i, the cost of one unit of mass.
    pub fn unit_cost(&self, i: usize, k: usize, n: usize) -> f64 {
        self.betas[k] * self.schedule_costs[n] + self.free_flow_times[i]
    }

    /// Demand rows (i,k) first, then capacity rows (i,n).
    pub fn to_linear_program(&self) -> LinearProgram {
        let (nn, kk, bins, dt) = (self.n_bottlenecks, self.n_groups, self.n_bins, self.dt);
        let mut objective = vec![0.0; self.n_vars()];
        for i in 0..nn {
            for k in 0..kk {
                for n in 0..bins {
                    objective[self.var(i, k, n)] = self.unit_cost(i, k, n) * dt;
                }
            }
        }
        let mut rows = Vec::with_capacity(self.n_rows());
        for i in 0..nn {
            for k in 0..kk {
                rows.push(Row {
                    coeffs: (0..bins).map(|n| (self.var(i, k, n), dt)).collect(),
                    sense: Sense::Eq,
                    rhs: self.demands[i][k],
                });
            }
        }
        for i in 0..nn {
            for n in 0..bins {
                let coeffs = (i..nn)
                    .flat_map(|j| (0..kk).map(move |k| (j, k)))
                    .map(|(j, k)| (self.var(j, k, n), 1.0));
                rows.push(Row {
                    coeffs: coeffs.collect(),
                    sense: Sense::Le,
                    rhs: self.capacities[i],
                });
            }
        }
        LinearProgram { objective, rows }
    }

    /// Matrix Market coordinate dump of the constraint matrix; costs, senses
    /// and right-hand sides ride along as `%` comment lines.
    pub fn write_triplets(&self, out: &mut impl Write) -> io::Result<()> {
        let lp = self.to_linear_program();
        let nnz: usize = lp.rows.iter().map(|r| r.coeffs.len()).sum();
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(
            out,
            "% minimize c.x subject to A x (sense) b, x >= 0; 1-based indices"
        )?;
        for (j, c) in lp.objective.iter().enumerate() {
            writeln!(out, "% cost {} {:.17e}", j + 1, c)?;
        }
        for (r, row) in lp.rows.iter().enumerate() {
            let s = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            writeln!(out, "% rhs {} {} {:.17e}", r + 1, s, row.rhs)?;
        }
        writeln!(out, "{} {} {}", lp.rows.len(), lp.objective.len(), nnz)?;
        for (r, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                writeln!(out, "{} {} {:.17e}", r + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpMethod {
    /// Dense tableau for small grids, network flow otherwise.
    Auto,
    DenseSimplex,
    NetworkFlow,
}

#[derive(Clone, Copy, Debug)]
pub struct LpOptions {
    pub method: LpMethod,
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            method: LpMethod::Auto,
            max_pivots: 1_000_000,
        }
    }
}

/// Largest variable count sent to the dense tableau under `Auto`.
pub const DENSE_VAR_LIMIT: usize = 2500;

#[derive(Clone, Debug)]
pub struct LpResult {
    pub status: LpStatus,
    pub method: LpMethod,
    pub objective: f64,
    /// q̂_{i,k}(t_n) as rates.
    pub flows: Vec<Vec<Vec<f64>>>,
    pub rho: Vec<Vec<f64>>,
    /// p̂_i(t_n).
    pub prices: Vec<Vec<f64>>,
    /// |primal − dual objective|.
    pub duality_gap: f64,
    /// Simplex pivots or flow augmentations.
    pub iterations: usize,
}

impl LpResult {
    fn failed(lp: &DiscreteLp, status: LpStatus, method: LpMethod, iterations: usize) -> Self {
        LpResult {
            status,
            method,
            objective: f64::NAN,
            flows: vec![vec![vec![0.0; lp.n_bins]; lp.n_groups]; lp.n_bottlenecks],
            rho: vec![vec![f64::NAN; lp.n_groups]; lp.n_bottlenecks],
            prices: vec![vec![f64::NAN; lp.n_bins]; lp.n_bottlenecks],
            duality_gap: f64::NAN,
            iterations,
        }
    }
}

pub fn solve_lp(lp: &DiscreteLp, opts: &LpOptions) -> LpResult {
    let method = match opts.method {
        LpMethod::Auto if lp.n_vars() <= DENSE_VAR_LIMIT => LpMethod::DenseSimplex,
        LpMethod::Auto => LpMethod::NetworkFlow,
        m => m,
    };
    let mut res = match method {
        LpMethod::NetworkFlow => solve_flow(lp),
        _ => solve_dense(lp, opts.max_pivots),
    };
    if res.status == LpStatus::Optimal {
        res.duality_gap = (res.objective - dual_objective(lp, &res)).abs();
    }
    res
}

fn solve_dense(lp: &DiscreteLp, max_pivots: usize) -> LpResult {
    let prog = lp.to_linear_program();
    let r = simplex::solve(
        &prog,
        &SimplexOptions {
            max_pivots,
            ..SimplexOptions::default()
        },
    );
    if r.status != LpStatus::Optimal {
        return LpResult::failed(lp, r.status, LpMethod::DenseSimplex, r.pivots);
    }
    let (nn, kk, bins) = (lp.n_bottlenecks, lp.n_groups, lp.n_bins);
    let flows = (0..nn)
        .map(|i| {
            (0..kk)
                .map(|k| (0..bins).map(|n| r.x[lp.var(i, k, n)]).collect())
                .collect()
        })
        .collect();
    let rho = (0..nn)
        .map(|i| (0..kk).map(|k| r.duals[i * kk + k]).collect())
        .collect();
    let prices = (0..nn)
        .map(|i| {
            (0..bins)
                .map(|n| (-r.duals[nn * kk + i * bins + n] / lp.dt).max(0.0))
                .collect()
        })
        .collect();
    LpResult {
        status: LpStatus::Optimal,
        method: LpMethod::DenseSimplex,
        objective: r.objective,
        flows,
        rho,
        prices,
        duality_gap: 0.0,
        iterations: r.pivots,
    }
}

/// Same LP in mass units x = q Δt on a layered network: source → (i,k) →
/// bin node of bottleneck i → … → bin node of bottleneck 1 → sink.
fn solve_flow(lp: &DiscreteLp) -> LpResult {
    let (nn, kk, bins, dt) = (lp.n_bottlenecks, lp.n_groups, lp.n_bins, lp.dt);
    let (source, sink) = (0, 1);
    let supply = |i: usize, k: usize| 2 + i * kk + k;
    let layer = |j: usize, n: usize| 2 + nn * kk + j * bins + n;
    let total: f64 = lp.demands.iter().flatten().sum();
    let mut g = FlowNetwork::new(2 + nn * kk + nn * bins);
    for i in 0..nn {
        for k in 0..kk {
            if lp.demands[i][k] > 0.0 {
                g.add_arc(source, supply(i, k), lp.demands[i][k], 0.0);
            }
        }
    }
    let mut entry = vec![vec![vec![usize::MAX; bins]; kk]; nn];
    for i in 0..nn {
        for k in 0..kk {
            for n in 0..bins {
                entry[i][k][n] = g.add_arc(supply(i, k), layer(i, n), total, lp.unit_cost(i, k, n));
            }
        }
    }
    for j in 0..nn {
        for n in 0..bins {
            let down = if j == 0 { sink } else { layer(j - 1, n) };
            g.add_arc(layer(j, n), down, lp.capacities[j] * dt, 0.0);
        }
    }
    let out = g.solve(source, sink, total);
    if out.status == FlowStatus::Infeasible {
        return LpResult::failed(
            lp,
            LpStatus::Infeasible,
            LpMethod::NetworkFlow,
            out.augmentations,
        );
    }
    let pi = &out.potentials;
    let flows = (0..nn)
        .map(|i| {
            (0..kk)
                .map(|k| (0..bins).map(|n| g.flow(entry[i][k][n]) / dt).collect())
                .collect()
        })
        .collect();
    let rho = (0..nn)
        .map(|i| (0..kk).map(|k| pi[sink] - pi[supply(i, k)]).collect())
        .collect();
    let prices = (0..nn)
        .map(|j| {
            (0..bins)
                .map(|n| {
                    let down = if j == 0 { sink } else { layer(j - 1, n) };
                    (pi[down] - pi[layer(j, n)]).max(0.0)
                })
                .collect()
        })
        .collect();
    LpResult {
        status: LpStatus::Optimal,
        method: LpMethod::NetworkFlow,
        objective: out.cost,
        flows,
        rho,
        prices,
        duality_gap: 0.0,
        iterations: out.augmentations,
    }
}

/// Σ Q ρ̂ − Σ_{i,n} μ_i p̂_i(t_n) Δt.
pub fn dual_objective(lp: &DiscreteLp, r: &LpResult) -> f64 {
    let demand: f64 = (0..lp.n_bottlenecks)
        .flat_map(|i| (0..lp.n_groups).map(move |k| (i, k)))
        .map(|(i, k)| lp.demands[i][k] * r.rho[i][k])
        .sum();
    let capacity: f64 = (0..lp.n_bottlenecks)
        .map(|i| lp.capacities[i] * lp.dt * r.prices[i].iter().sum::<f64>())
        .sum();
    demand - capacity
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    /// Largest violation of a demand or capacity row (in mass units).
    pub primal_infeasibility: f64,
    /// Largest negative reduced cost β^k c_n + d_i + Σ_{j≤i} p̂_j − ρ̂_{i,k}.
    pub dual_infeasibility: f64,
    /// Largest mass × reduced cost or price × spare capacity product.
    pub complementarity: f64,
    pub duality_gap: f64,
}

/// Checks primal feasibility, dual feasibility and complementary slackness.
pub fn certificate(lp: &DiscreteLp, r: &LpResult) -> Certificate {
    let (nn, kk, bins, dt) = (lp.n_bottlenecks, lp.n_groups, lp.n_bins, lp.dt);
    let mut primal: f64 = 0.0;
    let mut dual: f64 = 0.0;
    let mut cs: f64 = 0.0;
    for i in 0..nn {
        for k in 0..kk {
            let mass: f64 = r.flows[i][k].iter().map(|q| q * dt).sum();
            primal = primal.max((mass - lp.demands[i][k]).abs());
            for n in 0..bins {
                primal = primal.max(-r.flows[i][k][n] * dt);
                let charge: f64 = (0..=i).map(|j| r.prices[j][n]).sum();
                let reduced = lp.unit_cost(i, k, n) + charge - r.rho[i][k];
                dual = dual.max(-reduced);
                cs = cs.max((r.flows[i][k][n] * dt * reduced).abs());
            }
        }
    }
    for i in 0..nn {
        for n in 0..bins {
            let load: f64 = (i..nn)
                .map(|j| (0..kk).map(|k| r.flows[j][k][n]).sum::<f64>())
                .sum();
            let spare = (lp.capacities[i] - load) * dt;
            primal = primal.max(-spare);
            dual = dual.max(-r.prices[i][n]);
            cs = cs.max((r.prices[i][n] * spare).abs());
        }
    }
    Certificate {
        primal_infeasibility: primal,
        dual_infeasibility: dual,
        complementarity: cs,
        duality_gap: r.duality_gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    #[test]
    fn ex1_structure() {
        let (c, f) = instances::two_bottleneck();
        let lp = discretize(&c, &f, 0.01, 0.5).unwrap();
        assert_eq!(lp.n_bins, 500);
        let prog = lp.to_linear_program();
        assert_eq!(prog.rows.len(), 4 + 2 * 500);
        assert_eq!(prog.rows.iter().filter(|r| r.sense == Sense::Eq).count(), 4);
        assert!((lp.start + 2.769231 + 0.5).abs() < 1e-6);
    }

    #[test]
    fn single_origin_single_group_has_one_demand_row() {
        let (c, f) = instances::single_bottleneck();
        let lp = discretize(&c, &f, 0.1, 0.2).unwrap();
        let prog = lp.to_linear_program();
        assert_eq!(prog.rows.iter().filter(|r| r.sense == Sense::Eq).count(), 1);
        assert_eq!(prog.rows.len(), 1 + lp.n_bins);
    }

    #[test]
    fn rejects_bad_step() {
        let (c, f) = instances::two_bottleneck();
        assert!(matches!(
            discretize(&c, &f, 0.0, 0.5),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            discretize(&c, &f, f64::NAN, 0.5),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn infeasible_toy() {
        let (c, f) = instances::single_bottleneck();
        // Two units of demand, one unit of capacity over the horizon.
        let lp = DiscreteLp::on_horizon(&c, &f, -0.5, 0.1, 10).unwrap();
        for method in [LpMethod::DenseSimplex, LpMethod::NetworkFlow] {
            let r = solve_lp(
                &lp,
                &LpOptions {
                    method,
                    ..LpOptions::default()
                },
            );
            assert_eq!(r.status, LpStatus::Infeasible, "{method:?}");
        }
    }

    #[test]
    fn dense_and_network_agree() {
        let (c, f) = instances::two_bottleneck();
        let lp = discretize(&c, &f, 0.05, 0.25).unwrap();
        let a = solve_lp(
            &lp,
            &LpOptions {
                method: LpMethod::DenseSimplex,
                ..LpOptions::default()
            },
        );
        let b = solve_lp(
            &lp,
            &LpOptions {
                method: LpMethod::NetworkFlow,
                ..LpOptions::default()
            },
        );
        assert_eq!(a.status, LpStatus::Optimal);
        assert_eq!(b.status, LpStatus::Optimal);
        assert!((a.objective - b.objective).abs() < 1e-9 * a.objective.abs());
        for r in [&a, &b] {
            let cert = certificate(&lp, r);
            assert!(cert.primal_infeasibility <= 1e-9, "{cert:?}");
            assert!(cert.dual_infeasibility <= 1e-8, "{cert:?}");
            assert!(cert.complementarity <= 1e-8, "{cert:?}");
            assert!(cert.duality_gap <= 1e-7 * r.objective.abs(), "{cert:?}");
        }
    }

    #[test]
    fn triplet_dump_header() {
        let (c, f) = instances::single_bottleneck();
        let lp = discretize(&c, &f, 0.5, 0.0).unwrap();
        let mut buf = Vec::new();
        lp.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let size = text.lines().find(|l| !l.starts_with('%')).unwrap();
        assert_eq!(
            size,
            format!("{} {} {}", 1 + lp.n_bins, lp.n_bins, 2 * lp.n_bins)
        );
    }
}
