//! Per-origin transportation check: groups of one origin assigned to
//! equal-capacity bins of its fixed window 𝒯_i, solved both as an LP and by
//! sorted assignment.

use crate::dso::DsoSolution;
use crate::oracle::simplex::{self, LinearProgram, LpStatus, Row, Sense, SimplexOptions};

#[derive(Clone, Debug)]
pub struct TransportResult {
    pub status: LpStatus,
    /// Σ β^k c(t_m) x_{k,m}, with c at bin midpoints.
    pub objective: f64,
    /// x_{k,m}: mass of group k in bin m.
    pub masses: Vec<Vec<f64>>,
}

struct Bins {
    mids: Vec<f64>,
    cap: f64,
}

fn bins(dso: &DsoSolution, i: usize, m: usize) -> Bins {
    let w = dso.origin_window(i);
    let h = (w.t_plus - w.t_minus) / m as f64;
    Bins {
        mids: (0..m).map(|j| w.t_minus + (j as f64 + 0.5) * h).collect(),
        cap: dso.derived.mu_bar[i] * h,
    }
}

pub fn transport_lp(dso: &DsoSolution, i: usize, m: usize) -> TransportResult {
    let c = &dso.corridor;
    let kk = c.n_groups();
    let b = bins(dso, i, m);
    let costs: Vec<f64> = b.mids.iter().map(|&t| dso.schedule.eval(t)).collect();
    let var = |k: usize, j: usize| k * m + j;
    let mut objective = vec![0.0; kk * m];
    for k in 0..kk {
        for j in 0..m {
            objective[var(k, j)] = c.beta(k) * costs[j];
        }
    }
    let mut rows: Vec<Row> = (0..kk)
        .map(|k| Row {
            coeffs: (0..m).map(|j| (var(k, j), 1.0)).collect(),
            sense: Sense::Eq,
            rhs: c.demand(i, k),
        })
        .collect();
    rows.extend((0..m).map(|j| Row {
        coeffs: (0..kk).map(|k| (var(k, j), 1.0)).collect(),
        sense: Sense::Le,
        rhs: b.cap,
    }));
    let r = simplex::solve(
        &LinearProgram { objective, rows },
        &SimplexOptions::default(),
    );
    TransportResult {
        status: r.status,
        objective: r.objective,
        masses: (0..kk)
            .map(|k| (0..m).map(|j| r.x[var(k, j)]).collect())
            .collect(),
    }
}

/// Fills the cheapest bins with the most delay-averse group first.
pub fn transport_greedy(dso: &DsoSolution, i: usize, m: usize) -> TransportResult {
    let c = &dso.corridor;
    let kk = c.n_groups();
    let b = bins(dso, i, m);
    let costs: Vec<f64> = b.mids.iter().map(|&t| dso.schedule.eval(t)).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| costs[x].total_cmp(&costs[y]).then(x.cmp(&y)));
    let mut masses = vec![vec![0.0; m]; kk];
    let mut objective = 0.0;
    let mut slots = order.into_iter();
    let mut current = slots.next();
    let mut room = b.cap;
    for (k, row) in masses.iter_mut().enumerate() {
        let mut left = c.demand(i, k);
        while left > 1e-15 {
            let Some(j) = current else { break };
            let take = left.min(room);
            row[j] += take;
            objective += c.beta(k) * costs[j] * take;
            left -= take;
            room -= take;
            if room <= 1e-15 {
                current = slots.next();
                room = b.cap;
            }
        }
    }
    let status = if current.is_some()
        || masses.iter().flatten().sum::<f64>() >= c.demands()[i].iter().sum::<f64>() - 1e-9
    {
        LpStatus::Optimal
    } else {
        LpStatus::Infeasible
    };
    TransportResult {
        status,
        objective,
        masses,
    }
}

/// Σ_k β^k ∫ c q^SO_{i,k}, the exact value both discretizations approach.
pub fn subproblem_cost(dso: &DsoSolution, i: usize) -> f64 {
    let c = &dso.corridor;
    let f = &dso.schedule;
    let mu_bar = dso.derived.mu_bar[i];
    let mut inner: Option<(f64, f64)> = None;
    let mut total = 0.0;
    for (k, w) in dso.windows[i].iter().enumerate() {
        let (lo, hi) = inner.unwrap_or((0.0, 0.0));
        let slice = match inner {
            Some(_) => f.integral(w.t_minus, lo) + f.integral(hi, w.t_plus),
            None => f.integral(w.t_minus, w.t_plus),
        };
        total += c.beta(k) * mu_bar * slice;
        inner = Some((w.t_minus, w.t_plus));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dso::solve_dso;
    use crate::instances;
    use crate::random::instance_from_seed;

    #[test]
    fn lp_matches_sorted_assignment() {
        let (c, f) = instances::two_bottleneck();
        let dso = solve_dso(&c, &f).unwrap();
        for i in 0..2 {
            let lp = transport_lp(&dso, i, 60);
            let greedy = transport_greedy(&dso, i, 60);
            assert_eq!(lp.status, LpStatus::Optimal);
            assert!(
                (lp.objective - greedy.objective).abs() < 1e-9,
                "{} vs {}",
                lp.objective,
                greedy.objective
            );
        }
    }

    #[test]
    fn converges_to_closed_form() {
        let (c, f) = instances::two_bottleneck();
        let dso = solve_dso(&c, &f).unwrap();
        for i in 0..2 {
            let exact = subproblem_cost(&dso, i);
            let coarse = (transport_greedy(&dso, i, 50).objective - exact).abs();
            let fine = (transport_greedy(&dso, i, 400).objective - exact).abs();
            assert!(
                fine < coarse && fine < 1e-3 * exact,
                "{coarse} {fine} {exact}"
            );
        }
    }

    #[test]
    fn random_instances_agree() {
        for seed in 0..20 {
            let inst = instance_from_seed(seed);
            let Ok(dso) = solve_dso(&inst.corridor, &inst.schedule) else {
                continue;
            };
            let n = inst.corridor.n_bottlenecks();
            for i in 0..n {
                let lp = transport_lp(&dso, i, 40);
                let greedy = transport_greedy(&dso, i, 40);
                assert_eq!(lp.status, LpStatus::Optimal);
                let scale = greedy.objective.abs().max(1.0);
                assert!(
                    (lp.objective - greedy.objective).abs() < 1e-8 * scale,
                    "seed {seed} origin {i}"
                );
            }
        }
    }
}
