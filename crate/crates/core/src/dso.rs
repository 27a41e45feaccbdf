//! Closed-form dynamic system optimum: nested windows, all-or-nothing flows,
//! equilibrium costs ρ and optimal bottleneck prices.

use crate::curve::{union_grid, Piece, PiecewiseCurve};
use crate::error::{Error, Result};
use crate::network::{derive, Corridor, DerivedQuantities};
use crate::schedule::{EqualCostWindow, ScheduleDelayFn, Side};
use crate::state::EquilibriumState;

#[derive(Clone, Debug, PartialEq)]
pub struct Windows {
    /// T_{i,k} = Σ_{l≤k} Q_{i,l} / μ̄_i.
    pub lengths: Vec<Vec<f64>>,
    /// Γ(T_{i,k}).
    pub windows: Vec<Vec<EqualCostWindow>>,
}

pub fn compute_windows(c: &Corridor, f: &ScheduleDelayFn) -> Result<Windows> {
    let dq = derive(c)?;
    windows_from(&dq, f)
}

fn windows_from(dq: &DerivedQuantities, f: &ScheduleDelayFn) -> Result<Windows> {
    let lengths: Vec<Vec<f64>> = dq
        .cumulative_demands
        .iter()
        .zip(&dq.mu_bar)
        .map(|(row, mb)| row.iter().map(|q| q / mb).collect())
        .collect();
    let windows = lengths
        .iter()
        .map(|row| {
            row.iter()
                .map(|&t| f.equal_cost_window(t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Windows { lengths, windows })
}

/// Group whose slice 𝒯_{i,k} \ 𝒯_{i,k-1} contains the interior point `t`.
pub fn group_slice(windows: &[EqualCostWindow], t: f64) -> Option<usize> {
    windows.iter().position(|w| w.t_minus < t && t < w.t_plus)
}

#[derive(Clone, Debug)]
pub struct DsoSolution {
    pub corridor: Corridor,
    pub schedule: ScheduleDelayFn,
    pub derived: DerivedQuantities,
    /// Shared breakpoints of every curve: window endpoints and kinks of c.
    pub grid: Vec<f64>,
    pub window_lengths: Vec<Vec<f64>>,
    pub windows: Vec<Vec<EqualCostWindow>>,
    pub rho: Vec<Vec<f64>>,
    pub prices: Vec<PiecewiseCurve>,
    /// P_i = Σ_{j≤i} p_j.
    pub cumulative_prices: Vec<PiecewiseCurve>,
    pub group_flows: Vec<Vec<PiecewiseCurve>>,
    pub aggregate_flows: Vec<PiecewiseCurve>,
    pub total_cost: f64,
    pub revenue: f64,
}

pub fn solve_dso(c: &Corridor, f: &ScheduleDelayFn) -> Result<DsoSolution> {
    let dq = derive(c)?;
    let Windows { lengths, windows } = windows_from(&dq, f)?;
    let n = c.n_bottlenecks();
    let kk = c.n_groups();
    let outer = windows[n - 1][kk - 1];
    f.check_slope_bound((outer.t_minus, outer.t_plus))?;

    let ends: Vec<f64> = windows
        .iter()
        .flatten()
        .flat_map(|w| [w.t_minus, w.t_plus])
        .collect();
    let mut extra = f.kinks();
    extra.retain(|&k| outer.t_minus < k && k < outer.t_plus);
    let grid = union_grid(&[&ends, &extra]);

    let rho: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..kk)
                .map(|k| {
                    c.free_flow_time(i)
                        + (k..kk)
                            .map(|l| dq.beta_bar[l] * windows[i][l].cost)
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();

    let cumulative_prices: Vec<PiecewiseCurve> = (0..n)
        .map(|i| {
            PiecewiseCurve::from_segments(&grid, |_, a, b| {
                match group_slice(&windows[i], 0.5 * (a + b)) {
                    Some(k) => Piece::affine_in_c(-c.beta(k), rho[i][k] - c.free_flow_time(i)),
                    None => Piece::ZERO,
                }
            })
        })
        .collect();
    let prices: Vec<PiecewiseCurve> = (0..n)
        .map(|i| match i {
            0 => cumulative_prices[0].clone(),
            _ => cumulative_prices[i].sub(&cumulative_prices[i - 1]),
        })
        .collect();

    require_positive_prices(&prices, &windows, f)?;

    let group_flows: Vec<Vec<PiecewiseCurve>> = (0..n)
        .map(|i| {
            (0..kk)
                .map(|k| {
                    PiecewiseCurve::from_segments(&grid, |_, a, b| {
                        if group_slice(&windows[i], 0.5 * (a + b)) == Some(k) {
                            Piece::constant(dq.mu_bar[i])
                        } else {
                            Piece::ZERO
                        }
                    })
                })
                .collect()
        })
        .collect();
    let aggregate_flows = group_flows
        .iter()
        .map(|g| PiecewiseCurve::sum(&grid, g))
        .collect();

    let revenue: f64 = prices
        .iter()
        .enumerate()
        .map(|(i, p)| c.capacity(i) * p.integral(f))
        .sum();
    let sum_q_rho: f64 = (0..n)
        .map(|i| (0..kk).map(|k| c.demand(i, k) * rho[i][k]).sum::<f64>())
        .sum();

    Ok(DsoSolution {
        corridor: c.clone(),
        schedule: f.clone(),
        derived: dq,
        grid,
        window_lengths: lengths,
        windows,
        rho,
        prices,
        cumulative_prices,
        group_flows,
        aggregate_flows,
        total_cost: sum_q_rho - revenue,
        revenue,
    })
}

/// Each p_i must be strictly positive inside 𝒯_i; otherwise the corridor has a
/// false bottleneck and the nested closed form is not the optimum.
fn require_positive_prices(
    prices: &[PiecewiseCurve],
    windows: &[Vec<EqualCostWindow>],
    f: &ScheduleDelayFn,
) -> Result<()> {
    const SAMPLES: usize = 16;
    for (i, p) in prices.iter().enumerate() {
        let w = windows[i].last().unwrap();
        for (a, b, piece) in p.segments() {
            if b <= w.t_minus || a >= w.t_plus {
                continue;
            }
            for s in 0..=SAMPLES {
                let t = a + (b - a) * s as f64 / SAMPLES as f64;
                let side = if s == SAMPLES {
                    Side::Left
                } else {
                    Side::Right
                };
                let boundary = (s == 0 && a <= w.t_minus) || (s == SAMPLES && b >= w.t_plus);
                let v = piece.eval(f, t, side);
                if !boundary && v <= 0.0 {
                    return Err(Error::InvalidCorridor(vec![format!(
                        "optimal price of bottleneck {} is {v:.3e} at t = {t:.6} inside its window; \
                         the bottleneck is a false bottleneck for this demand pattern",
                        i + 1
                    )]));
                }
            }
        }
    }
    Ok(())
}

/// Z^SO = Σ Q ρ − Σ μ_i ∫ p_i, recomputed from the stored curves.
pub fn total_cost_dso(s: &DsoSolution) -> f64 {
    let c = &s.corridor;
    let sum_q_rho: f64 = s
        .rho
        .iter()
        .zip(c.demands())
        .map(|(r, q)| r.iter().zip(q).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    let revenue: f64 = s
        .prices
        .iter()
        .enumerate()
        .map(|(i, p)| c.capacity(i) * p.integral(&s.schedule))
        .sum();
    sum_q_rho - revenue
}

impl DsoSolution {
    /// Outer window 𝒯_i = 𝒯_{i,K}.
    pub fn origin_window(&self, i: usize) -> EqualCostWindow {
        *self.windows[i].last().unwrap()
    }

    /// The optimum seen as a priced state: bottleneck tolls p_i and no queues.
    pub fn state(&self) -> EquilibriumState {
        let n = self.corridor.n_bottlenecks();
        let zero = || vec![PiecewiseCurve::zero(&self.grid); n];
        EquilibriumState {
            corridor: self.corridor.clone(),
            schedule: self.schedule.clone(),
            grid: self.grid.clone(),
            windows: self.windows.clone(),
            rho: self.rho.clone(),
            flows: self.group_flows.clone(),
            mainline_queues: zero(),
            ramp_queues: zero(),
            bottleneck_tolls: self.prices.clone(),
            ramp_tolls: zero(),
            ramp_capacity: vec![None; n],
        }
    }
}
