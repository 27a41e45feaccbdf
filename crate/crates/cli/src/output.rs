//! CSV and JSON writers. Numbers carry 9 significant digits in CSV files.

use std::fmt::Write as _;

use qrp_core::{EquilibriumState, PiecewiseCurve, QrpReport, ResidualReport, ScheduleDelayFn};
use serde::Serialize;

/// `%.9g`-style formatting without locale effects.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        trim_zeros(format!("{:.*}", (8 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Sample times: every breakpoint twice (left and right limit) plus a
/// uniform fill at step max(dt, span/2048).
pub fn sample_times(grid: &[f64], dt: f64) -> Vec<(f64, bool)> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let span = hi - lo;
    let step = dt.max(span / 2048.0);
    let mut out: Vec<(f64, bool)> = Vec::new();
    let mut next_break = 0;
    let n_fill = if step > 0.0 {
        (span / step).floor() as usize
    } else {
        0
    };
    let mut fill = (0..=n_fill).map(|s| lo + s as f64 * step).peekable();
    let tol = 1e-9 * span.max(1.0);
    loop {
        let b = grid.get(next_break).copied();
        let u = fill.peek().copied();
        match (b, u) {
            (Some(b), Some(u)) if u < b - tol => {
                out.push((u, false));
                fill.next();
            }
            (Some(b), Some(u)) => {
                if (u - b).abs() <= tol {
                    fill.next();
                }
                out.push((b, true));
                out.push((b, false));
                next_break += 1;
            }
            (Some(b), None) => {
                out.push((b, true));
                out.push((b, false));
                next_break += 1;
            }
            (None, Some(u)) => {
                if u < hi - tol {
                    out.push((u, false));
                }
                fill.next();
            }
            (None, None) => break,
        }
    }
    out
}

fn eval(curve: &PiecewiseCurve, f: &ScheduleDelayFn, t: f64, left: bool) -> f64 {
    if left {
        curve.value_left(f, t)
    } else {
        curve.value(f, t)
    }
}

/// curves.csv: t, flows q_i_k, prices, mainline queues, and ramp columns when
/// `ramps`. A breakpoint appears twice, left limit first.
pub fn curves_csv(s: &EquilibriumState, dt: f64, ramps: bool) -> String {
    let f = &s.schedule;
    let (n, kk) = (s.n_bottlenecks(), s.n_groups());
    let mut out = String::from("t");
    for i in 1..=n {
        for k in 1..=kk {
            let _ = write!(out, ",q_{i}_{k}");
        }
    }
    for i in 1..=n {
        let _ = write!(out, ",price_{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",queue_{i}");
    }
    if ramps {
        for i in 1..=n {
            let _ = write!(out, ",ramp_queue_{i},ramp_toll_{i}");
        }
    }
    out.push('\n');
    for (t, left) in sample_times(&s.grid, dt) {
        out.push_str(&sig9(t));
        let mut cols: Vec<f64> = Vec::new();
        for row in &s.flows {
            cols.extend(row.iter().map(|q| eval(q, f, t, left)));
        }
        cols.extend(s.bottleneck_tolls.iter().map(|c| eval(c, f, t, left)));
        cols.extend(s.mainline_queues.iter().map(|c| eval(c, f, t, left)));
        if ramps {
            for i in 0..n {
                cols.push(eval(&s.ramp_queues[i], f, t, left));
                cols.push(eval(&s.ramp_tolls[i], f, t, left));
            }
        }
        for v in cols {
            out.push(',');
            out.push_str(&sig9(v));
        }
        out.push('\n');
    }
    out
}

pub fn rho_csv(rho: &[Vec<f64>]) -> String {
    let mut out = String::from("origin,group,rho\n");
    for (i, row) in rho.iter().enumerate() {
        for (k, r) in row.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, k + 1, sig9(*r));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct QrpSummary {
    pub holds: bool,
    /// `None` when there is no adjacent pair to check.
    pub worst_margin: Option<f64>,
    pub violation_count: usize,
    pub first_violation: Option<String>,
}

impl From<&QrpReport> for QrpSummary {
    fn from(r: &QrpReport) -> Self {
        QrpSummary {
            holds: r.holds,
            worst_margin: r.worst_margin.is_finite().then_some(r.worst_margin),
            violation_count: r.violation_count,
            first_violation: r.violating.first().map(|_| {
                r.first_violation_text()
                    .trim_start_matches("; ")
                    .to_string()
            }),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualSummary {
    pub departure_choice: f64,
    pub capacity: f64,
    pub conservation: f64,
    pub consistency_margin: f64,
}

impl From<&ResidualReport> for ResidualSummary {
    fn from(r: &ResidualReport) -> Self {
        ResidualSummary {
            departure_choice: r.departure_choice,
            capacity: r.capacity,
            conservation: r.conservation,
            consistency_margin: r.consistency_margin,
        }
    }
}

/// summary.json of `solve`. Timings go to stderr to keep this file byte-stable.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub version: &'static str,
    pub state: String,
    pub n_bottlenecks: usize,
    pub n_groups: usize,
    pub total_cost: f64,
    pub revenue: f64,
    pub sum_q_rho: f64,
    pub queueing_cost: f64,
    pub schedule_cost: f64,
    pub z_so: f64,
    pub z_ue: Option<f64>,
    pub rho: Vec<Vec<f64>>,
    pub qrp: QrpSummary,
    pub residual: ResidualSummary,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(1.4153846153846), "1.41538462");
        assert_eq!(sig9(11.730769230769), "11.7307692");
        assert_eq!(sig9(-2.769230769230769), "-2.76923077");
        assert_eq!(sig9(0.5), "0.5");
        assert_eq!(sig9(2.0), "2");
        assert_eq!(sig9(-0.0), "0");
        assert_eq!(sig9(1.0e-7), "1e-7");
        assert_eq!(sig9(123456789012.0), "1.23456789e11");
        assert_eq!(sig9(0.000123456789123), "0.000123456789");
    }

    #[test]
    fn breakpoints_appear_twice_in_order() {
        let grid = [0.0, 0.25, 1.0];
        let times = sample_times(&grid, 0.1);
        assert!(times.windows(2).all(|w| w[0].0 <= w[1].0));
        for b in grid {
            let hits: Vec<_> = times.iter().filter(|(t, _)| *t == b).collect();
            assert_eq!(hits.len(), 2, "{b}: {times:?}");
            assert!(hits[0].1 && !hits[1].1);
        }
        // 0.1, 0.2, 0.3, ..., 0.9 fill the gaps
        assert_eq!(times.len(), 6 + 9);
    }
}
