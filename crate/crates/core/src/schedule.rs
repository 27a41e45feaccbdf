//! Base schedule-delay cost c(t), its equal-cost windows and the slope condition.

use crate::error::{Error, Result};

/// Which one-sided derivative to take at a kink.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// Schedule-delay cost with the preferred arrival time fixed at 0.
#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleDelayFn {
    /// `c(t) = early * |t|` for t < 0 and `late * t` for t >= 0.
    PiecewiseLinear { early: f64, late: f64 },
    /// `c(t) = sum coeffs[m] * t^m`; constant and linear terms must vanish.
    ConvexPolynomial { coeffs: Vec<f64> },
}

/// Root tolerance (time units) for the bisection path.
pub const ROOT_TOLERANCE: f64 = 1e-10;
/// Bisection iteration budget.
pub const ROOT_MAX_ITER: usize = 200;
/// Strictness tolerance on slope margins.
pub const QRP_EPS: f64 = 1e-12;

const POLY_SAMPLES: usize = 2048;

impl ScheduleDelayFn {
    pub fn piecewise_linear(early: f64, late: f64) -> Result<Self> {
        if !(early.is_finite() && late.is_finite()) {
            return Err(Error::InvalidScheduleDelay("slopes must be finite".into()));
        }
        if early <= 0.0 || late <= 0.0 {
            return Err(Error::InvalidScheduleDelay(format!(
                "slopes must be positive (early {early}, late {late})"
            )));
        }
        if early >= 1.0 {
            return Err(Error::InvalidScheduleDelay(format!(
                "early slope {early} must be below 1 so that dc/dt > -1"
            )));
        }
        Ok(ScheduleDelayFn::PiecewiseLinear { early, late })
    }

    /// Accepts an even-degree polynomial with vanishing constant and linear
    /// terms, a positive leading coefficient and a nonnegative second derivative.
    pub fn convex_polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidScheduleDelay(
                "coefficients must be finite".into(),
            ));
        }
        if coeffs.len() < 3 {
            return Err(Error::InvalidScheduleDelay(
                "polynomial must have degree at least 2".into(),
            ));
        }
        if coeffs[0] != 0.0 || coeffs[1] != 0.0 {
            return Err(Error::InvalidScheduleDelay(
                "constant and linear coefficients must be zero so that c(0) = 0 is the minimum"
                    .into(),
            ));
        }
        let degree = coeffs.len() - 1;
        if degree % 2 != 0 || coeffs[degree] <= 0.0 {
            return Err(Error::InvalidScheduleDelay(format!(
                "degree {degree} must be even with a positive leading coefficient"
            )));
        }
        // Every real root of c'' lies inside the Cauchy bound, so sampling there suffices.
        let second: Vec<f64> = (2..=degree)
            .map(|m| coeffs[m] * (m * (m - 1)) as f64)
            .collect();
        let lead = *second.last().unwrap();
        let bound = 1.0
            + second[..second.len() - 1]
                .iter()
                .map(|a| (a / lead).abs())
                .fold(0.0, f64::max);
        let n = 20_000;
        let mut positive = false;
        for s in 0..=n {
            let t = -bound + 2.0 * bound * s as f64 / n as f64;
            let v = horner(&second, t);
            if v < -1e-12 {
                return Err(Error::InvalidScheduleDelay(format!(
                    "second derivative is negative at t = {t}; the polynomial is not convex"
                )));
            }
            positive |= v > 0.0;
        }
        if !positive {
            return Err(Error::InvalidScheduleDelay(
                "polynomial is not strictly convex".into(),
            ));
        }
        Ok(ScheduleDelayFn::ConvexPolynomial { coeffs })
    }

    /// c(t).
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScheduleDelayFn::PiecewiseLinear { early, late } => {
                if t < 0.0 {
                    -early * t
                } else {
                    late * t
                }
            }
            ScheduleDelayFn::ConvexPolynomial { coeffs } => horner(coeffs, t),
        }
    }

    /// One-sided derivative of c at t.
    pub fn slope(&self, t: f64, side: Side) -> f64 {
        match self {
            ScheduleDelayFn::PiecewiseLinear { early, late } => {
                let early_side = t < 0.0 || (t == 0.0 && side == Side::Left);
                if early_side {
                    -early
                } else {
                    *late
                }
            }
            ScheduleDelayFn::ConvexPolynomial { coeffs } => {
                let d: Vec<f64> = (1..coeffs.len()).map(|m| coeffs[m] * m as f64).collect();
                horner(&d, t)
            }
        }
    }

    /// Points where c is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            ScheduleDelayFn::PiecewiseLinear { .. } => vec![0.0],
            ScheduleDelayFn::ConvexPolynomial { .. } => Vec::new(),
        }
    }

    /// Polynomial degree of c between kinks.
    pub fn degree(&self) -> usize {
        match self {
            ScheduleDelayFn::PiecewiseLinear { .. } => 1,
            ScheduleDelayFn::ConvexPolynomial { coeffs } => coeffs.len() - 1,
        }
    }

    /// Antiderivative of c with value 0 at t = 0.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match self {
            ScheduleDelayFn::PiecewiseLinear { early, late } => {
                if t < 0.0 {
                    -0.5 * early * t * t
                } else {
                    0.5 * late * t * t
                }
            }
            ScheduleDelayFn::ConvexPolynomial { coeffs } => {
                let integ: Vec<f64> = std::iter::once(0.0)
                    .chain(coeffs.iter().enumerate().map(|(m, a)| a / (m + 1) as f64))
                    .collect();
                horner(&integ, t)
            }
        }
    }

    /// Exact integral of c over [a, b].
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    /// Unique window of length `length` whose endpoints share the same cost.
    pub fn equal_cost_window(&self, length: f64) -> Result<EqualCostWindow> {
        if !(length >= 0.0) || !length.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "window length must be finite and nonnegative, got {length}"
            )));
        }
        if length == 0.0 {
            return Ok(EqualCostWindow {
                t_minus: 0.0,
                t_plus: 0.0,
                length: 0.0,
                cost: 0.0,
            });
        }
        match self {
            ScheduleDelayFn::PiecewiseLinear { early, late } => {
                let s = early + late;
                Ok(EqualCostWindow {
                    t_minus: -late * length / s,
                    t_plus: early * length / s,
                    length,
                    cost: early * late * length / s,
                })
            }
            ScheduleDelayFn::ConvexPolynomial { .. } => self.bisect_window(length),
        }
    }

    /// Solves c(s) = c(s + T) for s in [-T, 0] by bisection.
    pub(crate) fn bisect_window(&self, length: f64) -> Result<EqualCostWindow> {
        let g = |s: f64| self.eval(s) - self.eval(s + length);
        let (mut lo, mut hi) = (-length, 0.0);
        if !(g(lo) > 0.0 && g(hi) < 0.0) {
            return Err(Error::NonConvergence {
                length,
                iterations: 0,
            });
        }
        let mut iterations = 0;
        while iterations < ROOT_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        if hi - lo > ROOT_TOLERANCE {
            return Err(Error::NonConvergence { length, iterations });
        }
        let t_minus = 0.5 * (lo + hi);
        let t_plus = t_minus + length;
        Ok(EqualCostWindow {
            t_minus,
            t_plus,
            length,
            cost: 0.5 * (self.eval(t_minus) + self.eval(t_plus)),
        })
    }

    /// Checks dc/dt > -1 at both one-sided slopes over `horizon`.
    pub fn check_slope_bound(&self, horizon: (f64, f64)) -> Result<()> {
        for (t, side) in self.slope_samples(horizon) {
            let s = self.slope(t, side);
            if s <= -1.0 {
                return Err(Error::InvalidScheduleDelay(format!(
                    "slope {s} at t = {t} violates dc/dt > -1"
                )));
            }
        }
        Ok(())
    }

    fn slope_samples(&self, (lo, hi): (f64, f64)) -> Vec<(f64, Side)> {
        let mut pts = Vec::new();
        let push_both = |pts: &mut Vec<(f64, Side)>, t: f64| {
            pts.push((t, Side::Left));
            pts.push((t, Side::Right));
        };
        match self {
            ScheduleDelayFn::PiecewiseLinear { .. } => {
                push_both(&mut pts, lo);
                if lo < 0.0 && 0.0 < hi {
                    push_both(&mut pts, 0.5 * lo);
                    push_both(&mut pts, 0.0);
                    push_both(&mut pts, 0.5 * hi);
                } else if hi > lo {
                    push_both(&mut pts, 0.5 * (lo + hi));
                }
                push_both(&mut pts, hi);
            }
            ScheduleDelayFn::ConvexPolynomial { .. } => {
                for s in 0..=POLY_SAMPLES {
                    let t = lo + (hi - lo) * s as f64 / POLY_SAMPLES as f64;
                    push_both(&mut pts, t);
                }
            }
        }
        pts
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

/// Γ(T) together with its boundary cost c̄(T).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EqualCostWindow {
    pub t_minus: f64,
    pub t_plus: f64,
    pub length: f64,
    pub cost: f64,
}

impl EqualCostWindow {
    pub fn contains(&self, t: f64) -> bool {
        self.t_minus <= t && t <= self.t_plus
    }

    pub fn contains_window(&self, other: &EqualCostWindow) -> bool {
        self.t_minus <= other.t_minus && other.t_plus <= self.t_plus
    }
}

/// One sampled slope that falls outside the admissible band of a bottleneck pair.
#[derive(Clone, Debug, PartialEq)]
pub struct QrpViolation {
    /// Downstream bottleneck of the pair, 1-based; the pair is (pair, pair + 1).
    pub pair: usize,
    pub t: f64,
    pub side: Side,
    pub slope: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QrpReport {
    pub holds: bool,
    /// Smallest distance of any sampled slope to the band edges; +inf for one bottleneck.
    pub worst_margin: f64,
    /// First violations found (capped); `violation_count` has the total.
    pub violating: Vec<QrpViolation>,
    pub violation_count: usize,
}

impl QrpReport {
    pub fn first_violation_text(&self) -> String {
        match self.violating.first() {
            None => String::new(),
            Some(v) => format!(
                "; first at pair ({},{}), t = {}, {} slope {} outside ({}, {})",
                v.pair,
                v.pair + 1,
                v.t,
                match v.side {
                    Side::Left => "left",
                    Side::Right => "right",
                },
                v.slope,
                v.lower,
                v.upper
            ),
        }
    }
}

const MAX_REPORTED: usize = 64;

/// Checks `mu_{i+1}/mu_i - 1 < s < mu_i/mu_{i+1} - 1` for every adjacent pair
/// and every sampled one-sided slope on `horizon`.
pub fn check_qrp_condition(
    f: &ScheduleDelayFn,
    capacities: &[f64],
    horizon: (f64, f64),
) -> QrpReport {
    let mut report = QrpReport {
        holds: true,
        worst_margin: f64::INFINITY,
        violating: Vec::new(),
        violation_count: 0,
    };
    if capacities.len() < 2 {
        return report;
    }
    let samples = f.slope_samples(horizon);
    for (i, pair) in capacities.windows(2).enumerate() {
        let lower = pair[1] / pair[0] - 1.0;
        let upper = pair[0] / pair[1] - 1.0;
        for &(t, side) in &samples {
            let s = f.slope(t, side);
            let margin = (s - lower).min(upper - s);
            report.worst_margin = report.worst_margin.min(margin);
            if margin <= QRP_EPS {
                report.holds = false;
                report.violation_count += 1;
                if report.violating.len() < MAX_REPORTED {
                    report.violating.push(QrpViolation {
                        pair: i + 1,
                        t,
                        side,
                        slope: s,
                        lower,
                        upper,
                    });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pl() -> ScheduleDelayFn {
        ScheduleDelayFn::piecewise_linear(0.4, 0.9).unwrap()
    }

    #[test]
    fn piecewise_linear_values() {
        let f = pl();
        assert_eq!(f.eval(0.0), 0.0);
        assert!((f.eval(-2.0) - 0.8).abs() < 1e-15);
        assert!((f.eval(1.0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn one_sided_slopes() {
        let f = pl();
        for side in [Side::Left, Side::Right] {
            assert_eq!(f.slope(-1.0, side), -0.4);
            assert_eq!(f.slope(2.0, side), 0.9);
        }
        assert_eq!(f.slope(0.0, Side::Left), -0.4);
        assert_eq!(f.slope(0.0, Side::Right), 0.9);
    }

    #[test]
    fn closed_form_windows() {
        let f = pl();
        let w0 = f.equal_cost_window(0.0).unwrap();
        assert_eq!((w0.t_minus, w0.t_plus, w0.cost), (0.0, 0.0, 0.0));
        let w2 = f.equal_cost_window(2.0).unwrap();
        assert!((w2.t_minus + 1.384615).abs() < 1e-6);
        assert!((w2.t_plus - 0.615385).abs() < 1e-6);
        assert!((w2.cost - 0.553846).abs() < 1e-6);
        let w4 = f.equal_cost_window(4.0).unwrap();
        assert!((w4.t_minus + 2.769231).abs() < 1e-6);
        assert!((w4.t_plus - 1.230769).abs() < 1e-6);
        assert!((w4.cost - 1.107692).abs() < 1e-6);
    }

    #[test]
    fn bisection_agrees_with_closed_form() {
        let f = pl();
        for t in [0.1, 1.0, 2.0, 4.0, 13.0] {
            let exact = f.equal_cost_window(t).unwrap();
            let numeric = f.bisect_window(t).unwrap();
            assert!((exact.t_minus - numeric.t_minus).abs() < 1e-10);
            assert!((exact.cost - numeric.cost).abs() < 1e-10);
        }
    }

    #[test]
    fn polynomial_window_has_equal_endpoint_costs() {
        let f = ScheduleDelayFn::convex_polynomial(vec![0.0, 0.0, 0.3, 0.05, 0.02]).unwrap();
        for t in [0.5, 1.0, 3.0] {
            let w = f.equal_cost_window(t).unwrap();
            assert!((f.eval(w.t_minus) - f.eval(w.t_plus)).abs() < 1e-9);
            assert!(w.t_minus < 0.0 && w.t_plus > 0.0);
        }
    }

    #[test]
    fn polynomial_validation() {
        assert!(ScheduleDelayFn::convex_polynomial(vec![0.0, 0.0, 1.0]).is_ok());
        assert!(ScheduleDelayFn::convex_polynomial(vec![0.0, 0.1, 1.0]).is_err());
        assert!(ScheduleDelayFn::convex_polynomial(vec![0.0, 0.0, 1.0, 1.0]).is_err());
        assert!(ScheduleDelayFn::convex_polynomial(vec![0.0, 0.0, 0.1, 1.0, 0.01]).is_err());
        assert!(ScheduleDelayFn::piecewise_linear(1.0, 0.5).is_err());
    }

    #[test]
    fn polynomial_integral_matches_quadrature() {
        let f = ScheduleDelayFn::convex_polynomial(vec![0.0, 0.0, 0.3, 0.05, 0.02]).unwrap();
        let rule = crate::quad::gauss_legendre(4);
        let q = crate::quad::integrate(&rule, -1.3, 0.7, |t| f.eval(t));
        assert!((f.integral(-1.3, 0.7) - q).abs() < 1e-13);
    }

    #[test]
    fn qrp_condition_examples() {
        let r = check_qrp_condition(&pl(), &[2.0, 1.0], (-3.0, 2.0));
        assert!(r.holds);
        assert!((r.worst_margin - 0.1).abs() < 1e-12);

        let f = ScheduleDelayFn::piecewise_linear(0.5, 0.9).unwrap();
        let r = check_qrp_condition(&f, &[2.0, 1.0], (-3.0, 2.0));
        assert!(!r.holds);
        assert!(r.violating.iter().all(|v| v.pair == 1 && v.slope == -0.5));
        assert!(r.violating.iter().any(|v| v.t < 0.0));

        let r = check_qrp_condition(&f, &[1.0], (-3.0, 2.0));
        assert!(r.holds && r.worst_margin.is_infinite());
    }

    proptest! {
        #[test]
        fn windows_nest_monotonically(e in 0.05f64..0.95, l in 0.05f64..3.0, t1 in 0.0f64..10.0, dt in 1e-3f64..10.0) {
            let f = ScheduleDelayFn::piecewise_linear(e, l).unwrap();
            let a = f.equal_cost_window(t1).unwrap();
            let b = f.equal_cost_window(t1 + dt).unwrap();
            prop_assert!(b.contains_window(&a));
            prop_assert!(b.cost > a.cost);
            prop_assert!((f.eval(b.t_minus) - f.eval(b.t_plus)).abs() < 1e-10);
            prop_assert!((b.t_plus - b.t_minus - b.length).abs() < 1e-12);
        }

        #[test]
        fn polynomial_windows_nest(a2 in 0.1f64..1.0, a4 in 0.0f64..0.2, t1 in 0.01f64..4.0, dt in 1e-2f64..4.0) {
            let f = ScheduleDelayFn::convex_polynomial(vec![0.0, 0.0, a2, 0.0, a4]).unwrap();
            let a = f.equal_cost_window(t1).unwrap();
            let b = f.equal_cost_window(t1 + dt).unwrap();
            prop_assert!(b.contains_window(&a));
            prop_assert!(b.cost > a.cost);
            prop_assert!((f.eval(b.t_minus) - f.eval(b.t_plus)).abs() < 1e-8);
        }

        #[test]
        fn group_costs_are_sub_and_supermodular(
            e in 0.05f64..0.95, l in 0.05f64..3.0,
            b_hi in 0.2f64..1.0, frac in 0.05f64..0.95,
            t in 0.0f64..5.0, gap in 1e-3f64..5.0,
        ) {
            let f = ScheduleDelayFn::piecewise_linear(e, l).unwrap();
            let b_lo = b_hi * frac;
            // late side: submodular
            let (t0, t1) = (t, t + gap);
            prop_assert!(b_hi * f.eval(t0) + b_lo * f.eval(t1) < b_lo * f.eval(t0) + b_hi * f.eval(t1));
            // early side: supermodular
            let (s0, s1) = (-t - gap, -t);
            prop_assert!(b_hi * f.eval(s0) + b_lo * f.eval(s1) > b_lo * f.eval(s0) + b_hi * f.eval(s1));
        }

        #[test]
        fn sampled_slopes_exceed_minus_one(e in 0.01f64..0.99, l in 0.01f64..5.0, t in -20.0f64..20.0) {
            let f = ScheduleDelayFn::piecewise_linear(e, l).unwrap();
            prop_assert!(f.slope(t, Side::Left) > -1.0);
            prop_assert!(f.slope(t, Side::Right) > -1.0);
        }
    }
}
