//! Breakpointed curves whose pieces are affine in c(t) and ċ(t).
//!
//! Each piece is `c_coef * c(t) + slope_coef * ċ(t) + offset` on `[t_j, t_{j+1})`.
//! Prices and queues only use the first and last terms; DUE-type flows also
//! need the slope term. Curves evaluate to 0 outside `[first, last)`.

use crate::error::{Error, Result};
use crate::quad;
use crate::schedule::{ScheduleDelayFn, Side};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Piece {
    pub c_coef: f64,
    pub slope_coef: f64,
    pub offset: f64,
}

/// Classification of a piece, mirroring how the formulas are written.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentKind {
    Zero,
    Constant(f64),
    AffineInC { scale: f64, offset: f64 },
    WithSlope(Piece),
}

impl Piece {
    pub const ZERO: Piece = Piece {
        c_coef: 0.0,
        slope_coef: 0.0,
        offset: 0.0,
    };

    pub fn constant(v: f64) -> Self {
        Piece {
            c_coef: 0.0,
            slope_coef: 0.0,
            offset: v,
        }
    }

    pub fn affine_in_c(scale: f64, offset: f64) -> Self {
        Piece {
            c_coef: scale,
            slope_coef: 0.0,
            offset,
        }
    }

    pub fn kind(&self) -> SegmentKind {
        match (self.c_coef, self.slope_coef, self.offset) {
            (a, s, b) if a == 0.0 && s == 0.0 && b == 0.0 => SegmentKind::Zero,
            (a, s, b) if a == 0.0 && s == 0.0 => SegmentKind::Constant(b),
            (a, s, b) if s == 0.0 => SegmentKind::AffineInC {
                scale: a,
                offset: b,
            },
            _ => SegmentKind::WithSlope(*self),
        }
    }

    pub fn eval(&self, f: &ScheduleDelayFn, t: f64, side: Side) -> f64 {
        let mut v = self.offset;
        if self.c_coef != 0.0 {
            v += self.c_coef * f.eval(t);
        }
        if self.slope_coef != 0.0 {
            v += self.slope_coef * f.slope(t, side);
        }
        v
    }

    pub fn add(&self, o: &Piece) -> Piece {
        Piece {
            c_coef: self.c_coef + o.c_coef,
            slope_coef: self.slope_coef + o.slope_coef,
            offset: self.offset + o.offset,
        }
    }

    pub fn scale(&self, s: f64) -> Piece {
        Piece {
            c_coef: s * self.c_coef,
            slope_coef: s * self.slope_coef,
            offset: s * self.offset,
        }
    }

    /// Time derivative; only defined for pieces without a slope term.
    pub fn derivative(&self) -> Piece {
        assert!(
            self.slope_coef == 0.0,
            "second derivatives of c are not represented"
        );
        Piece {
            c_coef: 0.0,
            slope_coef: self.c_coef,
            offset: 0.0,
        }
    }

    /// Exact integral over [a, b], assuming c has no kink strictly inside.
    pub fn integral(&self, f: &ScheduleDelayFn, a: f64, b: f64) -> f64 {
        self.c_coef * f.integral(a, b)
            + self.slope_coef * (f.eval(b) - f.eval(a))
            + self.offset * (b - a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseCurve {
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

impl PiecewiseCurve {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if breakpoints.len() < 2 || pieces.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                pieces.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(PiecewiseCurve {
            breakpoints,
            pieces,
        })
    }

    /// Builds one piece per segment of `grid` from `(segment index, left, right)`.
    pub fn from_segments(grid: &[f64], mut piece: impl FnMut(usize, f64, f64) -> Piece) -> Self {
        debug_assert!(grid.windows(2).all(|w| w[0] < w[1]));
        let pieces = grid
            .windows(2)
            .enumerate()
            .map(|(j, w)| piece(j, w[0], w[1]))
            .collect();
        PiecewiseCurve {
            breakpoints: grid.to_vec(),
            pieces,
        }
    }

    pub fn zero(grid: &[f64]) -> Self {
        Self::from_segments(grid, |_, _, _| Piece::ZERO)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn piece(&self, j: usize) -> &Piece {
        &self.pieces[j]
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, &Piece)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.pieces)
            .map(|(w, p)| (w[0], w[1], p))
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.kind() == SegmentKind::Zero)
    }

    /// Segment j with t_j <= t < t_{j+1}.
    pub fn locate(&self, t: f64) -> Option<usize> {
        let b = &self.breakpoints;
        if !(t >= b[0] && t < b[b.len() - 1]) {
            return None;
        }
        Some(b.partition_point(|&x| x <= t) - 1)
    }

    /// Right-continuous value (right limit at breakpoints).
    pub fn value(&self, f: &ScheduleDelayFn, t: f64) -> f64 {
        self.locate(t)
            .map_or(0.0, |j| self.pieces[j].eval(f, t, Side::Right))
    }

    /// Left limit at t.
    pub fn value_left(&self, f: &ScheduleDelayFn, t: f64) -> f64 {
        let b = &self.breakpoints;
        if !(t > b[0] && t <= b[b.len() - 1]) {
            return 0.0;
        }
        let j = b.partition_point(|&x| x < t) - 1;
        self.pieces[j].eval(f, t, Side::Left)
    }

    fn map_pieces(&self, g: impl Fn(&Piece) -> Piece) -> Self {
        PiecewiseCurve {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(g).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_pieces(|p| p.scale(s))
    }

    pub fn derivative(&self) -> Self {
        self.map_pieces(Piece::derivative)
    }

    /// Re-expresses the curve on `grid`, which must contain every breakpoint of `self`
    /// that lies inside its span.
    pub fn on_grid(&self, grid: &[f64]) -> Self {
        if grid == self.breakpoints.as_slice() {
            return self.clone();
        }
        Self::from_segments(grid, |_, a, b| {
            let m = 0.5 * (a + b);
            self.locate(m).map_or(Piece::ZERO, |j| self.pieces[j])
        })
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a.add(&b.scale(-1.0)))
    }

    fn combine(&self, other: &Self, op: impl Fn(&Piece, &Piece) -> Piece) -> Self {
        if self.breakpoints == other.breakpoints {
            let pieces = self
                .pieces
                .iter()
                .zip(&other.pieces)
                .map(|(a, b)| op(a, b))
                .collect();
            return PiecewiseCurve {
                breakpoints: self.breakpoints.clone(),
                pieces,
            };
        }
        let grid = union_grid(&[&self.breakpoints, &other.breakpoints]);
        let (a, b) = (self.on_grid(&grid), other.on_grid(&grid));
        a.combine(&b, op)
    }

    pub fn sum<'a>(grid: &[f64], curves: impl IntoIterator<Item = &'a PiecewiseCurve>) -> Self {
        curves
            .into_iter()
            .fold(Self::zero(grid), |acc, c| acc.add(c))
    }

    /// Exact integral over the whole support.
    pub fn integral(&self, f: &ScheduleDelayFn) -> f64 {
        self.integral_to(f, f64::INFINITY)
    }

    /// Exact integral over (-inf, t].
    pub fn integral_to(&self, f: &ScheduleDelayFn, t: f64) -> f64 {
        let kinks = f.kinks();
        let mut total = 0.0;
        for (a, b, p) in self.segments() {
            if a >= t {
                break;
            }
            let b = b.min(t);
            total += split_at_kinks(a, b, &kinks)
                .windows(2)
                .map(|w| p.integral(f, w[0], w[1]))
                .sum::<f64>();
        }
        total
    }

    /// Exact integral of the product of two curves (Gauss-Legendre between kinks).
    pub fn integral_product(&self, other: &Self, f: &ScheduleDelayFn) -> f64 {
        if self.breakpoints != other.breakpoints {
            let grid = union_grid(&[&self.breakpoints, &other.breakpoints]);
            return self
                .on_grid(&grid)
                .integral_product(&other.on_grid(&grid), f);
        }
        let rule = quad::gauss_legendre(f.degree() + 1);
        let kinks = f.kinks();
        let mut total = 0.0;
        for ((a, b, p), q) in self.segments().zip(&other.pieces) {
            if p.kind() == SegmentKind::Zero || q.kind() == SegmentKind::Zero {
                continue;
            }
            for w in split_at_kinks(a, b, &kinks).windows(2) {
                total += quad::integrate(&rule, w[0], w[1], |t| {
                    p.eval(f, t, Side::Right) * q.eval(f, t, Side::Right)
                });
            }
        }
        total
    }
}

fn split_at_kinks(a: f64, b: f64, kinks: &[f64]) -> Vec<f64> {
    let mut pts = vec![a];
    pts.extend(kinks.iter().copied().filter(|&k| a < k && k < b));
    pts.push(b);
    pts
}

/// Sorted union of breakpoint lists with exact duplicates removed.
pub fn union_grid(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl() -> ScheduleDelayFn {
        ScheduleDelayFn::PiecewiseLinear {
            early: 0.4,
            late: 0.9,
        }
    }

    fn tent() -> PiecewiseCurve {
        // 1 - c(t) on [-1, 0.5], zero elsewhere inside [-2, 1].
        PiecewiseCurve::new(
            vec![-2.0, -1.0, 0.0, 0.5, 1.0],
            vec![
                Piece::ZERO,
                Piece::affine_in_c(-1.0, 1.0),
                Piece::affine_in_c(-1.0, 1.0),
                Piece::ZERO,
            ],
        )
        .unwrap()
    }

    #[test]
    fn construction_checks() {
        assert!(PiecewiseCurve::new(vec![0.0, 0.0], vec![Piece::ZERO]).is_err());
        assert!(PiecewiseCurve::new(vec![0.0, 1.0], vec![]).is_err());
    }

    #[test]
    fn evaluation_and_limits() {
        let f = pl();
        let c = tent();
        assert_eq!(c.value(&f, -3.0), 0.0);
        assert_eq!(c.value(&f, 0.0), 1.0);
        assert!((c.value(&f, -0.5) - 0.8).abs() < 1e-15);
        assert!((c.value_left(&f, -1.0) - 0.0).abs() < 1e-15);
        assert!((c.value(&f, -1.0) - 0.6).abs() < 1e-15);
        assert_eq!(c.value(&f, 1.0), 0.0);
        assert_eq!(c.locate(0.5), Some(3));
    }

    #[test]
    fn kinds() {
        assert_eq!(Piece::ZERO.kind(), SegmentKind::Zero);
        assert_eq!(Piece::constant(2.0).kind(), SegmentKind::Constant(2.0));
        assert_eq!(
            Piece::affine_in_c(1.0, 2.0).kind(),
            SegmentKind::AffineInC {
                scale: 1.0,
                offset: 2.0
            }
        );
    }

    #[test]
    fn integrals_are_exact() {
        let f = pl();
        let c = tent();
        // ∫_{-1}^{0} (1 - 0.4|t|) + ∫_0^{0.5} (1 - 0.9 t)
        let want = (1.0 - 0.2) + (0.5 - 0.9 * 0.125);
        assert!((c.integral(&f) - want).abs() < 1e-15);
        assert!((c.integral_to(&f, 0.0) - 0.8).abs() < 1e-15);
        // Derivative integrates to the jump sum: value(0.5-) - value(-1+) = 0.55 - 0.6
        assert!((c.derivative().integral(&f) - (0.55 - 0.6)).abs() < 1e-15);
    }

    #[test]
    fn product_integral_matches_fine_quadrature() {
        let f = pl();
        let a = tent();
        let b = PiecewiseCurve::new(
            vec![-1.5, -0.25, 0.75],
            vec![
                Piece {
                    c_coef: 0.3,
                    slope_coef: 0.2,
                    offset: 1.0,
                },
                Piece::constant(2.0),
            ],
        )
        .unwrap();
        let exact = a.integral_product(&b, &f);
        // Every breakpoint is a multiple of 0.25 and so lands on a cell edge.
        let n = 240_000;
        let (lo, hi) = (-2.0, 1.0);
        let h = (hi - lo) / n as f64;
        let riemann: f64 = (0..n)
            .map(|s| {
                let t = lo + (s as f64 + 0.5) * h;
                a.value(&f, t) * b.value(&f, t) * h
            })
            .sum();
        assert!((exact - riemann).abs() < 1e-8, "{exact} vs {riemann}");
    }

    #[test]
    fn arithmetic_on_different_grids() {
        let f = pl();
        let a = tent();
        let b = PiecewiseCurve::new(vec![-0.5, 0.25], vec![Piece::constant(1.0)]).unwrap();
        let s = a.add(&b);
        let d = s.sub(&b);
        for t in [-1.5, -0.75, -0.5, -0.1, 0.0, 0.2, 0.25, 0.4, 0.9] {
            assert!((s.value(&f, t) - a.value(&f, t) - b.value(&f, t)).abs() < 1e-15);
            assert!((d.value(&f, t) - a.value(&f, t)).abs() < 1e-15);
        }
    }
}
