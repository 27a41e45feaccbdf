//! Dense two-phase tableau simplex with Dantzig pricing and a Bland fallback
//! on degenerate stalls. Small problems only.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// min c·x subject to the rows and x >= 0.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// y_r = ∂(optimal objective)/∂(rhs_r).
    pub duals: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub max_pivots: usize,
    /// Smallest admissible pivot element in the ratio test.
    pub pivot_tol: f64,
    /// Reduced costs above −tol count as nonnegative.
    pub cost_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_limit: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_pivots: 1_000_000,
            pivot_tol: 1e-10,
            cost_tol: 1e-9,
            stall_limit: 50,
        }
    }
}

struct Tableau {
    m: usize,
    cols: usize,
    /// (m + 1) x (cols + 1), row-major; row m holds reduced costs, last column the rhs.
    a: Vec<f64>,
    basis: Vec<usize>,
    blocked: Vec<bool>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let piv = self.a[pr * w + pc];
        for c in 0..w {
            self.a[pr * w + c] /= piv;
        }
        let pivot_row: Vec<f64> = self.a[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.m {
            if r == pr {
                continue;
            }
            let factor = self.a[r * w + pc];
            if factor != 0.0 {
                let row = &mut self.a[r * w..(r + 1) * w];
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= factor * p;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// Sets the objective row to reduced costs of `cost`.
    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        let m = self.m;
        for c in 0..w {
            self.a[m * w + c] = if c < self.cols { cost[c] } else { 0.0 };
        }
        for r in 0..m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    let v = self.a[r * w + c];
                    self.a[m * w + c] -= cb * v;
                }
            }
        }
    }

    /// Runs primal simplex iterations on the current objective row.
    fn optimize(&mut self, opts: &SimplexOptions, pivots: &mut usize) -> LpStatus {
        let mut stalled = 0;
        loop {
            if *pivots >= opts.max_pivots {
                return LpStatus::IterLimit;
            }
            let bland = stalled >= opts.stall_limit;
            let mut enter = None;
            let mut best = -opts.cost_tol;
            for c in 0..self.cols {
                if self.blocked[c] {
                    continue;
                }
                let d = self.at(self.m, c);
                if d < -opts.cost_tol {
                    if bland {
                        enter = Some(c);
                        break;
                    }
                    if d < best {
                        best = d;
                        enter = Some(c);
                    }
                }
            }
            let Some(pc) = enter else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, pc);
                if a > opts.pivot_tol {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * lratio.abs().max(1.0);
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, ratio)) = leave else {
                return LpStatus::Unbounded;
            };
            if ratio <= 1e-14 {
                stalled += 1;
            } else {
                stalled = 0;
            }
            self.pivot(pr, pc);
            *pivots += 1;
        }
    }
}

pub fn solve(lp: &LinearProgram, opts: &SimplexOptions) -> SimplexResult {
    let n = lp.objective.len();
    let m = lp.rows.len();
    // Normalize to nonnegative right-hand sides.
    let mut flipped = vec![false; m];
    let mut senses = Vec::with_capacity(m);
    for (r, row) in lp.rows.iter().enumerate() {
        let mut s = row.sense;
        if row.rhs < 0.0 {
            flipped[r] = true;
            s = match s {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        senses.push(s);
    }
    let n_slack = senses.iter().filter(|s| **s != Sense::Eq).count();
    let n_art = senses.iter().filter(|s| **s != Sense::Le).count();
    let cols = n + n_slack + n_art;
    let w = cols + 1;
    let mut t = Tableau {
        m,
        cols,
        a: vec![0.0; (m + 1) * w],
        basis: vec![0; m],
        blocked: vec![false; cols],
    };
    // Column holding +e_r (slack or artificial) per row, and its sign in the original row.
    let mut unit_col = vec![0usize; m];
    let mut unit_sign = vec![1.0; m];
    let (mut next_slack, mut next_art) = (n, n + n_slack);
    for (r, row) in lp.rows.iter().enumerate() {
        let sgn = if flipped[r] { -1.0 } else { 1.0 };
        for &(c, v) in &row.coeffs {
            t.a[r * w + c] += sgn * v;
        }
        t.a[r * w + cols] = sgn * row.rhs;
        match senses[r] {
            Sense::Le => {
                t.a[r * w + next_slack] = 1.0;
                t.basis[r] = next_slack;
                unit_col[r] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                t.a[r * w + next_slack] = -1.0;
                next_slack += 1;
                t.a[r * w + next_art] = 1.0;
                t.basis[r] = next_art;
                unit_col[r] = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                t.a[r * w + next_art] = 1.0;
                t.basis[r] = next_art;
                unit_col[r] = next_art;
                next_art += 1;
            }
        }
        unit_sign[r] = sgn;
    }

    let mut pivots = 0;
    let art_start = n + n_slack;
    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[art_start..].iter_mut().for_each(|c| *c = 1.0);
        t.set_objective(&phase1);
        let status = t.optimize(opts, &mut pivots);
        if status == LpStatus::IterLimit {
            return failed(status, n, m, pivots);
        }
        let infeas: f64 = (0..m)
            .filter(|&r| t.basis[r] >= art_start)
            .map(|r| t.rhs(r))
            .sum();
        let scale = lp.rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
        if infeas > 1e-9 * scale {
            return failed(LpStatus::Infeasible, n, m, pivots);
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if t.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| t.at(r, c).abs() > opts.pivot_tol) {
                    t.pivot(r, c);
                    pivots += 1;
                }
            }
        }
        for c in art_start..cols {
            t.blocked[c] = true;
        }
    }
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    t.set_objective(&cost);
    let status = t.optimize(opts, &mut pivots);
    if status != LpStatus::Optimal {
        return failed(status, n, m, pivots);
    }

    let mut x = vec![0.0; n];
    for r in 0..m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let duals = (0..m)
        .map(|r| {
            // d_unit = c_unit − y_r · (±1) with c_unit = 0; the Ge surplus sits at −e_r,
            // but the artificial at +e_r carries the same information.
            let y = -t.at(m, unit_col[r]);
            y * unit_sign[r]
        })
        .collect();
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    SimplexResult {
        status,
        x,
        duals,
        objective,
        pivots,
    }
}

fn failed(status: LpStatus, n: usize, m: usize, pivots: usize) -> SimplexResult {
    SimplexResult {
        status,
        x: vec![0.0; n],
        duals: vec![0.0; m],
        objective: f64::NAN,
        pivots,
    }
}
