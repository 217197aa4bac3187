//! Dense two-phase revised simplex for `min c'x s.t. Ax = b, x >= 0`.
//!
//! The programs produced by the cone approximations have few rows (the
//! number of states, or `2m + 1` in fixed-mean mode) and many columns, so the
//! basis inverse is kept explicitly and updated with elementary row
//! operations, with a fresh factorization every [`REFACTOR_EVERY`] pivots.

use crate::error::{Error, Result};

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for optimality.
pub const OPT_TOL: f64 = 1e-10;
/// Smallest pivot magnitude accepted by the ratio test.
pub const PIVOT_TOL: f64 = 1e-11;

const REFACTOR_EVERY: usize = 64;
// preferred pivot magnitude; smaller ones are used only as a last resort
const GOOD_PIVOT: f64 = 1e-7;

/// Dense equality-form LP. `a` is stored column-major, `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    rows: usize,
    cols: usize,
    c: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl LpProblem {
    /// `a` is column-major: column `j` occupies `a[j * rows..(j + 1) * rows]`.
    pub fn new(c: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let rows = b.len();
        let cols = c.len();
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("LP needs at least one row and one column".into()));
        }
        if a.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "constraint matrix has {} entries, expected {rows}x{cols}",
                a.len()
            )));
        }
        if c.iter().chain(&a).chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("LP data must be finite".into()));
        }
        for i in 0..rows {
            if (0..cols).all(|j| a[j * rows + i] == 0.0) {
                return Err(Error::InvalidArgument(format!("constraint row {i} is all zero")));
            }
        }
        Ok(Self { rows, cols, c, a, b })
    }

    /// Convenience constructor from row-major rows.
    pub fn from_rows(c: Vec<f64>, a_rows: &[Vec<f64>], b: Vec<f64>) -> Result<Self> {
        let cols = c.len();
        let mut a = vec![0.0; a_rows.len() * cols];
        for (i, row) in a_rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Dimension(format!("row {i} has {} entries", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                a[j * a_rows.len() + i] = v;
            }
        }
        Self::new(c, a, b)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cost(&self) -> &[f64] {
        &self.c
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.a[j * self.rows..(j + 1) * self.rows]
    }

    /// Same problem with the cost vector multiplied by `alpha`.
    pub fn scaled_cost(&self, alpha: f64) -> Self {
        Self {
            c: self.c.iter().map(|v| v * alpha).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Dual multipliers, one per constraint row; `b'y = c'x` at optimum.
    pub y: Vec<f64>,
    /// Basic variable per row (structural indices; artificial rows are
    /// reported as `None`).
    pub basis: Vec<Option<usize>>,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

struct Tableau<'a> {
    p: &'a LpProblem,
    m: usize,
    n: usize,
    // row sign flips so that b >= 0
    sign: Vec<f64>,
    b: Vec<f64>,
    // basic variable per row; indices >= n are artificials (n + row)
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    // row-major m x m
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
    degenerate: usize,
    bland: bool,
}

impl<'a> Tableau<'a> {
    fn new(p: &'a LpProblem) -> Self {
        let m = p.rows;
        let n = p.cols;
        let sign: Vec<f64> = p.b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = p.b.iter().zip(&sign).map(|(v, s)| v * s).collect();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut is_basic = vec![false; n + m];
        for flag in &mut is_basic[n..] {
            *flag = true;
        }
        Self {
            p,
            m,
            n,
            sign,
            xb: b.clone(),
            b,
            basis: (n..n + m).collect(),
            is_basic,
            binv,
            pivots: 0,
            since_refactor: 0,
            degenerate: 0,
            bland: false,
        }
    }

    /// Column `j` of the row-flipped system (artificials are unit columns).
    fn column_into(&self, j: usize, out: &mut [f64]) {
        if j < self.n {
            let col = self.p.column(j);
            for i in 0..self.m {
                out[i] = col[i] * self.sign[i];
            }
        } else {
            out.fill(0.0);
            out[j - self.n] = 1.0;
        }
    }

    fn ftran(&self, j: usize, col: &mut [f64], out: &mut [f64]) {
        self.column_into(j, col);
        let m = self.m;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            out[i] = row.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
        }
    }

    /// `y' = c_B' B^{-1}`.
    fn duals(&self, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &var) in self.basis.iter().enumerate() {
            let cb = cost(var);
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, bi) in y.iter_mut().zip(row) {
                    *yi += cb * bi;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], cost: &dyn Fn(usize) -> f64) -> f64 {
        let col = self.p.column(j);
        let mut d = cost(j);
        for i in 0..self.m {
            d -= y[i] * col[i] * self.sign[i];
        }
        d
    }

    fn pivot(&mut self, row: usize, entering: usize, u: &[f64]) {
        let m = self.m;
        let piv = u[row];
        let theta = self.xb[row] / piv;
        for i in 0..m {
            if i != row {
                self.xb[i] -= theta * u[i];
            }
        }
        self.xb[row] = theta;
        let (before, rest) = self.binv.split_at_mut(row * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (i, chunk) in before.chunks_mut(m).enumerate() {
            let f = u[i];
            if f != 0.0 {
                for (a, b) in chunk.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
            }
        }
        for (k, chunk) in after.chunks_mut(m).enumerate() {
            let f = u[row + 1 + k];
            if f != 0.0 {
                for (a, b) in chunk.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
            }
        }
        let leaving = self.basis[row];
        self.is_basic[leaving] = false;
        self.is_basic[entering] = true;
        self.basis[row] = entering;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            // a failed refactorization keeps the updated inverse
            let _ = self.refactor();
        }
    }

    /// Recomputes `B^{-1}` by Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (r, &var) in self.basis.iter().enumerate() {
            self.column_into(var, &mut col);
            for i in 0..m {
                bmat[i * m + r] = col[i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let (prow, pval) = (k..m)
                .map(|i| (i, bmat[i * m + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pval < 1e-14 {
                return Err(Error::NumericalFailure("singular basis".into()));
            }
            if prow != k {
                for j in 0..m {
                    bmat.swap(k * m + j, prow * m + j);
                    inv.swap(k * m + j, prow * m + j);
                }
            }
            let d = bmat[k * m + k];
            for j in 0..m {
                bmat[k * m + j] /= d;
                inv[k * m + j] /= d;
            }
            for i in 0..m {
                if i != k {
                    let f = bmat[i * m + k];
                    if f != 0.0 {
                        for j in 0..m {
                            bmat[i * m + j] -= f * bmat[k * m + j];
                            inv[i * m + j] -= f * inv[k * m + j];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            self.xb[i] = (0..m).map(|j| self.binv[i * m + j] * self.b[j]).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// Runs simplex iterations on the given cost until optimal.
    /// Returns `Ok(false)` when the problem is unbounded.
    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64, allow_artificial: bool) -> Result<bool> {
        let m = self.m;
        let mut col = vec![0.0; m];
        let mut u = vec![0.0; m];
        let bland_after = 10 * (self.m + self.n);
        let max_pivots = 50 * (self.m + self.n) + 10_000;
        let candidates = if allow_artificial { self.n + self.m } else { self.n };
        loop {
            if self.pivots > max_pivots {
                return Err(Error::NumericalFailure("pivot limit exceeded".into()));
            }
            let y = self.duals(cost);
            // pricing
            let mut entering = None;
            let mut best = -OPT_TOL;
            for j in 0..candidates {
                if self.is_basic[j] {
                    continue;
                }
                let d = if j < self.n {
                    self.reduced_cost(j, &y, cost)
                } else {
                    cost(j) - y[j - self.n]
                };
                if self.bland {
                    if d < -OPT_TOL {
                        entering = Some(j);
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return Ok(true);
            };
            self.ftran(q, &mut col, &mut u);

            // ratio test: smallest step, preferring large pivots, then
            // lowest basic index under Bland's rule
            let mut row = None;
            let mut min_ratio = f64::INFINITY;
            for pass_tol in [GOOD_PIVOT, PIVOT_TOL] {
                for i in 0..m {
                    if u[i] > pass_tol {
                        let ratio = self.xb[i].max(0.0) / u[i];
                        let better = match row {
                            None => true,
                            Some(r) => {
                                if ratio < min_ratio - 1e-12 {
                                    true
                                } else if ratio <= min_ratio + 1e-12 {
                                    if self.bland {
                                        self.basis[i] < self.basis[r]
                                    } else {
                                        u[i] > u[r]
                                    }
                                } else {
                                    false
                                }
                            }
                        };
                        if better {
                            row = Some(i);
                            min_ratio = min_ratio.min(ratio);
                        }
                    }
                }
                if row.is_some() {
                    break;
                }
            }
            let Some(r) = row else {
                if u.iter().any(|&v| v > 1e-14) {
                    return Err(Error::NumericalFailure(
                        "pivot candidates below 1e-11".into(),
                    ));
                }
                return Ok(false);
            };
            if min_ratio <= 1e-12 {
                self.degenerate += 1;
                if self.degenerate >= bland_after {
                    self.bland = true;
                }
            }
            self.pivot(r, q, &u);
        }
    }
}

/// Solves the LP with Dantzig pricing; Bland's rule takes over after
/// `10 (M + N)` degenerate pivots.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    let mut t = Tableau::new(p);
    let n = p.cols;
    let m = p.rows;

    // phase 1: minimize the sum of artificials
    let phase1 = |j: usize| if j >= n { 1.0 } else { 0.0 };
    if !t.optimize(&phase1, false)? {
        return Err(Error::NumericalFailure("phase 1 reported unbounded".into()));
    }
    t.refactor()?;
    let infeas: f64 = t
        .basis
        .iter()
        .zip(&t.xb)
        .filter(|(&v, _)| v >= n)
        .map(|(_, &x)| x.max(0.0))
        .sum();
    let scale = 1.0 + t.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if infeas > FEAS_TOL * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; n],
            objective: f64::NAN,
            y: vec![0.0; m],
            basis: vec![None; m],
            pivots: t.pivots,
        });
    }

    // drive zero-level artificials out of the basis; rows where that is
    // impossible are redundant and keep their artificial pinned at zero
    let mut col = vec![0.0; m];
    let mut u = vec![0.0; m];
    for r in 0..m {
        if t.basis[r] < n {
            continue;
        }
        let row = &t.binv[r * m..(r + 1) * m];
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if t.is_basic[j] {
                continue;
            }
            let colj = p.column(j);
            let v: f64 = (0..m).map(|i| row[i] * colj[i] * t.sign[i]).sum();
            if v.abs() > 1e-9 && best.is_none_or(|(_, bv)| v.abs() > bv.abs()) {
                best = Some((j, v));
            }
        }
        if let Some((j, _)) = best {
            t.ftran(j, &mut col, &mut u);
            t.xb[r] = 0.0;
            t.pivot(r, j, &u);
        }
    }
    t.refactor()?;

    // phase 2
    let cost = |j: usize| if j < n { p.c[j] } else { 0.0 };
    let bounded = t.optimize(&cost, false)?;
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![0.0; n],
            objective: f64::NEG_INFINITY,
            y: vec![0.0; m],
            basis: vec![None; m],
            pivots: t.pivots,
        });
    }
    t.refactor()?;
    let mut x = vec![0.0; n];
    for (r, &var) in t.basis.iter().enumerate() {
        if var < n {
            x[var] = t.xb[r].max(0.0);
        }
    }
    let y_flipped = t.duals(&cost);
    let y: Vec<f64> = y_flipped.iter().zip(&t.sign).map(|(v, s)| v * s).collect();
    let objective = x.iter().zip(&p.c).map(|(a, b)| a * b).sum();
    let basis = t.basis.iter().map(|&v| (v < n).then_some(v)).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        y,
        basis,
        pivots: t.pivots,
    })
}
