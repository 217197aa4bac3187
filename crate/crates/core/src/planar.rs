//! Exact solver for scalar games (`m = 1`) by pricing two-point posteriors.
//!
//! With `m = 1` the objective of a posterior `q` is `g(Zq)`, an indefinite
//! quadratic of the planar posterior mean. For any multiplier `y` the reduced
//! cost `g(Zq) - y'Cq` is therefore minimized over the simplex on a segment
//! between two states, where it is a one-dimensional quadratic. Pricing every
//! pair is exact, so the master LP over two-point posteriors reaches the
//! completely positive optimum and the Lagrangian bound `d'y + min r` is a
//! valid lower bound at every round.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lp::solve_lp;
use crate::model::SignalingProblem;
use crate::solver::{assemble, expect_optimal, full_duals, BoundsTrace, TraceRow};

// reduced cost below which a priced column enters the master
const ENTER_TOL: f64 = 1e-10;
// interior points closer than this to a state are that state
const ENDPOINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct PlanarOptions {
    /// Stopping gap between the master value and the Lagrangian bound.
    pub tol: f64,
    pub max_rounds: usize,
    /// Columns added per round; 0 means one per state.
    pub columns_per_round: usize,
}

impl Default for PlanarOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_rounds: 1000,
            columns_per_round: 0,
        }
    }
}

/// A two-point posterior `s e_j + (1 - s) e_k` with its reduced cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricedPair {
    pub j: usize,
    pub k: usize,
    pub s: f64,
    pub reduced_cost: f64,
}

#[derive(Debug, Clone)]
pub struct PlanarSolution {
    pub value: f64,
    pub lower: f64,
    pub gap: f64,
    /// Posteriors with positive weight and their weights.
    pub posteriors: Vec<(DVector<f64>, f64)>,
    /// `sqrt(weight) * posterior`, so that `Xi = sum b b'`.
    pub factor_columns: Vec<DVector<f64>>,
    pub xi: DMatrix<f64>,
    pub dual_y: DVector<f64>,
    pub trace: BoundsTrace,
    pub rounds: usize,
    pub converged: bool,
}

/// Checks that pair pricing is exact for `problem`.
pub fn check_planar(problem: &SignalingProblem) -> Result<()> {
    if problem.m() != 1 {
        return Err(Error::InvalidArgument(format!(
            "pair pricing needs scalar x and y (m = 1), got m = {}",
            problem.m()
        )));
    }
    let v = problem.v();
    let det = v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)];
    if !(det < 0.0) {
        return Err(Error::InvalidArgument("pair pricing needs an indefinite weight matrix".into()));
    }
    Ok(())
}

/// Minimizes the reduced cost `q' Vbar q - w'q` on the segment between
/// states `j` and `k`, where `w = C'y`.
pub fn price_pair(vbar: &DMatrix<f64>, w: &DVector<f64>, j: usize, k: usize) -> PricedPair {
    let (vjj, vjk, vkk) = (vbar[(j, j)], vbar[(j, k)], vbar[(k, k)]);
    let a = vjj - 2.0 * vjk + vkk;
    let b = 2.0 * (vjk - vkk) - (w[j] - w[k]);
    let c = vkk - w[k];
    let r = |s: f64| (a * s + b) * s + c;
    let mut best = (0.0, r(0.0));
    let r1 = r(1.0);
    if r1 < best.1 {
        best = (1.0, r1);
    }
    if a > 0.0 {
        let s = -b / (2.0 * a);
        if s > 0.0 && s < 1.0 && r(s) < best.1 {
            best = (s, r(s));
        }
    }
    PricedPair {
        j,
        k,
        s: best.0,
        reduced_cost: best.1,
    }
}

/// Prices every pair `j < k` and returns them ordered by reduced cost.
pub fn price_all(vbar: &DMatrix<f64>, w: &DVector<f64>) -> Vec<PricedPair> {
    let n = vbar.nrows();
    let mut out: Vec<PricedPair> = (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .map(|(j, k)| price_pair(vbar, w, j, k))
        .collect();
    out.sort_by(|a, b| a.reduced_cost.total_cmp(&b.reduced_cost));
    out
}

pub fn solve_planar(problem: &SignalingProblem, opts: &PlanarOptions) -> Result<PlanarSolution> {
    check_planar(problem)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if opts.max_rounds == 0 {
        return Err(Error::InvalidArgument("max_rounds must be at least 1".into()));
    }
    let start = Instant::now();
    let n = problem.n();
    let vbar = problem.vbar();
    let (cmat, d) = problem.marginal_constraint();
    let per_round = if opts.columns_per_round == 0 { n } else { opts.columns_per_round };

    // full revelation is always feasible
    let mut columns: Vec<DVector<f64>> = (0..n)
        .map(|j| {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            e
        })
        .collect();
    let mut trace = BoundsTrace::default();
    let mut lower = f64::NEG_INFINITY;
    let mut converged = false;
    let mut rounds = 0;
    let (x, y) = loop {
        rounds += 1;
        let cols = columns
            .iter()
            .map(|q| ((q.transpose() * vbar * q)[(0, 0)], q.clone()))
            .collect();
        let sol = expect_optimal(solve_lp(&assemble(&cmat, &d, cols)?)?)?;
        let y = full_duals(&cmat, &sol.y);
        let w = cmat.transpose() * &y;
        let priced = price_all(vbar, &w);
        let singles = (0..n).map(|j| vbar[(j, j)] - w[j]).fold(f64::INFINITY, f64::min);
        let min_r = priced.first().map_or(singles, |p| p.reduced_cost.min(singles));
        // every feasible weight vector sums to one
        lower = lower.max(d.dot(&y) + min_r.min(0.0));
        trace.rows.push(TraceRow {
            iter: rounds,
            lower,
            upper: sol.objective,
            vertices: columns.len(),
            simplices: 0,
            seconds: start.elapsed().as_secs_f64(),
        });
        if sol.objective - lower <= opts.tol {
            converged = true;
            break (sol.x, y);
        }
        let before = columns.len();
        for p in priced.iter().take_while(|p| p.reduced_cost < -ENTER_TOL).take(per_round) {
            if p.s <= ENDPOINT_TOL || p.s >= 1.0 - ENDPOINT_TOL {
                continue;
            }
            let mut q = DVector::zeros(n);
            q[p.j] = p.s;
            q[p.k] = 1.0 - p.s;
            columns.push(q);
        }
        if columns.len() == before || rounds == opts.max_rounds {
            break (sol.x, y);
        }
    };

    let mut xi = DMatrix::zeros(n, n);
    let mut posteriors = Vec::new();
    for (q, &lambda) in columns.iter().zip(&x) {
        if lambda > 0.0 {
            xi += lambda * q * q.transpose();
            posteriors.push((q.clone(), lambda));
        }
    }
    let factor_columns = posteriors.iter().map(|(q, l)| q * l.sqrt()).collect();
    let value = problem.objective(&xi);
    Ok(PlanarSolution {
        value,
        lower,
        gap: value - lower,
        posteriors,
        factor_columns,
        xi,
        dual_y: y,
        trace,
        rounds,
        converged,
    })
}
