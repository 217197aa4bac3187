//! Polyhedral bounding of the completely positive program.
//!
//! For a simplicial partition `P` of the standard simplex with vertex pool
//! `V_P`, the inner cone `cone{b b' : b in V_P}` lies inside `CP^n` and the
//! outer cone `cone{b c' + c b' : b, c in a common simplex}` contains it.
//! Restricting `Xi` to either cone turns the program into an LP; the inner LP
//! yields an upper bound with an explicit nonnegative factorization, the
//! outer LP a lower bound with a dual certificate. Refining the partition
//! closes the gap.

use std::collections::HashSet;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpSolution, LpStatus};
use crate::model::SignalingProblem;
use crate::partition::{initial_partition, SimplicialPartition};

/// Slack used when comparing bounds coming from different LPs.
pub const BOUND_TOL: f64 = 1e-9;

/// Which vertex pairs generate the outer cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairScope {
    /// Pairs of vertices sharing a simplex (the tighter cone).
    #[default]
    CommonSimplex,
    /// Every pair in the pool.
    AllPairs,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub pair_scope: PairScope,
    /// Every this many iterations the largest simplex is bisected as well.
    pub fallback_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iters: 5000,
            pair_scope: PairScope::CommonSimplex,
            fallback_every: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerCertificate {
    /// `(vertex id, vertex, lambda)` for every positive weight.
    pub active_vertices: Vec<(usize, DVector<f64>, f64)>,
    pub xi: DMatrix<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct OuterCertificate {
    /// `((id_b, id_c), lambda)` for every positive weight, `id_b <= id_c`.
    pub active_pairs: Vec<((usize, usize), f64)>,
    pub xi: DMatrix<f64>,
    pub value: f64,
    /// LP duals; `d' y` equals `value` where `d` is the marginal right-hand side.
    pub dual_y: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub lower: f64,
    pub upper: f64,
    pub vertices: usize,
    pub simplices: usize,
    pub seconds: f64,
}

/// Bound history of one run. Rows carry the best bounds seen so far.
#[derive(Debug, Clone, Default)]
pub struct BoundsTrace {
    pub rows: Vec<TraceRow>,
}

impl BoundsTrace {
    /// CSV with header `iter,lower,upper,vertices,simplices,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,lower,upper,vertices,simplices,seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iter,
                crate::io::fmt_sig(r.lower),
                crate::io::fmt_sig(r.upper),
                r.vertices,
                r.simplices,
                crate::io::fmt_sig(r.seconds)
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct CpSolution {
    /// Best upper bound, attained by `Xi = sum_i b_i b_i'`.
    pub value: f64,
    pub lower: f64,
    pub factor_columns: Vec<DVector<f64>>,
    pub gap: f64,
    pub trace: BoundsTrace,
    pub dual_y: DVector<f64>,
    pub converged: bool,
    pub inner: InnerCertificate,
    pub outer: OuterCertificate,
    /// Partition after the last refinement.
    pub partition: SimplicialPartition,
}

impl CpSolution {
    pub fn xi(&self) -> &DMatrix<f64> {
        &self.inner.xi
    }
}

/// Inner LP: `min sum_b (b' Vbar b) lambda_b  s.t.  sum_b lambda_b C b = d`.
///
/// Variables follow the vertex pool order.
pub fn build_inner_lp(partition: &SimplicialPartition, problem: &SignalingProblem) -> Result<LpProblem> {
    check_dims(partition, problem)?;
    let (c, d) = problem.marginal_constraint();
    let vbar = problem.vbar();
    let cols: Vec<(f64, DVector<f64>)> = partition
        .vertices()
        .iter()
        .map(|b| ((b.transpose() * vbar * b)[(0, 0)], b.clone()))
        .collect();
    assemble(&c, &d, cols)
}

/// Outer LP: one variable per vertex pair `{b, c}` (with `b = c` allowed),
/// cost `2 b' Vbar c`, constraint column `C (b + c)`.
///
/// Returns the LP together with the pool-index pair behind each variable.
pub fn build_outer_lp(
    partition: &SimplicialPartition,
    problem: &SignalingProblem,
    scope: PairScope,
) -> Result<(LpProblem, Vec<(usize, usize)>)> {
    check_dims(partition, problem)?;
    let pairs = outer_pairs(partition, scope);
    let (c, d) = problem.marginal_constraint();
    let vbar = problem.vbar();
    let verts = partition.vertices();
    let cols: Vec<(f64, DVector<f64>)> = pairs
        .iter()
        .map(|&(i, j)| {
            let cost = 2.0 * (verts[i].transpose() * vbar * &verts[j])[(0, 0)];
            (cost, &verts[i] + &verts[j])
        })
        .collect();
    Ok((assemble(&c, &d, cols)?, pairs))
}

fn outer_pairs(partition: &SimplicialPartition, scope: PairScope) -> Vec<(usize, usize)> {
    match scope {
        PairScope::AllPairs => {
            let nv = partition.vertex_count();
            (0..nv).flat_map(|i| (i..nv).map(move |j| (i, j))).collect()
        }
        PairScope::CommonSimplex => {
            let mut seen = HashSet::new();
            let mut pairs = Vec::new();
            for s in partition.simplices() {
                let ids = &s.vertex_ids;
                for (a, &i) in ids.iter().enumerate() {
                    for &j in &ids[a..] {
                        let key = (i.min(j), i.max(j));
                        if seen.insert(key) {
                            pairs.push(key);
                        }
                    }
                }
            }
            pairs.sort_unstable();
            pairs
        }
    }
}

fn check_dims(partition: &SimplicialPartition, problem: &SignalingProblem) -> Result<()> {
    if partition.n() != problem.n() {
        return Err(Error::Dimension(format!(
            "partition is over {} coordinates, problem has {} states",
            partition.n(),
            problem.n()
        )));
    }
    Ok(())
}

/// Maps raw columns through the constraint operator, dropping constraint
/// rows that vanish identically (possible in fixed-mean mode).
pub(crate) fn assemble(c: &DMatrix<f64>, d: &DVector<f64>, cols: Vec<(f64, DVector<f64>)>) -> Result<LpProblem> {
    let keep: Vec<usize> = (0..c.nrows())
        .filter(|&r| c.row(r).iter().any(|&v| v != 0.0))
        .collect();
    for r in 0..c.nrows() {
        if !keep.contains(&r) && d[r].abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "constraint row {r} is identically zero but its target is {}",
                d[r]
            )));
        }
    }
    let rows = keep.len();
    let mut cost = Vec::with_capacity(cols.len());
    let mut a = Vec::with_capacity(cols.len() * rows);
    for (cj, v) in cols {
        cost.push(cj);
        let mapped = c * v;
        a.extend(keep.iter().map(|&r| mapped[r]));
    }
    let b = keep.iter().map(|&r| d[r]).collect();
    LpProblem::new(cost, a, b)
}

/// Expands LP duals on the kept rows back to the full constraint length.
pub(crate) fn full_duals(c: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(c.nrows());
    let mut k = 0;
    for r in 0..c.nrows() {
        if c.row(r).iter().any(|&v| v != 0.0) {
            out[r] = y[k];
            k += 1;
        }
    }
    out
}

pub(crate) fn expect_optimal(sol: LpSolution) -> Result<LpSolution> {
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

/// Solves the inner LP for the current partition.
pub fn inner_bound(partition: &SimplicialPartition, problem: &SignalingProblem) -> Result<InnerCertificate> {
    let lp = build_inner_lp(partition, problem)?;
    let sol = expect_optimal(solve_lp(&lp)?)?;
    let n = problem.n();
    let mut xi = DMatrix::zeros(n, n);
    let mut active = Vec::new();
    for (id, &lambda) in sol.x.iter().enumerate() {
        if lambda > 0.0 {
            let b = partition.vertex(id);
            xi += lambda * b * b.transpose();
            active.push((id, b.clone(), lambda));
        }
    }
    Ok(InnerCertificate {
        active_vertices: active,
        value: problem.objective(&xi),
        xi,
    })
}

/// Solves the outer LP for the current partition.
pub fn outer_bound(
    partition: &SimplicialPartition,
    problem: &SignalingProblem,
    scope: PairScope,
) -> Result<OuterCertificate> {
    let (lp, pairs) = build_outer_lp(partition, problem, scope)?;
    let sol = expect_optimal(solve_lp(&lp)?)?;
    let n = problem.n();
    let mut xi = DMatrix::zeros(n, n);
    let mut active = Vec::new();
    for (k, &lambda) in sol.x.iter().enumerate() {
        if lambda > 0.0 {
            let (i, j) = pairs[k];
            let b = partition.vertex(i);
            let c = partition.vertex(j);
            let bc = b * c.transpose();
            xi += lambda * (&bc + bc.transpose());
            active.push(((i, j), lambda));
        }
    }
    let (cmat, _) = problem.marginal_constraint();
    Ok(OuterCertificate {
        active_pairs: active,
        value: problem.objective(&xi),
        xi,
        dual_y: full_duals(&cmat, &sol.y),
    })
}

/// Refines the partition where the outer solution is loosest.
///
/// The active cross pair `{b, c}` (with `b != c`) of largest
/// `|lambda * b' Vbar c|` has its edge split in every simplex holding it, so
/// the pair drops out of the outer cone. Every `fallback_every`-th iteration
/// (1-based) additionally bisects the largest simplex along its longest
/// edge; when no cross pair is active only the largest simplex is bisected.
pub fn refine_step(
    partition: &mut SimplicialPartition,
    problem: &SignalingProblem,
    outer: &OuterCertificate,
    iteration: usize,
    fallback_every: usize,
) -> Result<()> {
    let vbar = problem.vbar();
    let mut best: Option<(f64, (usize, usize))> = None;
    for &((i, j), lambda) in &outer.active_pairs {
        if i == j {
            continue;
        }
        // b c' + c b' = 2 m m' - (b - c)(b - c)' / 2 with m the midpoint; the
        // second term is what the inner cone cannot reproduce
        let diff = partition.vertex(i) - partition.vertex(j);
        let weight = lambda * (diff.transpose() * vbar * &diff)[(0, 0)];
        if weight <= 0.0 {
            continue;
        }
        if best.is_none_or(|(w, _)| weight > w) && partition.simplices_with_pair(i, j).next().is_some() {
            best = Some((weight, (i, j)));
        }
    }
    match best {
        Some((_, (i, j))) => {
            let holders: Vec<usize> = partition.simplices_with_pair(i, j).collect();
            for sid in holders {
                partition.bisect_edge(sid, i, j)?;
            }
            if fallback_every > 0 && iteration % fallback_every == 0 {
                let sid = partition.max_diameter_simplex();
                partition.bisect(sid)?;
            }
        }
        None => {
            let sid = partition.max_diameter_simplex();
            partition.bisect(sid)?;
        }
    }
    Ok(())
}

/// Runs the inner/outer bounding loop until the gap drops to `opts.tol`.
///
/// Exhausting `opts.max_iters` is not an error: the best bounds are returned
/// with `converged == false`.
pub fn solve(problem: &SignalingProblem, opts: &SolveOptions) -> Result<CpSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if opts.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    let start = Instant::now();
    let mut partition = initial_partition(problem.n())?;
    if problem.n() == 1 {
        return Ok(single_state(problem, &partition, start));
    }

    let mut trace = BoundsTrace::default();
    let mut best_inner: Option<InnerCertificate> = None;
    let mut best_outer: Option<OuterCertificate> = None;
    let mut converged = false;
    for iter in 1..=opts.max_iters {
        let (inner, outer) = rayon::join(
            || inner_bound(&partition, problem),
            || outer_bound(&partition, problem, opts.pair_scope),
        );
        let (inner, outer) = (inner?, outer?);
        if best_inner.as_ref().is_none_or(|b| inner.value < b.value) {
            best_inner = Some(inner);
        }
        let improved_lower = best_outer.as_ref().is_none_or(|b| outer.value > b.value);
        let outer_for_refine = if improved_lower {
            best_outer = Some(outer);
            None
        } else {
            Some(outer)
        };
        let upper = best_inner.as_ref().map(|c| c.value).unwrap();
        let lower = best_outer.as_ref().map(|c| c.value).unwrap();
        trace.rows.push(TraceRow {
            iter,
            lower,
            upper,
            vertices: partition.vertex_count(),
            simplices: partition.simplex_count(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if upper - lower <= opts.tol {
            converged = true;
            break;
        }
        if iter == opts.max_iters {
            break;
        }
        let current_outer = outer_for_refine.as_ref().or(best_outer.as_ref()).unwrap();
        refine_step(&mut partition, problem, current_outer, iter, opts.fallback_every)?;
    }
    let inner = best_inner.expect("at least one iteration ran");
    let outer = best_outer.expect("at least one iteration ran");
    Ok(finish(inner, outer, trace, converged, partition))
}

fn finish(
    inner: InnerCertificate,
    outer: OuterCertificate,
    trace: BoundsTrace,
    converged: bool,
    partition: SimplicialPartition,
) -> CpSolution {
    let factor_columns = inner
        .active_vertices
        .iter()
        .map(|(_, b, lambda)| b * lambda.sqrt())
        .collect();
    CpSolution {
        value: inner.value,
        lower: outer.value,
        gap: inner.value - outer.value,
        factor_columns,
        dual_y: outer.dual_y.clone(),
        trace,
        converged,
        inner,
        outer,
        partition,
    }
}

// with one state there is nothing to hide: Xi = [p_1] = [1]
fn single_state(problem: &SignalingProblem, partition: &SimplicialPartition, start: Instant) -> CpSolution {
    let (c, d) = problem.marginal_constraint();
    let xi = DMatrix::from_element(1, 1, 1.0);
    let value = problem.vbar()[(0, 0)];
    let b = partition.vertex(0).clone();
    // dual: y with d'y = value and C' y = Vbar[0][0] on the single column
    let mut dual_y = DVector::zeros(c.nrows());
    let (row, scale) = (0..c.nrows())
        .map(|r| (r, c[(r, 0)]))
        .find(|(r, v)| *v != 0.0 && d[*r] != 0.0)
        .unwrap_or((0, 1.0));
    dual_y[row] = value / scale;
    let inner = InnerCertificate {
        active_vertices: vec![(0, b, 1.0)],
        xi: xi.clone(),
        value,
    };
    let outer = OuterCertificate {
        active_pairs: vec![((0, 0), 0.5)],
        xi,
        value,
        dual_y,
    };
    let trace = BoundsTrace {
        rows: vec![TraceRow {
            iter: 1,
            lower: value,
            upper: value,
            vertices: 1,
            simplices: 1,
            seconds: start.elapsed().as_secs_f64(),
        }],
    };
    finish(inner, outer, trace, true, partition.clone())
}

/// Weak duality: the outer dual bound may not exceed any attainable value.
pub fn weak_duality_check(problem: &SignalingProblem, outer: &OuterCertificate, any_feasible_value: f64) -> bool {
    let (_, d) = problem.marginal_constraint();
    d.dot(&outer.dual_y) <= any_feasible_value + 1e-8
}

/// `d' y` for the outer certificate's duals.
pub fn dual_bound(problem: &SignalingProblem, outer: &OuterCertificate) -> f64 {
    let (_, d) = problem.marginal_constraint();
    d.dot(&outer.dual_y)
}
