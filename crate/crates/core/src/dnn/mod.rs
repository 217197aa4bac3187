//! Doubly nonnegative relaxation of the completely positive program.
//!
//! Replaces `CP^n` with `S_+^n ∩ R_+^{n x n}`; the two cones coincide for
//! `n <= 4`, so the relaxation is exact there and a lower bound beyond.
//! Solved by consensus ADMM over three sets: the affine marginal constraint
//! (carrying the linear objective), the nonnegative orthant and the PSD cone.

mod eig;

pub use eig::{project_psd, spectral_norm, sym_eig, SymEigen};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::SignalingProblem;

#[derive(Debug, Clone, Copy)]
pub struct DnnOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub rho: f64,
    pub relaxation: f64,
}

impl Default for DnnOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 100_000,
            rho: 1.0,
            relaxation: 1.0,
        }
    }
}

/// Infeasibility of a candidate with respect to each of the three sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnnResiduals {
    /// `||C Xi 1 - d||_inf`.
    pub affine: f64,
    /// `max(0, -min_ij Xi_ij)`.
    pub nonneg: f64,
    /// `max(0, -lambda_min(Xi))`.
    pub psd: f64,
}

#[derive(Debug, Clone)]
pub struct DnnSolution {
    pub xi: DMatrix<f64>,
    pub value: f64,
    pub residuals: DnnResiduals,
    pub iterations: usize,
    /// False when `max_iters` ran out before the residuals reached `tol`.
    pub converged: bool,
}

/// Orthogonal projection onto `{X symmetric : C X 1 = d}`.
struct AffineProjector {
    c: DMatrix<f64>,
    d: DVector<f64>,
    k_pinv: DMatrix<f64>,
}

impl AffineProjector {
    fn new(c: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let n = c.ncols() as f64;
        let c1 = c.column_sum();
        let k = &c * c.transpose() * n + &c1 * c1.transpose();
        let k_pinv = k
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::NumericalFailure(e.to_string()))?;
        Ok(Self { c, d, k_pinv })
    }

    fn project(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let n = y.ncols();
        let r = &self.d - &self.c * y.column_sum();
        let w = &self.k_pinv * r;
        let g = self.c.transpose() * w;
        DMatrix::from_fn(n, n, |i, j| y[(i, j)] + g[i] + g[j])
    }

    fn residual(&self, x: &DMatrix<f64>) -> f64 {
        (&self.c * x.column_sum() - &self.d).amax()
    }
}

/// Solves `min tr(Vbar Xi)` over doubly nonnegative `Xi` meeting the
/// problem's marginal constraint.
pub fn solve_dnn(problem: &SignalingProblem, opts: &DnnOptions) -> Result<DnnSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if opts.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    let n = problem.n();
    let (c, d) = problem.marginal_constraint();
    let affine = AffineProjector::new(c, d)?;
    let vbar = problem.vbar();
    let step = vbar / opts.rho;
    let alpha = opts.relaxation;

    let mut z = DMatrix::from_diagonal(problem.prior());
    let mut u = [
        DMatrix::<f64>::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
    ];
    let mut x = [z.clone(), z.clone(), z.clone()];
    let mut iterations = 0;
    let mut converged = false;
    let mut work_a = vec![0.0; n * n];
    let mut work_v = vec![0.0; n * n];

    while iterations < opts.max_iters {
        iterations += 1;
        x[0] = affine.project(&(&z - &u[0] - &step));
        x[1] = (&z - &u[1]).map(|v| v.max(0.0));
        x[2] = psd_project_into(&(&z - &u[2]), &mut work_a, &mut work_v);

        let z_prev = z.clone();
        let mut acc = DMatrix::zeros(n, n);
        for i in 0..3 {
            let relaxed = &x[i] * alpha + &z_prev * (1.0 - alpha);
            acc += &relaxed + &u[i];
        }
        z = acc / 3.0;
        let mut primal: f64 = 0.0;
        for i in 0..3 {
            let relaxed = &x[i] * alpha + &z_prev * (1.0 - alpha);
            u[i] += &relaxed - &z;
            primal = primal.max((&x[i] - &z).norm());
        }
        let dual = opts.rho * (&z - &z_prev).norm() * 3f64.sqrt();
        if primal <= opts.tol && dual <= opts.tol {
            converged = true;
            break;
        }
    }

    let xi = (&z + z.transpose()) * 0.5;
    let min_entry = xi.min();
    let min_eig = sym_eig(&xi)?.min();
    let residuals = DnnResiduals {
        affine: affine.residual(&xi),
        nonneg: (-min_entry).max(0.0),
        psd: (-min_eig).max(0.0),
    };
    Ok(DnnSolution {
        value: problem.objective(&xi),
        xi,
        residuals,
        iterations,
        converged,
    })
}

fn psd_project_into(q: &DMatrix<f64>, a: &mut [f64], v: &mut [f64]) -> DMatrix<f64> {
    let n = q.nrows();
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (q[(i, j)] + q[(j, i)]);
        }
    }
    eig::jacobi_in_place(n, a, v);
    let lambdas: Vec<f64> = (0..n).map(|i| a[i * n + i].max(0.0)).collect();
    DMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| v[i * n + k] * lambdas[k] * v[j * n + k]).sum()
    })
}
