//! Finite signaling game instances and their closed-form values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible prior mass; the reformulation needs full support.
pub const MIN_PROB: f64 = 1e-12;

const SUM_TOL: f64 = 1e-12;
const DISTINCT_TOL: f64 = 1e-12;

/// Finite joint distribution over stacked states `z = [x; y]`, `x, y` in `R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    m: usize,
    states: Vec<DVector<f64>>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(m: usize, states: Vec<DVector<f64>>, probs: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Dimension("m must be positive".into()));
        }
        if states.is_empty() {
            return Err(Error::Dimension("at least one state is required".into()));
        }
        if states.len() != probs.len() {
            return Err(Error::Dimension(format!(
                "{} states but {} probabilities",
                states.len(),
                probs.len()
            )));
        }
        for (i, s) in states.iter().enumerate() {
            if s.len() != 2 * m {
                return Err(Error::Dimension(format!(
                    "state {i} has length {}, expected {}",
                    s.len(),
                    2 * m
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("state {i} is not finite")));
            }
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < MIN_PROB {
                return Err(Error::Probability(format!(
                    "probs[{i}] = {p} is below {MIN_PROB}"
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::Probability(format!("probs sum to {total}, not 1")));
        }
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                if (&states[i] - &states[j]).amax() <= DISTINCT_TOL {
                    return Err(Error::DuplicateState(i, j));
                }
            }
        }
        Ok(Self { m, states, probs })
    }

    /// Builds a pmf from row slices, the layout used by problem files.
    pub fn from_rows(m: usize, states: &[Vec<f64>], probs: &[f64]) -> Result<Self> {
        let states = states
            .iter()
            .map(|s| DVector::from_column_slice(s))
            .collect();
        Self::new(m, states, probs.to_vec())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prior(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.probs)
    }

    /// `2m x n` matrix whose columns are the states.
    pub fn state_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.states)
    }

    /// `E[z z']`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let d = 2 * self.m;
        let mut acc = DMatrix::zeros(d, d);
        for (z, &p) in self.states.iter().zip(&self.probs) {
            acc += p * z * z.transpose();
        }
        acc
    }

    /// `E[z]`.
    pub fn mean(&self) -> DVector<f64> {
        self.state_matrix() * self.prior()
    }
}

/// Which quadratic game is being played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostVariant {
    /// Sender wants the receiver's estimate of `x` to look like `y`.
    Deception,
    /// Sender must disclose `x` but wants to hide `y`.
    Privacy,
}

impl CostVariant {
    /// The `2m x 2m` weight matrix acting on the posterior correlation.
    pub fn weight_matrix(self, m: usize) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            match self {
                CostVariant::Deception => {
                    v[(i, i)] = 1.0;
                    v[(i, m + i)] = -1.0;
                    v[(m + i, i)] = -1.0;
                }
                CostVariant::Privacy => {
                    v[(i, i)] = -1.0;
                    v[(m + i, m + i)] = 1.0;
                }
            }
        }
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            CostVariant::Deception => "deception",
            CostVariant::Privacy => "privacy",
        }
    }
}

impl std::str::FromStr for CostVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deception" => Ok(CostVariant::Deception),
            "privacy" => Ok(CostVariant::Privacy),
            other => Err(Error::Parse(format!(
                "variant must be \"deception\" or \"privacy\", got {other:?}"
            ))),
        }
    }
}

/// Linear constraints imposed on `Xi`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintMode {
    /// `Xi 1 = p_o`.
    FullPrior,
    /// `[Z; 1'] Xi 1 = [mu_o; 1]`: only the mean of the prior is pinned.
    FixedMean(DVector<f64>),
}

/// A finite signaling game ready for the cone programs.
#[derive(Debug, Clone)]
pub struct SignalingProblem {
    pmf: JointPmf,
    variant: CostVariant,
    mode: ConstraintMode,
    z: DMatrix<f64>,
    v: DMatrix<f64>,
    vbar: DMatrix<f64>,
    prior: DVector<f64>,
    yy_trace: f64,
    zz_trace_p: f64,
}

impl SignalingProblem {
    pub fn n(&self) -> usize {
        self.pmf.n()
    }

    pub fn m(&self) -> usize {
        self.pmf.m()
    }

    pub fn pmf(&self) -> &JointPmf {
        &self.pmf
    }

    pub fn variant(&self) -> CostVariant {
        self.variant
    }

    pub fn mode(&self) -> &ConstraintMode {
        &self.mode
    }

    /// State matrix `Z` (`2m x n`).
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Reduced cost matrix `Z' V Z`.
    pub fn vbar(&self) -> &DMatrix<f64> {
        &self.vbar
    }

    pub fn prior(&self) -> &DVector<f64> {
        &self.prior
    }

    /// `tr(E[y y'])`, the constant dropped from the deception objective.
    pub fn yy_trace(&self) -> f64 {
        self.yy_trace
    }

    /// `tr(V^p E[z z'])`, the constant subtracted in the privacy objective.
    pub fn zz_trace_p(&self) -> f64 {
        self.zz_trace_p
    }

    /// The linear map `Xi 1 -> lhs` and its right-hand side for the active mode.
    ///
    /// Returns `(C, d)` with the constraint `C Xi 1 = d`. For
    /// [`ConstraintMode::FullPrior`], `C = I` and `d = p_o`.
    pub fn marginal_constraint(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n();
        match &self.mode {
            ConstraintMode::FullPrior => (DMatrix::identity(n, n), self.prior.clone()),
            ConstraintMode::FixedMean(mu) => {
                let d = self.z.nrows();
                let mut c = DMatrix::zeros(d + 1, n);
                c.rows_mut(0, d).copy_from(&self.z);
                c.row_mut(d).fill(1.0);
                let mut rhs = DVector::zeros(d + 1);
                rhs.rows_mut(0, d).copy_from(mu);
                rhs[d] = 1.0;
                (c, rhs)
            }
        }
    }

    /// `tr(Vbar Xi)`.
    pub fn objective(&self, xi: &DMatrix<f64>) -> f64 {
        self.vbar.component_mul(xi).sum()
    }
}

/// Assembles a problem, computing `Vbar = Z' V Z` and the objective constants.
pub fn build_problem(
    pmf: JointPmf,
    variant: CostVariant,
    mode: ConstraintMode,
) -> Result<SignalingProblem> {
    let m = pmf.m();
    if let ConstraintMode::FixedMean(mu) = &mode {
        if mu.len() != 2 * m {
            return Err(Error::Dimension(format!(
                "fixed mean has length {}, expected {}",
                mu.len(),
                2 * m
            )));
        }
    }
    let z = pmf.state_matrix();
    let v = variant.weight_matrix(m);
    let mut vbar = z.transpose() * &v * &z;
    // exact symmetry; the product is symmetric up to rounding
    let vbar_t = vbar.transpose();
    vbar = (vbar + vbar_t) * 0.5;

    let second = pmf.second_moment();
    let yy_trace = (m..2 * m).map(|i| second[(i, i)]).sum();
    let vp = CostVariant::Privacy.weight_matrix(m);
    let zz_trace_p = vp.component_mul(&second).sum();

    let prior = pmf.prior();
    Ok(SignalingProblem {
        pmf,
        variant,
        mode,
        z,
        v,
        vbar,
        prior,
        yy_trace,
        zz_trace_p,
    })
}

/// `tr(Vbar p_o p_o')`: the objective when no information is revealed.
pub fn null_signaling_value(problem: &SignalingProblem) -> f64 {
    let p = problem.prior();
    (p.transpose() * problem.vbar() * p)[(0, 0)]
}

/// `tr(Vbar diag(p_o))`: the objective when the state is revealed exactly.
pub fn full_signaling_value(problem: &SignalingProblem) -> f64 {
    problem
        .vbar()
        .diagonal()
        .iter()
        .zip(problem.prior().iter())
        .map(|(v, p)| v * p)
        .sum()
}

/// `E[zhat zhat'] = Z Xi Z'`.
pub fn posterior_correlation(problem: &SignalingProblem, xi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = problem.n();
    if xi.nrows() != n || xi.ncols() != n {
        return Err(Error::Dimension(format!(
            "Xi is {}x{}, expected {n}x{n}",
            xi.nrows(),
            xi.ncols()
        )));
    }
    Ok(problem.z() * xi * problem.z().transpose())
}

/// Restores the constant the cone program drops from the sender's cost.
pub fn sender_total_cost(problem: &SignalingProblem, objective_value: f64) -> f64 {
    match problem.variant() {
        CostVariant::Deception => problem.yy_trace() + objective_value,
        CostVariant::Privacy => objective_value - problem.zz_trace_p(),
    }
}
