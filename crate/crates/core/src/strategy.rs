//! Signaling strategies, the completely positive matrices they induce, and
//! the posteriors and costs they produce.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CostVariant, JointPmf};

/// Signals sent with lower probability are treated as never sent.
pub const MIN_SIGNAL_PROB: f64 = 1e-12;

const COLUMN_TOL: f64 = 1e-9;
const EXTRACT_TOL: f64 = 1e-7;
const MERGE_TOL: f64 = 1e-9;

/// Number of independent generator streams used by [`simulate`].
pub const SIM_SHARDS: u64 = 64;

/// A stochastic kernel `pi(s | z)` stored as a `k x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalingStrategy {
    pi: DMatrix<f64>,
}

impl SignalingStrategy {
    /// Validates that entries lie in `[0, 1]` and that every column sums to one.
    pub fn new(pi: DMatrix<f64>) -> Result<Self> {
        if pi.nrows() == 0 || pi.ncols() == 0 {
            return Err(Error::Dimension("strategy needs at least one signal and one state".into()));
        }
        for (idx, &v) in pi.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                let (i, j) = (idx % pi.nrows(), idx / pi.nrows());
                return Err(Error::Probability(format!("pi[{i}][{j}] = {v} is not in [0, 1]")));
            }
        }
        for j in 0..pi.ncols() {
            let s = pi.column(j).sum();
            if (s - 1.0).abs() > COLUMN_TOL {
                return Err(Error::Probability(format!("column {j} sums to {s}")));
            }
        }
        Ok(Self { pi })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("strategy rows have different lengths".into()));
        }
        Self::new(DMatrix::from_fn(k, n, |i, j| rows[i][j]))
    }

    /// Reveals the state: `pi = I`.
    pub fn identity(n: usize) -> Self {
        Self { pi: DMatrix::identity(n, n) }
    }

    /// Reveals nothing: a single signal sent with probability one.
    pub fn constant(n: usize) -> Self {
        Self { pi: DMatrix::from_element(1, n, 1.0) }
    }

    pub fn pi(&self) -> &DMatrix<f64> {
        &self.pi
    }

    pub fn signal_count(&self) -> usize {
        self.pi.nrows()
    }

    pub fn n(&self) -> usize {
        self.pi.ncols()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.pi.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn check_against(&self, pmf: &JointPmf) -> Result<()> {
        if self.n() != pmf.n() {
            return Err(Error::Dimension(format!(
                "strategy covers {} states, distribution has {}",
                self.n(),
                pmf.n()
            )));
        }
        Ok(())
    }

    /// `(pi_s o p_o)` for each signal together with `p(s)`.
    fn joint_rows(&self, p: &DVector<f64>) -> Vec<(DVector<f64>, f64)> {
        (0..self.signal_count())
            .map(|s| {
                let row = self.pi.row(s).transpose().component_mul(p);
                let ps = row.sum();
                (row, ps)
            })
            .collect()
    }
}

/// `Xi_pi = sum_s p(s) p_s p_s'`, skipping signals that are never sent.
pub fn induced_cp_matrix(strategy: &SignalingStrategy, pmf: &JointPmf) -> Result<DMatrix<f64>> {
    strategy.check_against(pmf)?;
    let p = pmf.prior();
    let n = pmf.n();
    let mut xi = DMatrix::zeros(n, n);
    for (row, ps) in strategy.joint_rows(&p) {
        if ps < MIN_SIGNAL_PROB {
            continue;
        }
        xi += &row * row.transpose() / ps;
    }
    Ok(xi)
}

/// Recovers a strategy from a nonnegative factorization `Xi = sum_i b_i b_i'`.
///
/// `pi(s_i | z_j) = (b_i' 1) b_ij / p_o(z_j)`. Zero columns are dropped and
/// each state column is renormalized to absorb round-off.
pub fn extract_strategy(factor_columns: &[DVector<f64>], p_o: &DVector<f64>) -> Result<SignalingStrategy> {
    let n = p_o.len();
    if n == 0 {
        return Err(Error::Dimension("empty prior".into()));
    }
    if let Some(j) = p_o.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Probability(format!("prior entry {j} is not positive")));
    }
    let mut marginal = DVector::zeros(n);
    let mut kept = Vec::new();
    for (idx, b) in factor_columns.iter().enumerate() {
        if b.len() != n {
            return Err(Error::Dimension(format!("factor column {idx} has length {}, expected {n}", b.len())));
        }
        if b.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("factor column {idx} is not nonnegative")));
        }
        let mass = b.sum();
        if mass == 0.0 {
            continue;
        }
        marginal += b * mass;
        kept.push((b, mass));
    }
    let err = (&marginal - p_o).amax();
    if err > EXTRACT_TOL || kept.is_empty() {
        return Err(Error::Inconsistent(format!("sum_i b_i b_i' 1 misses the prior by {err:e}")));
    }
    let mut pi = DMatrix::from_fn(kept.len(), n, |i, j| kept[i].1 * kept[i].0[j] / p_o[j]);
    for j in 0..n {
        let s = pi.column(j).sum();
        pi.column_mut(j).unscale_mut(s);
    }
    SignalingStrategy::new(pi.map(|v| v.clamp(0.0, 1.0)))
}

/// Columns `a_s = p_s(z) sqrt(p(s))` with `sum_s a_s a_s' = Xi_pi`.
pub fn decompose_strategy(strategy: &SignalingStrategy, pmf: &JointPmf) -> Result<Vec<DVector<f64>>> {
    strategy.check_against(pmf)?;
    let p = pmf.prior();
    Ok(strategy
        .joint_rows(&p)
        .into_iter()
        .filter(|(_, ps)| *ps >= MIN_SIGNAL_PROB)
        .map(|(row, ps)| row / ps.sqrt())
        .collect())
}

/// Bayes posteriors of the signals that are actually sent.
#[derive(Debug, Clone)]
pub struct PosteriorSystem {
    /// Index of each retained signal in the strategy.
    pub labels: Vec<usize>,
    pub signal_probs: Vec<f64>,
    /// Row `r` is `p_s(z)` for signal `labels[r]`.
    pub posteriors: DMatrix<f64>,
    /// Conditional means `zhat_s = sum_z p_s(z) z`.
    pub means: Vec<DVector<f64>>,
}

impl PosteriorSystem {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `E[zhat zhat'] = sum_s p(s) zhat_s zhat_s'`.
    pub fn posterior_correlation(&self) -> DMatrix<f64> {
        let d = self.means.first().map_or(0, |m| m.len());
        let mut out = DMatrix::zeros(d, d);
        for (p, mean) in self.signal_probs.iter().zip(&self.means) {
            out += mean * mean.transpose() * *p;
        }
        out
    }

    /// `sum_s p(s) p_s`, which equals the prior by Bayes plausibility.
    pub fn average_posterior(&self) -> DVector<f64> {
        let n = self.posteriors.ncols();
        let mut out = DVector::zeros(n);
        for (r, p) in self.signal_probs.iter().enumerate() {
            out += self.posteriors.row(r).transpose() * *p;
        }
        out
    }
}

pub fn posteriors(strategy: &SignalingStrategy, pmf: &JointPmf) -> Result<PosteriorSystem> {
    strategy.check_against(pmf)?;
    let p = pmf.prior();
    let z = pmf.state_matrix();
    let mut labels = Vec::new();
    let mut probs = Vec::new();
    let mut rows = Vec::new();
    for (s, (row, ps)) in strategy.joint_rows(&p).into_iter().enumerate() {
        if ps < MIN_SIGNAL_PROB {
            continue;
        }
        labels.push(s);
        probs.push(ps);
        rows.push(row / ps);
    }
    let n = pmf.n();
    let posteriors = DMatrix::from_fn(rows.len(), n, |r, j| rows[r][j]);
    let means = rows.iter().map(|post| &z * post).collect();
    Ok(PosteriorSystem {
        labels,
        signal_probs: probs,
        posteriors,
        means,
    })
}

/// Merges signals whose posteriors coincide within `1e-9` (max-norm).
///
/// Merged signals carry the summed kernel rows, so the induced matrix is
/// unchanged. Rows of never-sent signals are dropped.
pub fn merge_identical_posteriors(strategy: &SignalingStrategy, pmf: &JointPmf) -> Result<SignalingStrategy> {
    let sys = posteriors(strategy, pmf)?;
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for r in 0..sys.len() {
        let found = groups
            .iter_mut()
            .find(|(rep, _)| (sys.posteriors.row(*rep) - sys.posteriors.row(r)).amax() <= MERGE_TOL);
        match found {
            Some((_, members)) => members.push(r),
            None => groups.push((r, vec![r])),
        }
    }
    let n = strategy.n();
    let mut pi = DMatrix::<f64>::zeros(groups.len(), n);
    for (g, (_, members)) in groups.iter().enumerate() {
        for &r in members {
            for j in 0..n {
                pi[(g, j)] += strategy.pi[(sys.labels[r], j)];
            }
        }
    }
    // states whose whole column went to unsent signals cannot exist: p_o > 0
    for j in 0..n {
        let s = pi.column(j).sum();
        pi.column_mut(j).unscale_mut(s);
    }
    SignalingStrategy::new(pi.map(|v| v.clamp(0.0, 1.0)))
}

/// Expected costs of both players under the receiver's best response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizedCosts {
    pub sender: f64,
    pub receiver: f64,
}

/// Per-state, per-signal costs `(sender, receiver)` at the posterior mean.
fn pointwise_costs(variant: CostVariant, m: usize, z: &DVector<f64>, zhat: &DVector<f64>) -> (f64, f64) {
    let sq = |a: usize, b: usize| (z[a] - zhat[b]).powi(2);
    let x_err: f64 = (0..m).map(|i| sq(i, i)).sum();
    match variant {
        CostVariant::Deception => {
            let y_vs_xhat: f64 = (0..m).map(|i| (z[m + i] - zhat[i]).powi(2)).sum();
            (y_vs_xhat, x_err)
        }
        CostVariant::Privacy => {
            let y_err: f64 = (0..m).map(|i| sq(m + i, m + i)).sum();
            (x_err - y_err, x_err + y_err)
        }
    }
}

/// `E||y - xhat||^2` (Deception) or `E||x - xhat||^2 - E||y - yhat||^2`
/// (Privacy) for the sender; `E||x - xhat||^2` (plus `E||y - yhat||^2` in
/// Privacy) for the receiver.
pub fn realized_costs(strategy: &SignalingStrategy, pmf: &JointPmf, variant: CostVariant) -> Result<RealizedCosts> {
    let sys = posteriors(strategy, pmf)?;
    let p = pmf.prior();
    let m = pmf.m();
    let (mut sender, mut receiver) = (0.0, 0.0);
    for (r, &label) in sys.labels.iter().enumerate() {
        for (j, z) in pmf.states().iter().enumerate() {
            let w = strategy.pi[(label, j)] * p[j];
            if w == 0.0 {
                continue;
            }
            let (cs, cr) = pointwise_costs(variant, m, z, &sys.means[r]);
            sender += w * cs;
            receiver += w * cr;
        }
    }
    Ok(RealizedCosts { sender, receiver })
}

/// Monte Carlo estimates with standard errors of the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub samples: u64,
    pub seed: u64,
    /// Empirical `E[zhat zhat']` using exact Bayes posteriors per signal.
    pub posterior_correlation: DMatrix<f64>,
    /// Empirical `tr(V E[zhat zhat'])`.
    pub objective: f64,
    pub objective_se: f64,
    pub sender_cost: f64,
    pub sender_cost_se: f64,
    pub receiver_cost: f64,
    pub receiver_cost_se: f64,
    /// How often each signal was drawn.
    pub signal_counts: Vec<u64>,
}

/// Draws `z ~ p_o`, then `s ~ pi(. | z)`, and averages the resulting
/// quantities.
///
/// The draws are split over [`SIM_SHARDS`] ChaCha8 streams seeded with
/// `seed`; counts per (state, signal) are merged, so the result does not
/// depend on thread scheduling.
pub fn simulate(
    strategy: &SignalingStrategy,
    pmf: &JointPmf,
    variant: CostVariant,
    samples: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    strategy.check_against(pmf)?;
    let n = pmf.n();
    let k = strategy.signal_count();
    let state_cdf = cumulative(pmf.probs().iter().copied());
    let signal_cdfs: Vec<Vec<f64>> = (0..n)
        .map(|j| cumulative(strategy.pi.column(j).iter().copied()))
        .collect();

    let counts = (0..SIM_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let quota = samples / SIM_SHARDS + u64::from(shard < samples % SIM_SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let mut local = vec![0u64; n * k];
            for _ in 0..quota {
                let j = draw(&state_cdf, rng.random::<f64>());
                let s = draw(&signal_cdfs[j], rng.random::<f64>());
                local[j * k + s] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; n * k],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let sys = posteriors(strategy, pmf)?;
    let mut mean_of = vec![None; k];
    for (r, &label) in sys.labels.iter().enumerate() {
        mean_of[label] = Some(&sys.means[r]);
    }
    let m = pmf.m();
    let v = variant.weight_matrix(m);
    let d = 2 * m;
    let total = samples as f64;
    let mut corr = DMatrix::zeros(d, d);
    let mut obj = Moments::default();
    let mut snd = Moments::default();
    let mut rcv = Moments::default();
    let mut signal_counts = vec![0u64; k];
    for j in 0..n {
        for s in 0..k {
            let c = counts[j * k + s];
            if c == 0 {
                continue;
            }
            signal_counts[s] += c;
            // drawn signals have positive probability, so their posterior exists
            let zhat = mean_of[s].ok_or_else(|| {
                Error::NumericalFailure(format!("signal {s} drawn but has no posterior"))
            })?;
            let w = c as f64;
            corr += zhat * zhat.transpose() * (w / total);
            obj.add((zhat.transpose() * &v * zhat)[(0, 0)], w);
            let (cs, cr) = pointwise_costs(variant, m, &pmf.states()[j], zhat);
            snd.add(cs, w);
            rcv.add(cr, w);
        }
    }
    Ok(SimulationReport {
        samples,
        seed,
        posterior_correlation: corr,
        objective: obj.mean(total),
        objective_se: obj.se(total),
        sender_cost: snd.mean(total),
        sender_cost_se: snd.se(total),
        receiver_cost: rcv.mean(total),
        receiver_cost_se: rcv.se(total),
        signal_counts,
    })
}

/// Weighted sample of values, reduced with a two-pass variance.
#[derive(Default)]
struct Moments {
    entries: Vec<(f64, f64)>,
}

impl Moments {
    fn add(&mut self, value: f64, weight: f64) {
        self.entries.push((value, weight));
    }

    fn mean(&self, n: f64) -> f64 {
        self.entries.iter().map(|(v, w)| v * w).sum::<f64>() / n
    }

    fn se(&self, n: f64) -> f64 {
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.mean(n);
        let ss: f64 = self.entries.iter().map(|(v, w)| w * (v - mean).powi(2)).sum();
        (ss / (n - 1.0) / n).sqrt()
    }
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

// the last nonzero bucket absorbs any round-off shortfall of the cdf
fn draw(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().expect("nonempty cdf");
    let target = u * total;
    let idx = cdf.partition_point(|&c| c <= target);
    if idx < cdf.len() {
        return idx;
    }
    let mut last = cdf.len() - 1;
    while last > 0 && cdf[last] == cdf[last - 1] {
        last -= 1;
    }
    last
}
