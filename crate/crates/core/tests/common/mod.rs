#![allow(dead_code)]

use cpsignal::model::build_problem;
use cpsignal::{ConstraintMode, CostVariant, JointPmf, SignalingProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use nalgebra::{DMatrix, DVector};
use cpsignal::strategy::SignalingStrategy;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Full-support prior with no entry below `floor / n`.
pub fn random_prior(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| floor + rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// Scalar game with `n` distinct states on a coarse lattice in `[-2, 2]^2`.
pub fn random_pmf(rng: &mut ChaCha8Rng, n: usize) -> JointPmf {
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(n);
    while states.len() < n {
        let s = vec![
            (rng.random_range(-8..=8) as f64) / 4.0,
            (rng.random_range(-8..=8) as f64) / 4.0,
        ];
        if !states.contains(&s) {
            states.push(s);
        }
    }
    let probs = random_prior(rng, n, 0.2);
    JointPmf::from_rows(1, &states, &probs).unwrap()
}

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> SignalingProblem {
    let variant = if rng.random::<bool>() { CostVariant::Deception } else { CostVariant::Privacy };
    build_problem(random_pmf(rng, n), variant, ConstraintMode::FullPrior).unwrap()
}

/// The 50 random instances shared by the bound and duality tests.
pub fn random_instances() -> Vec<SignalingProblem> {
    let mut r = rng(20_240_501);
    (0..50)
        .map(|_| {
            let n = r.random_range(2..=6);
            random_problem(&mut r, n)
        })
        .collect()
}

/// Random column-stochastic kernel with `k` signals over `n` states.
pub fn random_strategy(rng: &mut ChaCha8Rng, k: usize, n: usize) -> SignalingStrategy {
    let mut pi = DMatrix::from_fn(k, n, |_, _| rng.random::<f64>());
    for j in 0..n {
        pi[(rng.random_range(0..k), j)] += 1e-3;
        let s = pi.column(j).sum();
        pi.column_mut(j).unscale_mut(s);
    }
    SignalingStrategy::new(pi).unwrap()
}

pub struct Instance {
    pub c: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

// feasible through x0 >= 0, bounded through c = A'w + s with s >= 0
pub fn random_lp(r: &mut ChaCha8Rng) -> Instance {
    let m = r.random_range(1..=4);
    let n = r.random_range(m..=8);
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let x0: Vec<f64> = (0..n).map(|_| if r.random::<f64>() < 0.3 { 0.0 } else { r.random_range(0.0..2.0) }).collect();
    let b = rows.iter().map(|row| row.iter().zip(&x0).map(|(a, x)| a * x).sum()).collect();
    let w: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..1.0)).collect();
    let c = (0..n)
        .map(|j| (0..m).map(|i| rows[i][j] * w[i]).sum::<f64>() + r.random_range(0.0..1.0))
        .collect();
    Instance { c, rows, b }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Minimum over all basic feasible solutions.
pub fn enumerate_bases(inst: &Instance) -> f64 {
    let m = inst.rows.len();
    let n = inst.c.len();
    let a = DMatrix::from_fn(m, n, |i, j| inst.rows[i][j]);
    let b = DVector::from_column_slice(&inst.b);
    let mut best = f64::INFINITY;
    for cols in subsets(n, m) {
        let basis = a.select_columns(&cols);
        if basis.determinant().abs() < 1e-10 {
            continue;
        }
        let Some(xb) = basis.lu().solve(&b) else { continue };
        if xb.iter().all(|&v| v >= -1e-10) {
            let obj: f64 = cols.iter().zip(xb.iter()).map(|(&j, v)| inst.c[j] * v).sum();
            best = best.min(obj);
        }
    }
    best
}

