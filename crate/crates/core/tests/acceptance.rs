//! Acceptance criteria. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cpsignal::dnn::{solve_dnn, DnnOptions};
use cpsignal::lp::{solve_lp, LpProblem, LpStatus};
use cpsignal::model::{build_problem, full_signaling_value, null_signaling_value};
use cpsignal::planar::{solve_planar, PlanarOptions};
use cpsignal::quantize::{certify, quantize, GridQuantizer, SampleSet};
use cpsignal::solver::{dual_bound, solve, CpSolution, SolveOptions};
use cpsignal::strategy::{
    decompose_strategy, extract_strategy, induced_cp_matrix, merge_identical_posteriors, simulate,
};
use cpsignal::{scenarios, ConstraintMode, CostVariant, JointPmf, SignalingProblem};
use nalgebra::DVector;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{what}: got {got:.6}, expected {want} within {tol:e}"))
}

struct Table {
    null: [f64; 3],
    full: [f64; 3],
    optimal: [f64; 3],
    sdp: [f64; 3],
}

fn check_table(variant: CostVariant, want: &Table) -> Outcome {
    let mut failures = Vec::new();
    let mut record = |r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(e);
        }
    };
    let start = Instant::now();
    for (i, index) in (1..=3).enumerate() {
        let problem = scenarios::problem(index, variant).map_err(|e| e.to_string())?;
        record(close(null_signaling_value(&problem), want.null[i], 1e-9, &format!("scenario {index} null")));
        record(close(full_signaling_value(&problem), want.full[i], 1e-9, &format!("scenario {index} full")));
        let poly = solve(&problem, &SolveOptions::default()).map_err(|e| e.to_string())?;
        let dnn = solve_dnn(&problem, &DnnOptions::default()).map_err(|e| e.to_string())?;
        let poly_tol = if index == 3 { 1e-2 } else { 1e-3 };
        record(close(poly.value, want.optimal[i], poly_tol, &format!("scenario {index} optimal")));
        record(close(dnn.value, want.sdp[i], 1e-3, &format!("scenario {index} dnn")));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(600) {
        failures.push(format!("took {elapsed:.1?}"));
    }
    if failures.is_empty() {
        Ok(format!("all 12 entries within tolerance in {elapsed:.2?}"))
    } else {
        Err(failures.join("; "))
    }
}

fn table_deception() -> Outcome {
    check_table(
        CostVariant::Deception,
        &Table {
            null: [0.96, 0.16, 0.0],
            full: [1.8, 0.6, 0.3],
            optimal: [0.96, -0.4715, -0.4283],
            sdp: [0.96, -0.4715, -0.4283],
        },
    )
}

fn table_privacy() -> Outcome {
    check_table(
        CostVariant::Privacy,
        &Table {
            null: [0.84, -0.16, 0.09],
            full: [0.0, 0.0, 0.1],
            optimal: [0.0, -0.9583, -0.4707],
            sdp: [0.0, -0.9583, -0.4707],
        },
    )
}

fn scenario1_analytic() -> Outcome {
    let c_hat = |mu: f64| 4.0 * mu * mu - 8.0 * mu + 3.0;
    close(c_hat(0.3), 0.96, 1e-12, "c(0.3)")?;
    let problem = scenarios::problem(1, CostVariant::Deception).map_err(|e| e.to_string())?;
    // the objective along posteriors (mu, 1 - mu) is the same parabola
    for mu in [0.0, 0.3, 0.55, 1.0] {
        let q = DVector::from_column_slice(&[mu, 1.0 - mu]);
        close((q.transpose() * problem.vbar() * &q)[(0, 0)], c_hat(mu), 1e-12, "parabola")?;
    }
    let sol = solve(&problem, &SolveOptions::default()).map_err(|e| e.to_string())?;
    close(sol.value, null_signaling_value(&problem), 1e-3, "optimum vs null signaling")?;
    Ok(format!("c(0.3) = 0.96, solver optimum {:.6}", sol.value))
}

fn strategy_round_trip() -> Outcome {
    let start = Instant::now();
    let mut r = common::rng(4);
    for case in 0..1000 {
        let n = r.random_range(1..=8);
        let k = r.random_range(1..=2 * n);
        let states: Vec<Vec<f64>> = (0..n).map(|j| vec![j as f64, r.random_range(-1.0..1.0)]).collect();
        let pmf = JointPmf::from_rows(1, &states, &common::random_prior(&mut r, n, 0.05)).map_err(|e| e.to_string())?;
        let strategy = common::random_strategy(&mut r, k, n);
        let xi = induced_cp_matrix(&strategy, &pmf).map_err(|e| e.to_string())?;
        ensure(xi.min() >= 0.0, || format!("case {case}: negative entry"))?;
        ensure((&xi - xi.transpose()).amax() <= 1e-10, || format!("case {case}: asymmetric"))?;
        ensure((xi.column_sum() - pmf.prior()).amax() <= 1e-10, || format!("case {case}: marginal"))?;
        let cols = decompose_strategy(&strategy, &pmf).map_err(|e| e.to_string())?;
        let back = extract_strategy(&cols, &pmf.prior()).map_err(|e| e.to_string())?;
        let xi_back = induced_cp_matrix(&back, &pmf).map_err(|e| e.to_string())?;
        ensure((xi_back - &xi).amax() <= 1e-10, || format!("case {case}: round trip"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!("1000 strategies in {elapsed:.2?}"))
}

fn all_instances() -> Result<Vec<SignalingProblem>, String> {
    let mut out = Vec::new();
    for index in 1..=3 {
        for variant in [CostVariant::Deception, CostVariant::Privacy] {
            out.push(scenarios::problem(index, variant).map_err(|e| e.to_string())?);
        }
    }
    out.extend(common::random_instances());
    Ok(out)
}

fn solve_all(instances: &[SignalingProblem]) -> Result<Vec<CpSolution>, String> {
    instances
        .iter()
        .map(|p| solve(p, &SolveOptions::default()).map_err(|e| e.to_string()))
        .collect()
}

fn bound_sandwich() -> Outcome {
    let instances = all_instances()?;
    let solutions = solve_all(&instances)?;
    let mut rows = 0;
    for (i, sol) in solutions.iter().enumerate() {
        ensure(sol.converged, || format!("instance {i} did not converge"))?;
        for w in sol.trace.rows.windows(2) {
            ensure(w[1].lower >= w[0].lower - 1e-9, || format!("instance {i}: lower bound decreased"))?;
            ensure(w[1].upper <= w[0].upper + 1e-9, || format!("instance {i}: upper bound increased"))?;
        }
        for row in &sol.trace.rows {
            ensure(row.lower <= row.upper + 1e-9, || format!("instance {i}: crossed bounds"))?;
            ensure(row.lower - 1e-9 <= sol.value && sol.value <= row.upper + 1e-9, || {
                format!("instance {i}: value outside iteration {} bounds", row.iter)
            })?;
            rows += 1;
        }
    }
    Ok(format!("{} instances, {rows} trace rows", instances.len()))
}

fn duality() -> Outcome {
    let mut worst_gap: f64 = 0.0;
    for index in [1, 2] {
        for variant in [CostVariant::Deception, CostVariant::Privacy] {
            let problem = scenarios::problem(index, variant).map_err(|e| e.to_string())?;
            let sol = solve(&problem, &SolveOptions::default()).map_err(|e| e.to_string())?;
            let gap = (dual_bound(&problem, &sol.outer) - sol.value).abs();
            ensure(gap <= 5e-3, || format!("scenario {index} {variant:?}: |p'y - value| = {gap:e}"))?;
            worst_gap = worst_gap.max(gap);
        }
    }
    let instances = common::random_instances();
    for (i, (p, sol)) in instances.iter().zip(solve_all(&instances)?).enumerate() {
        ensure(dual_bound(p, &sol.outer) <= full_signaling_value(p) + 1e-8, || {
            format!("random instance {i}: dual bound above full signaling")
        })?;
    }
    Ok(format!("largest scenario duality gap {worst_gap:.2e}; weak duality on 50 random instances"))
}

fn dnn_relaxation() -> Outcome {
    let instances = all_instances()?;
    let solutions = solve_all(&instances)?;
    let mut exact_checks = 0;
    for (i, (p, sol)) in instances.iter().zip(&solutions).enumerate() {
        let dnn = solve_dnn(p, &DnnOptions::default()).map_err(|e| e.to_string())?;
        ensure(dnn.value <= sol.value + 1e-6, || format!("instance {i}: dnn {} above {}", dnn.value, sol.value))?;
        if p.n() <= 4 {
            ensure((dnn.value - sol.value).abs() <= 5e-3, || {
                format!("instance {i}: |dnn - polyhedral| = {:e}", (dnn.value - sol.value).abs())
            })?;
            exact_checks += 1;
        }
    }
    Ok(format!("{} instances, {exact_checks} with n <= 4", instances.len()))
}

fn lp_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = common::rng(8);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let inst = common::random_lp(&mut r);
        let lp = LpProblem::from_rows(inst.c.clone(), &inst.rows, inst.b.clone()).map_err(|e| e.to_string())?;
        let sol = solve_lp(&lp).map_err(|e| e.to_string())?;
        ensure(sol.status == LpStatus::Optimal, || format!("case {case}: {:?}", sol.status))?;
        let diff = (sol.objective - common::enumerate_bases(&inst)).abs();
        ensure(diff <= 1e-8, || format!("case {case}: off by {diff:e}"))?;
        worst = worst.max(diff);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!("200 LPs, largest deviation {worst:.1e}, {elapsed:.2?}"))
}

fn quantization() -> Outcome {
    let start = Instant::now();
    let mut r = common::rng(9);
    let data: Vec<f64> = (0..2_000_000).map(|_| r.random_range(-1.0..1.0)).collect();
    let samples = SampleSet::new(2, data).map_err(|e| e.to_string())?;
    let mut results = Vec::new();
    for bins in [4usize, 8, 16] {
        let grid = GridQuantizer::uniform(2, -1.0, 1.0, bins).map_err(|e| e.to_string())?;
        let (pmf, budget) = quantize(&samples, &grid, CostVariant::Deception).map_err(|e| e.to_string())?;
        let identity = (2.0 * budget.zq_norm + budget.e_norm) * budget.v_spectral * budget.e_norm;
        ensure(budget.epsilon == identity, || format!("grid {bins}: epsilon {} != {identity}", budget.epsilon))?;
        let problem = build_problem(pmf, CostVariant::Deception, ConstraintMode::FullPrior).map_err(|e| e.to_string())?;
        let sol = solve_planar(&problem, &PlanarOptions::default()).map_err(|e| e.to_string())?;
        ensure(sol.converged, || format!("grid {bins}: not converged"))?;
        results.push((bins, sol.value, certify(sol.value, &budget)));
    }
    for w in results.windows(2) {
        ensure(w[1].2.epsilon <= w[0].2.epsilon, || format!("epsilon grew from grid {} to {}", w[0].0, w[1].0))?;
    }
    for (i, (fine_bins, fine, _)) in results.iter().enumerate() {
        for (coarse_bins, _, interval) in &results[..i] {
            ensure(interval.contains(*fine, 0.0), || {
                format!("grid {fine_bins} value {fine} outside grid {coarse_bins} interval [{}, {}]", interval.lower, interval.upper)
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:.1?}"))?;
    let summary: Vec<String> = results
        .iter()
        .map(|(b, v, c)| format!("L={b}: {v:.5} eps {:.4}", c.epsilon))
        .collect();
    Ok(format!("{} in {elapsed:.1?}", summary.join(", ")))
}

fn monte_carlo() -> Outcome {
    let problem = scenarios::problem(2, CostVariant::Deception).map_err(|e| e.to_string())?;
    let sol = solve(&problem, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let strategy = extract_strategy(&sol.factor_columns, problem.prior()).map_err(|e| e.to_string())?;
    let strategy = merge_identical_posteriors(&strategy, problem.pmf()).map_err(|e| e.to_string())?;
    let run = || simulate(&strategy, problem.pmf(), CostVariant::Deception, 1_000_000, 2024).map_err(|e| e.to_string());
    let a = run()?;
    let b = run()?;
    ensure(a == b, || "two runs with the same seed differ".into())?;
    let z = (a.objective - -0.4715).abs() / a.objective_se;
    ensure(z <= 4.0, || format!("objective {} is {z:.2} standard errors from -0.4715", a.objective))?;
    Ok(format!("objective {:.5} (se {:.1e}, {z:.2} se from -0.4715), reproducible", a.objective, a.objective_se))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("deception table", table_deception),
        ("privacy table", table_privacy),
        ("scenario I analytic cross-check", scenario1_analytic),
        ("strategy round trip", strategy_round_trip),
        ("bound sandwich and monotonicity", bound_sandwich),
        ("weak and strong duality", duality),
        ("DNN lower bound and small-n exactness", dnn_relaxation),
        ("LP basis-enumeration oracle", lp_oracle),
        ("quantization certification", quantization),
        ("Monte Carlo consistency", monte_carlo),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
