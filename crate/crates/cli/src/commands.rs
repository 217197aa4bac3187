use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use cpsignal::dnn::{solve_dnn, DnnOptions, DnnSolution};
use cpsignal::io::{fmt_sig, round_sig, ProblemFile, StrategyReport};
use cpsignal::planar::{solve_planar, PlanarOptions, PlanarSolution};
use cpsignal::model::{build_problem, full_signaling_value, null_signaling_value, MIN_PROB};
use cpsignal::quantize::{certify, quantize, GridQuantizer, SampleSet};
use cpsignal::solver::{self, CpSolution, PairScope, SolveOptions};
use cpsignal::strategy::simulate as run_simulation;
use cpsignal::{scenarios, ConstraintMode, CostVariant, JointPmf, SignalingProblem};

use crate::{Method, Pairs, SolverArgs};

pub enum Outcome {
    Done,
    IterationLimit,
}

fn parse_variant(s: &str) -> Result<CostVariant> {
    Ok(s.parse::<CostVariant>()?)
}

fn parse_mode(s: &str, problem_file: &ProblemFile) -> Result<ConstraintMode> {
    match s {
        "full-prior" => Ok(ConstraintMode::FullPrior),
        "fixed-mean" => Ok(ConstraintMode::FixedMean(problem_file.pmf()?.mean())),
        other => match other.strip_prefix("fixed-mean:") {
            Some(list) => Ok(ConstraintMode::FixedMean(DVector::from_vec(parse_floats(list)?))),
            None => bail!("--mode must be full-prior, fixed-mean or fixed-mean:v1,v2,..., got {other:?}"),
        },
    }
}

fn parse_floats(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number {t:?}")))
        .collect()
}

fn solve_options(args: &SolverArgs) -> Result<SolveOptions> {
    if !(args.tol > 0.0) {
        bail!("--tol must be positive");
    }
    if args.max_iters == Some(0) {
        bail!("--max-iters must be at least 1");
    }
    let defaults = SolveOptions::default();
    Ok(SolveOptions {
        tol: args.tol,
        max_iters: args.max_iters.unwrap_or(defaults.max_iters),
        pair_scope: match args.pairs {
            Pairs::Common => PairScope::CommonSimplex,
            Pairs::All => PairScope::AllPairs,
        },
        ..defaults
    })
}

fn dnn_options(args: &SolverArgs) -> Result<DnnOptions> {
    if !(args.dnn_tol > 0.0) {
        bail!("--dnn-tol must be positive");
    }
    let defaults = DnnOptions::default();
    Ok(DnnOptions {
        tol: args.dnn_tol,
        max_iters: args.max_iters.unwrap_or(defaults.max_iters),
        ..defaults
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn dnn_residual(sol: &DnnSolution) -> f64 {
    sol.residuals.affine.max(sol.residuals.nonneg).max(sol.residuals.psd)
}

#[derive(Serialize)]
struct DnnSummary {
    method: &'static str,
    value: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn planar_options(args: &SolverArgs) -> PlanarOptions {
    let defaults = PlanarOptions::default();
    PlanarOptions {
        max_rounds: args.max_iters.unwrap_or(defaults.max_rounds),
        ..defaults
    }
}

struct Solved {
    poly: Option<CpSolution>,
    dnn: Option<DnnSolution>,
    planar: Option<PlanarSolution>,
}

fn run_methods(problem: &SignalingProblem, args: &SolverArgs, method: Method) -> Result<Solved> {
    let poly_opts = solve_options(args)?;
    let dnn_opts = dnn_options(args)?;
    let (poly, dnn) = rayon::join(
        || method.polyhedral().then(|| solver::solve(problem, &poly_opts)).transpose(),
        || method.dnn().then(|| solve_dnn(problem, &dnn_opts)).transpose(),
    );
    let planar = method.planar().then(|| solve_planar(problem, &planar_options(args))).transpose();
    Ok(Solved {
        poly: poly.context("polyhedral solve failed")?,
        dnn: dnn.context("DNN solve failed")?,
        planar: planar.context("planar solve failed")?,
    })
}

impl Solved {
    fn print_summary(&self) {
        if let Some(s) = &self.poly {
            println!("value={} gap={} method=polyhedral", fmt_sig(s.value), fmt_sig(s.gap.max(0.0)));
        }
        if let Some(d) = &self.dnn {
            println!("value={} gap={} method=dnn", fmt_sig(d.value), fmt_sig(dnn_residual(d)));
        }
        if let Some(s) = &self.planar {
            println!("value={} gap={} method=planar", fmt_sig(s.value), fmt_sig(s.gap.max(0.0)));
        }
    }

    /// Best attainable value with its bound gap and factor columns.
    fn primal(&self) -> Option<(&'static str, f64, f64, &[DVector<f64>])> {
        if let Some(s) = &self.poly {
            Some(("polyhedral", s.value, s.gap.max(0.0), &s.factor_columns))
        } else {
            self.planar
                .as_ref()
                .map(|s| ("planar", s.value, s.gap.max(0.0), s.factor_columns.as_slice()))
        }
    }

    fn outcome(&self) -> Outcome {
        let poly_ok = self.poly.as_ref().is_none_or(|s| s.converged);
        let dnn_ok = self.dnn.as_ref().is_none_or(|d| d.converged);
        let planar_ok = self.planar.as_ref().is_none_or(|s| s.converged);
        if poly_ok && dnn_ok && planar_ok {
            Outcome::Done
        } else {
            Outcome::IterationLimit
        }
    }
}

pub fn solve(
    path: &Path,
    variant: Option<&str>,
    mode: Option<&str>,
    args: &SolverArgs,
    out: Option<&Path>,
    bounds: Option<&Path>,
    partition: Option<&Path>,
) -> Result<Outcome> {
    let file = ProblemFile::load(path).with_context(|| format!("cannot load problem {}", path.display()))?;
    let variant = variant.map(parse_variant).transpose()?;
    let mode = mode.map(|m| parse_mode(m, &file)).transpose()?;
    let problem = file.problem(variant, mode)?;
    let method = args.method.unwrap_or(Method::Polyhedral);
    if partition.is_some() && !method.polyhedral() {
        bail!("--partition needs the polyhedral method");
    }
    let solved = run_methods(&problem, args, method)?;
    solved.print_summary();

    if let Some((_, value, _, factors)) = solved.primal() {
        if let Some(p) = out {
            let report = StrategyReport::from_factors(factors, &problem, value)?;
            write(p, &report.to_json())?;
        }
        let trace = match (&solved.poly, &solved.planar) {
            (Some(s), _) => &s.trace,
            (None, Some(s)) => &s.trace,
            (None, None) => unreachable!("a primal method ran"),
        };
        if let Some(p) = bounds {
            write(p, &trace.to_csv())?;
        }
        if let (Some(p), Some(sol)) = (partition, &solved.poly) {
            write(p, &(serde_json::to_string_pretty(&sol.partition.to_json())? + "\n"))?;
        }
    } else if let (Some(d), Some(p)) = (&solved.dnn, out) {
        let summary = DnnSummary {
            method: "dnn",
            value: round_sig(d.value),
            residual: round_sig(dnn_residual(d)),
            iterations: d.iterations,
            converged: d.converged,
        };
        write(p, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    }
    Ok(solved.outcome())
}

pub fn tables(tol: f64, max_iters: Option<usize>) -> Result<Outcome> {
    let args = SolverArgs {
        method: Some(Method::Both),
        tol,
        max_iters,
        dnn_tol: DnnOptions::default().tol,
        pairs: Pairs::Common,
    };
    let mut outcome = Outcome::Done;
    for (variant, title) in [
        (CostVariant::Deception, "Deceptive signaling game"),
        (CostVariant::Privacy, "Persuasive privacy game"),
    ] {
        let mut rows: [Vec<f64>; 4] = Default::default();
        for index in 1..=3 {
            let problem = scenarios::problem(index, variant)?;
            let solved = run_methods(&problem, &args, Method::Both)?;
            if let Outcome::IterationLimit = solved.outcome() {
                outcome = Outcome::IterationLimit;
            }
            rows[0].push(null_signaling_value(&problem));
            rows[1].push(full_signaling_value(&problem));
            rows[2].push(solved.poly.as_ref().expect("polyhedral ran").value);
            rows[3].push(solved.dnn.as_ref().expect("dnn ran").value);
        }
        println!("{title}");
        println!("{:<16}{:>10}{:>10}{:>10}", "Scenario", "I", "II", "III");
        for (label, row) in ["Null", "Full", "Optimal", "SDP-relaxation"].iter().zip(&rows) {
            print!("{label:<16}");
            for v in row {
                print!("{:>10}", fmt_fixed4(*v));
            }
            println!();
        }
        println!();
    }
    Ok(outcome)
}

fn fmt_fixed4(v: f64) -> String {
    let s = format!("{v:.4}");
    // avoid printing "-0.0000"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    samples: u64,
    seed: u64,
    objective: f64,
    objective_se: f64,
    sender_cost: f64,
    sender_cost_se: f64,
    receiver_cost: f64,
    receiver_cost_se: f64,
    posterior_correlation: Vec<Vec<f64>>,
    signal_counts: Vec<u64>,
}

pub fn simulate(
    problem_path: &Path,
    report_path: &Path,
    variant: Option<&str>,
    samples: u64,
    seed: u64,
    out: Option<&Path>,
) -> Result<Outcome> {
    if samples == 0 {
        bail!("--samples must be at least 1");
    }
    let file = ProblemFile::load(problem_path).with_context(|| format!("cannot load problem {}", problem_path.display()))?;
    let report = StrategyReport::load(report_path).with_context(|| format!("cannot load report {}", report_path.display()))?;
    let variant = match variant {
        Some(v) => parse_variant(v)?,
        None => file.variant,
    };
    let pmf = file.pmf()?;
    let strategy = report.strategy()?;
    if strategy.n() != pmf.n() {
        bail!("report covers {} states but the problem has {}", strategy.n(), pmf.n());
    }
    let (pmf, strategy) = match &report.induced_prior {
        None => (pmf, strategy),
        Some(q) => restrict_to_support(&pmf, &strategy, q)?,
    };
    let rep = run_simulation(&strategy, &pmf, variant, samples, seed)?;
    let summary = SimulationSummary {
        samples: rep.samples,
        seed: rep.seed,
        objective: round_sig(rep.objective),
        objective_se: round_sig(rep.objective_se),
        sender_cost: round_sig(rep.sender_cost),
        sender_cost_se: round_sig(rep.sender_cost_se),
        receiver_cost: round_sig(rep.receiver_cost),
        receiver_cost_se: round_sig(rep.receiver_cost_se),
        posterior_correlation: rep
            .posterior_correlation
            .row_iter()
            .map(|r| r.iter().map(|&v| round_sig(v)).collect())
            .collect(),
        signal_counts: rep.signal_counts,
    };
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    print!("{json}");
    if let Some(p) = out {
        write(p, &json)?;
    }
    Ok(Outcome::Done)
}

// a fixed-mean report is simulated under the prior its solution induces
fn restrict_to_support(
    pmf: &JointPmf,
    strategy: &cpsignal::strategy::SignalingStrategy,
    q: &[f64],
) -> Result<(JointPmf, cpsignal::strategy::SignalingStrategy)> {
    if q.len() != pmf.n() {
        bail!("\"induced_prior\" has {} entries, expected {}", q.len(), pmf.n());
    }
    let support: Vec<usize> = (0..q.len()).filter(|&j| q[j] > MIN_PROB).collect();
    let total: f64 = support.iter().map(|&j| q[j]).sum();
    let sub = JointPmf::new(
        pmf.m(),
        support.iter().map(|&j| pmf.states()[j].clone()).collect(),
        support.iter().map(|&j| q[j] / total).collect(),
    )?;
    let rows: Vec<Vec<f64>> = strategy
        .to_rows()
        .into_iter()
        .map(|r| support.iter().map(|&j| r[j]).collect())
        .collect();
    Ok((sub, cpsignal::strategy::SignalingStrategy::from_rows(&rows)?))
}

fn parse_box(spec: &str, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = parse_floats(spec).context("--box")?;
    if v.len() == 2 {
        Ok((vec![v[0]; dim], vec![v[1]; dim]))
    } else if v.len() == 2 * dim {
        Ok((v.iter().step_by(2).copied().collect(), v.iter().skip(1).step_by(2).copied().collect()))
    } else {
        bail!("--box needs 2 or {} numbers, got {}", 2 * dim, v.len())
    }
}

#[derive(Serialize)]
struct CertificationReport {
    method: &'static str,
    grid: usize,
    states: usize,
    samples: usize,
    value: f64,
    gap: f64,
    e_norm: f64,
    zq_norm: f64,
    v_spectral: f64,
    epsilon: f64,
    lower: f64,
    upper: f64,
}

pub fn quantize_solve(
    samples_path: &Path,
    grid: usize,
    box_spec: &str,
    variant: &str,
    args: &SolverArgs,
    out: Option<&Path>,
) -> Result<Outcome> {
    let method = args.method.unwrap_or(Method::Planar);
    if method == Method::Both {
        bail!("quantize-solve takes a single --method");
    }
    let variant = parse_variant(variant)?;
    let samples = SampleSet::load(samples_path).with_context(|| format!("cannot load samples {}", samples_path.display()))?;
    let (lower, upper) = parse_box(box_spec, samples.dim())?;
    let quantizer = GridQuantizer::new(lower, upper, vec![grid; samples.dim()])?;
    let (pmf, budget) = quantize(&samples, &quantizer, variant)?;
    let states = pmf.n();
    let problem = build_problem(pmf, variant, ConstraintMode::FullPrior)?;
    let solved = run_methods(&problem, args, method)?;
    let (method, value, gap) = match (solved.primal(), &solved.dnn) {
        (Some((name, value, gap, _)), _) => (name, value, gap),
        (None, Some(d)) => ("dnn", d.value, dnn_residual(d)),
        (None, None) => unreachable!("one method always runs"),
    };
    let interval = certify(value, &budget);
    println!(
        "value={} epsilon={} interval=[{}, {}] method={method}",
        fmt_sig(value),
        fmt_sig(budget.epsilon),
        fmt_sig(interval.lower),
        fmt_sig(interval.upper)
    );
    let report = CertificationReport {
        method,
        grid,
        states,
        samples: samples.count(),
        value: round_sig(value),
        gap: round_sig(gap),
        e_norm: budget.e_norm,
        zq_norm: budget.zq_norm,
        v_spectral: budget.v_spectral,
        epsilon: budget.epsilon,
        lower: interval.lower,
        upper: interval.upper,
    };
    if let Some(p) = out {
        write(p, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(solved.outcome())
}

pub fn gen_uniform(samples: u64, seed: u64, dim: usize, box_spec: &str, out: &Path) -> Result<Outcome> {
    if samples == 0 || dim == 0 {
        bail!("--samples and --dim must be positive");
    }
    let (lower, upper) = parse_box(box_spec, dim)?;
    if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
        bail!("--box needs lo < hi on every axis");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(samples as usize * dim);
    for _ in 0..samples {
        for d in 0..dim {
            data.push(rng.random_range(lower[d]..upper[d]));
        }
    }
    SampleSet::new(dim, data)?.save(out)?;
    Ok(Outcome::Done)
}
