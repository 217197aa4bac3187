//! Problem files, strategy reports and number formatting.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_problem, ConstraintMode, CostVariant, JointPmf, SignalingProblem, MIN_PROB};
use crate::strategy::{extract_strategy, merge_identical_posteriors, posteriors, realized_costs, SignalingStrategy};

/// Formats like C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    fmt_g(x, 12)
}

pub fn fmt_g(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = precision.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", strip_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds to 12 significant digits, the precision used in every report.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig(x).parse().unwrap_or(x)
    } else {
        x
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_prior: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_mean: Option<Vec<f64>>,
}

/// On-disk problem description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemFile {
    pub m: usize,
    pub states: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    #[serde(default = "default_variant")]
    pub variant: CostVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeSpec>,
}

fn default_variant() -> CostVariant {
    CostVariant::Deception
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn pmf(&self) -> Result<JointPmf> {
        if self.states.len() != self.probs.len() {
            return Err(Error::Parse(format!(
                "\"states\" has {} entries but \"probs\" has {}",
                self.states.len(),
                self.probs.len()
            )));
        }
        if let Some(i) = self.states.iter().position(|s| s.len() != 2 * self.m) {
            return Err(Error::Parse(format!(
                "\"states\"[{i}] has length {}, expected 2m = {}",
                self.states[i].len(),
                2 * self.m
            )));
        }
        JointPmf::from_rows(self.m, &self.states, &self.probs)
    }

    pub fn constraint_mode(&self) -> Result<ConstraintMode> {
        match &self.mode {
            None => Ok(ConstraintMode::FullPrior),
            Some(ModeSpec { full_prior, fixed_mean: None }) => {
                if *full_prior == Some(false) {
                    return Err(Error::Parse("\"mode\": full_prior is false and no fixed_mean given".into()));
                }
                Ok(ConstraintMode::FullPrior)
            }
            Some(ModeSpec { full_prior: Some(true), fixed_mean: Some(_) }) => {
                Err(Error::Parse("\"mode\" sets both full_prior and fixed_mean".into()))
            }
            Some(ModeSpec { fixed_mean: Some(mu), .. }) => Ok(ConstraintMode::FixedMean(DVector::from_vec(mu.clone()))),
        }
    }

    /// Builds the problem, optionally overriding the file's variant and mode.
    pub fn problem(&self, variant: Option<CostVariant>, mode: Option<ConstraintMode>) -> Result<SignalingProblem> {
        let mode = match mode {
            Some(m) => m,
            None => self.constraint_mode()?,
        };
        build_problem(self.pmf()?, variant.unwrap_or(self.variant), mode)
    }

    pub fn from_pmf(pmf: &JointPmf, variant: CostVariant) -> Self {
        Self {
            m: pmf.m(),
            states: pmf.states().iter().map(|s| s.iter().copied().collect()).collect(),
            probs: pmf.probs().to_vec(),
            variant,
            mode: Some(ModeSpec {
                full_prior: Some(true),
                fixed_mean: None,
            }),
        }
    }
}

/// Strategy report written by `solve` and read back by `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StrategyReport {
    pub signals: usize,
    pub pi: Vec<Vec<f64>>,
    pub posterior_means: Vec<Vec<f64>>,
    pub objective: f64,
    pub sender_cost: f64,
    pub receiver_cost: f64,
    /// Set when more signals are used than there are states.
    #[serde(default)]
    pub signals_exceed_states: bool,
    /// Prior implied by the solution when only the mean was pinned. States
    /// with zero mass there are assigned to the first signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induced_prior: Option<Vec<f64>>,
}

impl StrategyReport {
    /// Report for `strategy` on `problem`'s distribution. `objective` is the
    /// cone objective `tr(Vbar Xi)` to record.
    pub fn build(strategy: &SignalingStrategy, problem: &SignalingProblem, objective: f64) -> Result<Self> {
        let pmf = problem.pmf();
        let sys = posteriors(strategy, pmf)?;
        let costs = realized_costs(strategy, pmf, problem.variant())?;
        Ok(Self {
            signals: strategy.signal_count(),
            pi: round_rows(strategy.to_rows()),
            posterior_means: round_rows(sys.means.iter().map(|m| m.iter().copied().collect()).collect()),
            objective: round_sig(objective),
            sender_cost: round_sig(costs.sender),
            receiver_cost: round_sig(costs.receiver),
            signals_exceed_states: strategy.signal_count() > problem.n(),
            induced_prior: None,
        })
    }

    /// Report for the factorization `Xi = sum_i b_i b_i'` returned by the solver.
    ///
    /// Signals with identical posteriors are merged. Under a fixed-mean
    /// constraint the strategy is taken relative to the prior `Xi 1` the
    /// solution induces.
    pub fn from_factors(factors: &[DVector<f64>], problem: &SignalingProblem, objective: f64) -> Result<Self> {
        let n = problem.n();
        match problem.mode() {
            ConstraintMode::FullPrior => {
                let st = extract_strategy(factors, problem.prior())?;
                let st = merge_identical_posteriors(&st, problem.pmf())?;
                Self::build(&st, problem, objective)
            }
            ConstraintMode::FixedMean(_) => {
                let mut q = DVector::zeros(n);
                for b in factors {
                    q += b * b.sum();
                }
                let support: Vec<usize> = (0..n).filter(|&j| q[j] > MIN_PROB).collect();
                let total: f64 = support.iter().map(|&j| q[j]).sum();
                let pmf = JointPmf::new(
                    problem.m(),
                    support.iter().map(|&j| problem.pmf().states()[j].clone()).collect(),
                    support.iter().map(|&j| q[j] / total).collect(),
                )?;
                let sub_prior = pmf.prior();
                let sub_factors: Vec<DVector<f64>> = factors
                    .iter()
                    .map(|b| DVector::from_iterator(support.len(), support.iter().map(|&j| b[j] / total.sqrt())))
                    .collect();
                let st = extract_strategy(&sub_factors, &sub_prior)?;
                let sub_problem = build_problem(pmf, problem.variant(), ConstraintMode::FullPrior)?;
                let st = merge_identical_posteriors(&st, sub_problem.pmf())?;
                let mut report = Self::build(&st, &sub_problem, objective)?;
                let k = st.signal_count();
                report.pi = (0..k)
                    .map(|s| {
                        let mut row = vec![if s == 0 { 1.0 } else { 0.0 }; n];
                        for (c, &j) in support.iter().enumerate() {
                            row[j] = round_sig(st.pi()[(s, c)]);
                        }
                        row
                    })
                    .collect();
                report.signals_exceed_states = k > n;
                report.induced_prior = Some((0..n).map(|j| round_sig(q[j].max(0.0))).collect());
                Ok(report)
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The kernel, renormalized per state to undo the 12-digit rounding.
    pub fn strategy(&self) -> Result<SignalingStrategy> {
        if self.pi.len() != self.signals {
            return Err(Error::Parse(format!(
                "\"signals\" is {} but \"pi\" has {} rows",
                self.signals,
                self.pi.len()
            )));
        }
        let n = self.pi.first().map_or(0, Vec::len);
        let mut rows = self.pi.clone();
        for j in 0..n {
            let s: f64 = rows.iter().map(|r| r.get(j).copied().unwrap_or(0.0)).sum();
            if s > 0.0 && (s - 1.0).abs() < 1e-9 {
                for r in rows.iter_mut().filter(|r| r.len() == n) {
                    r[j] /= s;
                }
            }
        }
        SignalingStrategy::from_rows(&rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn round_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter().map(|r| r.into_iter().map(round_sig).collect()).collect()
}
