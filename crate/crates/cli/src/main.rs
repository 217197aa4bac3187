//! `cpsignal`: solve finite signaling games from the command line.
//!
//! Exit codes: 0 success, 1 input error, 2 iteration limit reached.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cpsignal", version, about = "Optimal hierarchical signaling via completely positive programming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Polyhedral,
    Dnn,
    /// Polyhedral and DNN side by side.
    Both,
    /// Exact pair pricing; scalar x and y only.
    Planar,
}

impl Method {
    fn polyhedral(self) -> bool {
        matches!(self, Method::Polyhedral | Method::Both)
    }

    fn dnn(self) -> bool {
        matches!(self, Method::Dnn | Method::Both)
    }

    fn planar(self) -> bool {
        self == Method::Planar
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pairs {
    /// Vertex pairs sharing a simplex.
    Common,
    /// All vertex pairs in the pool.
    All,
}

#[derive(Debug, clap::Args)]
pub struct SolverArgs {
    /// Defaults to polyhedral for `solve` and planar for `quantize-solve`.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Stopping gap of the polyhedral bounds.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Iteration cap (polyhedral refinements, DNN splitting steps or pricing rounds).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Residual tolerance of the DNN splitting.
    #[arg(long, default_value_t = 1e-7)]
    dnn_tol: f64,
    /// Outer-cone vertex pairs.
    #[arg(long, value_enum, default_value = "common")]
    pairs: Pairs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file and write a strategy report.
    Solve {
        problem: PathBuf,
        /// Override the file's cost variant (deception | privacy).
        #[arg(long)]
        variant: Option<String>,
        /// full-prior, fixed-mean (prior mean) or fixed-mean:v1,v2,...
        #[arg(long)]
        mode: Option<String>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Strategy report (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Bounds trace (CSV).
        #[arg(long)]
        bounds: Option<PathBuf>,
        /// Final partition (JSON).
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Print the cost tables of the three bundled scenarios.
    Tables {
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Monte Carlo check of a strategy report.
    Simulate {
        problem: PathBuf,
        report: PathBuf,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulation summary (JSON); printed to stdout regardless.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantize a sample file onto a grid, solve, and certify the result.
    QuantizeSolve {
        /// Binary sample file, or CSV when the name ends in .csv.
        samples: PathBuf,
        /// Bins per dimension.
        #[arg(long)]
        grid: usize,
        /// lo,hi for every axis, or lo1,hi1,lo2,hi2,... per axis.
        #[arg(long, allow_hyphen_values = true)]
        r#box: String,
        #[arg(long, default_value = "deception")]
        variant: String,
        #[command(flatten)]
        solver: SolverArgs,
        /// Certification report (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write seeded samples drawn uniformly from a box.
    GenUniform {
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Point dimension (2m).
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, allow_hyphen_values = true)]
        r#box: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve {
            problem,
            variant,
            mode,
            solver,
            out,
            bounds,
            partition,
        } => commands::solve(&problem, variant.as_deref(), mode.as_deref(), &solver, out.as_deref(), bounds.as_deref(), partition.as_deref()),
        Command::Tables { tol, max_iters } => commands::tables(tol, max_iters),
        Command::Simulate {
            problem,
            report,
            variant,
            samples,
            seed,
            out,
        } => commands::simulate(&problem, &report, variant.as_deref(), samples, seed, out.as_deref()),
        Command::QuantizeSolve {
            samples,
            grid,
            r#box,
            variant,
            solver,
            out,
        } => commands::quantize_solve(&samples, grid, &r#box, &variant, &solver, out.as_deref()),
        Command::GenUniform {
            samples,
            seed,
            dim,
            r#box,
            out,
        } => commands::gen_uniform(samples, seed, dim, &r#box, &out),
    };
    match result {
        Ok(commands::Outcome::Done) => ExitCode::SUCCESS,
        Ok(commands::Outcome::IterationLimit) => {
            eprintln!("error: iteration limit reached before the tolerance was met");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
