//! `paysuade`: batch front end for the static and dynamic solvers.

mod commands;
mod fixtures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paysuade_core::Error;
use serde_json::json;

use output::{config_hash, OutDir, Summary};

#[derive(Debug, Parser)]
#[command(name = "paysuade", version, about = "Solve and audit persuasion-with-transfers contracts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Static optimum with transfers and the envelope table.
    StaticSolve,
    /// Value iteration over promised utility and beliefs.
    DynamicSolve,
    /// Structural diagnostics of the game.
    Analyze,
    /// Best stationary coupling of states and actions.
    ErgodicBound,
    /// Ride game frontier, tier schedule and simulated loyalty contract.
    Loyalty,
    /// Checks that paying grid points could defer payment to promises.
    VerifyBackloading,
    /// Simulates the solved policy.
    Playout,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::StaticSolve => "static-solve",
            Self::DynamicSolve => "dynamic-solve",
            Self::Analyze => "analyze",
            Self::ErgodicBound => "ergodic-bound",
            Self::Loyalty => "loyalty",
            Self::VerifyBackloading => "verify-backloading",
            Self::Playout => "playout",
        }
    }
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct Common {
    /// Game specification (JSON). Bundled fixtures are found by file name.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Lattice divisions per simplex edge.
    #[arg(long, global = true)]
    pub belief_grid: Option<usize>,
    /// Number of promise grid points.
    #[arg(long, global = true)]
    pub promise_grid: Option<usize>,
    /// Sup-norm stopping tolerance for value iteration (default 1e-8)
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Value iteration cap (default 10000)
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the discount factor.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Overrides the transfer cost.
    #[arg(long, global = true)]
    pub k: Option<f64>,
    /// Simulated periods.
    #[arg(long, global = true, default_value_t = 1000)]
    pub horizon: usize,
    /// Rides per period.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Sender's value of each accepted ride.
    #[arg(long, global = true, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    /// Prior probability that each ride is good.
    #[arg(long, global = true, value_delimiter = ',')]
    pub mu0: Option<Vec<f64>>,
}

#[derive(Debug)]
pub enum Failure {
    Parse(String),
    NoConvergence(String),
    Io(String),
    Solver(String),
}

impl Failure {
    fn status(&self) -> (&'static str, u8) {
        match self {
            Self::Parse(_) => ("parse_error", 2),
            Self::NoConvergence(_) => ("no_convergence", 3),
            Self::Io(_) | Self::Solver(_) => ("error", 1),
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Parse(m) | Self::NoConvergence(m) | Self::Io(m) | Self::Solver(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. } => Self::NoConvergence(e.to_string()),
            Error::Parse(_)
            | Error::InvalidGame(_)
            | Error::InvalidBelief(_)
            | Error::InvalidConfig(_)
            | Error::OutOfRange { .. }
            | Error::TooLarge(_) => Self::Parse(e.to_string()),
            _ => Self::Solver(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let input = cli.common.input.as_deref().map(fixtures::read_input);
    let input_value = match &input {
        Some(Ok(text)) => serde_json::from_str(text).unwrap_or(serde_json::Value::Null),
        _ => serde_json::Value::Null,
    };
    let config = json!({ "command": cli.command.name(), "input": input_value, "options": cli.common });
    let mut summary = Summary {
        command: cli.command.name().into(),
        config_hash: config_hash(&config),
        status: "ok".into(),
        headline: serde_json::Value::Null,
        checks: Vec::new(),
    };
    let out = match OutDir::create(&cli.common.out) {
        Ok(out) => out,
        Err(f) => {
            eprintln!("error: {}", f.message());
            return ExitCode::from(1);
        }
    };
    let result = match input {
        Some(Err(e)) => Err(Failure::Parse(format!("cannot read input: {e}"))),
        Some(Ok(text)) => commands::run(cli.command, &cli.common, Some(&text), &out),
        None => commands::run(cli.command, &cli.common, None, &out),
    };
    let code = match result {
        Ok((headline, checks)) => {
            summary.headline = headline;
            summary.checks = checks;
            if summary.passed() {
                0
            } else {
                summary.status = "invariant_failure".into();
                for c in summary.checks.iter().filter(|c| !c.passed) {
                    eprintln!("check failed: {}{}", c.name, c.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default());
                }
                4
            }
        }
        Err(f) => {
            let (status, code) = f.status();
            summary.status = status.into();
            summary.headline = json!({ "error": f.message() });
            eprintln!("error: {}", f.message());
            code
        }
    };
    if let Err(f) = out.json("summary.json", &summary) {
        eprintln!("error: {}", f.message());
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
