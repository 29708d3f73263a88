use thiserror::Error;

/// Errors raised by the solvers and the game constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("chain is not irreducible and aperiodic")]
    NotErgodic,
    #[error("full-information gain is zero at this belief")]
    DegenerateDenominator,
    #[error("no convergence after {iterations} iterations (last change {last_delta:e})")]
    NoConvergence { iterations: usize, last_delta: f64 },
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("inconsistent marginals: {0}")]
    InconsistentMarginals(String),
    #[error("unreachable point: {0}")]
    UnreachablePoint(String),
    #[error("ride game with n = {0} is too large (n <= 3)")]
    TooLarge(usize),
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("linear program: {0}")]
    Lp(#[from] crate::lp::LpError),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
