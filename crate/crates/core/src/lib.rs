//! Solvers and verification tools for dynamic contracts in which a Sender
//! motivates a Receiver with both information and limited-liability
//! transfers.

pub mod analysis;
pub mod dynamic;
pub mod error;
pub mod examples;
pub mod game;
pub mod loyalty;
pub mod lp;
pub mod simplex;
pub mod static_solver;

pub use error::{Error, Result};
pub use game::{
    bayes_plausible, best_response, ergodic_distribution, expected_payoff, full_info_value,
    no_info_value, Belief, ContractAtom, DiscountedGame, Experiment, GameSpec, MarkovChain, Side,
    StageGame,
};

