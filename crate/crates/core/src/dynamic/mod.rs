//! Value iteration for the recursive contracting problem over promised
//! Receiver utility and the current belief.

mod backloading;
mod config;
mod operator;
mod playout;
mod pullback;
mod surface;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::DiscountedGame;

pub use backloading::{verify_backloading, BackloadingPoint, BackloadingReport};
pub use config::{belief_grid, promise_grid, SolverConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
pub use playout::{playout, History, HistoryRecord};
pub use pullback::{pullback, pullback_playout, PullbackPeriod, PullbackStrategy};
pub use surface::{right_derivative, PolicyTable, SurfaceShape, ValueSurface};

pub(crate) use operator::{snap_belief as snap_belief_index, AtomMenu, Operator};


/// Iterate distances below this are treated as numerical noise when
/// estimating the contraction ratio.
const RATIO_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Sup-norm change of each iterate.
    pub deltas: Vec<f64>,
    /// Largest `d_{n+1} / d_n` over iterates with `d_n` above the noise floor.
    pub contraction_ratio: f64,
    /// Largest distance from an interpolated continuation belief to the grid
    /// vertices used for it; zero when every continuation is on the grid.
    pub interpolation_error: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub surface: ValueSurface,
    pub policy: PolicyTable,
    pub report: SolveReport,
}

impl Solution {
    /// `V(u, μ0)` interpolated along the promise axis.
    pub fn value_at_prior(&self, game: &DiscountedGame, u: f64) -> Result<f64> {
        let i = self
            .surface
            .belief_index(&game.prior)
            .ok_or_else(|| Error::InvalidConfig("prior missing from grid".into()))?;
        self.surface.value(i, u)
    }
}

fn initial_surface(config: &SolverConfig) -> ValueSurface {
    ValueSurface::constant(
        config.belief_grid.clone(),
        config.promise_grid.clone(),
        0.0,
        config.lattice_divisions,
    )
}

/// One application of the Bellman operator at every grid point.
pub fn bellman_step(game: &DiscountedGame, v: &ValueSurface, config: &SolverConfig) -> Result<ValueSurface> {
    config.validate(game)?;
    check_surface(v, config)?;
    let op = Operator::new(game, config, AtomMenu::All)?;
    Ok(op.step(v, None, false)?.0)
}

fn check_surface(v: &ValueSurface, config: &SolverConfig) -> Result<()> {
    if v.promises != config.promise_grid || v.beliefs.len() != config.belief_grid.len() {
        return Err(Error::InvalidConfig("surface does not match the solver grids".into()));
    }
    Ok(())
}

/// Iterates the Bellman operator to its fixed point.
pub fn solve(game: &DiscountedGame, config: &SolverConfig) -> Result<Solution> {
    config.validate(game)?;
    solve_with_menu(game, config, AtomMenu::All)
}

pub(crate) fn solve_with_menu(game: &DiscountedGame, config: &SolverConfig, menu: AtomMenu) -> Result<Solution> {
    let op = Operator::new(game, config, menu)?;
    let mut v = initial_surface(config);
    // With i.i.d. states every continuation belief is the prior, so only the
    // prior's row feeds back into the operator.
    let prior_row = [config.prior_index(&game.prior)];
    let rows: Option<&[usize]> = game.chain.is_iid().then_some(&prior_row[..]);
    let mut deltas = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iterations {
        let (next, _) = op.step(&v, rows, false)?;
        let d = match rows {
            Some(r) => surface::row_distance(&next.values[r[0]], &v.values[r[0]]),
            None => next.distance(&v),
        };
        v = next;
        deltas.push(d);
        if d < config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: deltas.len(),
            last_delta: deltas.last().copied().unwrap_or(f64::INFINITY),
        });
    }
    let (surface, policy) = op.step(&v, None, true)?;
    let contraction_ratio = deltas
        .windows(2)
        .filter(|w| w[0] > RATIO_FLOOR)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    Ok(Solution {
        surface,
        policy: policy.expect("policy requested"),
        report: SolveReport {
            iterations: deltas.len(),
            deltas,
            contraction_ratio,
            interpolation_error: op.interpolation_error,
        },
    })
}
