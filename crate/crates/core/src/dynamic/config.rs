use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{full_info_value, no_info_value, Belief, DiscountedGame};
use crate::simplex::SimplexLattice;
use crate::static_solver::extremal_beliefs;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
const GEOMETRIC_POINTS: usize = 4;

/// Discretization and stopping rule for value iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub belief_grid: Vec<Belief>,
    pub promise_grid: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// When set, the first grid slots hold the simplex lattice with this many
    /// divisions per edge.
    pub lattice_divisions: Option<usize>,
}

impl SolverConfig {
    /// Lattice of `belief_divisions` per edge plus the prior and extremal
    /// beliefs; about `promise_points` promises covering `[-C, C]`.
    pub fn new(game: &DiscountedGame, belief_divisions: usize, promise_points: usize) -> Result<Self> {
        Self::with_kinks(game, belief_divisions, promise_points, &[])
    }

    /// As [`SolverConfig::new`], forcing extra promise knots.
    pub fn with_kinks(
        game: &DiscountedGame,
        belief_divisions: usize,
        promise_points: usize,
        kinks: &[f64],
    ) -> Result<Self> {
        if belief_divisions == 0 {
            return Err(Error::InvalidConfig("belief grid needs at least one division".into()));
        }
        let belief_grid = belief_grid(game, belief_divisions);
        let promise_grid = promise_grid(game, &belief_grid, promise_points, kinks)?;
        let config = Self {
            belief_grid,
            promise_grid,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            lattice_divisions: Some(belief_divisions),
        };
        config.validate(game)?;
        Ok(config)
    }

    pub fn validate(&self, game: &DiscountedGame) -> Result<()> {
        let n = game.stage.num_states();
        if self.belief_grid.is_empty() || self.promise_grid.len() < 2 {
            return Err(Error::InvalidConfig("grids must be non-empty".into()));
        }
        if self.belief_grid.iter().any(|b| b.len() != n) {
            return Err(Error::InvalidConfig("belief dimension mismatch".into()));
        }
        let has = |b: &Belief| self.belief_grid.iter().any(|g| g.approx_eq(b, 1e-9));
        if !has(&game.prior) {
            return Err(Error::InvalidConfig("belief grid must contain the prior".into()));
        }
        if !(0..n).all(|s| has(&Belief::degenerate(n, s))) {
            return Err(Error::InvalidConfig("belief grid must contain degenerate beliefs".into()));
        }
        if self.promise_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("promise grid must be strictly increasing".into()));
        }
        if !self.promise_grid.contains(&0.0) {
            return Err(Error::InvalidConfig("promise grid must contain 0".into()));
        }
        let c = game.promise_bound;
        let (lo, hi) = (self.promise_grid[0], self.promise_grid[self.promise_grid.len() - 1]);
        if (lo + c).abs() > 1e-9 * c || (hi - c).abs() > 1e-9 * c {
            return Err(Error::InvalidConfig(format!("promise grid must span [-{c}, {c}]")));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn prior_index(&self, prior: &Belief) -> usize {
        self.belief_grid
            .iter()
            .position(|b| b.approx_eq(prior, 1e-9))
            .expect("validated grid contains the prior")
    }
}

fn push_unique(list: &mut Vec<Belief>, b: Belief) {
    if !list.iter().any(|x| x.approx_eq(&b, 1e-9)) {
        list.push(b);
    }
}

/// Lattice points first, then the prior and the extremal beliefs.
pub fn belief_grid(game: &DiscountedGame, divisions: usize) -> Vec<Belief> {
    let mut grid = SimplexLattice::new(game.stage.num_states(), divisions).points().to_vec();
    push_unique(&mut grid, game.prior.clone());
    for b in extremal_beliefs(&game.stage).beliefs {
        push_unique(&mut grid, b);
    }
    grid
}

/// At most `points` promises spanning `[-C, C]`: dense between the smallest
/// outside option and just beyond the largest full-information value on the
/// grid, a few geometric points out to `C`, and the landmarks `0`, `±U̲(μ0)`,
/// `±u^RFI(μ0)` and `kinks`.
pub fn promise_grid(game: &DiscountedGame, beliefs: &[Belief], points: usize, kinks: &[f64]) -> Result<Vec<f64>> {
    let c = game.promise_bound;
    let outside = no_info_value(game, &game.prior);
    let full = full_info_value(game, &game.prior);
    let mut keys = vec![-c, c, 0.0, outside, -outside, full, -full];
    keys.extend_from_slice(kinks);
    keys.retain(|u| u.abs() <= c);
    let tol = 1e-9 * (1.0 + c);
    for u in keys.iter_mut().filter(|u| u.abs() <= tol) {
        *u = 0.0;
    }
    keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    keys.dedup_by(|a, b| (*a - *b).abs() <= tol);
    if points < keys.len() + GEOMETRIC_POINTS + 2 {
        return Err(Error::InvalidConfig(format!(
            "promise grid needs at least {} points",
            keys.len() + GEOMETRIC_POINTS + 2
        )));
    }
    let lo = beliefs.iter().map(|b| no_info_value(game, b)).fold(f64::INFINITY, f64::min);
    let hi = beliefs.iter().map(|b| full_info_value(game, b)).fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-3 * (1.0 + c));
    let dense_lo = (lo - 0.05 * span).max(-c);
    let dense_hi = (hi + 0.5 * span).min(c);

    let mut grid = keys.clone();
    let mut extra = Vec::new();
    let levels = (1u32 << (GEOMETRIC_POINTS + 1)) as f64 - 1.0;
    for i in 1..=GEOMETRIC_POINTS {
        extra.push(dense_hi + (c - dense_hi) * ((1u32 << i) as f64 - 1.0) / levels);
    }
    let budget = points - keys.len() - GEOMETRIC_POINTS;
    for i in 0..budget {
        extra.push(dense_lo + (dense_hi - dense_lo) * i as f64 / (budget - 1) as f64);
    }
    for u in extra {
        if !grid.iter().any(|g| (g - u).abs() <= 1e-6 * span) {
            grid.push(u);
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(grid)
}
