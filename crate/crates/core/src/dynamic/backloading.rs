use serde::Serialize;

use crate::error::Result;
use crate::game::DiscountedGame;

use super::config::SolverConfig;
use super::operator::{AtomMenu, Operator};
use super::surface::{right_slope, PolicyTable, ValueSurface};
use super::solve_with_menu;

const PAY_TOL: f64 = 1e-7;
const SLOPE_TOL: f64 = 1e-4;
const VALUE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackloadingPoint {
    pub belief_index: usize,
    pub promise: f64,
    pub max_transfer: f64,
    /// Largest `|V'_+(u', Mμ) + k|` over the paying atoms.
    pub slope_residual: f64,
    pub value: f64,
    /// Value when every paying atom must continue with full revelation.
    pub revelation_value: f64,
    pub value_residual: f64,
    pub slope_ok: bool,
    pub witness_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackloadingReport {
    pub points: Vec<BackloadingPoint>,
    pub max_slope_residual: f64,
    pub max_value_residual: f64,
    pub passed: bool,
}

/// Audits every paying grid point of `policy`: the continuation slope must
/// equal `-k`, and the point's program must reach the same value when paid
/// atoms are forced onto full-revelation continuations.
pub fn verify_backloading(game: &DiscountedGame, v: &ValueSurface, policy: &PolicyTable) -> Result<BackloadingReport> {
    let config = SolverConfig {
        belief_grid: v.beliefs.clone(),
        promise_grid: v.promises.clone(),
        tolerance: 1e-10,
        max_iterations: super::DEFAULT_MAX_ITERATIONS,
        lattice_divisions: v.lattice_divisions,
    };
    let k = game.stage.k();
    let paying: Vec<(usize, usize)> = policy
        .points()
        .filter(|(_, _, atoms)| atoms.iter().any(|a| a.transfer > PAY_TOL))
        .map(|(i, m, _)| (i, m))
        .collect();
    let mut points = Vec::with_capacity(paying.len());
    if !paying.is_empty() {
        let revelation = solve_with_menu(game, &config, AtomMenu::Degenerate)?;
        let op = Operator::new(game, &config, AtomMenu::All)?;
        let plain = op.g_functions(v);
        let split = op.split_g_functions(v, &revelation.surface);
        for (i, m) in paying {
            let atoms = policy.get(i, m).expect("paying point is feasible");
            let mut slope_residual: f64 = 0.0;
            let mut max_transfer: f64 = 0.0;
            for a in atoms.iter().filter(|a| a.transfer > PAY_TOL) {
                max_transfer = max_transfer.max(a.transfer);
                if game.discount == 0.0 {
                    // No continuation, so there is no slope to match.
                    continue;
                }
                let row = v.row_at(&game.chain.step(&a.belief))?;
                let promise = a.promise.clamp(v.promises[0], v.promises[v.promises.len() - 1]);
                let slope = right_slope(&v.promises, &row, promise)?;
                slope_residual = slope_residual.max((slope + k).abs());
            }
            let u = v.promises[m];
            let value = op.point_value(i, u, &plain)?;
            let revelation_value = op.point_value(i, u, &split)?;
            let value_residual = if value == revelation_value {
                0.0
            } else {
                (value - revelation_value).abs()
            };
            points.push(BackloadingPoint {
                belief_index: i,
                promise: u,
                max_transfer,
                slope_residual,
                value,
                revelation_value,
                value_residual,
                slope_ok: slope_residual <= SLOPE_TOL,
                witness_ok: value_residual <= VALUE_TOL,
            });
        }
    }
    let max_slope_residual = points.iter().map(|p| p.slope_residual).fold(0.0, f64::max);
    let max_value_residual = points.iter().map(|p| p.value_residual).fold(0.0, f64::max);
    let passed = points.iter().all(|p| p.slope_ok && p.witness_ok);
    Ok(BackloadingReport {
        points,
        max_slope_residual,
        max_value_residual,
        passed,
    })
}
