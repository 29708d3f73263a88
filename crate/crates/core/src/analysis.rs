//! Diagnostics on the stage game and on solved policies: feasibly optimal
//! actions, effectiveness ratios, incentivizability and the ergodic coupling
//! bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamic::{right_derivative, PolicyTable, ValueSurface};
use crate::error::{Error, Result};
use crate::game::{
    ergodic_distribution, full_info_stage_value, no_info_stage_value, receiver_optimal_action, Belief,
    ContractAtom, DiscountedGame, Side, StageGame,
};
use crate::lp::{LinearProgram, Relation};
use crate::static_solver::{k_cavify, persuasion_only_value};

const REGION_MARGIN: f64 = 1e-9;
const DENOM_TOL: f64 = 1e-12;
const SLOPE_MARGIN: f64 = 1e-4;
const WEIGHT_TOL: f64 = 1e-7;
const PAY_TOL: f64 = 1e-7;

/// Actions not excluded by a rival that is better for Sender in every state
/// by more than `k` times Receiver's largest loss.
pub fn feasibly_optimal_set(game: &StageGame) -> Vec<usize> {
    let (u, v, k) = (game.u(), game.v(), game.k());
    let n = game.num_states();
    (0..game.num_actions())
        .filter(|&a| {
            !(0..game.num_actions()).any(|b| {
                if b == a {
                    return false;
                }
                let gain = (0..n).map(|s| v[b][s] - v[a][s]).fold(f64::INFINITY, f64::min);
                let loss = (0..n).map(|s| u[a][s] - u[b][s]).fold(f64::NEG_INFINITY, f64::max);
                gain > k * loss
            })
        })
        .collect()
}

/// Sender's payoff change per unit of Receiver gain when `belief` is replaced
/// by full revelation, taking the least favorable feasibly optimal action.
pub fn effectiveness_ratio(game: &StageGame, belief: &Belief) -> Result<f64> {
    ratio_with(game, belief, &feasibly_optimal_set(game))
}

fn ratio_with(game: &StageGame, belief: &Belief, feasible: &[usize]) -> Result<f64> {
    let n = game.num_states();
    let denom = full_info_stage_value(game, belief) - no_info_stage_value(game, belief);
    if denom <= DENOM_TOL {
        return Err(Error::DegenerateDenominator);
    }
    let revealed: f64 = (0..n)
        .map(|s| {
            let a = receiver_optimal_action(game, &Belief::degenerate(n, s));
            belief.probs()[s] * game.v()[a][s]
        })
        .sum();
    let best = feasible
        .iter()
        .map(|&a| game.eval(belief, a, Side::Sender))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((revealed - best) / denom)
}

fn in_region(game: &StageGame, belief: &Belief, feasible: &[usize], k: f64) -> bool {
    if belief.probs().iter().any(|p| *p <= 0.0) {
        return false;
    }
    matches!(ratio_with(game, belief, feasible), Ok(e) if e > -k + REGION_MARGIN)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub k_values: Vec<f64>,
    /// Midpoints tested per threshold.
    pub midpoints: Vec<usize>,
    pub convexity_violations: usize,
    pub nesting_violations: usize,
    /// Thresholds for which no pair of members was found.
    pub empty_regions: Vec<f64>,
}

impl RegionReport {
    pub fn violations(&self) -> usize {
        self.convexity_violations + self.nesting_violations
    }
}

fn draw_interior(rng: &mut ChaCha8Rng, n: usize) -> Belief {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    Belief::normalized(raw)
}

/// Samples member pairs of `E(k)` for each threshold and checks that their
/// mixtures stay inside, and that members stay inside for larger thresholds.
pub fn effectiveness_region_check(game: &StageGame, k_values: &[f64], samples: usize, seed: u64) -> RegionReport {
    let feasible = feasibly_optimal_set(game);
    let n = game.num_states();
    let mut ks = k_values.to_vec();
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = RegionReport {
        k_values: ks.clone(),
        midpoints: Vec::new(),
        convexity_violations: 0,
        nesting_violations: 0,
        empty_regions: Vec::new(),
    };
    let budget = 200 * samples.max(1);
    for (ki, &k) in ks.iter().enumerate() {
        let mut members = Vec::new();
        let mut tries = 0;
        while members.len() < 2 * samples && tries < budget {
            tries += 1;
            let b = draw_interior(&mut rng, n);
            if in_region(game, &b, &feasible, k) {
                members.push(b);
            }
        }
        if members.len() < 2 {
            report.empty_regions.push(k);
            report.midpoints.push(0);
            continue;
        }
        let mut tested = 0;
        for pair in members.chunks(2).filter(|c| c.len() == 2) {
            let beta: f64 = rng.random();
            let mid = Belief::normalized(
                pair[0]
                    .probs()
                    .iter()
                    .zip(pair[1].probs())
                    .map(|(a, b)| beta * a + (1.0 - beta) * b)
                    .collect(),
            );
            tested += 1;
            if !in_region(game, &mid, &feasible, k) {
                report.convexity_violations += 1;
            }
        }
        report.midpoints.push(tested);
        for b in &members {
            for &bigger in &ks[ki + 1..] {
                if !in_region(game, b, &feasible, bigger) {
                    report.nesting_violations += 1;
                }
            }
        }
    }
    report
}

/// Whether the frontier at promise 0 and the prior is flatter than `-k`.
pub fn is_nontrivial(game: &DiscountedGame, v: &ValueSurface) -> Result<bool> {
    let slope = right_derivative(v, 0.0, &game.prior)?;
    Ok(slope > -game.stage.k() + SLOPE_MARGIN)
}

/// Whether transfers raise the static value above persuasion alone.
pub fn is_incentivizable_static(game: &StageGame, prior: &Belief) -> Result<bool> {
    Ok(k_cavify(game, prior)?.value > persuasion_only_value(game, prior)? + 1e-9)
}

/// Shifts Receiver payoffs so that the no-information value at `prior` is 0.
pub fn normalize_outside_option(game: &StageGame, prior: &Belief) -> Result<StageGame> {
    let base = no_info_stage_value(game, prior);
    let u = game.u().iter().map(|r| r.iter().map(|x| x - base).collect()).collect();
    game.with_payoffs(u, game.v().to_vec())
}

/// Whether the static optimum leaves Receiver strictly above the outside
/// option while Sender is short of the first best.
pub fn benefits_from_dynamics(game: &StageGame, prior: &Belief) -> Result<bool> {
    let normalized = normalize_outside_option(game, prior)?;
    let sol = k_cavify(&normalized, prior)?;
    let surplus: f64 = sol.atoms.iter().map(|a| a.weight * a.receiver_value).sum();
    let first_best: f64 = (0..game.num_states())
        .map(|s| {
            let best = game.v().iter().map(|r| r[s]).fold(f64::NEG_INFINITY, f64::max);
            prior.probs()[s] * best
        })
        .sum();
    Ok(surplus > 1e-9 && sol.value < first_best - 1e-9)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicCoupling {
    /// Joint law indexed `[state][action]`.
    pub gamma: Vec<Vec<f64>>,
    pub payment: f64,
    pub value: f64,
}

/// Best joint law of states and actions with the ergodic state marginal and a
/// payment covering Receiver's stationary outside option.
pub fn ergodic_bound(game: &DiscountedGame) -> Result<ErgodicCoupling> {
    let stage = &game.stage;
    let pi = ergodic_distribution(&game.chain)?;
    let (n, na) = (stage.num_states(), stage.num_actions());
    let k = stage.k();
    let nv = n * na + 1;
    let mut objective = vec![0.0; nv];
    let mut ir = vec![0.0; nv];
    for s in 0..n {
        for a in 0..na {
            objective[s * na + a] = stage.v()[a][s];
            ir[s * na + a] = stage.u()[a][s];
        }
    }
    objective[nv - 1] = -k;
    ir[nv - 1] = 1.0;
    let outside = no_info_stage_value(stage, &pi);
    let mut lp = LinearProgram::new(objective.clone());
    for s in 0..n {
        let row = (0..nv).map(|j| if j < n * na && j / na == s { 1.0 } else { 0.0 }).collect();
        lp.add_row(row, Relation::Eq, pi.probs()[s]);
    }
    lp.add_row(ir, Relation::Ge, outside);
    let best = lp.maximize()?;
    // Among optimal couplings take the smallest payment.
    let mut tie = lp.clone();
    tie.add_row(objective.clone(), Relation::Ge, best.value - 1e-12 * (1.0 + best.value.abs()));
    let mut payment_only = LinearProgram::new((0..nv).map(|j| if j == nv - 1 { 1.0 } else { 0.0 }).collect());
    for r in tie_rows(&tie) {
        payment_only.add_row(r.0, r.1, r.2);
    }
    let sol = payment_only.minimize().unwrap_or(best);
    let gamma = (0..n).map(|s| (0..na).map(|a| sol.x[s * na + a]).collect()).collect();
    let payment = sol.x[nv - 1];
    let value = objective.iter().zip(&sol.x).map(|(c, x)| c * x).sum();
    Ok(ErgodicCoupling { gamma, payment, value })
}

fn tie_rows(lp: &LinearProgram) -> Vec<(Vec<f64>, Relation, f64)> {
    lp.rows().map(|(c, r, b)| (c.to_vec(), r, b)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub checked: usize,
    pub violations: Vec<String>,
    /// Beliefs whose ratio sits within the tolerance band around `-k`.
    pub boundary_hits: usize,
    /// Grid points skipped because some transfer sits at the truncation cap,
    /// where the untruncated optimality arguments do not apply.
    pub capped: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn at_cap(game: &DiscountedGame, atoms: &[ContractAtom]) -> bool {
    let cap = game.promise_bound / (1.0 - game.discount);
    atoms.iter().any(|a| a.weight > WEIGHT_TOL && a.transfer >= cap * (1.0 - 1e-9))
}

/// Every action used with positive weight must be feasibly optimal.
pub fn audit_feasible_actions(game: &DiscountedGame, policy: &PolicyTable) -> AuditReport {
    let feasible = feasibly_optimal_set(&game.stage);
    let mut report = AuditReport::default();
    for (i, m, atoms) in policy.points() {
        if at_cap(game, atoms) {
            report.capped += 1;
            continue;
        }
        for a in atoms.iter().filter(|a| a.weight > WEIGHT_TOL) {
            report.checked += 1;
            if !feasible.contains(&a.action) {
                report.violations.push(format!(
                    "belief {i}, promise {}: action {} is not feasibly optimal",
                    policy.promises[m], a.action
                ));
            }
        }
    }
    report
}

/// After any payment, the beliefs induced at the successor grid point must
/// lie outside `E(k)`.
pub fn audit_effectiveness(game: &DiscountedGame, policy: &PolicyTable) -> AuditReport {
    let mut report = AuditReport::default();
    if game.discount == 0.0 {
        return report;
    }
    let stage = &game.stage;
    let k = stage.k();
    let feasible = feasibly_optimal_set(stage);
    for (i, m, atoms) in policy.points() {
        if at_cap(game, atoms) {
            report.capped += 1;
            continue;
        }
        for a in atoms.iter().filter(|a| a.transfer > PAY_TOL && a.weight > WEIGHT_TOL) {
            let next = game.chain.step(&a.belief);
            let (bi, _) = crate::dynamic::snap_belief_index(&policy.beliefs, &next);
            let mi = nearest(&policy.promises, a.promise);
            let Some(successors) = policy.get(bi, mi) else {
                report.violations.push(format!("belief {i}, promise {}: successor infeasible", policy.promises[m]));
                continue;
            };
            if at_cap(game, successors) {
                report.capped += 1;
                continue;
            }
            for s in successors.iter().filter(|s| s.weight > WEIGHT_TOL) {
                report.checked += 1;
                if s.belief.is_degenerate() {
                    continue;
                }
                let Ok(e) = ratio_with(stage, &s.belief, &feasible) else {
                    continue;
                };
                if (e + k).abs() <= SLOPE_MARGIN {
                    report.boundary_hits += 1;
                }
                if e > -k + SLOPE_MARGIN {
                    report.violations.push(format!(
                        "belief {i}, promise {}: successor belief {:?} has ratio {e}",
                        policy.promises[m],
                        s.belief.probs()
                    ));
                }
            }
        }
    }
    report
}

fn nearest(grid: &[f64], u: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - u).abs().partial_cmp(&(b.1 - u).abs()).unwrap())
        .map(|(i, _)| i)
        .expect("non-empty grid")
}
