use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{full_info_value, Belief, ContractAtom, DiscountedGame, Side};

use super::playout::{History, HistoryRecord};

const MARGINAL_TOL: f64 = 1e-9;

/// Full-revelation play in one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullbackPeriod {
    /// Target joint law `Q(θ, a)`, indexed `[state][action]`.
    pub marginal: Vec<Vec<f64>>,
    /// Recommendation law at the revealed state, `[state][action]`.
    pub recommendation: Vec<Vec<f64>>,
    /// Payment after recommending `a` at `θ`, `[state][action]`.
    pub transfers: Vec<Vec<f64>>,
}

/// A strategy that always reveals the state and compensates Receiver up to
/// the full-information payoff. The last period repeats forever.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullbackStrategy {
    pub periods: Vec<PullbackPeriod>,
    pub receiver_value: f64,
    /// Sender's discounted payoff net of transfer costs.
    pub sender_value: f64,
    /// `k` times the discounted expected payments.
    pub sender_cost: f64,
}

impl PullbackStrategy {
    pub fn period(&self, t: usize) -> &PullbackPeriod {
        &self.periods[t.min(self.periods.len() - 1)]
    }
}

fn state_marginal(q: &[Vec<f64>]) -> Vec<f64> {
    q.iter().map(|row| row.iter().sum()).collect()
}

/// Builds the full-revelation strategy replicating `target_marginals` period
/// by period. `base_receiver_value` is Receiver's discounted payoff from the
/// target actions before any transfers.
pub fn pullback(
    game: &DiscountedGame,
    target_marginals: &[Vec<Vec<f64>>],
    base_receiver_value: f64,
) -> Result<(PullbackStrategy, f64)> {
    let stage = &game.stage;
    let (n, na) = (stage.num_states(), stage.num_actions());
    if target_marginals.is_empty() {
        return Err(Error::InconsistentMarginals("no periods given".into()));
    }
    let u = stage.u();
    let v = stage.v();
    let best: Vec<f64> = (0..n)
        .map(|s| u.iter().map(|r| r[s]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let delta = game.discount;
    let last = target_marginals.len() - 1;
    let mut expected = game.prior.clone();
    let mut periods = Vec::with_capacity(target_marginals.len());
    let (mut receiver_base, mut payments, mut sender_gross) = (0.0, 0.0, 0.0);
    for (t, q) in target_marginals.iter().enumerate() {
        if q.len() != n || q.iter().any(|r| r.len() != na) {
            return Err(Error::InconsistentMarginals(format!("period {t} has the wrong shape")));
        }
        if q.iter().flatten().any(|p| !(*p >= 0.0)) {
            return Err(Error::InconsistentMarginals(format!("period {t} has negative mass")));
        }
        let marginal = state_marginal(q);
        let gap = marginal
            .iter()
            .zip(expected.probs())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if gap > MARGINAL_TOL {
            return Err(Error::InconsistentMarginals(format!(
                "period {t} state marginal is off the chain's law by {gap:e}"
            )));
        }
        let next = game.chain.step(&expected);
        if t == last && next.distance(&expected) > MARGINAL_TOL {
            return Err(Error::InconsistentMarginals(
                "the final period repeats forever, so its state law must be stationary".into(),
            ));
        }
        let mut recommendation = vec![vec![0.0; na]; n];
        let mut transfers = vec![vec![0.0; na]; n];
        for s in 0..n {
            for a in 0..na {
                transfers[s][a] = best[s] - u[a][s];
            }
            if marginal[s] > 0.0 {
                for a in 0..na {
                    recommendation[s][a] = q[s][a] / marginal[s];
                }
            } else {
                let fav = crate::game::receiver_optimal_action(stage, &Belief::degenerate(n, s));
                recommendation[s][fav] = 1.0;
            }
        }
        let weight = if t == last { delta.powi(t as i32) } else { (1.0 - delta) * delta.powi(t as i32) };
        for s in 0..n {
            for a in 0..na {
                receiver_base += weight * q[s][a] * u[a][s];
                payments += weight * q[s][a] * transfers[s][a];
                sender_gross += weight * q[s][a] * v[a][s];
            }
        }
        periods.push(PullbackPeriod {
            marginal: q.clone(),
            recommendation,
            transfers,
        });
        expected = next;
    }
    let scale = 1.0 + base_receiver_value.abs();
    if (receiver_base - base_receiver_value).abs() > MARGINAL_TOL * scale {
        return Err(Error::InconsistentMarginals(format!(
            "marginals give Receiver {receiver_base}, not the stated {base_receiver_value}"
        )));
    }
    let k = stage.k();
    let sender_cost = k * payments;
    let strategy = PullbackStrategy {
        periods,
        receiver_value: full_info_value(game, &game.prior),
        sender_value: sender_gross - sender_cost,
        sender_cost,
    };
    Ok((strategy, sender_cost))
}

/// Samples a history of the pullback strategy: states follow the chain and
/// actions follow the recommendation law at the revealed state.
pub fn pullback_playout(game: &DiscountedGame, strategy: &PullbackStrategy, seed: u64, horizon: usize) -> Result<History> {
    let stage = &game.stage;
    let n = stage.num_states();
    let delta = game.discount;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng, w: &[f64]| -> Result<usize> {
        let d = WeightedIndex::new(w).map_err(|e| Error::InconsistentMarginals(e.to_string()))?;
        Ok(d.sample(rng))
    };
    let mut history = History::default();
    let mut state = sample(&mut rng, game.prior.probs())?;
    let mut prior = game.prior.clone();
    let (mut sc, mut rc, mut weight) = (0.0, 0.0, 1.0);
    for t in 0..horizon {
        let period = strategy.period(t);
        let action = sample(&mut rng, &period.recommendation[state])?;
        let transfer = period.transfers[state][action];
        let revealed = Belief::degenerate(n, state);
        let sender_flow = stage.eval(&revealed, action, Side::Sender) - stage.k() * transfer;
        let receiver_flow = stage.eval(&revealed, action, Side::Receiver) + transfer;
        sc += (1.0 - delta) * weight * sender_flow;
        rc += (1.0 - delta) * weight * receiver_flow;
        weight *= delta;
        let promise = full_info_value(game, &game.chain.step(&revealed));
        history.push(HistoryRecord {
            period: t,
            prior: prior.clone(),
            promise: strategy.receiver_value,
            atom: ContractAtom {
                belief: revealed,
                action,
                transfer,
                promise,
                weight: period.marginal[state][action],
            },
            state,
            sender_flow,
            receiver_flow,
            sender_cumulative: sc,
            receiver_cumulative: rc,
            promise_snap_error: 0.0,
            belief_snap_error: 0.0,
            obedience_residual: transfer_free_obedience(game, state, action, transfer, promise),
        });
        state = sample(&mut rng, &game.chain.rows()[state])?;
        prior = game.chain.step(&prior);
    }
    Ok(history)
}

fn transfer_free_obedience(game: &DiscountedGame, state: usize, action: usize, transfer: f64, promise: f64) -> f64 {
    let b = Belief::degenerate(game.stage.num_states(), state);
    super::playout::obedience_residual(game, &b, action, transfer, promise)
}
