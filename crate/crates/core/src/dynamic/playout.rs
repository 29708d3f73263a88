use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{no_info_stage_value, no_info_value, Belief, ContractAtom, DiscountedGame, Side};

use super::operator::snap_belief;
use super::surface::PolicyTable;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRecord {
    pub period: usize,
    /// Belief at the start of the period.
    pub prior: Belief,
    /// Promise in force at the start of the period.
    pub promise: f64,
    pub atom: ContractAtom,
    pub state: usize,
    pub sender_flow: f64,
    pub receiver_flow: f64,
    pub sender_cumulative: f64,
    pub receiver_cumulative: f64,
    pub promise_snap_error: f64,
    pub belief_snap_error: f64,
    /// Obedience slack of the realized atom against the best deviation.
    pub obedience_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct History {
    pub records: Vec<HistoryRecord>,
}

impl History {
    pub fn push(&mut self, r: HistoryRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sender_total(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.sender_cumulative)
    }

    pub fn receiver_total(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.receiver_cumulative)
    }

    pub fn mean_sender_flow(&self) -> f64 {
        mean(self.records.iter().map(|r| r.sender_flow))
    }

    pub fn mean_receiver_flow(&self) -> f64 {
        mean(self.records.iter().map(|r| r.receiver_flow))
    }

    pub fn min_obedience_residual(&self) -> f64 {
        self.records.iter().map(|r| r.obedience_residual).fold(f64::INFINITY, f64::min)
    }

    pub fn max_snap_error(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.promise_snap_error.max(r.belief_snap_error))
            .fold(0.0, f64::max)
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Obedience slack at `belief`: the recommended action's discounted payoff
/// minus the best deviation punished with no information from tomorrow on.
pub(crate) fn obedience_residual(game: &DiscountedGame, belief: &Belief, action: usize, transfer: f64, promise: f64) -> f64 {
    let d = game.discount;
    let obey = (1.0 - d) * (game.stage.eval(belief, action, Side::Receiver) + transfer) + d * promise;
    let punish = if d > 0.0 {
        d * no_info_value(game, &game.chain.step(belief))
    } else {
        0.0
    };
    obey - ((1.0 - d) * no_info_stage_value(&game.stage, belief) + punish)
}

/// Simulates `policy` from promise 0 at the prior.
pub fn playout(game: &DiscountedGame, policy: &PolicyTable, seed: u64, horizon: usize) -> Result<History> {
    let stage = &game.stage;
    let d = game.discount;
    let c = game.promise_bound;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = History::default();
    let (mut belief, err) = snap_belief(&policy.beliefs, &game.prior);
    if err > 1e-9 {
        return Err(Error::UnreachablePoint("prior is not on the belief grid".into()));
    }
    let (mut promise, mut promise_err) = snap_promise(&policy.promises, 0.0);
    let mut belief_err = 0.0;
    let (mut sc, mut rc, mut weight) = (0.0, 0.0, 1.0);
    for t in 0..horizon {
        let atoms = policy.get(belief, promise).ok_or_else(|| {
            Error::UnreachablePoint(format!("no feasible policy at belief {belief}, promise {}", policy.promises[promise]))
        })?;
        let weights: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::UnreachablePoint(e.to_string()))?;
        let atom = &atoms[pick.sample(&mut rng)];
        let state_law = WeightedIndex::new(atom.belief.probs()).map_err(|e| Error::UnreachablePoint(e.to_string()))?;
        let state = state_law.sample(&mut rng);
        let revealed = Belief::degenerate(stage.num_states(), state);
        let sender_flow = stage.eval(&revealed, atom.action, Side::Sender) - stage.k() * atom.transfer;
        let receiver_flow = stage.eval(&revealed, atom.action, Side::Receiver) + atom.transfer;
        sc += (1.0 - d) * weight * sender_flow;
        rc += (1.0 - d) * weight * receiver_flow;
        weight *= d;
        history.push(HistoryRecord {
            period: t,
            prior: policy.beliefs[belief].clone(),
            promise: policy.promises[promise],
            atom: atom.clone(),
            state,
            sender_flow,
            receiver_flow,
            sender_cumulative: sc,
            receiver_cumulative: rc,
            promise_snap_error: promise_err,
            belief_snap_error: belief_err,
            obedience_residual: obedience_residual(game, &atom.belief, atom.action, atom.transfer, atom.promise),
        });
        if atom.promise.abs() > c * (1.0 + 1e-9) {
            return Err(Error::UnreachablePoint(format!("promise {} leaves [-{c}, {c}]", atom.promise)));
        }
        (promise, promise_err) = snap_promise(&policy.promises, atom.promise);
        (belief, belief_err) = snap_belief(&policy.beliefs, &game.chain.step(&atom.belief));
    }
    Ok(history)
}

fn snap_promise(grid: &[f64], u: f64) -> (usize, f64) {
    grid.iter()
        .enumerate()
        .map(|(i, g)| (i, (g - u).abs()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
        .expect("non-empty grid")
}
