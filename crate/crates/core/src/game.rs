//! Primitive game objects, expected payoffs, best responses and the
//! discounted outside-option and full-information values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when comparing expected payoffs for ties.
pub const TIE_TOL: f64 = 1e-9;
const BELIEF_TOL: f64 = 1e-12;
const SERIES_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Receiver,
    Sender,
}

/// Finite stage game: payoff matrices indexed `[action][state]` and the
/// per-unit cost of transfers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageGame {
    states: Vec<String>,
    actions: Vec<String>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    k: f64,
}

impl StageGame {
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        u: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        k: f64,
    ) -> Result<Self> {
        if states.len() < 2 || actions.len() < 2 {
            return Err(Error::InvalidGame(
                "need at least two states and two actions".into(),
            ));
        }
        for (name, m) in [("u", &u), ("v", &v)] {
            if m.len() != actions.len() || m.iter().any(|r| r.len() != states.len()) {
                return Err(Error::InvalidGame(format!(
                    "{name} must be {} x {}",
                    actions.len(),
                    states.len()
                )));
            }
            if m.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGame(format!("{name} has non-finite entries")));
            }
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidGame(format!("k must be positive, got {k}")));
        }
        Ok(Self {
            states,
            actions,
            u,
            v,
            k,
        })
    }

    /// Builds a game with generated labels `s0, s1, ...` and `a0, a1, ...`.
    pub fn from_matrices(u: Vec<Vec<f64>>, v: Vec<Vec<f64>>, k: f64) -> Result<Self> {
        let n = u.first().map_or(0, Vec::len);
        let states = (0..n).map(|i| format!("s{i}")).collect();
        let actions = (0..u.len()).map(|i| format!("a{i}")).collect();
        Self::new(states, actions, u, v, k)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn u(&self) -> &[Vec<f64>] {
        &self.u
    }

    pub fn v(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn with_k(&self, k: f64) -> Result<Self> {
        Self::new(
            self.states.clone(),
            self.actions.clone(),
            self.u.clone(),
            self.v.clone(),
            k,
        )
    }

    pub fn with_payoffs(&self, u: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.states.clone(), self.actions.clone(), u, v, self.k)
    }

    /// Largest absolute Receiver payoff.
    pub fn u_norm(&self) -> f64 {
        self.u.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn payoff(&self, side: Side) -> &[Vec<f64>] {
        match side {
            Side::Receiver => &self.u,
            Side::Sender => &self.v,
        }
    }

    /// `E_μ[u(a,θ)]` or `E_μ[v(a,θ)]` without bounds checks.
    pub(crate) fn eval(&self, belief: &Belief, action: usize, side: Side) -> f64 {
        dot(&self.payoff(side)[action], belief.probs())
    }
}

/// Probability vector over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidBelief(format!("negative entry in {probs:?}")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > BELIEF_TOL {
            return Err(Error::InvalidBelief(format!("sums to {s}")));
        }
        Ok(Self(probs))
    }

    /// Clamps tiny negative round-off to zero and renormalizes.
    pub fn normalized(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let s: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= s;
        }
        Self(probs)
    }

    /// Binary-state belief with `P(θ1) = p`.
    pub fn binary(p: f64) -> Self {
        Self::normalized(vec![1.0 - p, p])
    }

    pub fn degenerate(n: usize, state: usize) -> Self {
        let mut p = vec![0.0; n];
        p[state] = 1.0;
        Self(p)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.0.iter().any(|p| *p > 1.0 - 1e-12)
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn approx_eq(&self, other: &Belief, tol: f64) -> bool {
        self.len() == other.len() && self.distance(other) <= tol
    }
}

/// Row-stochastic transition matrix; row `i` is the law of the next state
/// given current state `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovChain {
    rows: Vec<Vec<f64>>,
}

impl MarkovChain {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        for r in &rows {
            if r.len() != n {
                return Err(Error::InvalidGame("transition matrix must be square".into()));
            }
            if r.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::InvalidGame("negative transition probability".into()));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > BELIEF_TOL {
                return Err(Error::InvalidGame(format!("transition row sums to {s}")));
            }
        }
        Ok(Self { rows })
    }

    /// Chain whose every row is `prior`.
    pub fn iid(prior: &Belief) -> Self {
        Self {
            rows: vec![prior.0.clone(); prior.len()],
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn is_iid(&self) -> bool {
        self.rows.iter().all(|r| r == &self.rows[0])
    }

    /// Next-period belief `Mμ`.
    pub fn step(&self, belief: &Belief) -> Belief {
        let n = self.rows.len();
        let mut out = vec![0.0; n];
        for (p, row) in belief.0.iter().zip(&self.rows) {
            if *p == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(row) {
                *o += p * m;
            }
        }
        Belief::normalized(out)
    }
}

/// Stage game played repeatedly with a Markov state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscountedGame {
    pub stage: StageGame,
    pub chain: MarkovChain,
    pub prior: Belief,
    pub discount: f64,
    pub promise_bound: f64,
}

impl DiscountedGame {
    /// `promise_bound = None` picks `10 ‖u‖∞ / (1 − δ)`.
    pub fn new(
        stage: StageGame,
        chain: MarkovChain,
        prior: Belief,
        discount: f64,
        promise_bound: Option<f64>,
    ) -> Result<Self> {
        let n = stage.num_states();
        if chain.rows.len() != n || prior.len() != n {
            return Err(Error::InvalidGame("state dimension mismatch".into()));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidGame(format!("discount {discount} not in [0, 1)")));
        }
        let floor = stage.u_norm() / (1.0 - discount);
        let bound = promise_bound.unwrap_or(10.0 * floor.max(0.1));
        if !(bound > floor) {
            return Err(Error::InvalidGame(format!(
                "promise bound {bound} must exceed {floor}"
            )));
        }
        Ok(Self {
            stage,
            chain,
            prior,
            discount,
            promise_bound: bound,
        })
    }

    pub fn iid(stage: StageGame, prior: Belief, discount: f64) -> Result<Self> {
        let chain = MarkovChain::iid(&prior);
        Self::new(stage, chain, prior, discount, None)
    }

    /// Copy with a different discount factor and a promise bound rescaled to
    /// the default for that discount.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        Self::new(
            self.stage.clone(),
            self.chain.clone(),
            self.prior.clone(),
            discount,
            None,
        )
    }

    pub fn with_stage(&self, stage: StageGame) -> Result<Self> {
        Self::new(
            stage,
            self.chain.clone(),
            self.prior.clone(),
            self.discount,
            Some(self.promise_bound),
        )
    }
}

/// Distribution over posterior beliefs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub atoms: Vec<(Belief, f64)>,
}

impl Experiment {
    pub fn new(atoms: Vec<(Belief, f64)>) -> Result<Self> {
        let s: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.iter().any(|a| a.1 < 0.0) || (s - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidBelief(format!("experiment weights sum to {s}")));
        }
        Ok(Self { atoms })
    }
}

/// One on-path realization of a dynamic contract.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractAtom {
    pub belief: Belief,
    pub action: usize,
    pub transfer: f64,
    pub promise: f64,
    pub weight: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(game: &StageGame, belief: &Belief) -> Result<()> {
    if belief.len() != game.num_states() {
        return Err(Error::InvalidBelief(format!(
            "belief has {} entries, game has {} states",
            belief.len(),
            game.num_states()
        )));
    }
    Ok(())
}

pub fn expected_payoff(game: &StageGame, belief: &Belief, action: usize, side: Side) -> Result<f64> {
    check_dims(game, belief)?;
    if action >= game.num_actions() {
        return Err(Error::IndexOutOfRange {
            index: action,
            len: game.num_actions(),
        });
    }
    Ok(game.eval(belief, action, side))
}

/// Receiver's best response to `transfers` (indexed by action), breaking ties
/// toward Sender's transfer-net value and then toward the lowest index.
pub fn best_response(game: &StageGame, belief: &Belief, transfers: &[f64]) -> Result<(usize, f64)> {
    check_dims(game, belief)?;
    if transfers.len() != game.num_actions() {
        return Err(Error::InvalidGame(format!(
            "expected {} transfers, got {}",
            game.num_actions(),
            transfers.len()
        )));
    }
    if transfers.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidGame("transfers must be nonnegative".into()));
    }
    Ok(best_response_unchecked(game, belief, transfers))
}

pub(crate) fn best_response_unchecked(game: &StageGame, belief: &Belief, transfers: &[f64]) -> (usize, f64) {
    let values: Vec<f64> = (0..game.num_actions())
        .map(|a| game.eval(belief, a, Side::Receiver) + transfers[a])
        .collect();
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut chosen = 0;
    let mut chosen_sender = f64::NEG_INFINITY;
    for (a, &val) in values.iter().enumerate() {
        if val >= best - TIE_TOL {
            let s = game.eval(belief, a, Side::Sender) - game.k() * transfers[a];
            if s > chosen_sender + TIE_TOL {
                chosen = a;
                chosen_sender = s;
            }
        }
    }
    (chosen, best)
}

/// `a*(μ, 0)`: Receiver's unpaid optimum with Sender-favorable ties.
pub fn receiver_optimal_action(game: &StageGame, belief: &Belief) -> usize {
    best_response_unchecked(game, belief, &vec![0.0; game.num_actions()]).0
}

/// `max_a E_μ[u(a,θ)]`.
pub fn no_info_stage_value(game: &StageGame, belief: &Belief) -> f64 {
    (0..game.num_actions())
        .map(|a| game.eval(belief, a, Side::Receiver))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `E_μ[max_a u(a,θ)]`.
pub fn full_info_stage_value(game: &StageGame, belief: &Belief) -> f64 {
    (0..game.num_states())
        .map(|s| {
            let best = game.u.iter().map(|r| r[s]).fold(f64::NEG_INFINITY, f64::max);
            belief.0[s] * best
        })
        .sum()
}

fn discounted_series(game: &DiscountedGame, belief: &Belief, f: impl Fn(&Belief) -> f64) -> f64 {
    let d = game.discount;
    if d == 0.0 {
        return f(belief);
    }
    let u = &game.stage.u;
    let hi = u.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = u.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let range = (hi - lo).max(f64::MIN_POSITIVE);
    let mut mu = belief.clone();
    let mut weight = 1.0;
    let mut total = 0.0;
    loop {
        let val = f(&mu);
        let next = game.chain.step(&mu);
        if next.distance(&mu) <= 1e-15 {
            // Fixed point: the remaining tail sums to weight * val exactly.
            return total + weight * val;
        }
        total += (1.0 - d) * weight * val;
        weight *= d;
        mu = next;
        if weight * range < SERIES_TOL {
            return total + weight * f(&mu);
        }
    }
}

/// Receiver's discounted value of the no-information outside option `U̲(μ)`.
pub fn no_info_value(game: &DiscountedGame, belief: &Belief) -> f64 {
    discounted_series(game, belief, |m| no_info_stage_value(&game.stage, m))
}

/// Receiver's discounted full-information value `u^RFI(μ)`.
pub fn full_info_value(game: &DiscountedGame, belief: &Belief) -> f64 {
    discounted_series(game, belief, |m| full_info_stage_value(&game.stage, m))
}

pub fn bayes_plausible(e: &Experiment, prior: &Belief) -> bool {
    let mut mean = vec![0.0; prior.len()];
    for (b, w) in &e.atoms {
        if b.len() != prior.len() {
            return false;
        }
        for (m, p) in mean.iter_mut().zip(&b.0) {
            *m += w * p;
        }
    }
    mean.iter().zip(&prior.0).all(|(a, b)| (a - b).abs() <= 1e-9)
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for l in 0..n {
            let x = a[i][l];
            if x != 0.0 {
                for j in 0..n {
                    out[i][j] += x * b[l][j];
                }
            }
        }
    }
    out
}

/// Stationary distribution of a primitive chain by power iteration.
pub fn ergodic_distribution(chain: &MarkovChain) -> Result<Belief> {
    let n = chain.rows.len();
    let mut power = chain.rows.clone();
    let mut primitive = false;
    for _ in 0..n * n {
        if power.iter().flatten().all(|x| *x > 0.0) {
            primitive = true;
            break;
        }
        power = mat_mul(&power, &chain.rows);
    }
    if !primitive {
        return Err(Error::NotErgodic);
    }
    let mut pi = Belief::uniform(n);
    for _ in 0..1_000_000 {
        let next = chain.step(&pi);
        let done = next.distance(&pi) < 1e-15;
        pi = next;
        if done {
            break;
        }
    }
    Ok(pi)
}

/// JSON game specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub k: f64,
    pub prior: Vec<f64>,
    pub discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub promise_bound: Option<f64>,
}

impl GameSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn into_game(self) -> Result<DiscountedGame> {
        let stage = StageGame::new(self.states, self.actions, self.u, self.v, self.k)?;
        let prior = Belief::new(self.prior)?;
        let chain = match self.transition {
            Some(rows) => MarkovChain::new(rows)?,
            None => MarkovChain::iid(&prior),
        };
        DiscountedGame::new(stage, chain, prior, self.discount, self.promise_bound)
    }
}

impl DiscountedGame {
    pub fn from_json(text: &str) -> Result<Self> {
        GameSpec::from_json(text)?.into_game()
    }
}
