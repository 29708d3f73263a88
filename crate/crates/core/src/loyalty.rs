//! Repeated ride game: `n` independent rides per period, each worth `c_i` to
//! Sender when accepted, while the driver only wants to accept good rides.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamic::{right_derivative, solve, SolverConfig};
use crate::error::{Error, Result};
use crate::game::{Belief, DiscountedGame, StageGame};

/// Largest supported number of rides; the product game has `2^n` states.
pub const MAX_RIDES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RideGame {
    pub n: usize,
    pub c: Vec<f64>,
    pub mu0: Vec<f64>,
    pub k: f64,
    pub discount: f64,
}

impl RideGame {
    pub fn new(c: Vec<f64>, mu0: Vec<f64>, k: f64, discount: f64) -> Result<Self> {
        let ride = Self { n: c.len(), c, mu0, k, discount };
        ride.validate()?;
        Ok(ride)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.c.len() != self.n || self.mu0.len() != self.n {
            return Err(Error::InvalidGame("c and mu0 must both have n entries".into()));
        }
        if self.c.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidGame("ride values must be positive".into()));
        }
        if self.mu0.iter().any(|m| !(*m > 0.0 && *m < 0.5)) {
            return Err(Error::InvalidGame("ride priors must lie in (0, 1/2)".into()));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidGame("k must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::OutOfRange { what: "discount", value: self.discount, lo: 0.0, hi: 1.0 });
        }
        Ok(())
    }

    /// Receiver's no-information value `Σ (1 - μ0_i)`.
    pub fn outside_option(&self) -> f64 {
        self.mu0.iter().map(|m| 1.0 - m).sum()
    }
}

/// Product game over `2^n` states and actions; bit `i` of an index is ride
/// `i` (state: good ride, action: accept).
pub fn build_ride_game(ride: &RideGame) -> Result<DiscountedGame> {
    ride.validate()?;
    if ride.n > MAX_RIDES {
        return Err(Error::TooLarge(ride.n));
    }
    let size = 1usize << ride.n;
    let bit = |x: usize, i: usize| (x >> i) & 1;
    let mut u = vec![vec![0.0; size]; size];
    let mut v = vec![vec![0.0; size]; size];
    for a in 0..size {
        for s in 0..size {
            u[a][s] = (0..ride.n).filter(|&i| bit(a, i) == bit(s, i)).count() as f64;
            v[a][s] = (0..ride.n).filter(|&i| bit(a, i) == 1).map(|i| ride.c[i]).sum();
        }
    }
    let label = |x: usize, on: &str, off: &str| {
        (0..ride.n).map(|i| if bit(x, i) == 1 { on } else { off }).collect::<Vec<_>>().join("")
    };
    let states = (0..size).map(|s| label(s, "G", "B")).collect();
    let actions = (0..size).map(|a| label(a, "Y", "N")).collect();
    let stage = StageGame::new(states, actions, u, v, ride.k)?;
    let prior = Belief::new(
        (0..size)
            .map(|s| (0..ride.n).map(|i| if bit(s, i) == 1 { ride.mu0[i] } else { 1.0 - ride.mu0[i] }).product())
            .collect(),
    )?;
    DiscountedGame::iid(stage, prior, ride.discount)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub slope: f64,
    /// `None` for the unbounded terminal segment.
    pub length: Option<f64>,
    /// Ride whose information is released along this segment.
    pub ride: Option<usize>,
}

/// Per-period Sender value against Receiver surplus above the no-information
/// baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frontier {
    pub origin: f64,
    pub segments: Vec<Segment>,
}

impl Frontier {
    /// `(surplus, value)` at the start of every segment.
    pub fn knots(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, self.origin)];
        for s in &self.segments {
            let Some(len) = s.length else { break };
            let (x, y) = *out.last().unwrap();
            out.push((x + len, y + s.slope * len));
        }
        out
    }

    pub fn value(&self, surplus: f64) -> f64 {
        let mut x = 0.0;
        let mut y = self.origin;
        for s in &self.segments {
            let len = s.length.unwrap_or(f64::INFINITY);
            let step = (surplus - x).clamp(0.0, len);
            y += s.slope * step;
            x += step;
        }
        y
    }

    /// Right derivative at `surplus`.
    pub fn slope(&self, surplus: f64) -> f64 {
        let mut x = 0.0;
        for s in &self.segments {
            match s.length {
                Some(len) if surplus >= x + len => x += len,
                _ => return s.slope,
            }
        }
        unreachable!("frontier ends with an unbounded segment")
    }

    /// Surplus at which the `-k` segment begins.
    pub fn knee(&self) -> f64 {
        self.segments.iter().filter_map(|s| s.length).sum()
    }
}

fn cheap_order(ride: &RideGame) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ride.n).filter(|&i| ride.c[i] < ride.k).collect();
    order.sort_by(|&a, &b| ride.c[a].partial_cmp(&ride.c[b]).unwrap().then(a.cmp(&b)));
    order
}

/// Information in ride `i` buys Receiver surplus at price `c_i` up to `μ0_i`;
/// after the cheap rides are exhausted, surplus costs `k` per unit.
pub fn pareto_frontier(ride: &RideGame) -> Frontier {
    let origin = ride.c.iter().zip(&ride.mu0).map(|(c, m)| 2.0 * m * c).sum();
    let mut segments: Vec<Segment> = cheap_order(ride)
        .into_iter()
        .map(|i| Segment { slope: -ride.c[i], length: Some(ride.mu0[i]), ride: Some(i) })
        .collect();
    segments.push(Segment { slope: -ride.k, length: None, ride: None });
    Frontier { origin, segments }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierSchedule {
    /// Promised surplus at which each ride switches to full information.
    pub thresholds: Vec<f64>,
    /// Rides in promotion order.
    pub order: Vec<usize>,
    /// Set when no ride is cheaper than transfers, so the frontier is a single
    /// `-k` line and thresholds are empty.
    pub no_dynamic_incentives: bool,
}

pub fn tier_schedule(ride: &RideGame) -> TierSchedule {
    let order = cheap_order(ride);
    if order.is_empty() {
        return TierSchedule { thresholds: Vec::new(), order, no_dynamic_incentives: true };
    }
    let mut thresholds = vec![0.0; ride.n];
    let mut acc = 0.0;
    for &i in &order {
        acc += ride.mu0[i];
        thresholds[i] = acc;
    }
    let mut full_order = order.clone();
    for i in 0..ride.n {
        if ride.c[i] >= ride.k {
            thresholds[i] = acc;
            full_order.push(i);
        }
    }
    TierSchedule { thresholds, order: full_order, no_dynamic_incentives: false }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoyaltyRecord {
    pub period: usize,
    pub good: Vec<bool>,
    /// Posterior that each ride is good.
    pub beliefs: Vec<f64>,
    pub accepted: Vec<bool>,
    pub transfers: Vec<f64>,
    pub promoted: Vec<bool>,
    /// Promised surplus at the start of the period.
    pub ledger: f64,
    pub sender_flow: f64,
    pub receiver_flow: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LoyaltyHistory {
    pub records: Vec<LoyaltyRecord>,
    /// First period run under full information, per ride.
    pub promotion_times: Vec<Option<usize>>,
}

impl LoyaltyHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Periods in which some good ride was declined.
    pub fn good_rides_declined(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.good.iter().zip(&r.accepted).any(|(g, a)| *g && !*a))
            .count()
    }

    /// Payments made on rides not yet promoted.
    pub fn transfers_before_promotion(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.transfers.iter().zip(&r.promoted).filter(|(t, p)| **t > 0.0 && !**p).count())
            .sum()
    }

    /// Acceptance rate of bad rides for ride `i` before its promotion.
    pub fn pre_promotion_bad_acceptance(&self, i: usize) -> Option<f64> {
        let (mut hits, mut total) = (0usize, 0usize);
        for r in self.records.iter().filter(|r| !r.promoted[i] && !r.good[i]) {
            total += 1;
            hits += r.accepted[i] as usize;
        }
        (total > 0).then(|| hits as f64 / total as f64)
    }

    /// Whether cheaper rides are promoted no later than dearer ones.
    pub fn promotions_monotone(&self, ride: &RideGame) -> bool {
        let schedule = tier_schedule(ride);
        schedule.order.windows(2).all(|w| match (self.promotion_times[w[0]], self.promotion_times[w[1]]) {
            (Some(a), Some(b)) => a <= b,
            (None, Some(_)) => false,
            _ => true,
        })
    }
}

/// Plays the tiered contract. Unpromoted rides get the static signal (posterior
/// 1/2 or 0); rides worth more than `k` are also accepted at posterior 0 for
/// free, each such acceptance adding `(1 - δ) / δ` to the promise ledger. A
/// ride is promoted to full information, with canonical payments, from the
/// first period that opens with the ledger above its threshold.
pub fn simulate_loyalty(ride: &RideGame, seed: u64, horizon: usize) -> Result<LoyaltyHistory> {
    ride.validate()?;
    if !ride.c.iter().any(|c| *c > ride.k) {
        return Err(Error::InvalidConfig("loyalty contracts need some ride worth more than k".into()));
    }
    if ride.discount == 0.0 {
        return Err(Error::InvalidConfig("loyalty contracts need a positive discount".into()));
    }
    let schedule = tier_schedule(ride);
    let thresholds = if schedule.no_dynamic_incentives { vec![0.0; ride.n] } else { schedule.thresholds };
    let increment = (1.0 - ride.discount) / ride.discount;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = LoyaltyHistory { records: Vec::with_capacity(horizon), promotion_times: vec![None; ride.n] };
    let mut ledger = 0.0;
    for period in 0..horizon {
        let promoted: Vec<bool> = (0..ride.n)
            .map(|i| match history.promotion_times[i] {
                Some(_) => true,
                None if ledger > thresholds[i] => {
                    history.promotion_times[i] = Some(period);
                    true
                }
                None => false,
            })
            .collect();
        let mut rec = LoyaltyRecord {
            period,
            good: Vec::with_capacity(ride.n),
            beliefs: Vec::with_capacity(ride.n),
            accepted: Vec::with_capacity(ride.n),
            transfers: Vec::with_capacity(ride.n),
            promoted,
            ledger,
            sender_flow: 0.0,
            receiver_flow: 0.0,
        };
        for i in 0..ride.n {
            let (c, m) = (ride.c[i], ride.mu0[i]);
            let good = rng.random_bool(m);
            let (belief, accept, transfer) = if rec.promoted[i] {
                let pay = if good || c <= ride.k { 0.0 } else { 1.0 };
                (if good { 1.0 } else { 0.0 }, good || c > ride.k, pay)
            } else {
                let pooled = good || rng.random_bool(m / (1.0 - m));
                if pooled {
                    (0.5, true, 0.0)
                } else if c > ride.k {
                    ledger += increment;
                    (0.0, true, 0.0)
                } else {
                    (0.0, false, 0.0)
                }
            };
            if good && !accept {
                return Err(Error::InvalidConfig(format!("ride {i} declined while good in period {period}")));
            }
            rec.sender_flow += if accept { c } else { 0.0 } - ride.k * transfer;
            rec.receiver_flow += if accept == good { 1.0 } else { 0.0 } + transfer;
            rec.good.push(good);
            rec.beliefs.push(belief);
            rec.accepted.push(accept);
            rec.transfers.push(transfer);
        }
        history.records.push(rec);
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    /// Solver value at promise 0.
    pub value_at_zero: f64,
    pub origin: f64,
    /// `|value_at_zero - origin|`, reported only when repeating the static
    /// signal is optimal (`c <= k`).
    pub value_deviation: Option<f64>,
    /// `(surplus, solver slope, closed-form slope)` samples on `[0, μ0)`.
    pub slopes: Vec<(f64, f64, f64)>,
    pub max_slope_deviation: f64,
}

/// Solver configuration with promise knots at the frontier kinks.
pub fn crosscheck_config(ride: &RideGame, belief_divisions: usize, promise_points: usize) -> Result<SolverConfig> {
    let game = build_ride_game(ride)?;
    let base = ride.outside_option();
    let kinks: Vec<f64> = std::iter::once(base).chain(pareto_frontier(ride).knots().iter().map(|(x, _)| base + x)).collect();
    SolverConfig::with_kinks(&game, belief_divisions, promise_points, &kinks)
}

/// Solves the single-ride game and compares its frontier with the closed form.
pub fn crosscheck(ride: &RideGame, config: &SolverConfig) -> Result<CrosscheckReport> {
    if ride.n != 1 {
        return Err(Error::InvalidConfig("crosscheck needs a single ride".into()));
    }
    let game = build_ride_game(ride)?;
    let sol = solve(&game, config)?;
    let frontier = pareto_frontier(ride);
    let base = ride.outside_option();
    let value_at_zero = sol.value_at_prior(&game, 0.0)?;
    let value_deviation = (ride.c[0] <= ride.k).then(|| (value_at_zero - frontier.origin).abs());
    let mut slopes = Vec::new();
    for f in [0.0, 0.25, 0.5, 0.75] {
        let s = f * ride.mu0[0];
        let got = right_derivative(&sol.surface, base + s, &game.prior)?;
        slopes.push((s, got, frontier.slope(s)));
    }
    let max_slope_deviation = slopes.iter().map(|(_, a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(CrosscheckReport { value_at_zero, origin: frontier.origin, value_deviation, slopes, max_slope_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{full_info_stage_value, no_info_stage_value};

    fn figure1() -> RideGame {
        RideGame::new(vec![0.5, 0.75, 1.25], vec![0.1, 0.2, 0.3], 1.0, 0.9).unwrap()
    }

    #[test]
    fn product_game_shape() {
        let g = build_ride_game(&RideGame::new(vec![1.0], vec![0.3], 1.0, 0.9).unwrap()).unwrap();
        assert_eq!(g.stage.u(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(g.stage.v(), &[vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert!((g.prior.probs()[1] - 0.3).abs() < 1e-15);

        let ride = RideGame::new(vec![1.0, 2.0], vec![0.3, 0.4], 1.0, 0.9).unwrap();
        let g = build_ride_game(&ride).unwrap();
        assert_eq!(g.stage.num_states(), 4);
        assert_eq!(g.stage.u()[3][1], 1.0);
        assert_eq!(g.stage.v()[3][0], 3.0);
        assert!((g.prior.probs()[3] - 0.12).abs() < 1e-15);

        let big = RideGame::new(vec![1.0; 4], vec![0.2; 4], 1.0, 0.9).unwrap();
        assert_eq!(build_ride_game(&big).unwrap_err(), Error::TooLarge(4));
        assert!(RideGame::new(vec![1.0], vec![0.5], 1.0, 0.9).is_err());
    }

    #[test]
    fn figure1_frontier() {
        let f = pareto_frontier(&figure1());
        let slopes: Vec<f64> = f.segments.iter().map(|s| s.slope).collect();
        assert_eq!(slopes, vec![-0.5, -0.75, -1.0]);
        assert_eq!(f.knots().len(), 3);
        assert!((f.origin - (0.1 + 0.3 + 0.75)).abs() < 1e-12);
        assert!((f.knee() - 0.3).abs() < 1e-12);
        assert_eq!(f.slope(0.05), -0.5);
        assert_eq!(f.slope(0.1), -0.75);
        assert_eq!(f.slope(5.0), -1.0);
    }

    #[test]
    fn segment_length_is_full_information_gain() {
        let ride = RideGame::new(vec![0.4], vec![0.35], 1.0, 0.9).unwrap();
        let g = build_ride_game(&ride).unwrap();
        let gain = full_info_stage_value(&g.stage, &g.prior) - no_info_stage_value(&g.stage, &g.prior);
        assert!((pareto_frontier(&ride).segments[0].length.unwrap() - gain).abs() < 1e-12);
        let dear = RideGame::new(vec![2.0], vec![0.35], 1.0, 0.9).unwrap();
        assert_eq!(pareto_frontier(&dear).segments.len(), 1);
    }

    #[test]
    fn schedules() {
        let s = tier_schedule(&figure1());
        assert!(!s.no_dynamic_incentives);
        assert_eq!(s.order, vec![0, 1, 2]);
        for (got, want) in s.thresholds.iter().zip([0.1, 0.3, 0.3]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(tier_schedule(&RideGame::new(vec![1.0, 2.0], vec![0.2, 0.2], 1.0, 0.9).unwrap()).no_dynamic_incentives);
        let one = tier_schedule(&RideGame::new(vec![0.5], vec![0.2], 1.0, 0.9).unwrap());
        assert_eq!(one.thresholds, vec![0.2]);
    }

    #[test]
    fn simulation_invariants() {
        let ride = figure1();
        assert!(simulate_loyalty(&ride, 1, 0).unwrap().is_empty());
        let h = simulate_loyalty(&ride, 7, 2000).unwrap();
        assert_eq!(h.good_rides_declined(), 0);
        assert_eq!(h.transfers_before_promotion(), 0);
        assert!(h.promotions_monotone(&ride));
        assert!(h.promotion_times.iter().all(Option::is_some));

        let single = RideGame::new(vec![2.0], vec![0.3], 1.0, 0.99).unwrap();
        let h = simulate_loyalty(&single, 3, 100_000).unwrap();
        assert_eq!(h.good_rides_declined(), 0);
        assert_eq!(h.pre_promotion_bad_acceptance(0), Some(1.0));
        let post: Vec<_> = h.records.iter().filter(|r| r.promoted[0] && !r.good[0]).collect();
        assert!(!post.is_empty() && post.iter().all(|r| r.transfers[0] == 1.0 && r.accepted[0]));

        let cheap = RideGame::new(vec![0.5], vec![0.3], 1.0, 0.9).unwrap();
        assert!(simulate_loyalty(&cheap, 0, 10).is_err());
    }

    #[test]
    fn crosscheck_cheap_ride() {
        let ride = RideGame::new(vec![0.5], vec![0.25], 1.0, 0.9).unwrap();
        let config = crosscheck_config(&ride, 8, 48).unwrap();
        let r = crosscheck(&ride, &config).unwrap();
        assert!(r.max_slope_deviation < 1e-2, "{r:?}");
        assert!(r.value_deviation.unwrap() < 1e-4, "{r:?}");
    }

    #[test]
    fn crosscheck_dear_ride() {
        let ride = RideGame::new(vec![2.0], vec![0.25], 1.0, 0.9).unwrap();
        let config = crosscheck_config(&ride, 8, 48).unwrap();
        let r = crosscheck(&ride, &config).unwrap();
        assert!(r.value_deviation.is_none());
        assert!(r.slopes.iter().all(|(_, got, _)| (got + 1.0).abs() < 1e-2), "{r:?}");
    }
}
