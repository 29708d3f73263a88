//! One-shot persuasion with transfers: optimal-action polytopes, extremal
//! beliefs, canonical transfers and concavification over the extremal set.

use serde::Serialize;

use crate::error::Result;
use crate::game::{receiver_optimal_action, Belief, Experiment, Side, StageGame};
use crate::lp::{LinearProgram, Relation};
use crate::simplex::SimplexLattice;

const DEDUP_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const ATOM_TOL: f64 = 1e-10;

/// Vertex description of `O_a`, the beliefs at which `a` is optimal for an
/// unpaid Receiver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionPolytope {
    pub action: usize,
    pub vertices: Vec<Belief>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalBeliefSet {
    pub beliefs: Vec<Belief>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticAtom {
    pub belief: Belief,
    pub weight: f64,
    pub action: usize,
    pub transfer: f64,
    pub sender_value: f64,
    pub receiver_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticSolution {
    pub value: f64,
    #[serde(skip)]
    pub experiment: Experiment,
    pub atoms: Vec<StaticAtom>,
}

/// Solves the square system `a x = b` by Gaussian elimination; `None` when
/// singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(m: usize, r: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, m: usize, r: usize, idx: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if idx.len() == r {
            f(idx);
            return;
        }
        for i in start..m {
            idx.push(i);
            rec(i + 1, m, r, idx, f);
            idx.pop();
        }
    }
    rec(0, m, r, &mut Vec::with_capacity(r), f);
}

fn push_unique(list: &mut Vec<Belief>, b: Belief) {
    if !list.iter().any(|x| x.approx_eq(&b, DEDUP_TOL)) {
        list.push(b);
    }
}

/// Orders beliefs by their last coordinate first, which sorts binary beliefs
/// by `P(θ1)`.
fn sort_beliefs(list: &mut [Belief]) {
    list.sort_by(|a, b| {
        for (x, y) in a.probs().iter().rev().zip(b.probs().iter().rev()) {
            if (x - y).abs() > DEDUP_TOL {
                return x.partial_cmp(y).unwrap();
            }
        }
        std::cmp::Ordering::Equal
    });
}

pub fn action_polytope(game: &StageGame, action: usize) -> ActionPolytope {
    let n = game.num_states();
    let u = game.u();
    // Halfspaces g . μ >= 0.
    let mut halfspaces: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for (other, row) in u.iter().enumerate() {
        if other != action {
            halfspaces.push((0..n).map(|s| u[action][s] - row[s]).collect());
        }
    }
    let mut vertices = Vec::new();
    combinations(halfspaces.len(), n - 1, &mut |active: &[usize]| {
        let mut a: Vec<Vec<f64>> = active.iter().map(|&i| halfspaces[i].clone()).collect();
        let mut b = vec![0.0; n - 1];
        a.push(vec![1.0; n]);
        b.push(1.0);
        let Some(x) = solve_linear(a, b) else {
            return;
        };
        if halfspaces
            .iter()
            .all(|g| g.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() >= -FEAS_TOL)
        {
            push_unique(&mut vertices, Belief::normalized(x));
        }
    });
    sort_beliefs(&mut vertices);
    ActionPolytope { action, vertices }
}

pub fn extremal_beliefs(game: &StageGame) -> ExtremalBeliefSet {
    let n = game.num_states();
    let mut beliefs: Vec<Belief> = (0..n).map(|s| Belief::degenerate(n, s)).collect();
    for a in 0..game.num_actions() {
        for v in action_polytope(game, a).vertices {
            push_unique(&mut beliefs, v);
        }
    }
    sort_beliefs(&mut beliefs);
    ExtremalBeliefSet { beliefs }
}

/// Sender's preferred action at `belief` when paying Receiver exactly the
/// utility lost relative to the unpaid optimum.
pub fn canonical_transfer(game: &StageGame, belief: &Belief) -> (usize, f64) {
    let star = receiver_optimal_action(game, belief);
    let u_star = game.eval(belief, star, Side::Receiver);
    let mut best = (star, 0.0);
    let mut best_score = game.eval(belief, star, Side::Sender);
    for a in 0..game.num_actions() {
        let gap = (u_star - game.eval(belief, a, Side::Receiver)).max(0.0);
        let t = if gap < 1e-12 { 0.0 } else { gap };
        let score = game.eval(belief, a, Side::Sender) - game.k() * t;
        if score > best_score + 1e-12 {
            best = (a, t);
            best_score = score;
        }
    }
    best
}

/// `V^t(μ)`, Sender's payoff from the canonical transfer at `belief`.
pub fn transfer_augmented_value(game: &StageGame, belief: &Belief) -> f64 {
    let (a, t) = canonical_transfer(game, belief);
    game.eval(belief, a, Side::Sender) - game.k() * t
}

/// `V0(μ)`, Sender's payoff when Receiver plays the unpaid optimum.
pub fn no_transfer_value(game: &StageGame, belief: &Belief) -> f64 {
    game.eval(belief, receiver_optimal_action(game, belief), Side::Sender)
}

/// Maximizes `Σ p_j f_j` over mixtures of `points` averaging to `prior`.
/// Returns the value and the weights.
pub(crate) fn concavify_on(points: &[Belief], values: &[f64], prior: &Belief) -> Result<(f64, Vec<f64>)> {
    let mut lp = LinearProgram::new(values.to_vec());
    for s in 0..prior.len() {
        lp.add_row(points.iter().map(|b| b.probs()[s]).collect(), Relation::Eq, prior.probs()[s]);
    }
    let sol = lp.maximize()?;
    Ok((sol.value, sol.x))
}

pub fn k_cavify(game: &StageGame, prior: &Belief) -> Result<StaticSolution> {
    let points = extremal_beliefs(game).beliefs;
    let values: Vec<f64> = points.iter().map(|b| transfer_augmented_value(game, b)).collect();
    let (_, weights) = concavify_on(&points, &values, prior)?;
    let atoms: Vec<StaticAtom> = points
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w > ATOM_TOL)
        .map(|(b, &w)| {
            let (a, t) = canonical_transfer(game, b);
            StaticAtom {
                belief: b.clone(),
                weight: w,
                action: a,
                transfer: t,
                sender_value: game.eval(b, a, Side::Sender) - game.k() * t,
                receiver_value: game.eval(b, a, Side::Receiver) + t,
            }
        })
        .collect();
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    let value = atoms.iter().map(|a| a.weight * a.sender_value).sum::<f64>() / total;
    let experiment = Experiment {
        atoms: atoms.iter().map(|a| (a.belief.clone(), a.weight / total)).collect(),
    };
    Ok(StaticSolution {
        value,
        experiment,
        atoms,
    })
}

/// `cav(V0)(prior)`: the value of persuasion alone.
pub fn persuasion_only_value(game: &StageGame, prior: &Belief) -> Result<f64> {
    let points = extremal_beliefs(game).beliefs;
    let values: Vec<f64> = points.iter().map(|b| no_transfer_value(game, b)).collect();
    Ok(concavify_on(&points, &values, prior)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub belief: Belief,
    pub v0: f64,
    pub vt: f64,
    pub cav_v0: f64,
    pub cav_vt: f64,
}

/// Tabulates `V0`, `V^t` and both envelopes on a simplex lattice.
pub fn envelope_table(game: &StageGame, divisions: usize) -> Result<Vec<EnvelopeRow>> {
    let lattice = SimplexLattice::new(game.num_states(), divisions);
    let points = extremal_beliefs(game).beliefs;
    let v0: Vec<f64> = points.iter().map(|b| no_transfer_value(game, b)).collect();
    let vt: Vec<f64> = points.iter().map(|b| transfer_augmented_value(game, b)).collect();
    lattice
        .points()
        .iter()
        .map(|b| {
            Ok(EnvelopeRow {
                belief: b.clone(),
                v0: no_transfer_value(game, b),
                vt: transfer_augmented_value(game, b),
                cav_v0: concavify_on(&points, &v0, b)?.0,
                cav_vt: concavify_on(&points, &vt, b)?.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{aligned_binary, appendix_d_stage};
    use crate::game::bayes_plausible;

    fn p1(list: &[Belief]) -> Vec<f64> {
        list.iter().map(|b| b.probs()[1]).collect()
    }

    fn assert_close_list(got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn polytopes() {
        let g = appendix_d_stage(1.0);
        assert_close_list(&p1(&action_polytope(&g, 0).vertices), &[0.0, 1.0 / 3.0]);
        assert_close_list(&p1(&action_polytope(&g, 2).vertices), &[1.0 / 3.0, 2.0 / 3.0]);
        assert_close_list(&p1(&action_polytope(&g, 1).vertices), &[2.0 / 3.0, 1.0]);

        let dominant = StageGame::from_matrices(
            vec![vec![2.0, 2.0, 2.0], vec![0.0, 1.0, 0.0]],
            vec![vec![0.0; 3], vec![0.0; 3]],
            1.0,
        )
        .unwrap();
        assert_eq!(action_polytope(&dominant, 0).vertices.len(), 3);
        assert!(action_polytope(&dominant, 1).vertices.is_empty());
        assert_eq!(extremal_beliefs(&dominant).beliefs.len(), 3);
    }

    #[test]
    fn extremal_sets() {
        let g = appendix_d_stage(1.0);
        assert_close_list(&p1(&extremal_beliefs(&g).beliefs), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_close_list(&p1(&extremal_beliefs(&aligned_binary(1.0)).beliefs), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn canonical_transfers() {
        let g = appendix_d_stage(1.0);
        let (a, t) = canonical_transfer(&g, &Belief::binary(1.0 / 3.0));
        assert_eq!(a, 1);
        assert!((t - 1.0).abs() < 1e-12);
        assert_eq!(canonical_transfer(&g, &Belief::binary(2.0 / 3.0)), (1, 0.0));
        assert!((transfer_augmented_value(&g, &Belief::binary(1.0 / 3.0)) - 1.5).abs() < 1e-12);
        assert!((transfer_augmented_value(&g, &Belief::binary(2.0 / 3.0)) - 2.5).abs() < 1e-12);
        assert_eq!(transfer_augmented_value(&g, &Belief::binary(0.0)), 0.0);
        let pricey = appendix_d_stage(1e9);
        for p in [0.1, 0.3, 0.5, 0.9] {
            let b = Belief::binary(p);
            let (a, t) = canonical_transfer(&pricey, &b);
            assert_eq!(t, 0.0);
            assert_eq!(a, receiver_optimal_action(&pricey, &b));
        }
    }

    #[test]
    fn appendix_d_cavification() {
        let g = appendix_d_stage(1.0);
        let prior = Belief::binary(1.0 / 6.0);
        let sol = k_cavify(&g, &prior).unwrap();
        assert!((sol.value - 0.75).abs() < 1e-9);
        assert_eq!(sol.atoms.len(), 2);
        assert!(bayes_plausible(&sol.experiment, &prior));
        assert_close_list(&p1(&sol.atoms.iter().map(|a| a.belief.clone()).collect::<Vec<_>>()), &[0.0, 1.0 / 3.0]);
        assert!(sol.atoms.iter().all(|a| (a.weight - 0.5).abs() < 1e-9));
        assert_eq!(sol.atoms[1].action, 1);
        assert!((sol.atoms[1].transfer - 1.0).abs() < 1e-12);
        assert!((persuasion_only_value(&g, &prior).unwrap() - 0.625).abs() < 1e-9);
        let pricey = k_cavify(&appendix_d_stage(1e6), &prior).unwrap();
        assert!((pricey.value - 0.625).abs() < 1e-9);
        for s in 0..2 {
            let d = Belief::degenerate(2, s);
            let sol = k_cavify(&g, &d).unwrap();
            assert!((sol.value - transfer_augmented_value(&g, &d)).abs() < 1e-12);
        }
    }

    #[test]
    fn persuasion_only_examples() {
        // Single ride: accept is worth c = 1 to Sender.
        let ride = StageGame::from_matrices(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            1.0,
        )
        .unwrap();
        let v = persuasion_only_value(&ride, &Belief::binary(0.3)).unwrap();
        assert!((v - 0.6).abs() < 1e-9);
        // Aligned preferences are already concave: full revelation is best.
        let g = aligned_binary(1.0);
        let v = persuasion_only_value(&g, &Belief::binary(0.3)).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn envelope_rows() {
        let g = appendix_d_stage(1.0);
        let rows = envelope_table(&g, 6).unwrap();
        assert_eq!(rows.len(), 7);
        let at = rows.iter().find(|r| (r.belief.probs()[1] - 1.0 / 6.0).abs() < 1e-12).unwrap();
        assert!((at.cav_vt - 0.75).abs() < 1e-9);
        assert!((at.cav_v0 - 0.625).abs() < 1e-9);
        assert!(rows.iter().all(|r| r.cav_vt >= r.vt - 1e-9 && r.cav_v0 >= r.v0 - 1e-9));
    }
}
