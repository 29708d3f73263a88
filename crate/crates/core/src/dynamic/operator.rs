//! The per-grid-point linear program behind one Bellman step.
//!
//! An atom is a posterior `μ_j`, an action `a` and a combined continuation
//! `x = s + y`, where `s = (1-δ)t` is the discounted transfer and
//! `y = δu'` the discounted promise. For a fixed `x` the best split between
//! the two is the sup-convolution `G(x) = max_{s+y=x} -k s + δV(y/δ, Mμ_j)`,
//! which is concave and piecewise linear, so the program only needs the
//! knots of `G` as columns. Incentive compatibility is a lower bound on `x`
//! and promise keeping is a single row.

use crate::error::{Error, Result};
use crate::game::{no_info_stage_value, no_info_value, Belief, ContractAtom, DiscountedGame, Side};
use crate::lp::{LinearProgram, Relation};
use crate::simplex::SimplexLattice;
use rayon::prelude::*;

use super::config::SolverConfig;
use super::surface::{concave_envelope, mix_rows, PolicyTable, ValueSurface};

const WEIGHT_TOL: f64 = 1e-10;
const SUPPORT_TOL: f64 = 1e-14;

/// Which grid beliefs may be induced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum AtomMenu {
    All,
    Degenerate,
}

/// Concave piecewise-linear `G` with the transfer/promise split at each knot.
#[derive(Debug, Clone)]
pub(crate) struct GFunction {
    x: Vec<f64>,
    g: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
}

impl GFunction {
    /// Sup-convolution of `y ↦ δV(y/δ)` with `s ↦ -k s` on `[0, cap]`.
    fn build(promises: &[f64], values: &[f64], delta: f64, k: f64, cap: f64) -> Option<Self> {
        let (mut x, mut g, mut s, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        if delta == 0.0 {
            return Some(Self {
                x: vec![0.0, cap],
                g: vec![0.0, -k * cap],
                s: vec![0.0, cap],
                y: vec![0.0, 0.0],
            });
        }
        let finite = values.iter().take_while(|v| v.is_finite()).count();
        if finite == 0 {
            return None;
        }
        let (mut cx, mut cg, mut cs, mut cy) = (delta * promises[0], delta * values[0], 0.0, delta * promises[0]);
        let mut push = |cx: f64, cg: f64, cs: f64, cy: f64| {
            x.push(cx);
            g.push(cg);
            s.push(cs);
            y.push(cy);
        };
        push(cx, cg, cs, cy);
        let mut paid = false;
        for m in 1..finite {
            let len = delta * (promises[m] - promises[m - 1]);
            let rise = delta * (values[m] - values[m - 1]);
            if !paid && rise / len < -k {
                cx += cap;
                cs += cap;
                cg -= k * cap;
                push(cx, cg, cs, cy);
                paid = true;
            }
            cx += len;
            cy += len;
            cg += rise;
            push(cx, cg, cs, cy);
        }
        if !paid {
            push(cx + cap, cg - k * cap, cs + cap, cy);
        }
        Some(Self { x, g, s, y })
    }

    /// Knots of `y ↦ δV(y/δ)` alone, with no transfer.
    fn promise_only(promises: &[f64], values: &[f64], delta: f64) -> Option<Self> {
        if delta == 0.0 {
            return Some(Self {
                x: vec![0.0],
                g: vec![0.0],
                s: vec![0.0],
                y: vec![0.0],
            });
        }
        let finite = values.iter().take_while(|v| v.is_finite()).count();
        if finite == 0 {
            return None;
        }
        let x: Vec<f64> = promises[..finite].iter().map(|u| delta * u).collect();
        Some(Self {
            g: values[..finite].iter().map(|v| delta * v).collect(),
            s: vec![0.0; finite],
            y: x.clone(),
            x,
        })
    }

    /// Knots at or above `lower`, starting with the interpolated point at
    /// `lower` itself.
    fn points_from(&self, lower: f64, mut f: impl FnMut(f64, f64, f64, f64)) {
        let n = self.x.len();
        if lower <= self.x[0] {
            for i in 0..n {
                f(self.x[i], self.g[i], self.s[i], self.y[i]);
            }
            return;
        }
        if lower > self.x[n - 1] {
            return;
        }
        let m = self.x.partition_point(|v| *v <= lower);
        if m == n {
            // lower equals the last knot.
            f(self.x[n - 1], self.g[n - 1], self.s[n - 1], self.y[n - 1]);
            return;
        }
        let w = (lower - self.x[m - 1]) / (self.x[m] - self.x[m - 1]);
        let lerp = |a: &[f64]| a[m - 1] + w * (a[m] - a[m - 1]);
        f(lower, lerp(&self.g), lerp(&self.s), lerp(&self.y));
        for i in m..n {
            f(self.x[i], self.g[i], self.s[i], self.y[i]);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct StageTerms {
    /// `(1-δ) E_μ v(a)`.
    sender: f64,
    /// `(1-δ) E_μ u(a)`.
    receiver: f64,
    /// Smallest `x` satisfying obedience.
    lower: f64,
}

#[derive(Debug, Clone, Copy)]
struct Column {
    belief: usize,
    action: usize,
    cost: f64,
    receiver: f64,
    s: f64,
    y: f64,
}

/// Result of one grid point's program.
#[derive(Debug, Clone)]
pub(crate) struct PointSolution {
    pub value: f64,
    pub atoms: Vec<ContractAtom>,
}

pub(crate) struct Operator<'a> {
    game: &'a DiscountedGame,
    config: &'a SolverConfig,
    menu: Vec<usize>,
    /// Grid weights of `Mμ_j` for every grid belief.
    next: Vec<Vec<(usize, f64)>>,
    terms: Vec<Vec<StageTerms>>,
    pub interpolation_error: f64,
}

impl<'a> Operator<'a> {
    pub fn new(game: &'a DiscountedGame, config: &'a SolverConfig, menu: AtomMenu) -> Result<Self> {
        let grid = &config.belief_grid;
        let delta = game.discount;
        let lattice = config
            .lattice_divisions
            .map(|d| SimplexLattice::new(game.stage.num_states(), d));
        let mut interpolation_error: f64 = 0.0;
        let mut next = Vec::with_capacity(grid.len());
        for b in grid {
            let nb = game.chain.step(b);
            if let Some(i) = grid.iter().position(|g| g.approx_eq(&nb, 1e-12)) {
                next.push(vec![(i, 1.0)]);
                continue;
            }
            let Some(lat) = &lattice else {
                return Err(Error::InvalidConfig(
                    "continuation belief off the grid and no lattice to interpolate".into(),
                ));
            };
            let w = lat.locate(&nb);
            for &(i, _) in &w {
                interpolation_error = interpolation_error.max(grid[i].distance(&nb));
            }
            next.push(w);
        }
        let menu = (0..grid.len())
            .filter(|&j| menu == AtomMenu::All || grid[j].is_degenerate())
            .collect();
        let stage = &game.stage;
        let terms = grid
            .iter()
            .zip(&next)
            .map(|(b, _)| {
                let best = no_info_stage_value(stage, b);
                let punish = if delta > 0.0 {
                    delta * no_info_value(game, &game.chain.step(b))
                } else {
                    0.0
                };
                (0..stage.num_actions())
                    .map(|a| {
                        let eu = stage.eval(b, a, Side::Receiver);
                        StageTerms {
                            sender: (1.0 - delta) * stage.eval(b, a, Side::Sender),
                            receiver: (1.0 - delta) * eu,
                            lower: (1.0 - delta) * (best - eu) + punish,
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            game,
            config,
            menu,
            next,
            terms,
            interpolation_error,
        })
    }

    fn continuation_row(&self, v: &ValueSurface, j: usize) -> Vec<f64> {
        mix_rows(&v.values, &self.next[j])
    }

    /// One `G` per grid belief, built from `v`.
    pub fn g_functions(&self, v: &ValueSurface) -> Vec<Vec<GFunction>> {
        let (delta, k, cap) = (self.game.discount, self.game.stage.k(), self.game.promise_bound);
        (0..self.config.belief_grid.len())
            .map(|j| {
                if !self.menu.contains(&j) {
                    return Vec::new();
                }
                let row = self.continuation_row(v, j);
                GFunction::build(&v.promises, &row, delta, k, cap).into_iter().collect()
            })
            .collect()
    }

    /// Continuations where unpaid atoms continue on `v` and paid atoms
    /// continue on `paid`.
    pub fn split_g_functions(&self, v: &ValueSurface, paid: &ValueSurface) -> Vec<Vec<GFunction>> {
        let (delta, k, cap) = (self.game.discount, self.game.stage.k(), self.game.promise_bound);
        (0..self.config.belief_grid.len())
            .map(|j| {
                if !self.menu.contains(&j) {
                    return Vec::new();
                }
                let row = self.continuation_row(v, j);
                let paid_row = self.continuation_row(paid, j);
                GFunction::promise_only(&v.promises, &row, delta)
                    .into_iter()
                    .chain(GFunction::build(&v.promises, &paid_row, delta, k, cap))
                    .collect()
            })
            .collect()
    }

    fn columns(&self, row: usize, conts: &[Vec<GFunction>]) -> Vec<Column> {
        let grid = &self.config.belief_grid;
        let prior = grid[row].probs();
        let mut cols = Vec::new();
        for &j in &self.menu {
            let inside = grid[j]
                .probs()
                .iter()
                .zip(prior)
                .all(|(p, q)| *p <= SUPPORT_TOL || *q > SUPPORT_TOL);
            if !inside {
                continue;
            }
            for (a, t) in self.terms[j].iter().enumerate() {
                for g in &conts[j] {
                    g.points_from(t.lower, |x, gx, s, y| {
                        cols.push(Column {
                            belief: j,
                            action: a,
                            cost: t.sender + gx,
                            receiver: t.receiver + x,
                            s,
                            y,
                        })
                    });
                }
            }
        }
        cols
    }

    fn decode(&self, cols: &[Column], x: &[f64]) -> Vec<ContractAtom> {
        let delta = self.game.discount;
        cols.iter()
            .zip(x)
            .filter(|(_, &w)| w > WEIGHT_TOL)
            .map(|(c, &w)| ContractAtom {
                belief: self.config.belief_grid[c.belief].clone(),
                action: c.action,
                transfer: c.s / (1.0 - delta),
                promise: if delta > 0.0 { c.y / delta } else { 0.0 },
                weight: w,
            })
            .collect()
    }

    /// Solves every promise level at belief `row`.
    pub fn solve_row(&self, row: usize, conts: &[Vec<GFunction>], promises: &[f64], policy: bool) -> Result<Vec<Option<PointSolution>>> {
        let cols = self.columns(row, conts);
        let prior = self.config.belief_grid[row].probs();
        let mut base = LinearProgram::new(cols.iter().map(|c| c.cost).collect());
        for (s, &p) in prior.iter().enumerate() {
            if p > SUPPORT_TOL {
                base.add_row(cols.iter().map(|c| c.belief_prob(self, s)).collect(), Relation::Eq, p);
            }
        }
        let free = base.maximize()?;
        let free_receiver: f64 = cols.iter().zip(&free.x).map(|(c, q)| c.receiver * q).sum();
        let pk: Vec<f64> = cols.iter().map(|c| c.receiver).collect();
        let mut out = Vec::with_capacity(promises.len());
        for &u in promises {
            if u <= free_receiver {
                out.push(Some(PointSolution {
                    value: free.value,
                    atoms: if policy { self.decode(&cols, &free.x) } else { Vec::new() },
                }));
                continue;
            }
            let mut lp = base.clone();
            lp.add_row(pk.clone(), Relation::Ge, u);
            match lp.maximize() {
                Ok(sol) => out.push(Some(PointSolution {
                    value: sol.value,
                    atoms: if policy { self.decode(&cols, &sol.x) } else { Vec::new() },
                })),
                Err(crate::lp::LpError::Infeasible) => out.push(None),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(out)
    }

    /// Applies the operator at the given rows (all rows when `None`); other
    /// rows are copied from `v`.
    pub fn step(&self, v: &ValueSurface, rows: Option<&[usize]>, policy: bool) -> Result<(ValueSurface, Option<PolicyTable>)> {
        let conts = self.g_functions(v);
        self.step_with(v, &conts, rows, policy)
    }

    pub fn step_with(
        &self,
        v: &ValueSurface,
        conts: &[Vec<GFunction>],
        rows: Option<&[usize]>,
        policy: bool,
    ) -> Result<(ValueSurface, Option<PolicyTable>)> {
        let all: Vec<usize> = (0..v.beliefs.len()).collect();
        let rows = rows.unwrap_or(&all);
        let mut out = v.clone();
        let mut table = policy.then(|| PolicyTable {
            beliefs: v.beliefs.clone(),
            promises: v.promises.clone(),
            rows: vec![vec![None; v.promises.len()]; v.beliefs.len()],
        });
        // Rows are independent LPs; the ordered collect keeps results deterministic.
        let solved: Vec<Vec<Option<PointSolution>>> = rows
            .par_iter()
            .map(|&i| self.solve_row(i, conts, &v.promises, policy))
            .collect::<Result<_>>()?;
        for (&i, sols) in rows.iter().zip(solved) {
            let raw: Vec<f64> = sols
                .iter()
                .map(|s| s.as_ref().map_or(f64::NEG_INFINITY, |p| p.value))
                .collect();
            out.values[i] = concave_envelope(&v.promises, &raw);
            if let Some(t) = table.as_mut() {
                t.rows[i] = sols.into_iter().map(|s| s.map(|p| p.atoms)).collect();
            }
        }
        Ok((out, table))
    }

    /// Value at one grid point under the given continuations.
    pub fn point_value(&self, row: usize, promise: f64, conts: &[Vec<GFunction>]) -> Result<f64> {
        let sol = self.solve_row(row, conts, &[promise], false)?;
        Ok(sol[0].as_ref().map_or(f64::NEG_INFINITY, |p| p.value))
    }
}

impl Column {
    fn belief_prob(&self, op: &Operator, state: usize) -> f64 {
        op.config.belief_grid[self.belief].probs()[state]
    }
}

/// Belief grid weights for `Mμ` used by playout and audits.
pub(crate) fn snap_belief(grid: &[Belief], b: &Belief) -> (usize, f64) {
    grid.iter()
        .enumerate()
        .map(|(i, g)| (i, g.distance(b)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
        .expect("non-empty grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sup_convolution_inserts_transfer_segment_by_slope() {
        // V with slopes 0, -0.5, -2 on knots 0, 1, 2, 3; delta = 0.5, k = 1.
        let p = [0.0, 1.0, 2.0, 3.0];
        let v = [1.0, 1.0, 0.5, -1.5];
        let g = GFunction::build(&p, &v, 0.5, 1.0, 2.0).unwrap();
        assert_eq!(g.x, vec![0.0, 0.5, 1.0, 3.0, 3.5]);
        assert_eq!(g.s, vec![0.0, 0.0, 0.0, 2.0, 2.0]);
        assert_eq!(g.g, vec![0.5, 0.5, 0.25, -1.75, -2.75]);
        // At x = 2 the best split pays 1 and promises y = 1.
        let mut hit = None;
        g.points_from(2.0, |x, gx, s, y| {
            if hit.is_none() {
                hit = Some((x, gx, s, y));
            }
        });
        assert_eq!(hit, Some((2.0, -0.75, 1.0, 1.0)));
    }

    #[test]
    fn myopic_g_is_pure_transfer() {
        let g = GFunction::build(&[0.0, 1.0], &[5.0, 4.0], 0.0, 2.0, 3.0).unwrap();
        assert_eq!(g.x, vec![0.0, 3.0]);
        assert_eq!(g.g, vec![0.0, -6.0]);
    }
}
