//! Dense two-phase simplex for the small linear programs used throughout the
//! crate.
//!
//! Entering columns follow Dantzig's rule with ties broken by lowest index and
//! the leaving row is chosen by the lexicographic ratio test, so the method
//! cannot cycle and the returned vertex is a deterministic function of the
//! input.

use thiserror::Error;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("infeasible")]
    Infeasible,
    #[error("unbounded")]
    Unbounded,
    #[error("iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// A linear program over nonnegative variables.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

impl LinearProgram {
    /// Objective coefficients fix the number of variables.
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.objective.len(), "row length mismatch");
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], Relation, f64)> {
        self.rows.iter().map(|r| (r.coeffs.as_slice(), r.relation, r.rhs))
    }

    pub fn maximize(&self) -> Result<LpSolution, LpError> {
        Tableau::build(self).solve(&self.objective)
    }

    pub fn minimize(&self) -> Result<LpSolution, LpError> {
        let neg: Vec<f64> = self.objective.iter().map(|c| -c).collect();
        let mut sol = Tableau::build(self).solve(&neg)?;
        sol.value = -sol.value;
        Ok(sol)
    }
}

struct Tableau {
    m: usize,
    n: usize,
    width: usize,
    /// (m + 1) rows of `width` entries; the last row holds reduced costs and
    /// the last column holds the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
    /// Column that formed the identity for each row at the start.
    init_basis: Vec<usize>,
    artificial_start: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.objective.len();
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    let flipped = match r.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (r.coeffs.iter().map(|c| -c).collect(), flipped, -r.rhs)
                } else {
                    (r.coeffs.clone(), r.relation, r.rhs)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let artificial_start = n + n_slack;
        let width = n + n_slack + n_art + 1;
        let mut t = vec![0.0; (m + 1) * width];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (n, artificial_start);
        for (i, (coeffs, rel, rhs)) in rows.iter_mut().enumerate() {
            let row = &mut t[i * width..(i + 1) * width];
            row[..n].copy_from_slice(coeffs);
            row[width - 1] = *rhs;
            match rel {
                Relation::Le => {
                    row[s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    row[s] = -1.0;
                    s += 1;
                    row[a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
                Relation::Eq => {
                    row[a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
            }
        }
        Tableau {
            m,
            n,
            width,
            t,
            init_basis: basis.clone(),
            basis,
            artificial_start,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn solve(mut self, objective: &[f64]) -> Result<LpSolution, LpError> {
        let scale = (0..self.m).fold(1.0_f64, |acc, i| acc.max(self.rhs(i).abs()));
        if self.artificial_start < self.width - 1 {
            let mut costs = vec![0.0; self.width - 1];
            for c in costs.iter_mut().skip(self.artificial_start) {
                *c = -1.0;
            }
            self.price(&costs);
            self.iterate(self.width - 1)?;
            // The objective row's rhs entry holds the sum of the artificials.
            if self.at(self.m, self.width - 1) > FEAS_TOL * scale {
                return Err(LpError::Infeasible);
            }
            self.drive_out_artificials();
        }
        let mut costs = vec![0.0; self.width - 1];
        costs[..self.n].copy_from_slice(objective);
        self.price(&costs);
        self.iterate(self.artificial_start)?;
        let mut x = vec![0.0; self.n];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.n {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        let value = x.iter().zip(objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution { value, x })
    }

    /// Fills the reduced-cost row for `costs` under the current basis.
    fn price(&mut self, costs: &[f64]) {
        let w = self.width;
        let mut obj = vec![0.0; w];
        obj[..w - 1].copy_from_slice(costs);
        for i in 0..self.m {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * w..(i + 1) * w];
                for (o, r) in obj.iter_mut().zip(row) {
                    *o -= cb * r;
                }
            }
        }
        self.t[self.m * w..].copy_from_slice(&obj);
    }

    /// Runs simplex pivots allowing only columns below `limit` to enter.
    fn iterate(&mut self, limit: usize) -> Result<(), LpError> {
        let max_iter = 50 * (self.m + self.width) + 1000;
        for _ in 0..max_iter {
            let obj = &self.t[self.m * self.width..];
            let mut enter = None;
            let mut best = COST_TOL;
            for (j, &r) in obj[..limit].iter().enumerate() {
                if r > best {
                    best = r;
                    enter = Some(j);
                }
            }
            let Some(col) = enter else {
                return Ok(());
            };
            let row = self.leaving_row(col).ok_or(LpError::Unbounded)?;
            self.pivot(row, col);
        }
        Err(LpError::IterationLimit)
    }

    fn leaving_row(&self, col: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in 0..self.m {
            let a = self.at(i, col);
            if a <= PIVOT_TOL {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(r) => {
                    if self.lex_less(i, r, col) {
                        Some(i)
                    } else {
                        Some(r)
                    }
                }
            };
        }
        best
    }

    /// Lexicographic comparison of rows `i` and `r` scaled by their pivot
    /// entries: first the ratio, then the columns of the initial basis.
    fn lex_less(&self, i: usize, r: usize, col: usize) -> bool {
        let (ai, ar) = (self.at(i, col), self.at(r, col));
        let (qi, qr) = (self.rhs(i) / ai, self.rhs(r) / ar);
        if (qi - qr).abs() > TIE_TOL * (1.0 + qi.abs().max(qr.abs())) {
            return qi < qr;
        }
        for &j in &self.init_basis {
            let (qi, qr) = (self.at(i, j) / ai, self.at(r, j) / ar);
            if (qi - qr).abs() > TIE_TOL {
                return qi < qr;
            }
        }
        i < r
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.at(row, col);
        for v in &mut self.t[row * w..(row + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(row * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |target: &mut [f64]| {
            let f = target[col];
            if f != 0.0 {
                for (t, p) in target.iter_mut().zip(prow.iter()) {
                    *t -= f * p;
                }
                target[col] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        self.basis[row] = col;
    }

    fn drive_out_artificials(&mut self) {
        for i in 0..self.m {
            if self.basis[i] < self.artificial_start {
                continue;
            }
            let mut best = None;
            let mut mag = PIVOT_TOL;
            for j in 0..self.artificial_start {
                let a = self.at(i, j).abs();
                if a > mag {
                    mag = a;
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                self.pivot(i, j);
            }
        }
    }
}
