use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Belief, ContractAtom};
use crate::simplex::SimplexLattice;

const KNOT_TOL: f64 = 1e-12;

/// Sender's value `V(u, μ)` on a promise × belief grid, piecewise linear in
/// the promise. Infeasible promises carry `-inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueSurface {
    pub beliefs: Vec<Belief>,
    pub promises: Vec<f64>,
    /// `values[belief][promise]`.
    pub values: Vec<Vec<f64>>,
    /// Divisions of the simplex lattice occupying the first grid slots, used
    /// to interpolate at off-grid beliefs.
    #[serde(skip)]
    pub lattice_divisions: Option<usize>,
}

impl ValueSurface {
    pub fn constant(beliefs: Vec<Belief>, promises: Vec<f64>, c: f64, lattice_divisions: Option<usize>) -> Self {
        let values = vec![vec![c; promises.len()]; beliefs.len()];
        Self {
            beliefs,
            promises,
            values,
            lattice_divisions,
        }
    }

    pub fn belief_index(&self, belief: &Belief) -> Option<usize> {
        self.beliefs.iter().position(|b| b.approx_eq(belief, 1e-9))
    }

    /// Grid weights representing `belief`: the matching grid point, else
    /// barycentric weights on the lattice.
    pub fn weights(&self, belief: &Belief) -> Result<Vec<(usize, f64)>> {
        if let Some(i) = self.belief_index(belief) {
            return Ok(vec![(i, 1.0)]);
        }
        match self.lattice_divisions {
            Some(d) => Ok(SimplexLattice::new(belief.len(), d).locate(belief)),
            None => Err(Error::InvalidBelief(format!("{:?} is not on the belief grid", belief.probs()))),
        }
    }

    /// Value row at an arbitrary belief, interpolated across the grid.
    pub fn row_at(&self, belief: &Belief) -> Result<Vec<f64>> {
        let w = self.weights(belief)?;
        Ok(mix_rows(&self.values, &w))
    }

    /// Linear interpolation along the promise axis.
    pub fn value(&self, belief_index: usize, u: f64) -> Result<f64> {
        interpolate(&self.promises, &self.values[belief_index], u)
    }

    pub fn promise_index(&self, u: f64) -> Option<usize> {
        let scale = 1.0 + u.abs();
        self.promises.iter().position(|p| (p - u).abs() <= KNOT_TOL * scale)
    }

    /// Largest absolute difference over all finite entries; mismatched
    /// infinities count as infinite.
    pub fn distance(&self, other: &ValueSurface) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            d = d.max(row_distance(a, b));
        }
        d
    }

    /// Every right slope at every belief.
    pub fn slopes(&self, belief_index: usize) -> Vec<f64> {
        segment_slopes(&self.promises, &self.values[belief_index])
    }

    /// Extremes of the finite segment slopes and the largest increase of the
    /// slope between neighbours (positive means a concavity breach).
    pub fn shape(&self) -> SurfaceShape {
        let mut shape = SurfaceShape {
            min_slope: f64::INFINITY,
            max_slope: f64::NEG_INFINITY,
            max_convexity: f64::NEG_INFINITY,
        };
        for i in 0..self.beliefs.len() {
            let slopes: Vec<f64> = self.slopes(i).into_iter().filter(|s| s.is_finite()).collect();
            for s in &slopes {
                shape.min_slope = shape.min_slope.min(*s);
                shape.max_slope = shape.max_slope.max(*s);
            }
            for w in slopes.windows(2) {
                shape.max_convexity = shape.max_convexity.max(w[1] - w[0]);
            }
        }
        shape
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceShape {
    pub min_slope: f64,
    pub max_slope: f64,
    pub max_convexity: f64,
}

impl SurfaceShape {
    /// Concave, nonincreasing, and never steeper than `-k`, up to `tol`.
    pub fn is_valid(&self, k: f64, tol: f64) -> bool {
        self.max_convexity <= tol && self.max_slope <= tol && self.min_slope >= -k - tol
    }
}

pub(crate) fn row_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| {
        if x == y {
            m
        } else {
            m.max((x - y).abs())
        }
    })
}

pub(crate) fn mix_rows(values: &[Vec<f64>], weights: &[(usize, f64)]) -> Vec<f64> {
    let len = values[weights[0].0].len();
    let mut out = vec![0.0; len];
    for &(i, w) in weights {
        for (o, v) in out.iter_mut().zip(&values[i]) {
            *o += w * v;
        }
    }
    out
}

fn segment_slopes(promises: &[f64], values: &[f64]) -> Vec<f64> {
    promises
        .windows(2)
        .zip(values.windows(2))
        .map(|(p, v)| slope(p[0], p[1], v[0], v[1]))
        .collect()
}

fn slope(u0: f64, u1: f64, v0: f64, v1: f64) -> f64 {
    if v1 == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        (v1 - v0) / (u1 - u0)
    }
}

pub(crate) fn interpolate(promises: &[f64], values: &[f64], u: f64) -> Result<f64> {
    let (lo, hi) = (promises[0], promises[promises.len() - 1]);
    let eps = KNOT_TOL * (1.0 + u.abs());
    if u < lo - eps || u > hi + eps {
        return Err(Error::OutOfRange {
            what: "promise",
            value: u,
            lo,
            hi,
        });
    }
    let m = promises.partition_point(|p| *p <= u).clamp(1, promises.len() - 1);
    let (u0, u1) = (promises[m - 1], promises[m]);
    let (v0, v1) = (values[m - 1], values[m]);
    if (u - u0).abs() <= eps {
        return Ok(v0);
    }
    if (u - u1).abs() <= eps {
        return Ok(v1);
    }
    if v0 == f64::NEG_INFINITY || v1 == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let w = (u - u0) / (u1 - u0);
    Ok(v0 + w * (v1 - v0))
}

/// Slope of the piecewise-linear row on the segment to the right of `u`; at
/// the last knot, the slope of the final segment.
pub(crate) fn right_slope(promises: &[f64], values: &[f64], u: f64) -> Result<f64> {
    let last = promises.len() - 1;
    let (lo, hi) = (promises[0], promises[last]);
    let eps = KNOT_TOL * (1.0 + u.abs());
    if u < lo - eps || u > hi + eps {
        return Err(Error::OutOfRange {
            what: "promise",
            value: u,
            lo,
            hi,
        });
    }
    let mut m = promises.partition_point(|p| *p <= u + eps);
    m = m.clamp(1, last);
    Ok(slope(promises[m - 1], promises[m], values[m - 1], values[m]))
}

/// Right derivative of `V(·, belief)` at promise `u`. `belief` must lie on
/// the surface's belief grid.
pub fn right_derivative(v: &ValueSurface, u: f64, belief: &Belief) -> Result<f64> {
    let i = v
        .belief_index(belief)
        .ok_or_else(|| Error::InvalidBelief(format!("{:?} is not on the belief grid", belief.probs())))?;
    right_slope(&v.promises, &v.values[i], u)
}

/// Upper concave envelope of the finite part of a row, evaluated at the
/// knots. Entries that are `-inf` stay `-inf`.
pub(crate) fn concave_envelope(promises: &[f64], values: &[f64]) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = promises
        .iter()
        .zip(values)
        .filter(|(_, v)| v.is_finite())
        .map(|(u, v)| (*u, *v))
        .collect();
    if pts.len() <= 2 {
        return values.to_vec();
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // Drop b when it lies on or below the chord from a to p.
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out = values.to_vec();
    let mut h = 0;
    for (o, &u) in out.iter_mut().zip(promises) {
        if !o.is_finite() {
            continue;
        }
        while h + 1 < hull.len() && hull[h + 1].0 < u {
            h += 1;
        }
        if h + 1 == hull.len() || (u - hull[h].0).abs() == 0.0 {
            *o = o.max(hull[h].1);
            continue;
        }
        let (a, b) = (hull[h], hull[h + 1]);
        let w = (u - a.0) / (b.0 - a.0);
        *o = o.max(a.1 + w * (b.1 - a.1));
    }
    out
}

/// Maximizing contract atoms per grid point. `None` marks infeasible points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyTable {
    pub beliefs: Vec<Belief>,
    pub promises: Vec<f64>,
    /// `rows[belief][promise]`.
    pub rows: Vec<Vec<Option<Vec<ContractAtom>>>>,
}

impl PolicyTable {
    pub fn get(&self, belief_index: usize, promise_index: usize) -> Option<&[ContractAtom]> {
        self.rows[belief_index][promise_index].as_deref()
    }

    /// Iterates over `(belief index, promise index, atoms)` for feasible points.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize, &[ContractAtom])> {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(m, atoms)| atoms.as_deref().map(|a| (i, m, a)))
        })
    }
}
