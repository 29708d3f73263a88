//! Uniform lattices on the belief simplex and barycentric interpolation over
//! their Freudenthal triangulation.

use std::collections::HashMap;

use crate::game::Belief;

#[derive(Debug, Clone)]
pub struct SimplexLattice {
    states: usize,
    divisions: usize,
    points: Vec<Belief>,
    index: HashMap<Vec<usize>, usize>,
}

impl SimplexLattice {
    /// All beliefs whose coordinates are multiples of `1 / divisions`.
    pub fn new(states: usize, divisions: usize) -> Self {
        assert!(states >= 1 && divisions >= 1);
        let mut counts = Vec::new();
        let mut current = vec![0; states];
        compositions(divisions, 0, &mut current, &mut counts);
        let mut index = HashMap::with_capacity(counts.len());
        let points = counts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                index.insert(c.clone(), i);
                Belief::normalized(c.iter().map(|&x| x as f64 / divisions as f64).collect())
            })
            .collect();
        Self {
            states,
            divisions,
            points,
            index,
        }
    }

    pub fn points(&self) -> &[Belief] {
        &self.points
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    /// Barycentric weights of `belief` on the vertices of the lattice
    /// simplex containing it. Zero weights are omitted.
    pub fn locate(&self, belief: &Belief) -> Vec<(usize, f64)> {
        let n = self.states;
        let big_n = self.divisions as f64;
        let x = belief.probs();
        // Cumulative coordinates y_i = N * sum_{j >= i} x_j for i = 1..n-1.
        let mut y = vec![0.0; n - 1];
        let mut acc = 0.0;
        for i in (1..n).rev() {
            acc += x[i];
            let v = big_n * acc;
            let r = v.round();
            y[i - 1] = if (v - r).abs() < 1e-10 { r } else { v };
        }
        let base: Vec<i64> = y.iter().map(|v| v.floor() as i64).collect();
        let frac: Vec<f64> = y.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        let mut order: Vec<usize> = (0..n - 1).collect();
        order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).unwrap().then(a.cmp(&b)));

        let mut out = Vec::with_capacity(n);
        let mut vertex = base.clone();
        let first = 1.0 - order.first().map_or(0.0, |&i| frac[i]);
        self.push_vertex(&vertex, first, &mut out);
        for (pos, &i) in order.iter().enumerate() {
            vertex[i] += 1;
            let next = order.get(pos + 1).map_or(0.0, |&j| frac[j]);
            self.push_vertex(&vertex, frac[i] - next, &mut out);
        }
        out
    }

    fn push_vertex(&self, y: &[i64], weight: f64, out: &mut Vec<(usize, f64)>) {
        if weight <= 1e-14 {
            return;
        }
        let n = self.states;
        let d = self.divisions as i64;
        let mut counts = vec![0usize; n];
        for i in 0..n {
            let hi = if i == 0 { d } else { y[i - 1] };
            let lo = if i + 1 < n { y[i] } else { 0 };
            counts[i] = (hi - lo).max(0) as usize;
        }
        let idx = self.index[&counts];
        out.push((idx, weight));
    }
}

fn compositions(remaining: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let n = current.len();
    if pos + 1 == n {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for c in (0..=remaining).rev() {
        current[pos] = c;
        compositions(remaining - c, pos + 1, current, out);
    }
}
