//! Dense transportation simplex.
//!
//! The basis is a spanning tree of the bipartite row/column graph with
//! `m + n - 1` cells (degenerate zero-flow cells included). Pricing uses the
//! most negative reduced cost and falls back to Bland's rule after a run of
//! degenerate pivots; ties always go to the lowest cell index.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 32;

pub(crate) struct SimplexOutcome {
    /// `(row, col, flow)` for every basic cell, zero flows included.
    pub basis: Vec<(usize, usize, f64)>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
    /// Most negative reduced cost at termination (0 when dual feasible).
    pub min_reduced_cost: f64,
}

struct Basis {
    m: usize,
    n: usize,
    flow: Vec<f64>,
    basic: Vec<bool>,
    /// Incident basic cells per node; rows are nodes `0..m`, columns `m..m+n`.
    incident: Vec<Vec<usize>>,
}

impl Basis {
    fn add(&mut self, cell: usize, flow: f64) {
        let (i, j) = (cell / self.n, cell % self.n);
        self.basic[cell] = true;
        self.flow[cell] = flow;
        self.incident[i].push(cell);
        self.incident[self.m + j].push(cell);
    }

    fn remove(&mut self, cell: usize) {
        let (i, j) = (cell / self.n, cell % self.n);
        self.basic[cell] = false;
        self.flow[cell] = 0.0;
        for node in [i, self.m + j] {
            let list = &mut self.incident[node];
            let pos = list.iter().position(|&c| c == cell).expect("basic cell is incident");
            list.remove(pos);
        }
    }

    fn other_end(&self, cell: usize, node: usize) -> usize {
        let (i, j) = (cell / self.n, cell % self.n);
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    fn potentials(&self, cost: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut pot = vec![f64::NAN; m + n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &cell in &self.incident[node] {
                let other = self.other_end(cell, node);
                if pot[other].is_nan() {
                    pot[other] = cost[cell] - pot[node];
                    queue.push_back(other);
                }
            }
        }
        (pot[..m].to_vec(), pot[m..].to_vec())
    }

    /// Cells on the tree path from column node `m + q` back to row node `p`.
    fn cycle(&self, p: usize, q: usize) -> Vec<usize> {
        let target = self.m + q;
        let mut parent_cell = vec![usize::MAX; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        seen[p] = true;
        let mut queue = VecDeque::from([p]);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &cell in &self.incident[node] {
                let other = self.other_end(cell, node);
                if !seen[other] {
                    seen[other] = true;
                    parent_cell[other] = cell;
                    queue.push_back(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != p {
            let cell = parent_cell[node];
            path.push(cell);
            node = self.other_end(cell, node);
        }
        path
    }
}

/// Solves `min sum c x` over the transport polytope of `supply` x `demand`.
///
/// `row_order`/`col_order` fix the north-west corner start; when both follow
/// a common line order and the cost is Monge the start is already optimal.
pub(crate) fn solve(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
    row_order: &[usize],
    col_order: &[usize],
) -> Result<SimplexOutcome> {
    let (m, n) = (supply.len(), demand.len());
    let mut basis =
        Basis { m, n, flow: vec![0.0; m * n], basic: vec![false; m * n], incident: vec![Vec::new(); m + n] };

    // North-west corner along the given orders: a staircase of m + n - 1 cells.
    let mut rows_left: Vec<f64> = supply.to_vec();
    let mut cols_left: Vec<f64> = demand.to_vec();
    let (mut a, mut b) = (0, 0);
    loop {
        let (i, j) = (row_order[a], col_order[b]);
        let x = rows_left[i].min(cols_left[j]);
        rows_left[i] -= x;
        cols_left[j] -= x;
        basis.add(i * n + j, x);
        if a == m - 1 && b == n - 1 {
            break;
        }
        if a == m - 1 {
            b += 1;
        } else if b == n - 1 || rows_left[i] <= cols_left[j] {
            a += 1;
        } else {
            b += 1;
        }
    }

    let scale = cost.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let eps = 1e-13 * scale.max(1.0);
    let max_iterations = 20_000 + 50 * (m + n) * (m + n);
    let mut degenerate_run = 0usize;
    let mut iterations = 0usize;
    loop {
        let (u, v) = basis.potentials(cost);
        let bland = degenerate_run >= DEGENERATE_RUN;
        let mut entering: Option<(usize, f64)> = None;
        let mut min_reduced: f64 = 0.0;
        'pricing: for i in 0..m {
            for j in 0..n {
                let cell = i * n + j;
                if basis.basic[cell] {
                    continue;
                }
                let r = cost[cell] - u[i] - v[j];
                min_reduced = min_reduced.min(r);
                if r < -eps {
                    match entering {
                        None => entering = Some((cell, r)),
                        Some((_, best)) if !bland && r < best => entering = Some((cell, r)),
                        _ => {}
                    }
                    if bland {
                        break 'pricing;
                    }
                }
            }
        }
        let Some((cell, _)) = entering else {
            let basis_cells = (0..m * n).filter(|&c| basis.basic[c]).map(|c| (c / n, c % n, basis.flow[c])).collect();
            return Ok(SimplexOutcome { basis: basis_cells, u, v, iterations, min_reduced_cost: min_reduced });
        };
        if iterations >= max_iterations {
            return Err(Error::NotConverged { iterations, residual: min_reduced });
        }
        iterations += 1;

        let (p, q) = (cell / n, cell % n);
        let path = basis.cycle(p, q);
        // path[0] touches column q and loses flow; signs alternate from there.
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (k, &c) in path.iter().enumerate() {
            if k % 2 == 0 {
                let x = basis.flow[c];
                if x < theta || (x == theta && c < leaving) {
                    theta = x;
                    leaving = c;
                }
            }
        }
        for (k, &c) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis.flow[c] -= theta;
            } else {
                basis.flow[c] += theta;
            }
        }
        basis.remove(leaving);
        basis.add(cell, theta);
        if theta > 0.0 {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
    }
}
