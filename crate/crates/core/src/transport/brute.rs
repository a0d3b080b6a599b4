//! Exhaustive vertex enumeration of the transport polytope.
//!
//! Every vertex is a basic feasible solution whose support is a spanning tree
//! of the row/column bipartite graph. We try every `(m + n - 1)`-subset of
//! cells, keep the spanning trees, solve the tree flow by leaf elimination and
//! take the cheapest nonnegative one. Independent of the simplex code path.

pub(crate) fn min_cost(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(k);
    combinations(m * n, k, 0, &mut chosen, &mut |cells| {
        if let Some(flow) = tree_flow(cells, supply, demand) {
            let c: f64 = cells.iter().zip(&flow).map(|(&cell, x)| x * cost[cell]).sum();
            if c < best {
                best = c;
            }
        }
    });
    best
}

fn combinations(total: usize, k: usize, start: usize, chosen: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    let need = k - chosen.len();
    for c in start..=(total - need) {
        chosen.push(c);
        combinations(total, k, c + 1, chosen, visit);
        chosen.pop();
    }
}

/// Flow on a spanning-tree support, or `None` if the cells do not form a
/// spanning tree or some flow is negative.
fn tree_flow(cells: &[usize], supply: &[f64], demand: &[f64]) -> Option<Vec<f64>> {
    let (m, n) = (supply.len(), demand.len());
    let nodes = m + n;
    let ends = |cell: usize| (cell / n, m + cell % n);

    // acyclic with nodes - 1 edges <=> spanning tree
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    for &cell in cells {
        let (a, b) = ends(cell);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return None;
        }
        parent[ra] = rb;
    }

    let mut remaining: Vec<f64> = supply.iter().chain(demand).cloned().collect();
    let mut degree = vec![0usize; nodes];
    for &cell in cells {
        let (a, b) = ends(cell);
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut flow = vec![f64::NAN; cells.len()];
    let mut done = vec![false; cells.len()];
    for _ in 0..cells.len() {
        let (idx, leaf) = cells.iter().enumerate().filter(|(e, _)| !done[*e]).find_map(|(e, &cell)| {
            let (a, b) = ends(cell);
            if degree[a] == 1 {
                Some((e, a))
            } else if degree[b] == 1 {
                Some((e, b))
            } else {
                None
            }
        })?;
        let (a, b) = ends(cells[idx]);
        let other = if leaf == a { b } else { a };
        let x = remaining[leaf];
        if x < -1e-12 {
            return None;
        }
        flow[idx] = x.max(0.0);
        remaining[leaf] = 0.0;
        remaining[other] -= x;
        degree[a] -= 1;
        degree[b] -= 1;
        done[idx] = true;
    }
    Some(flow)
}
