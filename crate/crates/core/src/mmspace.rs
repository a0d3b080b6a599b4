//! Finite metric-measure spaces built from weighted graphs.
//!
//! A space is materialized by splitting every edge into `subdivision` arcs and
//! computing the all-pairs shortest-path metric of the subdivided graph. The
//! longest subdivided arc is the mesh size `tau`; every geodesic-dependent
//! quantity downstream carries an error budget proportional to it.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for probability weights.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Probability weights indexed by the points of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates nonnegativity and normalization (within [`MASS_TOLERANCE`]).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Renormalizes nonnegative weights that are not all zero.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidMeasure("all weights are zero".into()));
        }
        Ok(Self { weights: weights.into_iter().map(|w| w / total).collect() })
    }

    /// Skips validation. Callers guarantee the weights come from mass-preserving
    /// operations on a valid measure.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn dirac(len: usize, point: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[point] = 1.0;
        Self { weights }
    }

    pub fn uniform(len: usize) -> Self {
        Self { weights: vec![1.0 / len as f64; len] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mass(&self, point: usize) -> f64 {
        self.weights[point]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Indices carrying strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// `sum_x f(x) mu(x)` in index order.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| if *w > 0.0 { w * v } else { 0.0 }).sum()
    }

    /// True when every point carrying mass also carries mass under `reference`.
    pub fn supported_in(&self, reference: &DiscreteMeasure) -> bool {
        self.weights.iter().zip(&reference.weights).all(|(m, r)| *m == 0.0 || *r > 0.0)
    }
}

/// Pushes `measure` forward along a point map given as a table `map[i] = image of i`.
pub fn pushforward(measure: &DiscreteMeasure, map: &[usize], target_len: usize) -> Result<DiscreteMeasure> {
    if map.len() != measure.len() {
        return Err(Error::InvalidArgument(format!(
            "map has {} entries for a measure on {} points",
            map.len(),
            measure.len()
        )));
    }
    let mut out = vec![0.0; target_len];
    for (i, &w) in measure.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let image = map[i];
        if image >= target_len {
            return Err(Error::PointOutOfRange { index: image, len: target_len });
        }
        out[image] += w;
    }
    Ok(DiscreteMeasure::from_raw(out))
}

/// Input graph: vertex ids plus undirected edges with positive lengths.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String, f64)>,
}

impl WeightedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(mut self, id: impl Into<String>) -> Self {
        self.vertices.push(id.into());
        self
    }

    pub fn edge(mut self, a: impl Into<String>, b: impl Into<String>, length: f64) -> Self {
        self.edges.push((a.into(), b.into(), length));
        self
    }

    /// Path `0 - 1 - ... - (n-1)` with ids `"0"`, `"1"`, ...
    pub fn path(n: usize, edge_length: f64) -> Self {
        let mut g = Self::new();
        for i in 0..n {
            g = g.vertex(i.to_string());
        }
        for i in 1..n {
            g = g.edge((i - 1).to_string(), i.to_string(), edge_length);
        }
        g
    }

    /// Cycle on `n >= 3` vertices with ids `"0"`, `"1"`, ...
    pub fn cycle(n: usize, edge_length: f64) -> Self {
        let mut g = Self::path(n, edge_length);
        if n >= 3 {
            g = g.edge((n - 1).to_string(), "0", edge_length);
        }
        g
    }
}

/// Which slope is maximized by [`FiniteMetricMeasureSpace::gradient_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    /// `|f(y) - f(x)| / d(x, y)`
    Full,
    /// `[f(x) - f(y)]_+ / d(x, y)`
    Descending,
}

/// A finite point set with a graph shortest-path metric and a reference
/// probability measure `nu`. Immutable after construction.
#[derive(Clone, Debug)]
pub struct FiniteMetricMeasureSpace {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    dist: Vec<f64>,
    nu: DiscreteMeasure,
    adjacency: Vec<Vec<(usize, f64)>>,
    subdivision: usize,
    vertex_count: usize,
    mesh: f64,
    diameter: f64,
    line_coords: Option<Vec<f64>>,
}

impl FiniteMetricMeasureSpace {
    /// Materializes the subdivided graph. `nu_weights` is indexed like
    /// `graph.vertices` and is renormalized; subdivision points get mass 0.
    pub fn build(graph: &WeightedGraph, nu_weights: &[f64], subdivision: usize) -> Result<Self> {
        if graph.vertices.is_empty() {
            return Err(Error::InvalidArgument("graph has no vertices".into()));
        }
        if subdivision == 0 {
            return Err(Error::InvalidArgument("subdivision must be at least 1".into()));
        }
        if nu_weights.len() != graph.vertices.len() {
            return Err(Error::InvalidArgument(format!(
                "{} nu weights for {} vertices",
                nu_weights.len(),
                graph.vertices.len()
            )));
        }
        let mut ids = graph.vertices.clone();
        let mut index = HashMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vertex id `{id}`")));
            }
        }
        let vertex_count = ids.len();
        let mut arcs: Vec<(usize, usize, f64)> = Vec::new();
        for (a, b, length) in &graph.edges {
            if !(length.is_finite() && *length > 0.0) {
                return Err(Error::NonpositiveEdge { from: a.clone(), to: b.clone(), length: *length });
            }
            let ia = *index.get(a).ok_or_else(|| Error::UnknownPoint(a.clone()))?;
            let ib = *index.get(b).ok_or_else(|| Error::UnknownPoint(b.clone()))?;
            let piece = length / subdivision as f64;
            let mut prev = ia;
            for k in 1..subdivision {
                let id = format!("{a}~{b}#{k}");
                let p = ids.len();
                if index.insert(id.clone(), p).is_some() {
                    return Err(Error::InvalidArgument(format!("duplicate edge {a}-{b}")));
                }
                ids.push(id);
                arcs.push((prev, p, piece));
                prev = p;
            }
            arcs.push((prev, ib, piece));
        }
        let n = ids.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, w) in &arcs {
            if a != b {
                adjacency[a].push((b, w));
                adjacency[b].push((a, w));
            }
        }
        for list in &mut adjacency {
            list.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        }
        let components = count_components(&adjacency);
        if components > 1 {
            return Err(Error::Disconnected { components });
        }
        let mut weights = nu_weights.to_vec();
        weights.resize(n, 0.0);
        let nu = DiscreteMeasure::from_unnormalized(weights)?;
        let dist = all_pairs_dijkstra(&adjacency);
        let mesh = arcs.iter().map(|a| a.2).fold(0.0, f64::max);
        Ok(Self::assemble(ids, index, dist, nu, adjacency, subdivision, vertex_count, mesh))
    }

    /// Builds a space directly from a metric. Adjacency joins `i` and `j`
    /// when no third point lies metrically between them, which recovers the
    /// graph when `dist` is a graph metric.
    pub fn from_metric(ids: Vec<String>, dist: Vec<Vec<f64>>, nu: DiscreteMeasure) -> Result<Self> {
        let n = ids.len();
        if n == 0 || dist.len() != n || dist.iter().any(|row| row.len() != n) || nu.len() != n {
            return Err(Error::InvalidArgument("metric, ids and nu sizes disagree".into()));
        }
        let mut index = HashMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate point id `{id}`")));
            }
        }
        let scale = dist.iter().flatten().cloned().fold(0.0, f64::max).max(1.0);
        let tol = 1e-12 * scale;
        for i in 0..n {
            if dist[i][i] != 0.0 {
                return Err(Error::InvalidArgument(format!("d({i},{i}) != 0")));
            }
            for j in 0..n {
                if dist[i][j] != dist[j][i] || (i != j && !(dist[i][j] > 0.0)) {
                    return Err(Error::InvalidArgument(format!("d({i},{j}) is not a symmetric positive distance")));
                }
                for k in 0..n {
                    if dist[i][k] > dist[i][j] + dist[j][k] + tol {
                        return Err(Error::InvalidArgument(format!("triangle inequality fails at ({i},{j},{k})")));
                    }
                }
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut mesh: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let between = (0..n).any(|k| k != i && k != j && dist[i][k] + dist[k][j] <= dist[i][j] + tol);
                if !between {
                    adjacency[i].push((j, dist[i][j]));
                    adjacency[j].push((i, dist[i][j]));
                    mesh = mesh.max(dist[i][j]);
                }
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|x| x.0);
        }
        let flat: Vec<f64> = dist.into_iter().flatten().collect();
        Ok(Self::assemble(ids, index, flat, nu, adjacency, 1, n, mesh))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        ids: Vec<String>,
        index: HashMap<String, usize>,
        dist: Vec<f64>,
        nu: DiscreteMeasure,
        adjacency: Vec<Vec<(usize, f64)>>,
        subdivision: usize,
        vertex_count: usize,
        mesh: f64,
    ) -> Self {
        let n = ids.len();
        let diameter = dist.iter().cloned().fold(0.0, f64::max);
        let line_coords = detect_line(&dist, n, diameter);
        Self { ids, index, dist, nu, adjacency, subdivision, vertex_count, mesh, diameter, line_coords }
    }

    /// Same metric, different reference measure.
    pub fn with_nu(&self, nu: DiscreteMeasure) -> Result<Self> {
        if nu.len() != self.len() {
            return Err(Error::InvalidArgument(format!("nu has {} weights for {} points", nu.len(), self.len())));
        }
        let mut out = self.clone();
        out.nu = nu;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, point: usize) -> &str {
        &self.ids[point]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.ids.len() + j]
    }

    pub fn dist_row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.dist[i * n..(i + 1) * n]
    }

    pub fn nu(&self) -> &DiscreteMeasure {
        &self.nu
    }

    pub fn neighbors(&self, point: usize) -> &[(usize, f64)] {
        &self.adjacency[point]
    }

    pub fn subdivision(&self) -> usize {
        self.subdivision
    }

    /// Number of points that were vertices of the input graph.
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Longest subdivided edge; the geodesic resolution `tau`.
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Coordinates `x` with `d(i, j) = |x_i - x_j|` when the space embeds
    /// isometrically in the line (path graphs), `None` otherwise.
    pub fn line_coordinates(&self) -> Option<&[f64]> {
        self.line_coords.as_deref()
    }

    /// Default neighborhood radius for discrete gradients: 1.5 times the mesh.
    pub fn default_gradient_radius(&self) -> f64 {
        1.5 * self.mesh
    }

    /// Largest violation of the triangle inequality (0 for a metric).
    pub fn triangle_defect(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max(self.dist(i, k) - self.dist(i, j) - self.dist(j, k));
                }
            }
        }
        worst
    }

    /// `nu(B_r(center))` for the open ball.
    pub fn ball_mass(&self, center: usize, r: f64) -> f64 {
        self.ball_mass_of(&self.nu, center, r)
    }

    /// `measure(B_r(center))` for the open ball.
    pub fn ball_mass_of(&self, measure: &DiscreteMeasure, center: usize, r: f64) -> f64 {
        self.dist_row(center).iter().zip(measure.weights()).filter(|(d, _)| **d < r).map(|(_, w)| *w).sum()
    }

    /// Discrete gradient norm: the largest slope of `f` to points within `radius`.
    pub fn gradient_norm(&self, f: &[f64], mode: GradientMode, radius: f64) -> Vec<f64> {
        self.gradient_norm_on(f, mode, radius, None)
    }

    /// As [`gradient_norm`](Self::gradient_norm), restricting both the base
    /// point and its neighbors to `domain` when given. Points outside the
    /// domain get 0.
    pub fn gradient_norm_on(&self, f: &[f64], mode: GradientMode, radius: f64, domain: Option<&[bool]>) -> Vec<f64> {
        let n = self.len();
        let inside = |i: usize| domain.is_none_or(|d| d[i]);
        (0..n)
            .map(|x| {
                if !inside(x) {
                    return 0.0;
                }
                let row = self.dist_row(x);
                let mut best: f64 = 0.0;
                for y in 0..n {
                    let d = row[y];
                    if d <= 0.0 || d > radius || !inside(y) {
                        continue;
                    }
                    let slope = match mode {
                        GradientMode::Full => (f[y] - f[x]).abs() / d,
                        GradientMode::Descending => (f[x] - f[y]).max(0.0) / d,
                    };
                    best = best.max(slope);
                }
                best
            })
            .collect()
    }
}

fn count_components(adjacency: &[Vec<(usize, f64)>]) -> usize {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &(w, _) in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    components
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn dijkstra(adjacency: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adjacency.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: source });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adjacency[node] {
            let candidate = d + w;
            if candidate < dist[next] {
                dist[next] = candidate;
                heap.push(HeapEntry { dist: candidate, node: next });
            }
        }
    }
    dist
}

/// Dijkstra from every source, mirrored so the matrix is exactly symmetric.
fn all_pairs_dijkstra(adjacency: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let n = adjacency.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        let row = dijkstra(adjacency, i);
        for j in (i + 1)..n {
            dist[i * n + j] = row[j];
            dist[j * n + i] = row[j];
        }
    }
    dist
}

fn detect_line(dist: &[f64], n: usize, diameter: f64) -> Option<Vec<f64>> {
    if n == 1 {
        return Some(vec![0.0]);
    }
    let end = (0..n).fold(0, |best, j| if dist[j] > dist[best] { j } else { best });
    // reflected so that an endpoint at point 0 gets coordinate 0
    let coords: Vec<f64> = (0..n).map(|j| dist[end * n] - dist[end * n + j]).collect();
    let tol = 1e-9 * (1.0 + diameter);
    for i in 0..n {
        for j in (i + 1)..n {
            if ((coords[i] - coords[j]).abs() - dist[i * n + j]).abs() > tol {
                return None;
            }
        }
    }
    Some(coords)
}
