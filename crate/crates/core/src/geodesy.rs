//! Discrete geodesics, dynamical transference plans and displacement
//! interpolation.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mmspace::{DiscreteMeasure, FiniteMetricMeasureSpace};
use crate::transport::{w2, TransferencePlan, W2Solution};

/// Default dyadic depth of glued geodesics (17 time samples).
pub const DEFAULT_DEPTH: usize = 4;

/// A constant-speed shortest path through points of a space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicPath {
    pub vertices: Vec<usize>,
    pub times: Vec<f64>,
    pub length: f64,
}

impl GeodesicPath {
    pub fn start(&self) -> usize {
        self.vertices[0]
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().expect("paths are nonempty")
    }

    /// Index `k` with `times[k] <= t <= times[k + 1]`, or the last index.
    fn bracket(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s <= t);
        k.saturating_sub(1).min(self.times.len() - 1)
    }

    /// The vertex whose time is nearest `t`; ties go to the earlier vertex.
    pub fn nearest(&self, t: f64) -> usize {
        let k = self.bracket(t);
        if k + 1 < self.times.len() && self.times[k + 1] - t < t - self.times[k] {
            self.vertices[k + 1]
        } else {
            self.vertices[k]
        }
    }

    /// The two vertices bracketing `t` with linear weights summing to 1.
    pub fn split(&self, t: f64) -> [(usize, f64); 2] {
        let k = self.bracket(t);
        if k + 1 >= self.times.len() {
            return [(self.vertices[k], 1.0), (self.vertices[k], 0.0)];
        }
        let (a, b) = (self.times[k], self.times[k + 1]);
        let w = ((t - a) / (b - a)).clamp(0.0, 1.0);
        [(self.vertices[k], 1.0 - w), (self.vertices[k + 1], w)]
    }
}

/// How a path position between two vertices is mapped back to the point set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Snap {
    /// Move all mass to the nearest path vertex.
    #[default]
    Nearest,
    /// Split mass linearly between the two bracketing vertices.
    Split,
}

/// Deterministic shortest path from `x` to `y`.
///
/// Walks back from `y`, always stepping to the lowest-index neighbour that
/// lies on a shortest path from `x`.
pub fn shortest_geodesic(space: &FiniteMetricMeasureSpace, x: usize, y: usize) -> Result<GeodesicPath> {
    for p in [x, y] {
        if p >= space.len() {
            return Err(Error::PointOutOfRange { index: p, len: space.len() });
        }
    }
    let length = space.dist(x, y);
    if x == y {
        return Ok(GeodesicPath { vertices: vec![x], times: vec![0.0], length: 0.0 });
    }
    let tol = 1e-12 * (1.0 + length);
    let mut reversed = vec![y];
    let mut current = y;
    while current != x {
        let here = space.dist(x, current);
        let step = space
            .neighbors(current)
            .iter()
            .filter(|&&(w, len)| {
                w != current && (space.dist(x, w) + len - here).abs() <= tol && space.dist(x, w) < here
            })
            .map(|&(w, _)| w)
            .min()
            .expect("every point of a connected space has a predecessor on a shortest path");
        reversed.push(step);
        current = step;
    }
    reversed.reverse();
    let times = reversed.iter().map(|&v| (space.dist(x, v) / length).clamp(0.0, 1.0)).collect();
    Ok(GeodesicPath { vertices: reversed, times, length })
}

/// Weighted bundle of geodesics lifting a transference plan.
#[derive(Clone, Debug)]
pub struct DynamicalPlan {
    pub paths: Vec<GeodesicPath>,
    pub weights: Vec<f64>,
    /// Set only when the endpoint plan is certified optimal.
    pub optimal: bool,
    source: DiscreteMeasure,
    target: DiscreteMeasure,
}

impl DynamicalPlan {
    /// Lifts `plan` through the deterministic geodesic selection.
    pub fn from_plan(space: &FiniteMetricMeasureSpace, plan: &TransferencePlan) -> Result<Self> {
        let mut paths = Vec::with_capacity(plan.entries().len());
        let mut weights = Vec::with_capacity(plan.entries().len());
        for e in plan.entries() {
            paths.push(shortest_geodesic(space, e.source, e.target)?);
            weights.push(e.mass);
        }
        Ok(Self { paths, weights, optimal: false, source: plan.source().clone(), target: plan.target().clone() })
    }

    /// Lifts an exact solution; flagged optimal when its certificate holds.
    pub fn from_solution(space: &FiniteMetricMeasureSpace, solution: &W2Solution) -> Result<Self> {
        let mut out = Self::from_plan(space, &solution.plan)?;
        let cost = out.endpoint_plan(space).cost();
        out.optimal =
            solution.certificate.residual() < 1e-9 && (cost - solution.distance * solution.distance).abs() <= 1e-9;
        Ok(out)
    }

    /// `E_* Pi`, the plan between the path endpoints.
    pub fn endpoint_plan(&self, space: &FiniteMetricMeasureSpace) -> TransferencePlan {
        let entries = self
            .paths
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| crate::transport::PlanEntry { source: p.start(), target: p.end(), mass: w })
            .collect();
        TransferencePlan::new(space, self.source.clone(), self.target.clone(), entries)
    }

    /// `(e_t)_* Pi`; `t = 0` and `t = 1` return the endpoint measures exactly.
    pub fn evaluate(&self, t: f64, snap: Snap) -> DiscreteMeasure {
        if t <= 0.0 {
            return self.source.clone();
        }
        if t >= 1.0 {
            return self.target.clone();
        }
        let mut out = vec![0.0; self.source.len()];
        for (path, &w) in self.paths.iter().zip(&self.weights) {
            match snap {
                Snap::Nearest => out[path.nearest(t)] += w,
                Snap::Split => {
                    for (v, a) in path.split(t) {
                        out[v] += a * w;
                    }
                }
            }
        }
        DiscreteMeasure::from_raw(out)
    }
}

/// `mu_t = (e_t)_* S_*(pi)` at each sample, snapping to the nearest vertex.
pub fn displacement_interpolation(
    space: &FiniteMetricMeasureSpace,
    plan: &TransferencePlan,
    t_samples: &[f64],
) -> Result<Vec<DiscreteMeasure>> {
    displacement_interpolation_with(space, plan, t_samples, Snap::Nearest)
}

pub fn displacement_interpolation_with(
    space: &FiniteMetricMeasureSpace,
    plan: &TransferencePlan,
    t_samples: &[f64],
    snap: Snap,
) -> Result<Vec<DiscreteMeasure>> {
    if t_samples.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidArgument("time samples must lie in [0, 1]".into()));
    }
    if t_samples.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("time samples must be sorted".into()));
    }
    let dynamical = DynamicalPlan::from_plan(space, plan)?;
    Ok(t_samples.iter().map(|&t| dynamical.evaluate(t, snap)).collect())
}

/// The dyadic times `k / 2^depth`.
pub fn dyadic_times(depth: usize) -> Vec<f64> {
    let n = 1usize << depth;
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

/// Wasserstein geodesic sampled at dyadic times by recursive midpoint gluing.
///
/// Each refinement solves the exact problem between consecutive samples and
/// inserts the midpoint of the resulting displacement interpolation.
pub fn glue_midpoint_geodesic(
    space: &FiniteMetricMeasureSpace,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    depth: usize,
) -> Result<Vec<DiscreteMeasure>> {
    glue_midpoint_geodesic_with(space, mu0, mu1, depth, Snap::Nearest)
}

pub fn glue_midpoint_geodesic_with(
    space: &FiniteMetricMeasureSpace,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    depth: usize,
    snap: Snap,
) -> Result<Vec<DiscreteMeasure>> {
    if depth == 0 {
        return Err(Error::InvalidArgument("gluing depth must be at least 1".into()));
    }
    let mut samples = vec![mu0.clone(), mu1.clone()];
    for _ in 0..depth {
        let mut refined = Vec::with_capacity(2 * samples.len() - 1);
        for pair in samples.windows(2) {
            refined.push(pair[0].clone());
            refined.push(midpoint(space, &pair[0], &pair[1], snap)?);
        }
        refined.push(samples.pop().expect("nonempty"));
        samples = refined;
    }
    Ok(samples)
}

fn midpoint(
    space: &FiniteMetricMeasureSpace,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    snap: Snap,
) -> Result<DiscreteMeasure> {
    if a == b {
        return Ok(a.clone());
    }
    let solution = w2(space, a, b)?;
    Ok(DynamicalPlan::from_plan(space, &solution.plan)?.evaluate(0.5, snap))
}

/// CSV rows `t,point_id,mass` over the positive masses of each sample.
pub fn write_interpolation_csv<W: Write>(
    space: &FiniteMetricMeasureSpace,
    times: &[f64],
    measures: &[DiscreteMeasure],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "point_id", "mass"])?;
    for (t, m) in times.iter().zip(measures) {
        for p in m.support() {
            w.write_record([&t.to_string(), space.id(p), &format!("{:e}", m.mass(p))])?;
        }
    }
    w.flush()?;
    Ok(())
}
