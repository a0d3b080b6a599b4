//! Exact quadratic-cost optimal transport between discrete measures.

mod brute;
mod simplex;

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mmspace::{DiscreteMeasure, FiniteMetricMeasureSpace, GradientMode};

/// Largest `|supp mu0| + |supp mu1|` accepted by [`w2_bruteforce`].
pub const MAX_BRUTE_FORCE_SUPPORT: usize = 6;

/// Marginal tolerance for plans.
pub const MARGINAL_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// A coupling of two measures, stored sparsely by positive entries.
#[derive(Clone, Debug)]
pub struct TransferencePlan {
    entries: Vec<PlanEntry>,
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    cost: f64,
}

impl TransferencePlan {
    /// Builds a plan from explicit entries, computing its quadratic cost.
    pub fn new(
        space: &FiniteMetricMeasureSpace,
        source: DiscreteMeasure,
        target: DiscreteMeasure,
        mut entries: Vec<PlanEntry>,
    ) -> Self {
        entries.retain(|e| e.mass > 0.0);
        entries.sort_by_key(|e| (e.source, e.target));
        let cost = entries.iter().map(|e| e.mass * sq(space.dist(e.source, e.target))).sum();
        Self { entries, source, target, cost }
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    /// `sum pi[i][j] d(i, j)^2`
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn mass(&self, source: usize, target: usize) -> f64 {
        self.entries.iter().filter(|e| e.source == source && e.target == target).map(|e| e.mass).sum()
    }

    pub fn source_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.source.len()];
        for e in &self.entries {
            out[e.source] += e.mass;
        }
        out
    }

    pub fn target_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.target.len()];
        for e in &self.entries {
            out[e.target] += e.mass;
        }
        out
    }

    /// Largest deviation of either marginal from the prescribed measure.
    pub fn marginal_error(&self) -> f64 {
        let rows = self.source_marginal().into_iter().zip(self.source.weights()).map(|(a, b)| (a - b).abs());
        let cols = self.target_marginal().into_iter().zip(self.target.weights()).map(|(a, b)| (a - b).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    /// CSV rows `source_id,target_id,mass`.
    pub fn write_csv<W: Write>(&self, space: &FiniteMetricMeasureSpace, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source_id", "target_id", "mass"])?;
        for e in &self.entries {
            w.write_record([space.id(e.source), space.id(e.target), &format!("{:e}", e.mass)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Optimality evidence returned with every exact solve.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub primal_cost: f64,
    pub dual_value: f64,
    /// Most negative reduced cost `c_ij - u_i - v_j` (0 when dual feasible).
    pub min_reduced_cost: f64,
    /// `sum_basic x_ij |c_ij - u_i - v_j|`
    pub complementary_residual: f64,
    pub iterations: usize,
}

impl Certificate {
    /// Largest of the dual infeasibility and the complementary-slackness residual.
    pub fn residual(&self) -> f64 {
        (-self.min_reduced_cost).max(0.0).max(self.complementary_residual)
    }
}

#[derive(Clone, Debug)]
pub struct W2Solution {
    pub distance: f64,
    pub plan: TransferencePlan,
    pub certificate: Certificate,
}

fn sq(x: f64) -> f64 {
    x * x
}

fn check_measure(space: &FiniteMetricMeasureSpace, mu: &DiscreteMeasure) -> Result<()> {
    if mu.len() != space.len() {
        return Err(Error::InvalidArgument(format!(
            "measure has {} weights for a space with {} points",
            mu.len(),
            space.len()
        )));
    }
    Ok(())
}

/// Exact 2-Wasserstein distance and an optimal plan.
///
/// Rows and columns are restricted to the supports. On line-embeddable spaces
/// the initial basis is the monotone coupling, which is already optimal, so
/// the solve reduces to certificate checking.
pub fn w2(space: &FiniteMetricMeasureSpace, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<W2Solution> {
    check_measure(space, mu0)?;
    check_measure(space, mu1)?;
    let rows = mu0.support();
    let cols = mu1.support();
    let (m, n) = (rows.len(), cols.len());
    let supply: Vec<f64> = rows.iter().map(|&i| mu0.mass(i)).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| mu1.mass(j)).collect();
    let cost: Vec<f64> = rows.iter().flat_map(|&i| cols.iter().map(move |&j| sq(space.dist(i, j)))).collect();

    let order = |pts: &[usize]| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        if let Some(x) = space.line_coordinates() {
            idx.sort_by(|&a, &b| x[pts[a]].total_cmp(&x[pts[b]]).then(a.cmp(&b)));
        }
        idx
    };

    let outcome = if m == 1 || n == 1 {
        // forced plan
        let basis: Vec<(usize, usize, f64)> = if m == 1 {
            (0..n).map(|j| (0, j, demand[j])).collect()
        } else {
            (0..m).map(|i| (i, 0, supply[i])).collect()
        };
        let (u, v) = if m == 1 { (vec![0.0], cost.clone()) } else { (cost.clone(), vec![0.0]) };
        simplex::SimplexOutcome { basis, u, v, iterations: 0, min_reduced_cost: 0.0 }
    } else {
        simplex::solve(&supply, &demand, &cost, &order(&rows), &order(&cols))?
    };

    let mut complementary = 0.0;
    let mut primal = 0.0;
    let mut entries = Vec::new();
    for &(i, j, x) in &outcome.basis {
        let c = cost[i * n + j];
        primal += x * c;
        complementary += x * (c - outcome.u[i] - outcome.v[j]).abs();
        if x > 0.0 {
            entries.push(PlanEntry { source: rows[i], target: cols[j], mass: x });
        }
    }
    let dual_value: f64 = supply.iter().zip(&outcome.u).map(|(a, u)| a * u).sum::<f64>()
        + demand.iter().zip(&outcome.v).map(|(b, v)| b * v).sum::<f64>();
    let certificate = Certificate {
        primal_cost: primal,
        dual_value,
        min_reduced_cost: outcome.min_reduced_cost,
        complementary_residual: complementary,
        iterations: outcome.iterations,
    };
    let plan = TransferencePlan::new(space, mu0.clone(), mu1.clone(), entries);
    let distance = plan.cost().max(0.0).sqrt();
    Ok(W2Solution { distance, plan, certificate })
}

/// W2 by exhaustive enumeration of transport-polytope vertices; a test oracle
/// for instances with `|supp mu0| + |supp mu1| <= 6`.
pub fn w2_bruteforce(space: &FiniteMetricMeasureSpace, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<f64> {
    check_measure(space, mu0)?;
    check_measure(space, mu1)?;
    let rows = mu0.support();
    let cols = mu1.support();
    let size = rows.len() + cols.len();
    if size > MAX_BRUTE_FORCE_SUPPORT {
        return Err(Error::SupportTooLarge { size, max: MAX_BRUTE_FORCE_SUPPORT });
    }
    let supply: Vec<f64> = rows.iter().map(|&i| mu0.mass(i)).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| mu1.mass(j)).collect();
    let cost: Vec<f64> = rows.iter().flat_map(|&i| cols.iter().map(move |&j| sq(space.dist(i, j)))).collect();
    Ok(brute::min_cost(&supply, &demand, &cost).max(0.0).sqrt())
}

/// Both sides of the Lipschitz transport bound along a sampled geodesic.
#[derive(Clone, Debug, Serialize)]
pub struct LipschitzBound {
    /// `|int f dmu1 - int f dmu0|^2`
    pub lhs: f64,
    /// `W2^2 * avg_t int |grad f|^2 dmu_t`
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks `|int f dmu1 - int f dmu0|^2 <= W2^2 int_0^1 int |grad f|^2 dmu_t dt`
/// with the time integral taken by the trapezoid rule over `interpolation`,
/// whose samples are assumed equally spaced on `[0, 1]`.
pub fn lipschitz_lower_bound(
    space: &FiniteMetricMeasureSpace,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    f: &[f64],
    interpolation: &[DiscreteMeasure],
    radius: f64,
) -> Result<LipschitzBound> {
    if interpolation.is_empty() {
        return Err(Error::InvalidArgument("empty interpolation".into()));
    }
    if f.len() != space.len() {
        return Err(Error::InvalidArgument("function length does not match the space".into()));
    }
    let lhs = sq(mu1.integrate(f) - mu0.integrate(f));
    let grad = space.gradient_norm(f, GradientMode::Full, radius);
    let energy: Vec<f64> = grad.iter().map(|g| g * g).collect();
    let samples: Vec<f64> = interpolation.iter().map(|m| m.integrate(&energy)).collect();
    let average = if samples.len() == 1 {
        samples[0]
    } else {
        let k = samples.len() - 1;
        let inner: f64 = samples[1..k].iter().sum();
        (0.5 * (samples[0] + samples[k]) + inner) / k as f64
    };
    let w = w2(space, mu0, mu1)?.distance;
    let rhs = w * w * average;
    let tolerance = 1e-9 * (1.0 + lhs.abs().max(rhs.abs()));
    Ok(LipschitzBound { lhs, rhs, tolerance, pass: lhs <= rhs + tolerance })
}
