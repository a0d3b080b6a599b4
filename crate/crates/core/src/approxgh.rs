//! Mollification kernels, Gromov–Hausdorff approximations between finite
//! spaces, quotients by finite isometry groups, and a stability harness
//! that tracks curvature-probe defects along a converging sequence.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{n_ricci_nonneg_test, FamilyReport, ProbeOptions};
use crate::entropy::EntropyFunction;
use crate::error::{Error, Result};
use crate::mmspace::{pushforward, DiscreteMeasure, FiniteMetricMeasureSpace, MASS_TOLERANCE};
use crate::transport::w2;
use crate::trial::BumpGenerator;

/// Symmetric kernel `K` with `sum_y K[x][y] nu(y) = 1` on `supp(nu)` and
/// `K[x][y] = 0` once `d(x, y) >= 2 delta`.
#[derive(Clone, Debug, Serialize)]
pub struct MollifierKernel {
    pub delta: f64,
    /// Net points carrying the partition of unity.
    pub centers: Vec<usize>,
    /// `delta` is at most the smallest positive distance, so `K` is the
    /// identity on `supp(nu)`.
    pub degenerate: bool,
    matrix: Vec<f64>,
    n: usize,
}

impl MollifierKernel {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.matrix[x * self.n..(x + 1) * self.n]
    }

    /// Largest `|sum_y K[x][y] nu(y) - 1|` over `supp(nu)`.
    pub fn stochasticity_error(&self, nu: &DiscreteMeasure) -> f64 {
        (0..self.n)
            .filter(|&x| nu.mass(x) > 0.0)
            .map(|x| (self.row(x).iter().zip(nu.weights()).map(|(k, w)| k * w).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|x| (0..x).all(|y| self.get(x, y) == self.get(y, x)))
    }

    /// Largest `d(x, y)` with `K[x][y] > 0`.
    pub fn support_radius(&self, space: &FiniteMetricMeasureSpace) -> f64 {
        let mut r: f64 = 0.0;
        for x in 0..self.n {
            for y in 0..self.n {
                if self.get(x, y) > 0.0 {
                    r = r.max(space.dist(x, y));
                }
            }
        }
        r
    }
}

/// Tent partition of unity over a maximal `delta`-separated net, chosen
/// greedily in point order: `phi_j(x) = max(0, 1 - d(x, x_j) / delta)`,
/// normalized to sum to 1, and `K = sum_j phi_j(x) phi_j(y) / int phi_j dnu`.
/// Tents with no `nu` mass are dropped.
pub fn build_mollifier(space: &FiniteMetricMeasureSpace, delta: f64) -> Result<MollifierKernel> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let n = space.len();
    let mut centers: Vec<usize> = Vec::new();
    for x in 0..n {
        if centers.iter().all(|&c| space.dist(c, x) >= delta) {
            centers.push(x);
        }
    }
    let min_gap = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .filter(|(x, y)| x != y)
        .map(|(x, y)| space.dist(x, y))
        .fold(f64::INFINITY, f64::min);
    let degenerate = delta <= min_gap;
    if degenerate {
        warn!("delta {delta} is below the smallest distance {min_gap}: the kernel is the identity on supp(nu)");
    }
    // raw tents, then normalize pointwise
    let mut phi = vec![vec![0.0; n]; centers.len()];
    for (j, &c) in centers.iter().enumerate() {
        for x in 0..n {
            phi[j][x] = (1.0 - space.dist(c, x) / delta).max(0.0);
        }
    }
    for x in 0..n {
        let total: f64 = phi.iter().map(|p| p[x]).sum();
        for p in phi.iter_mut() {
            p[x] /= total;
        }
    }
    let nu = space.nu();
    let tents: Vec<(Vec<f64>, f64)> = phi
        .into_iter()
        .map(|p| {
            let mass = nu.integrate(&p);
            (p, mass)
        })
        .collect();
    let kept: Vec<usize> = (0..tents.len()).filter(|&j| tents[j].1 > 0.0).collect();
    let mut matrix = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..=x {
            let v: f64 = kept.iter().map(|&j| tents[j].0[x] * tents[j].0[y] / tents[j].1).sum();
            matrix[x * n + y] = v;
            matrix[y * n + x] = v;
        }
    }
    let centers = kept.iter().map(|&j| centers[j]).collect();
    Ok(MollifierKernel { delta, centers, degenerate, matrix, n })
}

/// `(K mu)(x) = (sum_y K[x][y] mu(y)) nu(x)`.
pub fn mollify(
    space: &FiniteMetricMeasureSpace,
    kernel: &MollifierKernel,
    mu: &DiscreteMeasure,
) -> Result<DiscreteMeasure> {
    if kernel.len() != space.len() || mu.len() != space.len() {
        return Err(Error::InvalidArgument("kernel, measure and space sizes disagree".into()));
    }
    if !mu.supported_in(space.nu()) {
        return Err(Error::SupportViolation);
    }
    let nu = space.nu();
    let out: Vec<f64> = (0..space.len())
        .map(|x| {
            if nu.mass(x) == 0.0 {
                return 0.0;
            }
            kernel.row(x).iter().zip(mu.weights()).map(|(k, m)| k * m).sum::<f64>() * nu.mass(x)
        })
        .collect();
    let total: f64 = out.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidMeasure(format!("mollified mass {total}")));
    }
    Ok(DiscreteMeasure::from_raw(out))
}

/// `K_delta mu` for each `delta` of a strictly decreasing list.
pub fn approximation_sequence(
    space: &FiniteMetricMeasureSpace,
    mu: &DiscreteMeasure,
    deltas: &[f64],
) -> Result<Vec<(f64, DiscreteMeasure)>> {
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("deltas must be strictly decreasing".into()));
    }
    deltas.iter().map(|&d| Ok((d, mollify(space, &build_mollifier(space, d)?, mu)?))).collect()
}

/// `4 eps + sqrt(eps (2 diam2 + eps))`.
pub fn pushforward_distortion_bound(eps: f64, diam2: f64) -> f64 {
    4.0 * eps + (eps * (2.0 * diam2 + eps)).sqrt()
}

/// A point map between finite spaces with its measured quality.
#[derive(Clone, Debug, Serialize)]
pub struct GhMap {
    pub forward: Vec<usize>,
    /// Approximate inverse: each target point goes to a source point whose
    /// image is nearest (lowest index on ties).
    pub inverse: Vec<usize>,
    /// `max |d2(f x, f x') - d1(x, x')|`
    pub distortion: f64,
    /// `max_{x2} min_x d2(x2, f x)`
    pub covering: f64,
    /// `max(distortion, covering)`, or the declared value when larger.
    pub epsilon: f64,
}

impl GhMap {
    pub fn new(
        source: &FiniteMetricMeasureSpace,
        target: &FiniteMetricMeasureSpace,
        forward: Vec<usize>,
        declared: Option<f64>,
    ) -> Result<Self> {
        if forward.len() != source.len() {
            return Err(Error::InvalidGhMap(format!("{} images for {} points", forward.len(), source.len())));
        }
        if let Some(&bad) = forward.iter().find(|&&y| y >= target.len()) {
            return Err(Error::InvalidGhMap(format!("image {bad} is not a target point")));
        }
        let n = source.len();
        let mut distortion: f64 = 0.0;
        for x in 0..n {
            for y in (x + 1)..n {
                distortion = distortion.max((target.dist(forward[x], forward[y]) - source.dist(x, y)).abs());
            }
        }
        let mut covering: f64 = 0.0;
        let mut inverse = Vec::with_capacity(target.len());
        for z in 0..target.len() {
            let (best, d) = (0..n).map(|x| (x, target.dist(z, forward[x]))).fold((0, f64::INFINITY), |acc, c| {
                if c.1 < acc.1 {
                    c
                } else {
                    acc
                }
            });
            covering = covering.max(d);
            inverse.push(best);
        }
        let measured = distortion.max(covering);
        let tol = 1e-12 * (1.0 + target.diameter().max(source.diameter()));
        let epsilon = match declared {
            Some(e) if e + tol < measured => {
                return Err(Error::InvalidGhMap(format!("declared epsilon {e} is below the measured {measured}")));
            }
            Some(e) => e,
            None => measured,
        };
        Ok(Self { forward, inverse, distortion, covering, epsilon })
    }

    /// Reads a `{x1_id: x2_id}` table.
    pub fn from_table(
        source: &FiniteMetricMeasureSpace,
        target: &FiniteMetricMeasureSpace,
        table: &std::collections::BTreeMap<String, String>,
        declared: Option<f64>,
    ) -> Result<Self> {
        let mut forward = vec![usize::MAX; source.len()];
        for (a, b) in table {
            forward[source.index_of(a)?] = target.index_of(b)?;
        }
        if let Some(x) = forward.iter().position(|&v| v == usize::MAX) {
            return Err(Error::InvalidGhMap(format!("point `{}` has no image", source.id(x))));
        }
        Self::new(source, target, forward, declared)
    }

    /// `(max_x d1(x, f' f x), max_z d2(z, f f' z))`.
    pub fn inverse_displacements(
        &self,
        source: &FiniteMetricMeasureSpace,
        target: &FiniteMetricMeasureSpace,
    ) -> (f64, f64) {
        let back = (0..source.len()).map(|x| source.dist(x, self.inverse[self.forward[x]])).fold(0.0, f64::max);
        let there = (0..target.len()).map(|z| target.dist(z, self.forward[self.inverse[z]])).fold(0.0, f64::max);
        (back, there)
    }

    pub fn push(&self, mu: &DiscreteMeasure, target_len: usize) -> Result<DiscreteMeasure> {
        pushforward(mu, &self.forward, target_len)
    }
}

/// Merges every point into its nearest representative (lowest index on
/// ties). The coarse space keeps the restricted metric and `f_* nu`.
pub fn coarsen(
    space: &FiniteMetricMeasureSpace,
    representatives: &[usize],
) -> Result<(FiniteMetricMeasureSpace, GhMap)> {
    let mut reps = representatives.to_vec();
    reps.sort_unstable();
    reps.dedup();
    if let Some(&bad) = reps.iter().find(|&&r| r >= space.len()) {
        return Err(Error::PointOutOfRange { index: bad, len: space.len() });
    }
    let forward: Vec<usize> = (0..space.len())
        .map(|x| {
            (0..reps.len())
                .fold((0, f64::INFINITY), |acc, k| {
                    let d = space.dist(x, reps[k]);
                    if d < acc.1 {
                        (k, d)
                    } else {
                        acc
                    }
                })
                .0
        })
        .collect();
    coarse_space(space, &reps, forward)
}

/// Merges each block `[k stride, (k + 1) stride)` of consecutive points
/// into its first point, which for a subdivided path or cycle collapses
/// the points of each stretch onto its start.
pub fn canonical_coarsening(
    space: &FiniteMetricMeasureSpace,
    stride: usize,
) -> Result<(FiniteMetricMeasureSpace, GhMap)> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    let reps: Vec<usize> = (0..space.len()).step_by(stride).collect();
    let forward = (0..space.len()).map(|x| x / stride).collect();
    coarse_space(space, &reps, forward)
}

fn coarse_space(
    space: &FiniteMetricMeasureSpace,
    reps: &[usize],
    forward: Vec<usize>,
) -> Result<(FiniteMetricMeasureSpace, GhMap)> {
    if reps.is_empty() {
        return Err(Error::InvalidArgument("no representatives".into()));
    }
    let ids = reps.iter().map(|&r| space.id(r).to_string()).collect();
    let dist = reps.iter().map(|&a| reps.iter().map(|&b| space.dist(a, b)).collect()).collect();
    let nu = pushforward(space.nu(), &forward, reps.len())?;
    let coarse = FiniteMetricMeasureSpace::from_metric(ids, dist, nu)?;
    let map = GhMap::new(space, &coarse, forward, None)?;
    Ok((coarse, map))
}

/// Quotient of a space by the group generated by point permutations.
#[derive(Clone, Debug)]
pub struct Quotient {
    pub space: FiniteMetricMeasureSpace,
    /// `projection[x]` is the orbit of `x`.
    pub projection: Vec<usize>,
    pub orbits: Vec<Vec<usize>>,
}

impl Quotient {
    pub fn project(&self, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        pushforward(mu, &self.projection, self.orbits.len())
    }

    /// Spreads each orbit's weight evenly over its points.
    pub fn lift(&self, weights: &[f64]) -> Result<DiscreteMeasure> {
        if weights.len() != self.orbits.len() {
            return Err(Error::InvalidArgument(format!("{} weights for {} orbits", weights.len(), self.orbits.len())));
        }
        // normalize before spreading so equal orbit weights lift to equal measures
        let weights = DiscreteMeasure::from_unnormalized(weights.to_vec())?;
        let mut out = vec![0.0; self.projection.len()];
        for (o, members) in self.orbits.iter().enumerate() {
            for &x in members {
                out[x] = weights.mass(o) / members.len() as f64;
            }
        }
        DiscreteMeasure::new(out)
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// Orbits become points; `d(o, o') = min d(x, x')` over members and the
/// quotient measure is the pushforward of `nu`. Point ids are member ids
/// joined with `|`.
pub fn quotient_by_group(space: &FiniteMetricMeasureSpace, generators: &[Vec<usize>]) -> Result<Quotient> {
    let n = space.len();
    let tol = 1e-12 * (1.0 + space.diameter());
    for (index, g) in generators.iter().enumerate() {
        let bad = |reason: String| Error::BadGenerator { index, reason };
        if g.len() != n {
            return Err(bad(format!("{} images for {} points", g.len(), n)));
        }
        let mut seen = vec![false; n];
        for &y in g {
            if y >= n || std::mem::replace(&mut seen[y], true) {
                return Err(bad("not a permutation".into()));
            }
        }
        for x in 0..n {
            if (space.nu().mass(g[x]) - space.nu().mass(x)).abs() > 1e-12 {
                return Err(bad(format!("moves nu mass at `{}`", space.id(x))));
            }
            for y in (x + 1)..n {
                if (space.dist(g[x], g[y]) - space.dist(x, y)).abs() > tol {
                    return Err(bad(format!("not an isometry at (`{}`, `{}`)", space.id(x), space.id(y))));
                }
            }
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for g in generators {
        for x in 0..n {
            let (a, b) = (find(&mut parent, x), find(&mut parent, g[x]));
            if a != b {
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi] = lo;
            }
        }
    }
    let mut orbit_of_root = vec![usize::MAX; n];
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    let mut projection = vec![0; n];
    for x in 0..n {
        let r = find(&mut parent, x);
        if orbit_of_root[r] == usize::MAX {
            orbit_of_root[r] = orbits.len();
            orbits.push(Vec::new());
        }
        projection[x] = orbit_of_root[r];
        orbits[orbit_of_root[r]].push(x);
    }
    let ids = orbits.iter().map(|o| o.iter().map(|&x| space.id(x)).collect::<Vec<_>>().join("|")).collect();
    let dist = orbits
        .iter()
        .map(|a| {
            orbits
                .iter()
                .map(|b| {
                    a.iter()
                        .flat_map(|&x| b.iter().map(move |&y| (x, y)))
                        .map(|(x, y)| space.dist(x, y))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect()
        })
        .collect();
    let nu = pushforward(space.nu(), &projection, orbits.len())?;
    let quotient = FiniteMetricMeasureSpace::from_metric(ids, dist, nu)?;
    Ok(Quotient { space: quotient, projection, orbits })
}

/// Rotation `i -> i + k (mod n)` of a cycle given in point order.
pub fn rotation(n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|i| (i + k) % n).collect()
}

/// One member of a converging sequence with its map into the limit.
#[derive(Clone, Debug)]
pub struct SequenceMember {
    pub space: FiniteMetricMeasureSpace,
    pub map: GhMap,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRow {
    pub i: usize,
    pub epsilon: f64,
    pub worst_defect: f64,
    pub budget: f64,
    /// `W2((f_i)_* nu_i, nu)` on the limit.
    pub nu_distance: f64,
    pub epsilon_tilde: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub n: f64,
    pub family: Vec<String>,
    pub rows: Vec<StabilityRow>,
    pub limit_defect: f64,
    pub limit_budget: f64,
    /// `min` over the tail half of `worst_defect_i + epsilon_tilde_i`.
    pub liminf_bound: f64,
    /// Limit defect within the bound.
    pub limit_pass: bool,
    /// `W2((f_i)_* nu_i, nu)` is nonincreasing.
    pub nu_converges: bool,
    /// Budgets are strictly decreasing along the sequence.
    pub budgets_decreasing: bool,
}

impl StabilityReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "epsilon_i", "worst_defect", "budget"])?;
        for r in &self.rows {
            w.write_record([
                r.i.to_string(),
                format!("{:e}", r.epsilon),
                format!("{:e}", r.worst_defect),
                format!("{:e}", r.budget),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn worst(report: &FamilyReport) -> (f64, f64) {
    let mut defect: f64 = 0.0;
    let mut budget: f64 = 0.0;
    for p in &report.pairs {
        for d in &p.per_u {
            defect = defect.max(d.defect);
            budget = budget.max(d.budget);
        }
    }
    (defect, budget)
}

/// Runs the nonnegative `N`-Ricci probe on each member and on the limit
/// with `pairs` seeded bump pairs per space, and compares the limit defect
/// with the liminf of the sequence defects plus the pushforward distortion
/// budgets.
pub fn stability_harness(
    sequence: &[SequenceMember],
    limit: &FiniteMetricMeasureSpace,
    family: &[EntropyFunction],
    n: f64,
    pairs: usize,
    seed: u64,
    options: ProbeOptions,
) -> Result<StabilityReport> {
    if sequence.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    for (i, m) in sequence.iter().enumerate() {
        if m.map.forward.len() != m.space.len() || m.map.forward.iter().any(|&y| y >= limit.len()) {
            return Err(Error::InvalidGhMap(format!("member {i} does not map into the limit")));
        }
    }
    let generator = BumpGenerator::default();
    let run = |space: &FiniteMetricMeasureSpace| -> Result<(f64, f64)> {
        let trial = generator.pairs(space, pairs, seed)?;
        Ok(worst(&n_ricci_nonneg_test(space, n, &trial, family, options)?))
    };
    let diam = limit.diameter();
    let rows = sequence
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let (worst_defect, budget) = run(&m.space)?;
            let pushed = m.map.push(m.space.nu(), limit.len())?;
            let nu_distance = w2(limit, &pushed, limit.nu())?.distance;
            Ok(StabilityRow {
                i,
                epsilon: m.map.epsilon,
                worst_defect,
                budget,
                nu_distance,
                epsilon_tilde: pushforward_distortion_bound(m.map.epsilon, diam),
                pass: worst_defect <= budget,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (limit_defect, limit_budget) = run(limit)?;
    let tail = &rows[rows.len() / 2..];
    let liminf_bound = tail.iter().map(|r| r.worst_defect + r.epsilon_tilde).fold(f64::INFINITY, f64::min);
    let nu_converges = rows.windows(2).all(|w| w[1].nu_distance <= w[0].nu_distance + 1e-12);
    if !nu_converges {
        warn!("pushed reference measures do not approach the limit monotonically in W2");
    }
    Ok(StabilityReport {
        n,
        family: family.iter().map(|u| u.name()).collect(),
        budgets_decreasing: rows.windows(2).all(|w| w[1].budget < w[0].budget),
        rows,
        limit_defect,
        limit_budget,
        liminf_bound,
        limit_pass: limit_defect <= liminf_bound,
        nu_converges,
    })
}
