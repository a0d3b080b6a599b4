//! Displacement-convexity probes and the synthetic curvature tests.
//!
//! A probe evaluates `U_nu` along a discrete Wasserstein geodesic and reports
//! the largest violation of
//! `U_nu(mu_t) <= t U_nu(mu_1) + (1 - t) U_nu(mu_0) - lambda t (1 - t) W2^2 / 2`.
//! Finitely many trial pairs can only falsify a curvature bound, so a passing
//! report means "no violation found", never a proof.

use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::{decompose, evaluate, lambda_of, require_dc, EntropyFunction};
use crate::error::{Error, Result};
use crate::geodesy::{dyadic_times, glue_midpoint_geodesic_with, DynamicalPlan, Snap};
use crate::mmspace::{DiscreteMeasure, FiniteMetricMeasureSpace};
use crate::transport::w2;

/// Multiplier `C` in the budget `C tau (1 + Lip(U'))`.
pub const BUDGET_FACTOR: f64 = 4.0;

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    /// Max over sampled `t` of the convexity violation; `-inf` when every
    /// interior inequality is vacuous.
    pub defect: f64,
    pub worst_t: f64,
    pub geodesic_id: String,
    pub tolerance_budget: f64,
    pub lambda: f64,
    pub w2: f64,
    /// `(t, U_nu(mu_t))` samples.
    pub values: Vec<(f64, f64)>,
}

impl ConvexityReport {
    pub fn pass(&self) -> bool {
        self.defect <= self.tolerance_budget
    }
}

/// A sampled discrete geodesic with its provenance tag.
#[derive(Clone, Debug)]
pub struct SampledGeodesic {
    pub id: String,
    pub times: Vec<f64>,
    pub measures: Vec<DiscreteMeasure>,
}

/// Candidate geodesics between `mu0` and `mu1`: the glued midpoint geodesic
/// and, when `extra` is set, the displacement interpolation of the optimal
/// plan at the same dyadic times. Both split mass between path vertices.
pub fn candidate_geodesics(
    space: &FiniteMetricMeasureSpace,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    depth: usize,
    extra: bool,
) -> Result<Vec<SampledGeodesic>> {
    let times = dyadic_times(depth);
    let mut out = vec![SampledGeodesic {
        id: format!("glued(depth={depth})"),
        times: times.clone(),
        measures: glue_midpoint_geodesic_with(space, mu0, mu1, depth, Snap::Split)?,
    }];
    if extra {
        let solution = w2(space, mu0, mu1)?;
        let plan = DynamicalPlan::from_solution(space, &solution)?;
        out.push(SampledGeodesic {
            id: format!("direct(depth={depth})"),
            measures: times.iter().map(|&t| plan.evaluate(t, Snap::Split)).collect(),
            times,
        });
    }
    Ok(out)
}

/// `C tau (1 + Lip(U'))` over the positive density range seen on the geodesic.
pub fn tolerance_budget(space: &FiniteMetricMeasureSpace, u: &EntropyFunction, measures: &[DiscreteMeasure]) -> f64 {
    let nu = space.nu();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for m in measures {
        for x in 0..nu.len() {
            if nu.mass(x) > 0.0 && m.mass(x) > 0.0 {
                let rho = m.mass(x) / nu.mass(x);
                lo = lo.min(rho);
                hi = hi.max(rho);
            }
        }
    }
    let lip = if hi > 0.0 { u.derivative_lipschitz(lo, hi) } else { 0.0 };
    BUDGET_FACTOR * space.mesh() * (1.0 + lip)
}

fn check_support(space: &FiniteMetricMeasureSpace, measures: &[&DiscreteMeasure]) -> Result<()> {
    for m in measures {
        if m.len() != space.len() {
            return Err(Error::InvalidArgument("measure does not live on the space".into()));
        }
        if !m.supported_in(space.nu()) {
            return Err(Error::SupportViolation);
        }
    }
    Ok(())
}

/// Convexity defect of `U` along an already sampled geodesic.
pub fn defect_along(
    space: &FiniteMetricMeasureSpace,
    u: &EntropyFunction,
    geodesic: &SampledGeodesic,
    lambda: f64,
    w2_distance: f64,
) -> Result<ConvexityReport> {
    let values = geodesic.measures.iter().map(|m| evaluate(u, m, space.nu())).collect::<Result<Vec<f64>>>()?;
    let (e0, e1) = (values[0], *values.last().expect("nonempty geodesic"));
    let w2sq = w2_distance * w2_distance;
    let mut defect = f64::NEG_INFINITY;
    let mut worst_t = 0.0;
    for (&t, &e) in geodesic.times.iter().zip(&values) {
        let violation = if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            let modulus = 0.5 * lambda * t * (1.0 - t) * w2sq;
            let rhs = if modulus == 0.0 { t * e1 + (1.0 - t) * e0 } else { t * e1 + (1.0 - t) * e0 - modulus };
            if rhs == f64::INFINITY || rhs.is_nan() {
                f64::NEG_INFINITY
            } else {
                e - rhs
            }
        };
        if violation > defect {
            defect = violation;
            worst_t = t;
        }
    }
    Ok(ConvexityReport {
        defect,
        worst_t,
        geodesic_id: geodesic.id.clone(),
        tolerance_budget: tolerance_budget(space, u, &geodesic.measures),
        lambda,
        w2: w2_distance,
        values: geodesic.times.iter().cloned().zip(values).collect(),
    })
}

/// Defect of `U` with modulus `lambda` along the glued geodesic.
pub fn convexity_defect(
    space: &FiniteMetricMeasureSpace,
    u: &EntropyFunction,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    lambda: f64,
    depth: usize,
) -> Result<ConvexityReport> {
    check_support(space, &[mu0, mu1])?;
    let geodesic = candidate_geodesics(space, mu0, mu1, depth, false)?.remove(0);
    let distance = w2(space, mu0, mu1)?.distance;
    defect_along(space, u, &geodesic, lambda, distance)
}

/// Options shared by the family probes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProbeOptions {
    pub depth: usize,
    /// Also try the direct interpolation of the optimal plan and keep the
    /// geodesic with the smallest family excess.
    pub extra_geodesics: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { depth: crate::geodesy::DEFAULT_DEPTH, extra_geodesics: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyDefect {
    pub u: String,
    pub lambda: f64,
    pub defect: f64,
    pub worst_t: f64,
    pub budget: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub pair: usize,
    pub geodesic_id: String,
    pub w2: f64,
    pub per_u: Vec<FamilyDefect>,
    pub worst_defect: f64,
    /// `max_U (defect - budget)`; nonpositive means the pair passes.
    pub worst_excess: f64,
    pub pass: bool,
    #[serde(skip)]
    pub values: Vec<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    pub test: String,
    pub parameter: f64,
    pub family: Vec<String>,
    pub depth: usize,
    pub budget_factor: f64,
    pub mesh: f64,
    pub pairs: Vec<PairReport>,
    pub worst_excess: f64,
    pub pass: bool,
    pub verdict: String,
}

fn family_probe(
    space: &FiniteMetricMeasureSpace,
    pairs: &[(DiscreteMeasure, DiscreteMeasure)],
    family: &[(EntropyFunction, f64)],
    options: ProbeOptions,
    test: &str,
    parameter: f64,
) -> Result<FamilyReport> {
    for (a, b) in pairs {
        check_support(space, &[a, b])?;
    }
    let reports = pairs
        .par_iter()
        .enumerate()
        .map(|(k, (a, b))| probe_pair(space, k, a, b, family, options))
        .collect::<Result<Vec<PairReport>>>()?;
    let worst_excess = reports.iter().map(|r| r.worst_excess).fold(f64::NEG_INFINITY, f64::max);
    let pass = reports.iter().all(|r| r.pass);
    Ok(FamilyReport {
        test: test.to_string(),
        parameter,
        family: family.iter().map(|(u, _)| u.name()).collect(),
        depth: options.depth,
        budget_factor: BUDGET_FACTOR,
        mesh: space.mesh(),
        pairs: reports,
        worst_excess,
        pass,
        verdict: if pass { "no violation found".into() } else { "violation beyond budget".into() },
    })
}

fn probe_pair(
    space: &FiniteMetricMeasureSpace,
    index: usize,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    family: &[(EntropyFunction, f64)],
    options: ProbeOptions,
) -> Result<PairReport> {
    let distance = w2(space, a, b)?.distance;
    let mut best: Option<PairReport> = None;
    for geodesic in candidate_geodesics(space, a, b, options.depth, options.extra_geodesics)? {
        let mut per_u = Vec::with_capacity(family.len());
        let mut values = Vec::with_capacity(family.len());
        for (u, lambda) in family {
            let r = defect_along(space, u, &geodesic, *lambda, distance)?;
            per_u.push(FamilyDefect {
                u: u.name(),
                lambda: *lambda,
                defect: r.defect,
                worst_t: r.worst_t,
                budget: r.tolerance_budget,
                pass: r.pass(),
            });
            values.push(r.values);
        }
        let worst_defect = per_u.iter().map(|d| d.defect).fold(f64::NEG_INFINITY, f64::max);
        let worst_excess = per_u.iter().map(|d| d.defect - d.budget).fold(f64::NEG_INFINITY, f64::max);
        let report = PairReport {
            pair: index,
            geodesic_id: geodesic.id,
            w2: distance,
            pass: per_u.iter().all(|d| d.pass),
            per_u,
            worst_defect,
            worst_excess,
            values,
        };
        if best.as_ref().is_none_or(|b| report.worst_excess < b.worst_excess) {
            best = Some(report);
        }
    }
    Ok(best.expect("at least one candidate geodesic"))
}

/// Nonnegative `N`-Ricci probe: one geodesic per pair, `lambda = 0` for
/// every `U` of the family on that same geodesic.
pub fn n_ricci_nonneg_test(
    space: &FiniteMetricMeasureSpace,
    n: f64,
    pairs: &[(DiscreteMeasure, DiscreteMeasure)],
    family: &[EntropyFunction],
    options: ProbeOptions,
) -> Result<FamilyReport> {
    for u in family {
        require_dc(u, n)?;
    }
    let family: Vec<(EntropyFunction, f64)> = family.iter().map(|u| (u.clone(), 0.0)).collect();
    family_probe(space, pairs, &family, options, "n-ricci-nonnegative", n)
}

/// `inf`-Ricci bounded below by `K`: modulus `lambda(U, K)` per `U`.
pub fn inf_ricci_bound_test(
    space: &FiniteMetricMeasureSpace,
    k: f64,
    pairs: &[(DiscreteMeasure, DiscreteMeasure)],
    family: &[EntropyFunction],
    options: ProbeOptions,
) -> Result<FamilyReport> {
    let family =
        family.iter().map(|u| Ok((u.clone(), lambda_of(u, k)?))).collect::<Result<Vec<(EntropyFunction, f64)>>>()?;
    family_probe(space, pairs, &family, options, "inf-ricci-lower-bound", k)
}

#[derive(Clone, Debug, Serialize)]
pub struct BishopGromovReport {
    /// `max (nu(B_r2) - (r2/r1)^N nu(B_r1))_+` over the sampled grid.
    pub violation: f64,
    /// `(center id, r1, r2)` attaining the violation, if positive.
    pub worst: Option<(String, f64, f64)>,
    pub mesh: f64,
}

/// Bishop-Gromov ball-growth check for finite `N`.
pub fn bishop_gromov_check(
    space: &FiniteMetricMeasureSpace,
    n: f64,
    centers: &[usize],
    radii: &[f64],
) -> Result<BishopGromovReport> {
    if !(n.is_finite() && n >= 1.0) {
        return Err(Error::InvalidArgument(format!("Bishop-Gromov needs finite N >= 1, got {n}")));
    }
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("radii must be positive and sorted".into()));
    }
    for &c in centers {
        if c >= space.len() {
            return Err(Error::PointOutOfRange { index: c, len: space.len() });
        }
        if space.nu().mass(c) <= 0.0 {
            return Err(Error::InvalidArgument(format!("center `{}` lies outside supp(nu)", space.id(c))));
        }
    }
    let mut violation = 0.0;
    let mut worst = None;
    for &c in centers {
        let masses: Vec<f64> = radii.iter().map(|&r| space.ball_mass(c, r)).collect();
        for i in 0..radii.len() {
            for j in i..radii.len() {
                let v = masses[j] - (radii[j] / radii[i]).powf(n) * masses[i];
                if v > violation {
                    violation = v;
                    worst = Some((space.id(c).to_string(), radii[i], radii[j]));
                }
            }
        }
    }
    Ok(BishopGromovReport { violation, worst, mesh: space.mesh() })
}

/// Densities `mu / nu` of a measure, for reporting.
pub fn densities(space: &FiniteMetricMeasureSpace, mu: &DiscreteMeasure) -> Result<Vec<f64>> {
    Ok(decompose(mu, space.nu())?.density)
}
