//! Generalized Fisher information and two-sided checks of the functional
//! inequalities implied by curvature bounds: HWI, log-Sobolev, Talagrand,
//! Poincare, Sobolev-type and weak Bonnet-Myers.
//!
//! Every check returns both sides so that a caller can recompute the slack.
//! The default tolerance is `1e-9 + tau * max(|lhs|, |rhs|)` where `tau` is
//! the mesh of the space.

use log::warn;
use serde::Serialize;
use serde_json::{json, Value};

use crate::curvature::{convexity_defect, ConvexityReport};
use crate::entropy::{decompose, evaluate, EntropyFunction};
use crate::error::{Error, Result};
use crate::mmspace::{DiscreteMeasure, FiniteMetricMeasureSpace, GradientMode};
use crate::transport::w2;

/// Constant in the weak Bonnet-Myers diameter bound.
pub const BONNET_MYERS_CONSTANT: f64 = 7.7;

#[derive(Clone, Debug, Serialize)]
pub struct InequalityResult {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub inputs: Value,
}

impl InequalityResult {
    pub fn new(name: &str, lhs: f64, rhs: f64, tolerance: f64, inputs: Value) -> Self {
        let slack = rhs - lhs;
        let pass = slack >= -tolerance || (rhs == f64::INFINITY && lhs < f64::INFINITY);
        Self { name: name.to_string(), lhs, rhs, slack, tolerance, pass, inputs }
    }
}

/// `1e-9 + tau * max(|lhs|, |rhs|)` over the finite sides.
pub fn default_tolerance(space: &FiniteMetricMeasureSpace, lhs: f64, rhs: f64) -> f64 {
    let scale = [lhs, rhs].iter().filter(|v| v.is_finite()).map(|v| v.abs()).fold(0.0, f64::max);
    1e-9 + space.mesh() * scale
}

fn check_fn(space: &FiniteMetricMeasureSpace, f: &[f64]) -> Result<()> {
    if f.len() != space.len() {
        return Err(Error::InvalidArgument(format!("function has {} values for {} points", f.len(), space.len())));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("function values must be finite".into()));
    }
    Ok(())
}

fn support_mask(space: &FiniteMetricMeasureSpace) -> Vec<bool> {
    space.nu().weights().iter().map(|&w| w > 0.0).collect()
}

/// `sum |grad^- f|^2 nu` (or the full gradient) with neighbourhoods inside `supp(nu)`.
pub fn dirichlet_energy(space: &FiniteMetricMeasureSpace, f: &[f64], mode: GradientMode, radius: f64) -> f64 {
    let mask = support_mask(space);
    let g = space.gradient_norm_on(f, mode, radius, Some(&mask));
    g.iter().zip(space.nu().weights()).map(|(g, w)| g * g * w).sum()
}

/// `I_U(mu) = sum rho U''(rho)^2 |grad^- rho|^2 nu`.
pub fn fisher_information(
    space: &FiniteMetricMeasureSpace,
    mu: &DiscreteMeasure,
    u: &EntropyFunction,
    radius: f64,
) -> Result<f64> {
    if !u.is_closed_form() {
        return Err(Error::NoSecondDerivative(u.name()));
    }
    let d = decompose(mu, space.nu())?;
    if d.singular_mass > 0.0 {
        return Err(Error::NotAbsolutelyContinuous);
    }
    let nu = space.nu();
    if let Some(x) = (0..nu.len()).find(|&x| nu.mass(x) > 0.0 && d.density[x] <= 0.0) {
        return Err(Error::VanishingDensity(x));
    }
    let mask = support_mask(space);
    let grad = space.gradient_norm_on(&d.density, GradientMode::Descending, radius, Some(&mask));
    let mut total = 0.0;
    for x in 0..nu.len() {
        if nu.mass(x) > 0.0 {
            let rho = d.density[x];
            let u2 = u.second_derivative(rho)?;
            total += rho * u2 * u2 * grad[x] * grad[x] * nu.mass(x);
        }
    }
    Ok(total)
}

/// The two HWI inequalities between `mu` and `nu`, plus the `lambda > 0`
/// chain when applicable.
#[derive(Clone, Debug, Serialize)]
pub struct HwiReport {
    pub w2: f64,
    /// `U_nu(mu) - U(1)`
    pub entropy: f64,
    pub fisher: f64,
    pub lambda: f64,
    pub results: Vec<InequalityResult>,
    /// Convexity along the probed geodesic from `mu` to `nu`, the hypothesis
    /// under which the inequalities are expected.
    pub convexity: Option<ConvexityReport>,
}

impl HwiReport {
    pub fn pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }
}

/// `lambda W^2 / 2 <= U_nu(mu) - U(1) <= W sqrt(I) - lambda W^2 / 2`, and for
/// `lambda > 0` also `W sqrt(I) - lambda W^2 / 2 <= I / (2 lambda)` and
/// `U_nu(mu) - U(1) <= I / (2 lambda)`.
///
/// With `depth > 0` the convexity hypothesis is probed along the glued
/// geodesic from `mu` to `nu` and attached to the report.
pub fn hwi_check(
    space: &FiniteMetricMeasureSpace,
    mu: &DiscreteMeasure,
    u: &EntropyFunction,
    lambda: f64,
    depth: usize,
    radius: f64,
) -> Result<HwiReport> {
    let nu = space.nu();
    let fisher = fisher_information(space, mu, u, radius)?;
    let entropy = evaluate(u, mu, nu)? - u.eval(1.0);
    let w = w2(space, mu, nu)?.distance;
    let half = 0.5 * lambda * w * w;
    let upper = w * fisher.sqrt() - half;
    let inputs = json!({ "u": u.name(), "lambda": lambda, "radius": radius });
    let tol = |l: f64, r: f64| default_tolerance(space, l, r);
    let mut results = vec![
        InequalityResult::new("hwi-lower", half, entropy, tol(half, entropy), inputs.clone()),
        InequalityResult::new("hwi-upper", entropy, upper, tol(entropy, upper), inputs.clone()),
    ];
    if lambda > 0.0 {
        let bound = fisher / (2.0 * lambda);
        results.push(InequalityResult::new("hwi-chain", upper, bound, tol(upper, bound), inputs.clone()));
        results.push(InequalityResult::new("entropy-fisher", entropy, bound, tol(entropy, bound), inputs));
    }
    let convexity = if depth > 0 { Some(convexity_defect(space, u, mu, nu, lambda, depth)?) } else { None };
    Ok(HwiReport { w2: w, entropy, fisher, lambda, results, convexity })
}

/// Diameter form for `lambda <= 0`: `U_nu(mu) - U(1) <= diam sqrt(I) - lambda diam^2 / 2`.
pub fn hwi_diameter_check(
    space: &FiniteMetricMeasureSpace,
    mu: &DiscreteMeasure,
    u: &EntropyFunction,
    lambda: f64,
    radius: f64,
) -> Result<InequalityResult> {
    if lambda > 0.0 {
        return Err(Error::InvalidArgument("the diameter form needs lambda <= 0".into()));
    }
    let fisher = fisher_information(space, mu, u, radius)?;
    let entropy = evaluate(u, mu, space.nu())? - u.eval(1.0);
    let diam = space.diameter();
    let rhs = diam * fisher.sqrt() - 0.5 * lambda * diam * diam;
    Ok(InequalityResult::new(
        "hwi-diameter",
        entropy,
        rhs,
        default_tolerance(space, entropy, rhs),
        json!({ "u": u.name(), "lambda": lambda, "radius": radius }),
    ))
}

fn normalize_l2(space: &FiniteMetricMeasureSpace, f: &[f64]) -> Result<Vec<f64>> {
    let norm: f64 = f.iter().zip(space.nu().weights()).map(|(f, w)| f * f * w).sum();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("function vanishes on supp(nu)".into()));
    }
    if (norm - 1.0).abs() > 1e-12 {
        warn!("renormalizing f: sum f^2 nu = {norm}");
        let c = norm.sqrt();
        return Ok(f.iter().map(|v| v / c).collect());
    }
    Ok(f.to_vec())
}

fn entropy_of_square(space: &FiniteMetricMeasureSpace, f: &[f64]) -> f64 {
    f.iter()
        .zip(space.nu().weights())
        .filter(|(f, w)| **w > 0.0 && **f != 0.0)
        .map(|(f, w)| {
            let s = f * f;
            s * s.ln() * w
        })
        .sum()
}

/// Log-Sobolev: `sum f^2 log f^2 nu <= (2/K) sum |grad^- f|^2 nu` for
/// `K > 0`, and `<= 2 diam sqrt(sum |grad^- f|^2 nu) - K diam^2 / 2` otherwise.
/// `f` is renormalized to `sum f^2 nu = 1` with a warning.
pub fn log_sobolev_check(
    space: &FiniteMetricMeasureSpace,
    f: &[f64],
    k: f64,
    radius: f64,
    mode: GradientMode,
) -> Result<InequalityResult> {
    check_fn(space, f)?;
    let f = normalize_l2(space, f)?;
    let lhs = entropy_of_square(space, &f);
    let energy = dirichlet_energy(space, &f, mode, radius);
    let rhs = if k > 0.0 {
        2.0 / k * energy
    } else {
        let diam = space.diameter();
        2.0 * diam * energy.sqrt() - 0.5 * k * diam * diam
    };
    Ok(InequalityResult::new(
        "log-sobolev",
        lhs,
        rhs,
        default_tolerance(space, lhs, rhs),
        json!({ "K": k, "radius": radius, "mode": mode }),
    ))
}

/// Left side of log-Sobolev through `rho_eps = (f^2 + eps) / (1 + eps)`.
pub fn log_sobolev_lhs_regularized(space: &FiniteMetricMeasureSpace, f: &[f64], eps: f64) -> Result<f64> {
    check_fn(space, f)?;
    let f = normalize_l2(space, f)?;
    Ok(f.iter()
        .zip(space.nu().weights())
        .filter(|(_, w)| **w > 0.0)
        .map(|(f, w)| {
            let r = (f * f + eps) / (1.0 + eps);
            r * r.ln() * w
        })
        .sum())
}

/// Talagrand: `W2(mu, nu) <= sqrt(2 H(mu) / K)` for `K > 0`.
pub fn talagrand_check(space: &FiniteMetricMeasureSpace, mu: &DiscreteMeasure, k: f64) -> Result<InequalityResult> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("Talagrand needs K > 0, got {k}")));
    }
    let lhs = w2(space, mu, space.nu())?.distance;
    let h = evaluate(&EntropyFunction::shannon(), mu, space.nu())?;
    let rhs = (2.0 * h / k).max(0.0).sqrt();
    Ok(InequalityResult::new("talagrand", lhs, rhs, default_tolerance(space, lhs, rhs), json!({ "K": k })))
}

/// Poincare: `sum h^2 nu <= (1/K) sum |grad^- h|^2 nu`; `h` is centred
/// against `nu` with a warning.
pub fn poincare_check(
    space: &FiniteMetricMeasureSpace,
    h: &[f64],
    k: f64,
    radius: f64,
    mode: GradientMode,
) -> Result<InequalityResult> {
    check_fn(space, h)?;
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("Poincare needs K > 0, got {k}")));
    }
    let mean = space.nu().integrate(h);
    let h: Vec<f64> = if mean.abs() > 1e-12 {
        warn!("centering h: sum h nu = {mean}");
        h.iter().map(|v| v - mean).collect()
    } else {
        h.to_vec()
    };
    let lhs: f64 = h.iter().zip(space.nu().weights()).map(|(h, w)| h * h * w).sum();
    let rhs = dirichlet_energy(space, &h, mode, radius) / k;
    Ok(InequalityResult::new(
        "poincare",
        lhs,
        rhs,
        default_tolerance(space, lhs, rhs),
        json!({ "K": k, "radius": radius, "mode": mode }),
    ))
}

/// Sobolev-type inequalities for `N > 2`, with `f >= 0` renormalized to
/// `sum f^(2N/(N-2)) nu = 1`:
///
/// `1 - sum f^(2(N-1)/(N-2)) nu <= c diam sqrt(E)` and
/// `1 <= c diam sqrt(E) + (sum f nu)^(2/(N+2))`, where
/// `c = 2(N-1) / (N(N-2))` and `E = sum |grad^- f|^2 nu`.
pub fn sobolev_check(
    space: &FiniteMetricMeasureSpace,
    f: &[f64],
    n: f64,
    radius: f64,
) -> Result<Vec<InequalityResult>> {
    if !(n > 2.0) {
        return Err(Error::InvalidArgument(format!("Sobolev check needs N > 2, got {n}")));
    }
    check_fn(space, f)?;
    if let Some(x) = f.iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidArgument(format!("f is negative at point {x}")));
    }
    let nu = space.nu();
    let q = 2.0 * n / (n - 2.0);
    let norm: f64 = f.iter().zip(nu.weights()).map(|(f, w)| f.powf(q) * w).sum();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("function vanishes on supp(nu)".into()));
    }
    let f: Vec<f64> = if (norm - 1.0).abs() > 1e-12 {
        warn!("renormalizing f: sum f^q nu = {norm}");
        let c = norm.powf(-1.0 / q);
        f.iter().map(|v| v * c).collect()
    } else {
        f.to_vec()
    };
    let c = 2.0 * (n - 1.0) / (n * (n - 2.0));
    let gradient = c * space.diameter() * dirichlet_energy(space, &f, GradientMode::Descending, radius).sqrt();
    let p = 2.0 * (n - 1.0) / (n - 2.0);
    let lhs = 1.0 - f.iter().zip(nu.weights()).map(|(f, w)| f.powf(p) * w).sum::<f64>();
    let mean: f64 = nu.integrate(&f);
    let rhs2 = gradient + mean.powf(2.0 / (n + 2.0));
    let inputs = json!({ "N": n, "radius": radius });
    Ok(vec![
        InequalityResult::new("sobolev", lhs, gradient, default_tolerance(space, lhs, gradient), inputs.clone()),
        InequalityResult::new("sobolev-l1", 1.0, rhs2, default_tolerance(space, 1.0, rhs2), inputs),
    ])
}

/// Weak Bonnet-Myers: `diam(X) <= 7.7 sqrt(N / K)` for `K > 0`.
pub fn bonnet_myers_check(space: &FiniteMetricMeasureSpace, n: f64, k: f64) -> Result<InequalityResult> {
    if !(k > 0.0) || !(n >= 1.0) {
        return Err(Error::InvalidArgument(format!("Bonnet-Myers needs K > 0 and N >= 1, got K = {k}, N = {n}")));
    }
    let lhs = space.diameter();
    let rhs = BONNET_MYERS_CONSTANT * (n / k).sqrt();
    Ok(InequalityResult::new("bonnet-myers", lhs, rhs, default_tolerance(space, lhs, rhs), json!({ "N": n, "K": k })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmspace::WeightedGraph;

    fn path(n: usize) -> FiniteMetricMeasureSpace {
        FiniteMetricMeasureSpace::build(&WeightedGraph::path(n, 1.0 / (n - 1) as f64), &vec![1.0; n], 1).unwrap()
    }

    #[test]
    fn fisher_cases() {
        let s = path(6);
        let r = s.default_gradient_radius();
        let nu = s.nu().clone();
        assert_eq!(fisher_information(&s, &nu, &EntropyFunction::shannon(), r).unwrap(), 0.0);

        let mu = DiscreteMeasure::from_unnormalized(vec![1.0, 2.0, 3.0, 3.0, 2.0, 1.0]).unwrap();
        let rho: Vec<f64> = (0..6).map(|x| mu.mass(x) / nu.mass(x)).collect();
        let g = s.gradient_norm(&rho, GradientMode::Descending, r);
        let shannon: f64 = (0..6).map(|x| g[x] * g[x] / rho[x] * nu.mass(x)).sum();
        let got = fisher_information(&s, &mu, &EntropyFunction::shannon(), r).unwrap();
        assert!((got - shannon).abs() < 1e-12 * shannon);

        let n: f64 = 3.0;
        let un: f64 =
            (0..6).map(|x| ((n - 1.0) / n).powi(2) * g[x] * g[x] / rho[x].powf(2.0 / n + 1.0) * nu.mass(x)).sum();
        let got = fisher_information(&s, &mu, &EntropyFunction::power_entropy(n).unwrap(), r).unwrap();
        assert!((got - un).abs() < 1e-12 * un);
    }

    #[test]
    fn fisher_errors() {
        let s = path(4);
        let mu = DiscreteMeasure::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            fisher_information(&s, &mu, &EntropyFunction::shannon(), 1.0),
            Err(Error::VanishingDensity(2))
        ));
        let table = EntropyFunction::tabulated(vec![(1.0, 1.0)]).unwrap();
        assert!(matches!(fisher_information(&s, s.nu(), &table, 1.0), Err(Error::NoSecondDerivative(_))));
    }

    #[test]
    fn hwi_at_reference() {
        let s = path(5);
        let nu = s.nu().clone();
        let r = hwi_check(&s, &nu, &EntropyFunction::shannon(), 1.0, 2, s.default_gradient_radius()).unwrap();
        assert_eq!(r.w2, 0.0);
        assert_eq!(r.entropy, 0.0);
        assert!(r.pass());
    }

    #[test]
    fn hwi_chain_am_gm() {
        let s = path(9);
        let mu = DiscreteMeasure::from_unnormalized((0..9).map(|x| 1.0 + x as f64).collect()).unwrap();
        let rep = hwi_check(&s, &mu, &EntropyFunction::shannon(), 2.0, 0, s.default_gradient_radius()).unwrap();
        assert_eq!(rep.results.len(), 4);
        // the third link holds by AM-GM regardless of geometry
        assert!(rep.results[2].slack >= 0.0);
    }

    #[test]
    fn lsi_constant() {
        let s = path(7);
        let r = log_sobolev_check(&s, &[1.0; 7], 1.0, s.default_gradient_radius(), GradientMode::Descending).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert!(r.pass);
        // auto-renormalization
        let r2 = log_sobolev_check(&s, &[3.0; 7], 1.0, 1.0, GradientMode::Descending).unwrap();
        assert!(r2.lhs.abs() < 1e-12);
    }

    #[test]
    fn lsi_sign_symmetry_full_gradient() {
        let s = path(7);
        let f: Vec<f64> = (0..7).map(|x| 1.0 + 0.1 * x as f64).collect();
        let g: Vec<f64> = f.iter().map(|v| -v).collect();
        let a = log_sobolev_check(&s, &f, 1.0, 0.3, GradientMode::Full).unwrap();
        let b = log_sobolev_check(&s, &g, 1.0, 0.3, GradientMode::Full).unwrap();
        assert_eq!(a.lhs, b.lhs);
        assert_eq!(a.rhs, b.rhs);
    }

    #[test]
    fn lsi_regularization() {
        let s = path(7);
        let f: Vec<f64> = (0..7).map(|x| 1.0 + 0.2 * x as f64).collect();
        let exact = log_sobolev_check(&s, &f, 1.0, 0.3, GradientMode::Descending).unwrap().lhs;
        for eps in [1e-6, 1e-9] {
            assert!((log_sobolev_lhs_regularized(&s, &f, eps).unwrap() - exact).abs() < 1e-5);
        }
    }

    #[test]
    fn talagrand_cases() {
        let s = path(5);
        let nu = s.nu().clone();
        let r = talagrand_check(&s, &nu, 1.0).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        let d = talagrand_check(&s, &DiscreteMeasure::dirac(5, 0), 2.0).unwrap();
        assert!(d.lhs <= s.diameter());
        assert!((d.rhs - (2.0 * 5f64.ln() / 2.0).sqrt()).abs() < 1e-12);
        assert!(talagrand_check(&s, &nu, 0.0).is_err());
    }

    #[test]
    fn poincare_cases() {
        let s = path(5);
        let r = poincare_check(&s, &[0.0; 5], 1.0, 0.3, GradientMode::Descending).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        // auto-centering leaves constants at zero
        let r = poincare_check(&s, &[2.0; 5], 1.0, 0.3, GradientMode::Descending).unwrap();
        assert!(r.lhs.abs() < 1e-24);
    }

    #[test]
    fn poincare_from_lsi_taylor() {
        // f_eps = sqrt(1 + eps h) with centred h: LSI lhs ~ eps^2/2 sum h^2 nu
        // and LSI rhs ~ (2/K) eps^2/4 sum |grad h|^2 nu to second order
        let s = path(9);
        let mut h: Vec<f64> = (0..9).map(|x| (x as f64 * 0.7).sin()).collect();
        let mean = s.nu().integrate(&h);
        h.iter_mut().for_each(|v| *v -= mean);
        let eps = 1e-3;
        let f: Vec<f64> = h.iter().map(|v| (1.0 + eps * v).sqrt()).collect();
        let radius = s.default_gradient_radius();
        let lsi = log_sobolev_check(&s, &f, 1.0, radius, GradientMode::Full).unwrap();
        let p = poincare_check(&s, &h, 1.0, radius, GradientMode::Full).unwrap();
        let scale = eps * eps / 2.0;
        assert!((lsi.lhs / scale - p.lhs).abs() < 1e-2 * p.lhs.max(1e-12));
        assert!((lsi.rhs / scale - p.rhs).abs() < 1e-2 * p.rhs.max(1e-12));
    }

    #[test]
    fn sobolev_cases() {
        let s = path(6);
        let r = sobolev_check(&s, &[1.0; 6], 3.0, 0.3).unwrap();
        assert!(r[0].lhs.abs() < 1e-12);
        assert!(r.iter().all(|x| x.pass));
        assert!(sobolev_check(&s, &[1.0; 6], 2.0, 0.3).is_err());
        assert!(sobolev_check(&s, &[1.0, -1.0, 1.0, 1.0, 1.0, 1.0], 3.0, 0.3).is_err());
    }

    #[test]
    fn bonnet_myers_cases() {
        let p = FiniteMetricMeasureSpace::build(&WeightedGraph::new().vertex("x"), &[1.0], 1).unwrap();
        let r = bonnet_myers_check(&p, 2.0, 1.0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!((r.rhs - 7.7 * 2f64.sqrt()).abs() < 1e-12);
        let s = path(5);
        assert!(bonnet_myers_check(&s, 2.0, 1e-300).unwrap().pass);
    }
}
