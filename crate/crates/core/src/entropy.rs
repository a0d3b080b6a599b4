//! Convex entropy functions `U`, the displacement-convex classes `DC_N`, and
//! the functional `U_nu(mu) = sum U(rho) nu + U'(inf) mu_s(X)`.
//!
//! Notation: `p(r) = r U'(r) - U(r)` is the pressure and
//! `p2(r) = r p'(r) - p(r)` the iterated pressure. For twice differentiable
//! `U`, membership in `DC_N` is equivalent to `p2 >= -p / N`.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mmspace::DiscreteMeasure;

/// Geometric grid used by grid-based class tests.
pub const GRID_MIN: f64 = 1e-6;
pub const GRID_MAX: f64 = 1e6;
pub const GRID_POINTS: usize = 2000;

/// Geometric grid of `GRID_POINTS` samples on `[GRID_MIN, GRID_MAX]`.
pub fn geometric_grid() -> Vec<f64> {
    let (a, b) = (GRID_MIN.ln(), GRID_MAX.ln());
    (0..GRID_POINTS).map(|k| (a + (b - a) * k as f64 / (GRID_POINTS - 1) as f64).exp()).collect()
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    /// `N r (1 - r^(-1/N))`
    PowerEntropy(f64),
    /// `r log r`
    Shannon,
    /// `r^s`
    Power(f64),
    /// `c r`
    Linear(f64),
    /// `(r - 1)_+^2`
    ShiftedQuadratic,
    Tabulated(Table),
    /// `U(a r) / a`
    Scaled(f64, Box<EntropyFunction>),
}

/// Convex piecewise-linear function through `(r[k], u[k])` with `r[0] = 0`.
#[derive(Clone, Debug, PartialEq)]
struct Table {
    r: Vec<f64>,
    u: Vec<f64>,
    /// `slopes[k]` is the slope on `[r[k], r[k + 1]]`; the last one extends to infinity.
    slopes: Vec<f64>,
}

impl Table {
    /// Lower convex hull of the samples together with the origin.
    fn convexify(mut points: Vec<(f64, f64)>) -> Result<Self> {
        for &(r, u) in &points {
            if !(r.is_finite() && u.is_finite() && r >= 0.0) {
                return Err(Error::Parse(format!("table entry ({r}, {u}) is not a finite point with r >= 0")));
            }
            if r == 0.0 && u != 0.0 {
                return Err(Error::Parse(format!("table sets U(0) = {u}; U(0) must be 0")));
            }
        }
        points.push((0.0, 0.0));
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        points.dedup_by(|b, a| a.0 == b.0);
        if points.len() < 2 {
            return Err(Error::Parse("table needs at least one point with r > 0".into()));
        }
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for p in points {
            while hull.len() >= 2 {
                let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                // drop `a` unless it lies strictly below the chord o -> p
                let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
                if cross <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        let r: Vec<f64> = hull.iter().map(|p| p.0).collect();
        let u: Vec<f64> = hull.iter().map(|p| p.1).collect();
        let slopes = (0..r.len() - 1).map(|k| (u[k + 1] - u[k]) / (r[k + 1] - r[k])).collect();
        Ok(Self { r, u, slopes })
    }

    /// Segment containing `r` on its right: `r[k] <= r < r[k + 1]`.
    fn segment(&self, r: f64) -> usize {
        self.r.partition_point(|&x| x <= r).saturating_sub(1).min(self.slopes.len() - 1)
    }

    fn eval(&self, r: f64) -> f64 {
        let k = self.segment(r);
        self.u[k] + self.slopes[k] * (r - self.r[k])
    }

    fn right_derivative(&self, r: f64) -> f64 {
        self.slopes[self.segment(r)]
    }

    fn legendre(&self, q: f64) -> f64 {
        if q > *self.slopes.last().expect("nonempty") {
            return f64::INFINITY;
        }
        self.r.iter().zip(&self.u).map(|(r, u)| q * r - u).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A convex `U : [0, inf) -> R` with `U(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyFunction {
    kind: Kind,
}

impl EntropyFunction {
    /// `U_N(r) = N r (1 - r^(-1/N))` for `1 < N < inf`.
    pub fn power_entropy(n: f64) -> Result<Self> {
        if !(n > 1.0 && n.is_finite()) {
            return Err(Error::InvalidArgument(format!("U_N needs 1 < N < inf, got {n}")));
        }
        Ok(Self { kind: Kind::PowerEntropy(n) })
    }

    pub fn shannon() -> Self {
        Self { kind: Kind::Shannon }
    }

    /// `r^s` for `s > 1`.
    pub fn power(s: f64) -> Result<Self> {
        if !(s > 1.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("power entropy needs finite s > 1, got {s}")));
        }
        Ok(Self { kind: Kind::Power(s) })
    }

    pub fn linear(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidArgument(format!("linear slope must be finite, got {c}")));
        }
        Ok(Self { kind: Kind::Linear(c) })
    }

    /// `(r - 1)_+^2`, superlinear and in every `DC_N`.
    pub fn shifted_quadratic() -> Self {
        Self { kind: Kind::ShiftedQuadratic }
    }

    /// Piecewise-linear `U` through `(r, U(r))` samples, replaced by the lower
    /// convex hull of the samples and the origin.
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        Ok(Self { kind: Kind::Tabulated(Table::convexify(points)?) })
    }

    /// Reads `r,U(r)` rows; a non-numeric first row is treated as a header.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut points = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(Error::Parse(format!("table row {} needs two columns", i + 1)));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(r), Ok(u)) => points.push((r, u)),
                _ if i == 0 => continue,
                _ => return Err(Error::Parse(format!("table row {} is not numeric", i + 1))),
            }
        }
        Self::tabulated(points)
    }

    /// `r -> U(a r) / a`, the rescaling induced by restricting and
    /// renormalizing a reference measure of mass `a`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {a}")));
        }
        Ok(Self { kind: Kind::Scaled(a, Box::new(self.clone())) })
    }

    /// Parses `uN:<N>` (`uN:inf` is Shannon), `shannon`, `power:<s>`,
    /// `linear:<c>`, `table:<file>`.
    pub fn parse(text: &str) -> Result<Self> {
        let (head, arg) = match text.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (text.trim(), None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::Parse(format!("`{text}` needs a numeric argument")))?;
            match a {
                "inf" | "infinity" => Ok(f64::INFINITY),
                _ => a.parse::<f64>().map_err(|_| Error::Parse(format!("`{a}` is not a number"))),
            }
        };
        match head {
            "uN" | "un" | "UN" => {
                let n = number(arg)?;
                if n.is_infinite() {
                    Ok(Self::shannon())
                } else {
                    Self::power_entropy(n)
                }
            }
            "shannon" if arg.is_none() => Ok(Self::shannon()),
            "power" => Self::power(number(arg)?),
            "linear" => Self::linear(number(arg)?),
            "table" => {
                let file = arg.filter(|a| !a.is_empty()).ok_or_else(|| Error::Parse("`table:` needs a file".into()))?;
                Self::from_csv(file)
            }
            _ => Err(Error::Parse(format!("unknown entropy function `{text}`"))),
        }
    }

    /// Short identifier used in reports.
    pub fn name(&self) -> String {
        self.to_string()
    }

    /// True for kinds with closed-form second derivatives.
    pub fn is_closed_form(&self) -> bool {
        match &self.kind {
            Kind::Tabulated(_) => false,
            Kind::Scaled(_, inner) => inner.is_closed_form(),
            _ => true,
        }
    }

    /// True when `U'(inf)` is extrapolated from finite data.
    pub fn is_extrapolated(&self) -> bool {
        match &self.kind {
            Kind::Tabulated(_) => true,
            Kind::Scaled(_, inner) => inner.is_extrapolated(),
            _ => false,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::PowerEntropy(n) => n * r * (1.0 - r.powf(-1.0 / n)),
            Kind::Shannon => r * r.ln(),
            Kind::Power(s) => r.powf(*s),
            Kind::Linear(c) => c * r,
            Kind::ShiftedQuadratic => (r - 1.0).max(0.0).powi(2),
            Kind::Tabulated(t) => t.eval(r),
            Kind::Scaled(a, inner) => inner.eval(a * r) / a,
        }
    }

    /// Right derivative `U'_+(r)`.
    pub fn right_derivative(&self, r: f64) -> f64 {
        match &self.kind {
            Kind::PowerEntropy(n) => {
                if r <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    n - (n - 1.0) * r.powf(-1.0 / n)
                }
            }
            Kind::Shannon => {
                if r <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    r.ln() + 1.0
                }
            }
            Kind::Power(s) => s * r.max(0.0).powf(s - 1.0),
            Kind::Linear(c) => *c,
            Kind::ShiftedQuadratic => 2.0 * (r - 1.0).max(0.0),
            Kind::Tabulated(t) => t.right_derivative(r.max(0.0)),
            Kind::Scaled(a, inner) => inner.right_derivative(a * r),
        }
    }

    /// `U''(r)` for closed-form kinds (right-continuous at kinks).
    pub fn second_derivative(&self, r: f64) -> Result<f64> {
        Ok(match &self.kind {
            Kind::PowerEntropy(n) => (n - 1.0) / n * r.powf(-1.0 / n - 1.0),
            Kind::Shannon => 1.0 / r,
            Kind::Power(s) => s * (s - 1.0) * r.powf(s - 2.0),
            Kind::Linear(_) => 0.0,
            Kind::ShiftedQuadratic => {
                if r >= 1.0 {
                    2.0
                } else {
                    0.0
                }
            }
            Kind::Tabulated(_) => return Err(Error::NoSecondDerivative(self.name())),
            Kind::Scaled(a, inner) => a * inner.second_derivative(a * r)?,
        })
    }

    /// `U'(inf) = lim U(r) / r`, possibly `+inf`.
    pub fn u_prime_infinity(&self) -> f64 {
        match &self.kind {
            Kind::PowerEntropy(n) => *n,
            Kind::Shannon | Kind::Power(_) | Kind::ShiftedQuadratic => f64::INFINITY,
            Kind::Linear(c) => *c,
            Kind::Tabulated(t) => *t.slopes.last().expect("nonempty"),
            Kind::Scaled(_, inner) => inner.u_prime_infinity(),
        }
    }

    /// `p(r) = r U'_+(r) - U(r)`.
    pub fn pressure(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::PowerEntropy(n) => r.powf(1.0 - 1.0 / n),
            Kind::Shannon => r,
            Kind::Power(s) => (s - 1.0) * r.powf(*s),
            Kind::Linear(_) => 0.0,
            Kind::ShiftedQuadratic => (r * r - 1.0).max(0.0),
            Kind::Tabulated(t) => r * t.right_derivative(r) - t.eval(r),
            Kind::Scaled(a, inner) => inner.pressure(a * r) / a,
        }
    }

    /// `p2(r) = r p'(r) - p(r)` for closed-form kinds.
    pub fn iterated_pressure(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        Ok(match &self.kind {
            Kind::PowerEntropy(n) => -r.powf(1.0 - 1.0 / n) / n,
            Kind::Shannon => 0.0,
            Kind::Power(s) => (s - 1.0).powi(2) * r.powf(*s),
            Kind::Linear(_) => 0.0,
            Kind::ShiftedQuadratic => {
                if r >= 1.0 {
                    r * r + 1.0
                } else {
                    0.0
                }
            }
            Kind::Tabulated(_) => return Err(Error::NoSecondDerivative(self.name())),
            Kind::Scaled(a, inner) => inner.iterated_pressure(a * r)? / a,
        })
    }

    /// Legendre transform `U*(q) = sup_{r >= 0} (q r - U(r))`.
    pub fn legendre(&self, q: f64) -> f64 {
        match &self.kind {
            Kind::PowerEntropy(n) => {
                if q < *n {
                    ((n - 1.0) / (n - q)).powf(n - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Kind::Shannon => (q - 1.0).exp(),
            Kind::Power(s) => {
                if q <= 0.0 {
                    0.0
                } else {
                    (s - 1.0) * (q / s).powf(s / (s - 1.0))
                }
            }
            Kind::Linear(c) => {
                if q <= *c {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Kind::ShiftedQuadratic => {
                if q <= 0.0 {
                    0.0
                } else {
                    q + q * q / 4.0
                }
            }
            Kind::Tabulated(t) => t.legendre(q),
            Kind::Scaled(a, inner) => inner.legendre(q) / a,
        }
    }

    /// Lipschitz constant of `U'` on `[lo, hi]`.
    ///
    /// Closed forms have monotone `U''`, so the maximum sits at an endpoint;
    /// tabulated kinds use the secant slope of `U'_+`.
    pub fn derivative_lipschitz(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        if self.is_closed_form() {
            let a = self.second_derivative(lo).unwrap_or(0.0);
            let b = self.second_derivative(hi).unwrap_or(0.0);
            a.abs().max(b.abs())
        } else if hi > lo {
            (self.right_derivative(hi) - self.right_derivative(lo)).abs() / (hi - lo)
        } else {
            0.0
        }
    }
}

impl fmt::Display for EntropyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::PowerEntropy(n) => write!(f, "uN:{n}"),
            Kind::Shannon => write!(f, "shannon"),
            Kind::Power(s) => write!(f, "power:{s}"),
            Kind::Linear(c) => write!(f, "linear:{c}"),
            Kind::ShiftedQuadratic => write!(f, "shifted-quadratic"),
            Kind::Tabulated(t) => write!(f, "table[{} knots]", t.r.len()),
            Kind::Scaled(a, inner) => write!(f, "scaled({a},{inner})"),
        }
    }
}

impl Serialize for EntropyFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

fn check_n(n: f64) -> Result<()> {
    if n.is_nan() || n < 1.0 {
        return Err(Error::InvalidArgument(format!("dimension N must lie in [1, inf], got {n}")));
    }
    Ok(())
}

/// Outcome of a class test; the witness is the first violating grid pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DcMembership {
    pub member: bool,
    pub witness: Option<(f64, f64)>,
}

/// Tests `U in DC_N` for `N in [1, inf]`.
///
/// Closed forms check the sign of `p2 + p / N`; tabulated kinds check that
/// `p(r) / r^(1 - 1/N)` is nondecreasing on the geometric grid.
pub fn dc_membership(u: &EntropyFunction, n: f64) -> Result<DcMembership> {
    check_n(n)?;
    let grid = geometric_grid();
    let inv_n = if n.is_infinite() { 0.0 } else { 1.0 / n };
    if u.is_closed_form() {
        for (k, &r) in grid.iter().enumerate() {
            let p = u.pressure(r);
            let p2 = u.iterated_pressure(r)?;
            let slack = p2 + p * inv_n;
            if slack < -1e-12 * (p2.abs() + p.abs() * inv_n) {
                let next = grid.get(k + 1).copied().unwrap_or(r);
                return Ok(DcMembership { member: false, witness: Some((r, next)) });
            }
        }
    } else {
        let ratio = |r: f64| u.pressure(r) / r.powf(1.0 - inv_n);
        for w in grid.windows(2) {
            let (a, b) = (ratio(w[0]), ratio(w[1]));
            if b < a - 1e-12 * a.abs().max(b.abs()) {
                return Ok(DcMembership { member: false, witness: Some((w[0], w[1])) });
            }
        }
    }
    Ok(DcMembership { member: true, witness: None })
}

/// Fails with [`Error::NotInClass`] unless `U in DC_N`.
pub fn require_dc(u: &EntropyFunction, n: f64) -> Result<()> {
    let m = dc_membership(u, n)?;
    match m.witness {
        Some((lo, hi)) if !m.member => Err(Error::NotInClass { n, lo, hi }),
        _ => Ok(()),
    }
}

/// `lambda(U, K) = inf_{r > 0} K p(r) / r`, possibly `-inf`.
///
/// Since `p(r)/r` is nondecreasing for `U in DC_inf`, the infimum is the limit
/// at `0+` when `K > 0` and at infinity when `K < 0`. Closed forms use the
/// exact limits; tabulated kinds evaluate at the grid ends.
pub fn lambda_of(u: &EntropyFunction, k: f64) -> Result<f64> {
    require_dc(u, f64::INFINITY)?;
    if k == 0.0 {
        return Ok(0.0);
    }
    let limit = if k > 0.0 { ratio_limit_at_zero(u) } else { ratio_limit_at_infinity(u) };
    if limit == 0.0 {
        return Ok(0.0);
    }
    Ok(k * limit)
}

fn ratio_limit_at_zero(u: &EntropyFunction) -> f64 {
    match &u.kind {
        Kind::Shannon => 1.0,
        Kind::Power(_) | Kind::Linear(_) | Kind::ShiftedQuadratic => 0.0,
        // never in DC_inf; kept total for completeness
        Kind::PowerEntropy(_) => f64::INFINITY,
        Kind::Tabulated(_) => u.pressure(GRID_MIN) / GRID_MIN,
        Kind::Scaled(_, inner) => ratio_limit_at_zero(inner),
    }
}

fn ratio_limit_at_infinity(u: &EntropyFunction) -> f64 {
    match &u.kind {
        Kind::Shannon => 1.0,
        Kind::Power(_) | Kind::ShiftedQuadratic => f64::INFINITY,
        Kind::Linear(_) => 0.0,
        Kind::PowerEntropy(_) => 0.0,
        Kind::Tabulated(_) => u.pressure(GRID_MAX) / GRID_MAX,
        Kind::Scaled(_, inner) => ratio_limit_at_infinity(inner),
    }
}

/// Lebesgue decomposition of `mu` against `nu`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// `mu(x) / nu(x)` where `nu(x) > 0`, else 0.
    pub density: Vec<f64>,
    /// Mass of `mu` on `{nu = 0}`.
    pub singular_mass: f64,
}

pub fn decompose(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Decomposition> {
    if mu.len() != nu.len() {
        return Err(Error::InvalidArgument("measures live on different spaces".into()));
    }
    let mut density = vec![0.0; mu.len()];
    let mut singular_mass = 0.0;
    for x in 0..mu.len() {
        if nu.mass(x) > 0.0 {
            density[x] = mu.mass(x) / nu.mass(x);
        } else {
            singular_mass += mu.mass(x);
        }
    }
    Ok(Decomposition { density, singular_mass })
}

/// `U_nu(mu)`; `+inf` when `U'(inf) = inf` and `mu` has a singular part.
pub fn evaluate(u: &EntropyFunction, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let d = decompose(mu, nu)?;
    if let Kind::Linear(c) = u.kind {
        // U_nu(mu) = c mu(X) for any probability measure
        return Ok(c);
    }
    let regular: f64 = (0..nu.len()).filter(|&x| nu.mass(x) > 0.0).map(|x| u.eval(d.density[x]) * nu.mass(x)).sum();
    if d.singular_mass > 0.0 {
        Ok(regular + u.u_prime_infinity() * d.singular_mass)
    } else {
        Ok(regular)
    }
}

/// `sum phi mu - sum U*(phi) nu`, a lower bound for `U_nu(mu)` whenever
/// `phi <= U'(inf)`.
pub fn dual_lower_bound(u: &EntropyFunction, mu: &DiscreteMeasure, nu: &DiscreteMeasure, phi: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() || phi.len() != nu.len() {
        return Err(Error::InvalidArgument("measures and potential must share a space".into()));
    }
    let bound = u.u_prime_infinity();
    if let Some(x) = phi.iter().position(|&v| v.is_nan() || v > bound) {
        return Err(Error::PotentialTooLarge { point: x, bound });
    }
    let mut linear = 0.0;
    let mut conjugate = 0.0;
    for x in 0..nu.len() {
        if mu.mass(x) > 0.0 {
            linear += phi[x] * mu.mass(x);
        }
        if nu.mass(x) > 0.0 {
            conjugate += u.legendre(phi[x]) * nu.mass(x);
        }
    }
    Ok(linear - conjugate)
}

/// `U'_+(rho_M)` with `rho_M = max(1/M, min(rho, M))`.
pub fn optimizing_potential(
    u: &EntropyFunction,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    m: f64,
) -> Result<Vec<f64>> {
    if !(m >= 1.0) {
        return Err(Error::InvalidArgument(format!("clamp level must be >= 1, got {m}")));
    }
    let d = decompose(mu, nu)?;
    Ok(d.density.iter().map(|&rho| u.right_derivative(rho.min(m).max(1.0 / m))).collect())
}

/// A superlinear member of `DC_N` with finite `U_nu` on every input.
///
/// The construction takes the lower convex hull in `lambda` of
/// `psi(lambda) = lambda^N Phi(lambda^(-N))` for a superlinear seed `Phi`
/// vanishing on `[0, 1]` and returns `r psi~(r^(-1/N))`. With the seed
/// `(r - 1)_+^2`, `psi(lambda) = lambda^(-N) - 2 + lambda^N` on `(0, 1)` is
/// already convex and `C^1` at 1, so the hull is `psi` itself and the result
/// is `(r - 1)_+^2`. On a finite space every density is bounded, so every
/// input has finite `U_nu`. An empty list returns `U_N`.
pub fn existence_superlinear_bound(
    measures: &[DiscreteMeasure],
    nu: &DiscreteMeasure,
    n: f64,
) -> Result<EntropyFunction> {
    check_n(n)?;
    if n.is_infinite() {
        return Err(Error::InvalidArgument("the construction needs N < inf".into()));
    }
    for mu in measures {
        if decompose(mu, nu)?.singular_mass > 0.0 {
            return Err(Error::NotAbsolutelyContinuous);
        }
    }
    if measures.is_empty() && n > 1.0 {
        return EntropyFunction::power_entropy(n);
    }
    Ok(EntropyFunction::shifted_quadratic())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<EntropyFunction> {
        vec![
            EntropyFunction::power_entropy(1.5).unwrap(),
            EntropyFunction::power_entropy(3.0).unwrap(),
            EntropyFunction::shannon(),
            EntropyFunction::power(2.0).unwrap(),
            EntropyFunction::power(1.3).unwrap(),
            EntropyFunction::linear(2.5).unwrap(),
            EntropyFunction::shifted_quadratic(),
            EntropyFunction::tabulated(vec![(1.0, -0.5), (2.0, 0.0), (4.0, 3.0)]).unwrap(),
            EntropyFunction::shannon().scaled(0.25).unwrap(),
        ]
    }

    #[test]
    fn zero_at_origin_and_convex() {
        for u in catalog() {
            assert_eq!(u.eval(0.0), 0.0, "{u}");
            for r in geometric_grid().iter().step_by(37) {
                let (a, b) = (0.5 * r, 1.5 * r);
                let mid = u.eval(*r);
                let chord = 0.5 * (u.eval(a) + u.eval(b));
                assert!(mid <= chord + 1e-12 * (1.0 + chord.abs()), "{u} at {r}");
            }
        }
    }

    #[test]
    fn pressure_nonnegative_and_legendre_identity() {
        for u in catalog() {
            for &r in &[1e-3, 0.1, 0.5, 1.0, 1.7, 3.0, 10.0] {
                let p = u.pressure(r);
                assert!(p >= -1e-12, "{u} p({r}) = {p}");
                let q = u.right_derivative(r);
                let lhs = u.legendre(q);
                let rhs = r * q - u.eval(r);
                assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{u} at {r}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn tabulated_hull() {
        // (1, 2) lies above the chord from (0, 0) to (2, 1) and is removed
        let u = EntropyFunction::tabulated(vec![(1.0, 2.0), (2.0, 1.0), (3.0, 4.0)]).unwrap();
        assert_eq!(u.eval(1.0), 0.5);
        assert_eq!(u.u_prime_infinity(), 3.0);
        assert!(u.is_extrapolated());
        assert_eq!(u.legendre(4.0), f64::INFINITY);
        assert!(EntropyFunction::tabulated(vec![(0.0, 1.0)]).is_err());
    }

    #[test]
    fn power_entropy_is_boundary_member() {
        for n in [1.5, 2.0, 3.0, 10.0] {
            let u = EntropyFunction::power_entropy(n).unwrap();
            for &r in &[1e-4, 0.3, 1.0, 7.0, 1e4] {
                assert_eq!(u.iterated_pressure(r).unwrap(), -u.pressure(r) / n);
            }
            assert!(dc_membership(&u, n).unwrap().member);
            assert!(dc_membership(&u, n - 0.25).unwrap().member);
            let out = dc_membership(&u, n + 0.5).unwrap();
            assert!(!out.member && out.witness.is_some());
            assert!(!dc_membership(&u, f64::INFINITY).unwrap().member);
        }
    }

    #[test]
    fn catalog_members() {
        for n in [1.0, 2.0, 5.0, f64::INFINITY] {
            assert!(dc_membership(&EntropyFunction::linear(3.0).unwrap(), n).unwrap().member);
            assert!(dc_membership(&EntropyFunction::shannon(), n).unwrap().member);
            assert!(dc_membership(&EntropyFunction::power(2.0).unwrap(), n).unwrap().member);
            assert!(dc_membership(&EntropyFunction::shifted_quadratic(), n).unwrap().member);
        }
        assert!(dc_membership(&EntropyFunction::shannon(), 0.5).is_err());
    }

    #[test]
    fn tabulated_membership() {
        let lin = EntropyFunction::tabulated(vec![(1.0, 2.0), (5.0, 10.0)]).unwrap();
        assert!(dc_membership(&lin, 4.0).unwrap().member);
        let kinked = EntropyFunction::tabulated(vec![(1.0, 0.0), (2.0, 1.0)]).unwrap();
        assert!(dc_membership(&kinked, 1.0).unwrap().member);
        assert!(!dc_membership(&kinked, 2.0).unwrap().member);
    }

    #[test]
    fn lambda_cases() {
        for k in [-2.0, 0.0, 0.5, 3.0] {
            assert_eq!(lambda_of(&EntropyFunction::shannon(), k).unwrap(), k);
            assert_eq!(lambda_of(&EntropyFunction::linear(1.0).unwrap(), k).unwrap(), 0.0);
        }
        let sq = EntropyFunction::power(2.0).unwrap();
        assert_eq!(lambda_of(&sq, 1.0).unwrap(), 0.0);
        assert_eq!(lambda_of(&sq, 0.0).unwrap(), 0.0);
        assert_eq!(lambda_of(&sq, -1.0).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(lambda_of(&EntropyFunction::power_entropy(2.0).unwrap(), 1.0), Err(Error::NotInClass { .. })));
    }

    #[test]
    fn evaluate_examples() {
        let n = 7;
        let nu = DiscreteMeasure::uniform(n);
        assert_eq!(evaluate(&EntropyFunction::shannon(), &nu, &nu).unwrap(), 0.0);
        let dirac = DiscreteMeasure::dirac(n, 2);
        let h = evaluate(&EntropyFunction::shannon(), &dirac, &nu).unwrap();
        assert!((h - (n as f64).ln()).abs() < 1e-12);
        let big_n = 3.0;
        let hn = evaluate(&EntropyFunction::power_entropy(big_n).unwrap(), &dirac, &nu).unwrap();
        assert!((hn - (big_n - big_n * (n as f64).powf(-1.0 / big_n))).abs() < 1e-12);
    }

    #[test]
    fn singular_mass() {
        let nu = DiscreteMeasure::new(vec![0.5, 0.5, 0.0]).unwrap();
        let mu = DiscreteMeasure::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(evaluate(&EntropyFunction::shannon(), &mu, &nu).unwrap(), f64::INFINITY);
        // U_N: 0.5 * U(1) + 0.5 * N
        let u = EntropyFunction::power_entropy(2.0).unwrap();
        assert_eq!(evaluate(&u, &mu, &nu).unwrap(), 1.0);
    }

    #[test]
    fn h_n_closed_form() {
        let nu = DiscreteMeasure::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mu = DiscreteMeasure::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        for n in [1.5, 2.0, 6.0] {
            let direct = evaluate(&EntropyFunction::power_entropy(n).unwrap(), &mu, &nu).unwrap();
            let closed: f64 =
                n - n * (0..4).map(|x| (mu.mass(x) / nu.mass(x)).powf(1.0 - 1.0 / n) * nu.mass(x)).sum::<f64>();
            assert!((direct - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_examples() {
        let nu = DiscreteMeasure::new(vec![0.25, 0.25, 0.5]).unwrap();
        for u in catalog() {
            let phi = vec![u.right_derivative(1.0); 3];
            let d = dual_lower_bound(&u, &nu, &nu, &phi).unwrap();
            assert!((d - u.eval(1.0)).abs() < 1e-12, "{u}");
        }
        let h = EntropyFunction::shannon();
        let d = dual_lower_bound(&h, &nu, &nu, &[0.0; 3]).unwrap();
        assert!((d + (-1.0f64).exp()).abs() < 1e-15);
        let lin = EntropyFunction::linear(1.0).unwrap();
        assert!(matches!(
            dual_lower_bound(&lin, &nu, &nu, &[0.0, 2.0, 0.0]),
            Err(Error::PotentialTooLarge { point: 1, .. })
        ));
    }

    #[test]
    fn optimizing_potential_converges() {
        let nu = DiscreteMeasure::new(vec![0.25, 0.25, 0.5]).unwrap();
        let mu = DiscreteMeasure::new(vec![0.6, 0.3, 0.1]).unwrap();
        for u in catalog().into_iter().filter(|u| u.is_closed_form()) {
            let phi = optimizing_potential(&u, &mu, &nu, 1e6).unwrap();
            let gap = evaluate(&u, &mu, &nu).unwrap() - dual_lower_bound(&u, &mu, &nu, &phi).unwrap();
            assert!((0.0..1e-6).contains(&(gap + 1e-12)), "{u}: gap {gap}");
        }
    }

    #[test]
    fn existence_cases() {
        let nu = DiscreteMeasure::uniform(4);
        let mu = DiscreteMeasure::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap();
        let u = existence_superlinear_bound(&[nu.clone(), mu.clone()], &nu, 3.0).unwrap();
        assert!(dc_membership(&u, 3.0).unwrap().member);
        assert_eq!(u.u_prime_infinity(), f64::INFINITY);
        assert!(evaluate(&u, &mu, &nu).unwrap().is_finite());
        assert_eq!(evaluate(&u, &nu, &nu).unwrap(), u.eval(1.0));
        assert_eq!(existence_superlinear_bound(&[], &nu, 3.0).unwrap(), EntropyFunction::power_entropy(3.0).unwrap());
        let partial = DiscreteMeasure::new(vec![0.5, 0.5, 0.0]).unwrap();
        let dirac = DiscreteMeasure::dirac(3, 2);
        assert!(matches!(existence_superlinear_bound(&[dirac], &partial, 2.0), Err(Error::NotAbsolutelyContinuous)));
    }

    #[test]
    fn hull_of_seed_is_identity() {
        // lower convex hull of psi(l) = l^N (l^-N - 1)_+^2 on a grid equals psi
        let n = 2.5;
        let xs: Vec<f64> = (1..400).map(|k| k as f64 / 200.0).collect();
        let psi = |l: f64| l.powf(n) * (l.powf(-n) - 1.0).max(0.0).powi(2);
        let pts: Vec<(f64, f64)> = xs.iter().map(|&l| (l, psi(l))).collect();
        for w in pts.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let chord = a.1 + (c.1 - a.1) * (b.0 - a.0) / (c.0 - a.0);
            assert!(b.1 <= chord + 1e-12);
        }
    }

    #[test]
    fn scaled_pressures() {
        let u = EntropyFunction::power(2.0).unwrap();
        let v = u.scaled(0.5).unwrap();
        for r in [0.1, 1.0, 3.0] {
            assert!((v.eval(r) - u.eval(0.5 * r) / 0.5).abs() < 1e-15);
            assert!((v.pressure(r) - u.pressure(0.5 * r) / 0.5).abs() < 1e-15);
            let q = 0.7 * r;
            assert!((v.legendre(q) - u.legendre(q) / 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_catalog() {
        assert_eq!(EntropyFunction::parse("uN:3").unwrap(), EntropyFunction::power_entropy(3.0).unwrap());
        assert_eq!(EntropyFunction::parse("uN:inf").unwrap(), EntropyFunction::shannon());
        assert_eq!(EntropyFunction::parse("shannon").unwrap(), EntropyFunction::shannon());
        assert_eq!(EntropyFunction::parse("power:2").unwrap(), EntropyFunction::power(2.0).unwrap());
        assert_eq!(EntropyFunction::parse("linear:-1").unwrap(), EntropyFunction::linear(-1.0).unwrap());
        assert!(EntropyFunction::parse("uN:1").is_err());
        assert!(EntropyFunction::parse("bogus").is_err());
        assert!(EntropyFunction::parse("table:").is_err());
    }
}
