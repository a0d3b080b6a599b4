//! One-dimensional weighted manifolds `(M, dx, e^{-Psi} dx)` on a uniform
//! grid: exact monotone-rearrangement transport, `Ric_N`, the second
//! variation of `U_nu` along a flow, and angles between geodesics.
//!
//! Densities on the grid are taken against `dx` and interpolated linearly
//! between grid points, so cumulative distribution functions are piecewise
//! quadratic and can be inverted exactly.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entropy::EntropyFunction;
use crate::error::{Error, Result};
use crate::mmspace::{DiscreteMeasure, FiniteMetricMeasureSpace, WeightedGraph};

/// Default number of grid points.
pub const DEFAULT_GRID: usize = 2048;
/// Time step of the second difference in [`hessian_formula`].
pub const HESSIAN_STEP: f64 = 1e-3;
/// Agreement budget reported by [`hessian_formula`].
pub const HESSIAN_BUDGET: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "lowercase")]
pub enum Topology {
    Interval {
        a: f64,
        b: f64,
    },
    Circle {
        #[serde(rename = "L")]
        length: f64,
    },
}

/// The weight potential before normalization.
#[derive(Clone, Debug, PartialEq)]
pub enum PsiKind {
    /// `K x^2 / 2`
    Quadratic { k: f64 },
    /// `amp cos(freq x)`
    Cosine { amp: f64, freq: f64 },
    /// Samples at the grid points.
    Table { values: Vec<f64> },
}

impl PsiKind {
    /// Parses `quadratic:<K>`, `cosine:<amp>[:<freq>]` or `table:<file>`;
    /// table files hold `x,psi` rows and are interpolated onto the grid.
    pub fn parse(text: &str, topology: Topology, n: usize) -> Result<Self> {
        let mut parts = text.splitn(2, ':');
        let head = parts.next().unwrap_or("").trim();
        let rest = parts.next().map(str::trim);
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("`{s}` is not a number")));
        match (head, rest) {
            ("quadratic", Some(k)) => Ok(Self::Quadratic { k: num(k)? }),
            ("cosine", Some(args)) => {
                let mut it = args.split(':');
                let amp = num(it.next().unwrap_or(""))?;
                let freq = match it.next() {
                    Some(f) => num(f)?,
                    None => 1.0,
                };
                Ok(Self::Cosine { amp, freq })
            }
            ("table", Some(file)) if !file.is_empty() => {
                let samples = read_xy(file)?;
                let grid = grid_points(topology, n)?;
                Ok(Self::Table { values: grid.iter().map(|&x| interpolate_xy(&samples, x)).collect() })
            }
            _ => Err(Error::Parse(format!("unknown potential `{text}`"))),
        }
    }
}

fn read_xy(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        match (record.get(0).map(str::parse::<f64>), record.get(1).map(str::parse::<f64>)) {
            (Some(Ok(x)), Some(Ok(y))) => out.push((x, y)),
            _ if i == 0 => continue,
            _ => return Err(Error::Parse(format!("row {} is not a numeric x,y pair", i + 1))),
        }
    }
    if out.len() < 2 {
        return Err(Error::Parse("a table needs at least two rows".into()));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

fn interpolate_xy(samples: &[(f64, f64)], x: f64) -> f64 {
    let k = samples.partition_point(|p| p.0 <= x).clamp(1, samples.len() - 1);
    let (a, b) = (samples[k - 1], samples[k]);
    if b.0 == a.0 {
        return a.1;
    }
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

fn grid_points(topology: Topology, n: usize) -> Result<Vec<f64>> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!("grid needs at least 5 points, got {n}")));
    }
    match topology {
        Topology::Interval { a, b } => {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidArgument(format!("invalid interval [{a}, {b}]")));
            }
            Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
        }
        Topology::Circle { length } => {
            if !(length.is_finite() && length > 0.0) {
                return Err(Error::InvalidArgument(format!("invalid circumference {length}")));
            }
            Ok((0..n).map(|i| length * i as f64 / n as f64).collect())
        }
    }
}

/// Line file contents.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LineConfig {
    #[serde(flatten)]
    pub topology: Topology,
    pub psi: String,
    #[serde(default = "default_grid")]
    pub grid_n: usize,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

/// A weighted interval or circle sampled on a uniform grid, with `Psi`
/// shifted so that `int e^{-Psi} dx = 1` under the grid quadrature.
#[derive(Clone, Debug)]
pub struct WeightedLine {
    topology: Topology,
    kind: PsiKind,
    x: Vec<f64>,
    h: f64,
    /// Quadrature weights: trapezoid on intervals, uniform on circles.
    weights: Vec<f64>,
    offset: f64,
    psi: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl WeightedLine {
    pub fn new(topology: Topology, kind: PsiKind, n: usize) -> Result<Self> {
        let x = grid_points(topology, n)?;
        let h = x[1] - x[0];
        let circle = matches!(topology, Topology::Circle { .. });
        if let Topology::Circle { length } = topology {
            match &kind {
                PsiKind::Quadratic { k } if *k != 0.0 => {
                    return Err(Error::InvalidArgument("a quadratic potential is not periodic".into()));
                }
                PsiKind::Cosine { freq, .. } => {
                    let turns = freq * length / (2.0 * PI);
                    if (turns - turns.round()).abs() > 1e-10 {
                        return Err(Error::InvalidArgument(format!(
                            "cosine frequency {freq} is not periodic on a circle of length {length}"
                        )));
                    }
                }
                _ => {}
            }
        }
        if let PsiKind::Table { values } = &kind {
            if values.len() != n || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("potential table must have one finite value per grid point".into()));
            }
        }
        let mut weights = vec![h; n];
        if !circle {
            weights[0] = 0.5 * h;
            weights[n - 1] = 0.5 * h;
        }
        let raw: Vec<f64> = match &kind {
            PsiKind::Table { values } => values.clone(),
            kind => x.iter().map(|&t| raw_psi(kind, t)).collect(),
        };
        let (d1, d2) = match &kind {
            PsiKind::Quadratic { k } => (x.iter().map(|t| k * t).collect(), vec![*k; n]),
            PsiKind::Cosine { amp, freq } => (
                x.iter().map(|t| -amp * freq * (freq * t).sin()).collect(),
                x.iter().map(|t| -amp * freq * freq * (freq * t).cos()).collect(),
            ),
            PsiKind::Table { values } => {
                let d1 = gradient(values, h, circle);
                let d2 = gradient(&d1, h, circle);
                (d1, d2)
            }
        };
        let mass: f64 = raw.iter().zip(&weights).map(|(p, w)| (-p).exp() * w).sum();
        let offset = mass.ln();
        let psi = raw.iter().map(|p| p + offset).collect();
        Ok(Self { topology, kind, x, h, weights, offset, psi, d1, d2 })
    }

    pub fn from_config(config: &LineConfig) -> Result<Self> {
        let kind = PsiKind::parse(&config.psi, config.topology, config.grid_n)?;
        Self::new(config.topology, kind, config.grid_n)
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.topology, Topology::Circle { .. })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn grid(&self) -> &[f64] {
        &self.x
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Normalized `Psi` at the grid points.
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn psi_prime(&self) -> &[f64] {
        &self.d1
    }

    pub fn psi_second(&self) -> &[f64] {
        &self.d2
    }

    /// Normalized `Psi` anywhere: closed form when available, else linear
    /// interpolation of the table (periodic on circles, clamped on intervals).
    pub fn psi_at(&self, t: f64) -> f64 {
        match &self.kind {
            PsiKind::Table { .. } => self.interpolate(&self.psi, t),
            kind => raw_psi(kind, t) + self.offset,
        }
    }

    /// `int f dx` by the grid quadrature.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// Linear interpolation of grid values at `t`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        let n = self.x.len();
        match self.topology {
            Topology::Interval { a, b } => {
                let s = ((t.clamp(a, b) - a) / self.h).min((n - 1) as f64);
                let k = (s.floor() as usize).min(n - 2);
                let w = s - k as f64;
                values[k] * (1.0 - w) + values[k + 1] * w
            }
            Topology::Circle { length } => {
                let s = t.rem_euclid(length) / self.h;
                let k = (s.floor() as usize) % n;
                let w = s - s.floor();
                values[k] * (1.0 - w) + values[(k + 1) % n] * w
            }
        }
    }

    /// The grid as a path (or cycle) space whose reference measure carries
    /// the quadrature mass of `e^{-Psi}` at each point.
    pub fn to_space(&self) -> Result<FiniteMetricMeasureSpace> {
        let n = self.x.len();
        let graph = if self.is_circle() { WeightedGraph::cycle(n, self.h) } else { WeightedGraph::path(n, self.h) };
        let nu: Vec<f64> = self.psi.iter().zip(&self.weights).map(|(p, w)| (-p).exp() * w).collect();
        FiniteMetricMeasureSpace::build(&graph, &nu, 1)
    }

    /// Samples `f` on the grid.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.x.iter().map(|&t| f(t)).collect()
    }
}

fn raw_psi(kind: &PsiKind, t: f64) -> f64 {
    match kind {
        PsiKind::Quadratic { k } => 0.5 * k * t * t,
        PsiKind::Cosine { amp, freq } => amp * (freq * t).cos(),
        PsiKind::Table { .. } => 0.0,
    }
}

/// Central differences, second-order one-sided at interval ends.
pub fn gradient(values: &[f64], h: f64, periodic: bool) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if periodic {
                (values[(i + 1) % n] - values[(i + n - 1) % n]) / (2.0 * h)
            } else if i == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Three-point second differences; interval ends copy their neighbour.
pub fn second_difference(values: &[f64], h: f64, periodic: bool) -> Vec<f64> {
    let n = values.len();
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            if periodic {
                (values[(i + 1) % n] - 2.0 * values[i] + values[(i + n - 1) % n]) / (h * h)
            } else if i == 0 || i == n - 1 {
                0.0
            } else {
                (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h)
            }
        })
        .collect();
    if !periodic {
        out[0] = out[1];
        out[n - 1] = out[n - 2];
    }
    out
}

/// A probability density against `dx` on the grid of a line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridDensity {
    values: Vec<f64>,
}

impl GridDensity {
    /// Normalizes nonnegative grid values under the line quadrature.
    pub fn new(line: &WeightedLine, values: Vec<f64>) -> Result<Self> {
        if values.len() != line.len() {
            return Err(Error::InvalidArgument(format!(
                "{} density values for {} grid points",
                values.len(),
                line.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidMeasure("density values must be finite and nonnegative".into()));
        }
        let total = line.integrate(&values);
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("density integrates to zero".into()));
        }
        Ok(Self { values: values.into_iter().map(|v| v / total).collect() })
    }

    pub fn from_fn(line: &WeightedLine, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(line, line.sample(f))
    }

    /// The reference density `e^{-Psi}`.
    pub fn reference(line: &WeightedLine) -> Self {
        Self { values: line.psi().iter().map(|p| (-p).exp()).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Point masses `rho_i w_i` on [`WeightedLine::to_space`].
    pub fn to_measure(&self, line: &WeightedLine) -> Result<DiscreteMeasure> {
        DiscreteMeasure::from_unnormalized(
            self.values.iter().zip(line.quadrature_weights()).map(|(r, w)| r * w).collect(),
        )
    }

    /// Inverse of [`to_measure`](Self::to_measure).
    pub fn from_measure(line: &WeightedLine, mu: &DiscreteMeasure) -> Result<Self> {
        Self::new(line, mu.weights().iter().zip(line.quadrature_weights()).map(|(m, w)| m / w).collect())
    }
}

/// Cumulative distribution of a piecewise-linear density at the grid points.
fn cdf(line: &WeightedLine, rho: &[f64]) -> Vec<f64> {
    let h = line.step();
    let mut out = Vec::with_capacity(rho.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in rho.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    let total = acc;
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Exact inverse of the piecewise-quadratic CDF.
fn quantile(line: &WeightedLine, rho: &[f64], f: &[f64], s: f64) -> f64 {
    let n = f.len();
    let s = s.clamp(0.0, 1.0);
    if s >= f[n - 1] {
        return line.grid()[f.partition_point(|&v| v < f[n - 1])];
    }
    // first cell whose right end exceeds s, which skips flat stretches
    let j = f[1..].partition_point(|&v| v <= s).min(n - 2);
    let total_scale = f[n - 1];
    let (lo, hi) = (f[j], f[j + 1]);
    let h = line.step();
    if hi <= lo {
        return line.grid()[j];
    }
    // cell mass in normalized units; densities rescaled to match
    let norm = (hi - lo) / (0.5 * h * (rho[j] + rho[j + 1]));
    let (a, b) = (rho[j] * norm, rho[j + 1] * norm);
    let c = (s - lo).max(0.0) / total_scale;
    // (b - a)/(2h) u^2 + a u = c
    let disc = (a * a + 2.0 * (b - a) * c / h).max(0.0);
    let denom = a + disc.sqrt();
    let u = if denom > 0.0 { 2.0 * c / denom } else { 0.0 };
    line.grid()[j] + u.clamp(0.0, h)
}

/// The monotone rearrangement between two densities on an interval.
#[derive(Clone, Debug, Serialize)]
pub struct QuantileGeodesic {
    pub w2: f64,
    /// `T(x_i) = F1^{-1}(F0(x_i))`
    pub map: Vec<f64>,
    pub times: Vec<f64>,
    pub densities: Vec<GridDensity>,
}

fn require_interval(line: &WeightedLine) -> Result<()> {
    if line.is_circle() {
        return Err(Error::CircleTopology);
    }
    Ok(())
}

/// `T = F1^{-1} o F0` at the grid points.
pub fn monotone_map(line: &WeightedLine, rho0: &GridDensity, rho1: &GridDensity) -> Result<Vec<f64>> {
    require_interval(line)?;
    let f0 = cdf(line, rho0.values());
    let f1 = cdf(line, rho1.values());
    Ok(f0.iter().map(|&s| quantile(line, rho1.values(), &f1, s)).collect())
}

/// Exact 1D optimal transport by monotone rearrangement, with
/// `mu_t = ((1 - t) Id + t T)_* mu_0` binned back onto the grid.
pub fn quantile_transport(
    line: &WeightedLine,
    rho0: &GridDensity,
    rho1: &GridDensity,
    t_samples: &[f64],
) -> Result<QuantileGeodesic> {
    let map = monotone_map(line, rho0, rho1)?;
    let x = line.grid();
    let r0 = rho0.values();
    let cost: Vec<f64> = (0..x.len()).map(|i| (map[i] - x[i]).powi(2) * r0[i]).collect();
    let w2 = line.integrate(&cost).max(0.0).sqrt();
    let densities = t_samples.iter().map(|&t| bin_pushforward(line, r0, &map, t)).collect::<Result<Vec<_>>>()?;
    Ok(QuantileGeodesic { w2, map, times: t_samples.to_vec(), densities })
}

/// Mass-preserving binning of `((1 - t) Id + t T)_* mu_0`: the mass of each
/// grid cell is spread uniformly over its image and collected in dual cells.
fn bin_pushforward(line: &WeightedLine, rho0: &[f64], map: &[f64], t: f64) -> Result<GridDensity> {
    let x = line.grid();
    let h = line.step();
    let n = x.len();
    let a = x[0];
    let mut bins = vec![0.0; n];
    // dual cell k covers [x_k - h/2, x_k + h/2] clipped to the interval
    let dual = |y: f64| -> f64 { ((y - a) / h + 0.5).clamp(0.0, n as f64) };
    for i in 0..n - 1 {
        let mass = 0.5 * h * (rho0[i] + rho0[i + 1]);
        if mass <= 0.0 {
            continue;
        }
        let lo = (1.0 - t) * x[i] + t * map[i];
        let hi = (1.0 - t) * x[i + 1] + t * map[i + 1];
        let (u, v) = (dual(lo.min(hi)), dual(lo.max(hi)));
        if v - u <= 1e-14 {
            let k = (u.floor() as usize).min(n - 1);
            bins[k] += mass;
            continue;
        }
        let mut k = u.floor() as usize;
        while k < n && (k as f64) < v {
            let overlap = (v.min(k as f64 + 1.0) - u.max(k as f64)).max(0.0);
            bins[k] += mass * overlap / (v - u);
            k += 1;
        }
    }
    let values = bins.iter().zip(line.quadrature_weights()).map(|(m, w)| m / w).collect();
    GridDensity::new(line, values)
}

/// `U_nu(mu) = int U(rho e^Psi) e^{-Psi} dx` by the grid quadrature.
pub fn entropy_direct(line: &WeightedLine, u: &EntropyFunction, rho: &GridDensity) -> f64 {
    let vals: Vec<f64> = rho.values().iter().zip(line.psi()).map(|(r, p)| u.eval(r * p.exp()) * (-p).exp()).collect();
    line.integrate(&vals)
}

/// `U_nu(mu_t)` along the monotone-rearrangement geodesic.
///
/// Uses the Lagrangian form `int (U(r)/r) rho_0 dx` with
/// `r = rho_0 e^{Psi(T_t)} / T_t'` and `T_t' = (1 - t) + t rho_0 / rho_1(T)`,
/// so no re-binning error enters.
pub fn entropy_along_geodesic(
    line: &WeightedLine,
    u: &EntropyFunction,
    rho0: &GridDensity,
    rho1: &GridDensity,
    t_samples: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let map = monotone_map(line, rho0, rho1)?;
    let x = line.grid();
    let r0 = rho0.values();
    let mut slopes = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        if r0[i] > 0.0 {
            let target = line.interpolate(rho1.values(), map[i]);
            if !(target > 0.0) {
                return Err(Error::InvalidArgument(
                    "densities must be positive on a common interval for the Lagrangian form".into(),
                ));
            }
            slopes.push(r0[i] / target);
        } else {
            slopes.push(1.0);
        }
    }
    Ok(t_samples
        .iter()
        .map(|&t| {
            let vals: Vec<f64> = (0..x.len())
                .map(|i| {
                    if r0[i] <= 0.0 {
                        return 0.0;
                    }
                    let y = (1.0 - t) * x[i] + t * map[i];
                    let jac = (1.0 - t) + t * slopes[i];
                    let r = r0[i] * line.psi_at(y).exp() / jac;
                    u.eval(r) / r * r0[i]
                })
                .collect();
            (t, line.integrate(&vals))
        })
        .collect())
}

/// `Ric_N` of the weighted line at grid point `i` (`n = 1`).
pub fn ric_n(line: &WeightedLine, n: f64, i: usize) -> Result<f64> {
    if i >= line.len() {
        return Err(Error::PointOutOfRange { index: i, len: line.len() });
    }
    let (d1, d2) = (line.psi_prime()[i], line.psi_second()[i]);
    Ok(if n.is_infinite() {
        d2
    } else if n > 1.0 {
        d2 - d1 * d1 / (n - 1.0)
    } else if n == 1.0 {
        if d1.abs() <= 1e-10 {
            d2
        } else {
            f64::NEG_INFINITY
        }
    } else {
        f64::NEG_INFINITY
    })
}

/// `min_i Ric_N(x_i)`.
pub fn min_ric_n(line: &WeightedLine, n: f64) -> Result<f64> {
    (0..line.len()).map(|i| ric_n(line, n, i)).try_fold(f64::INFINITY, |m, r| Ok(m.min(r?)))
}

#[derive(Clone, Debug, Serialize)]
pub struct HessianReport {
    pub formula_value: f64,
    pub finite_diff_value: f64,
    pub budget: f64,
    pub step: f64,
}

impl HessianReport {
    pub fn difference(&self) -> f64 {
        (self.formula_value - self.finite_diff_value).abs()
    }

    pub fn pass(&self) -> bool {
        self.difference() <= self.budget
    }
}

/// Second variation of `U_nu` along `mu_t = (Id - t Phi')_* mu`.
///
/// `formula_value` is
/// `int [(Phi'')^2 + Psi'' (Phi')^2] p(rho_nu) dnu + int (Psi' Phi' - Phi'')^2 p2(rho_nu) dnu`
/// with `Phi''` from three-point differences, and `finite_diff_value` is the
/// central second difference in `t` of `U_nu(mu_t)`, where `mu_t` moves each
/// grid point to `x - t Phi'(x)` and takes its density from the discrete
/// Jacobian of the moved grid.
pub fn hessian_formula(
    line: &WeightedLine,
    u: &EntropyFunction,
    rho: &GridDensity,
    phi: &[f64],
) -> Result<HessianReport> {
    hessian_formula_with_step(line, u, rho, phi, HESSIAN_STEP)
}

pub fn hessian_formula_with_step(
    line: &WeightedLine,
    u: &EntropyFunction,
    rho: &GridDensity,
    phi: &[f64],
    step: f64,
) -> Result<HessianReport> {
    if !u.is_closed_form() {
        return Err(Error::NoSecondDerivative(u.name()));
    }
    if phi.len() != line.len() {
        return Err(Error::InvalidArgument(format!(
            "potential has {} values for {} grid points",
            phi.len(),
            line.len()
        )));
    }
    let r = rho.values();
    if let Some(i) = r.iter().position(|&v| v <= 0.0) {
        return Err(Error::VanishingDensity(i));
    }
    let periodic = line.is_circle();
    let h = line.step();
    let x = line.grid();
    let dphi = gradient(phi, h, periodic);
    let ddphi = second_difference(phi, h, periodic);
    let (psi, d1, d2) = (line.psi(), line.psi_prime(), line.psi_second());

    let mut integrand = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let nu = (-psi[i]).exp();
        let rel = r[i] / nu;
        let p = u.pressure(rel);
        let p2 = u.iterated_pressure(rel)?;
        let first = (ddphi[i] * ddphi[i] + d2[i] * dphi[i] * dphi[i]) * p;
        let mixed = d1[i] * dphi[i] - ddphi[i];
        integrand.push((first + mixed * mixed * p2) * nu);
    }
    let formula_value = line.integrate(&integrand);

    let energy = |t: f64| -> f64 {
        let moved: Vec<f64> = x.iter().zip(&dphi).map(|(x, d)| x - t * d).collect();
        let jac = if periodic {
            // unwrap the moved grid against the fixed period
            let shift: Vec<f64> = moved.iter().zip(x).map(|(m, x)| m - x).collect();
            gradient(&shift, h, true).into_iter().map(|g| 1.0 + g).collect::<Vec<f64>>()
        } else {
            gradient(&moved, h, false)
        };
        let vals: Vec<f64> = (0..x.len())
            .map(|i| {
                let rr = r[i] * line.psi_at(moved[i]).exp() / jac[i];
                u.eval(rr) / rr * r[i]
            })
            .collect();
        line.integrate(&vals)
    };
    let finite_diff_value = (energy(step) - 2.0 * energy(0.0) + energy(-step)) / (step * step);
    Ok(HessianReport { formula_value, finite_diff_value, budget: HESSIAN_BUDGET, step })
}

/// Angle between the geodesics generated by two potentials at `mu`:
/// `arccos(<Phi0', Phi1'>_mu / (|Phi0'|_mu |Phi1'|_mu))`, computed with
/// `atan2` so that parallel and antiparallel inputs give exactly 0 and pi.
pub fn geodesic_angle(line: &WeightedLine, phi0: &[f64], phi1: &[f64], mu: &GridDensity) -> Result<f64> {
    if phi0.len() != line.len() || phi1.len() != line.len() {
        return Err(Error::InvalidArgument("potentials must be sampled on the grid".into()));
    }
    let periodic = line.is_circle();
    let g0 = gradient(phi0, line.step(), periodic);
    let g1 = gradient(phi1, line.step(), periodic);
    let m = mu.values();
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        let v: Vec<f64> = (0..m.len()).map(|i| a[i] * b[i] * m[i]).collect();
        line.integrate(&v)
    };
    let (a, b, c) = (inner(&g0, &g0), inner(&g1, &g1), inner(&g0, &g1));
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    Ok((a * b - c * c).max(0.0).sqrt().atan2(c))
}

/// Grid potential description for files and the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Potential {
    /// `sum c_k x^k`
    Polynomial { coefficients: Vec<f64> },
    /// `amplitude sin(frequency x + phase)`
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Values at the grid points.
    Values { values: Vec<f64> },
}

impl Potential {
    pub fn sample(&self, line: &WeightedLine) -> Result<Vec<f64>> {
        match self {
            Self::Polynomial { coefficients } => {
                Ok(line.sample(|x| coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)))
            }
            Self::Sine { amplitude, frequency, phase } => {
                Ok(line.sample(|x| amplitude * (frequency * x + phase).sin()))
            }
            Self::Values { values } => {
                if values.len() != line.len() {
                    return Err(Error::InvalidArgument(format!(
                        "potential has {} values for {} grid points",
                        values.len(),
                        line.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}
