use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::Deserialize;
use serde_json::{json, Value};

use ricci_transport::approxgh::{
    build_mollifier, canonical_coarsening, mollify as mollify_measure, pushforward_distortion_bound, quotient_by_group,
    rotation, stability_harness, GhMap, SequenceMember,
};
use ricci_transport::curvature::{
    bishop_gromov_check, inf_ricci_bound_test, n_ricci_nonneg_test, FamilyReport, ProbeOptions,
};
use ricci_transport::entropy::{dc_membership, decompose, evaluate, EntropyFunction};
use ricci_transport::geodesy::{dyadic_times, glue_midpoint_geodesic, write_interpolation_csv};
use ricci_transport::inequalities::{
    bonnet_myers_check, hwi_check, hwi_diameter_check, log_sobolev_check, poincare_check, sobolev_check,
    talagrand_check, InequalityResult,
};
use ricci_transport::io::{
    load_function, load_gh_map, load_line, load_measure, load_space, measure_from_table, measure_to_table, read_json,
};
use ricci_transport::mmspace::{DiscreteMeasure, FiniteMetricMeasureSpace, GradientMode};
use ricci_transport::smooth1d::{
    entropy_along_geodesic, geodesic_angle, hessian_formula_with_step, min_ric_n, quantile_transport, ric_n,
    GridDensity, Potential, WeightedLine, HESSIAN_STEP,
};
use ricci_transport::transport::w2 as solve_w2;
use ricci_transport::trial::BumpGenerator;

use crate::report::Outcome;
use crate::{Gradient, Trials};

/// `N` in `[1, inf]`; accepts `inf`.
pub fn parse_dimension(text: &str) -> std::result::Result<f64, String> {
    let n = match text.trim() {
        "inf" | "infinity" => f64::INFINITY,
        t => t.parse::<f64>().map_err(|e| e.to_string())?,
    };
    if n >= 1.0 {
        Ok(n)
    } else {
        Err(format!("N must be at least 1, got {text}"))
    }
}

fn parse_family(texts: &[String]) -> Result<Vec<EntropyFunction>> {
    texts.iter().map(|t| EntropyFunction::parse(t).with_context(|| format!("entropy function {t:?}"))).collect()
}

fn radius_or_default(space: &FiniteMetricMeasureSpace, radius: Option<f64>) -> Result<f64> {
    match radius {
        Some(r) if r > 0.0 => Ok(r),
        Some(r) => bail!("gradient radius must be positive, got {r}"),
        None => Ok(space.default_gradient_radius()),
    }
}

fn mode(gradient: Gradient) -> GradientMode {
    match gradient {
        Gradient::Descending => GradientMode::Descending,
        Gradient::Full => GradientMode::Full,
    }
}

fn json_of<T: serde::Serialize>(value: &T) -> Result<Value> {
    Ok(serde_json::to_value(value)?)
}

/// A number that may be infinite, as JSON.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

fn trial_pairs(
    space: &FiniteMetricMeasureSpace,
    source: &str,
    seed: u64,
) -> Result<Vec<(DiscreteMeasure, DiscreteMeasure)>> {
    if let Some(count) = source.strip_prefix("auto:") {
        let count: usize = count.parse().with_context(|| format!("pair count in {source:?}"))?;
        ensure!(count > 0, "at least one trial pair is needed");
        return Ok(BumpGenerator::default().pairs(space, count, seed)?);
    }
    let tables: Vec<(BTreeMap<String, f64>, BTreeMap<String, f64>)> = read_json(source)?;
    ensure!(!tables.is_empty(), "pair file {source} is empty");
    tables.iter().map(|(a, b)| Ok((measure_from_table(space, a)?, measure_from_table(space, b)?))).collect()
}

fn probe_options(trials: &Trials) -> ProbeOptions {
    ProbeOptions { depth: trials.depth as usize, extra_geodesics: !trials.glued_only }
}

fn probe_csv(report: &FamilyReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pair", "u", "t", "value"])?;
    for p in &report.pairs {
        for (u, values) in report.family.iter().zip(&p.values) {
            for (t, v) in values {
                w.write_record([p.pair.to_string(), u.clone(), t.to_string(), format!("{v:e}")])?;
            }
        }
    }
    Ok(w.into_inner()?)
}

fn probe_outcome(report: FamilyReport) -> Result<Outcome> {
    let csv = probe_csv(&report)?;
    let budget = json!({ "factor": report.budget_factor, "mesh": report.mesh });
    Ok(Outcome::new(report.pass, budget, json_of(&report)?).with_csv(csv))
}

fn inequality_outcome(results: &[InequalityResult]) -> Result<Outcome> {
    let budget: BTreeMap<&str, f64> = results.iter().map(|r| (r.name.as_str(), r.tolerance)).collect();
    Ok(Outcome::new(results.iter().all(|r| r.pass), json_of(&budget)?, json_of(&results)?))
}

pub fn w2(space: &Path, mu0: &Path, mu1: &Path) -> Result<Outcome> {
    let space = load_space(space)?;
    let (a, b) = (load_measure(&space, mu0)?, load_measure(&space, mu1)?);
    let sol = solve_w2(&space, &a, &b)?;
    let mut csv = Vec::new();
    sol.plan.write_csv(&space, &mut csv)?;
    let result = json!({
        "distance": sol.distance,
        "cost": sol.plan.cost(),
        "certificate_residual": sol.certificate.residual(),
        "marginal_error": sol.plan.marginal_error(),
    });
    Ok(Outcome::new(true, json!({ "certificate_residual": 1e-9 }), result).with_csv(csv))
}

pub fn geodesic(space: &Path, mu0: &Path, mu1: &Path, depth: usize) -> Result<Outcome> {
    let space = load_space(space)?;
    let (a, b) = (load_measure(&space, mu0)?, load_measure(&space, mu1)?);
    let path = glue_midpoint_geodesic(&space, &a, &b, depth)?;
    let times = dyadic_times(depth);
    let total = solve_w2(&space, &a, &b)?.distance;
    let mut speed_defect: f64 = 0.0;
    for i in 0..path.len() {
        for j in (i + 1)..path.len() {
            let d = solve_w2(&space, &path[i], &path[j])?.distance;
            speed_defect = speed_defect.max((d - (times[j] - times[i]) * total).abs());
        }
    }
    let budget = 2.0 * space.mesh();
    let mut csv = Vec::new();
    write_interpolation_csv(&space, &times, &path, &mut csv)?;
    let samples: Vec<Value> =
        times.iter().zip(&path).map(|(t, m)| json!({ "t": t, "measure": measure_to_table(&space, m) })).collect();
    let result = json!({ "w2": total, "depth": depth, "speed_defect": speed_defect, "samples": samples });
    Ok(Outcome::new(speed_defect <= budget, json!({ "speed_defect": budget }), result).with_csv(csv))
}

pub fn entropy(space: &Path, mu: &Path, us: &[String]) -> Result<Outcome> {
    let space = load_space(space)?;
    let mu = load_measure(&space, mu)?;
    let singular = decompose(&mu, space.nu())?.singular_mass;
    let values = parse_family(us)?
        .iter()
        .map(|u| Ok(json!({ "u": u.name(), "value": num(evaluate(u, &mu, space.nu())?), "u_at_1": u.eval(1.0) })))
        .collect::<Result<Vec<Value>>>()?;
    Ok(Outcome::new(true, json!(null), json!({ "singular_mass": singular, "values": values })))
}

pub fn dc_check(u: &str, n: f64) -> Result<Outcome> {
    let u = EntropyFunction::parse(u)?;
    let m = dc_membership(&u, n)?;
    Ok(Outcome::new(m.member, json!(null), json!({ "u": u.name(), "N": num(n), "membership": json_of(&m)? })))
}

pub fn probe_nricci(space: &Path, n: f64, us: &[String], trials: &Trials) -> Result<Outcome> {
    let space = load_space(space)?;
    let family = if us.is_empty() {
        let mut f = vec![EntropyFunction::shannon(), EntropyFunction::power(2.0)?];
        if n.is_finite() && n > 1.0 {
            f.insert(0, EntropyFunction::power_entropy(n)?);
        }
        f
    } else {
        parse_family(us)?
    };
    let pairs = trial_pairs(&space, &trials.pairs, trials.seed)?;
    probe_outcome(n_ricci_nonneg_test(&space, n, &pairs, &family, probe_options(trials))?)
}

pub fn probe_inf_ricci(space: &Path, k: f64, us: &[String], trials: &Trials) -> Result<Outcome> {
    ensure!(k.is_finite(), "K must be finite");
    let space = load_space(space)?;
    let family = if us.is_empty() { vec![EntropyFunction::shannon()] } else { parse_family(us)? };
    let pairs = trial_pairs(&space, &trials.pairs, trials.seed)?;
    probe_outcome(inf_ricci_bound_test(&space, k, &pairs, &family, probe_options(trials))?)
}

pub fn bishop_gromov(space: &Path, n: f64, centers: &[String], radii: &[f64]) -> Result<Outcome> {
    let space = load_space(space)?;
    let centers: Vec<usize> = if centers.is_empty() {
        (0..space.len()).collect()
    } else {
        centers.iter().map(|c| space.index_of(c)).collect::<ricci_transport::Result<_>>()?
    };
    let radii: Vec<f64> = if radii.is_empty() {
        (1..=16).map(|j| (j as f64 - 0.5) * space.diameter() / 16.0).collect()
    } else {
        radii.to_vec()
    };
    let report = bishop_gromov_check(&space, n, &centers, &radii)?;
    let pass = report.violation <= report.mesh;
    Ok(Outcome::new(pass, json!({ "violation": report.mesh }), json_of(&report)?))
}

pub fn hwi(space: &Path, mu: &Path, u: &str, lambda: f64, depth: usize, radius: Option<f64>) -> Result<Outcome> {
    ensure!(lambda.is_finite(), "lambda must be finite");
    let space = load_space(space)?;
    let mu = load_measure(&space, mu)?;
    let u = EntropyFunction::parse(u)?;
    let radius = radius_or_default(&space, radius)?;
    let mut report = hwi_check(&space, &mu, &u, lambda, depth, radius)?;
    if lambda <= 0.0 {
        report.results.push(hwi_diameter_check(&space, &mu, &u, lambda, radius)?);
    }
    let mut outcome = inequality_outcome(&report.results)?;
    if let Some(c) = &report.convexity {
        outcome.pass &= c.pass();
    }
    outcome.result = json_of(&report)?;
    Ok(outcome)
}

pub fn lsi(space: &Path, f: &Path, k: f64, radius: Option<f64>, gradient: Gradient) -> Result<Outcome> {
    let space = load_space(space)?;
    let f = load_function(&space, f)?;
    let radius = radius_or_default(&space, radius)?;
    inequality_outcome(&[log_sobolev_check(&space, &f, k, radius, mode(gradient))?])
}

pub fn talagrand(space: &Path, mu: &Path, k: f64) -> Result<Outcome> {
    let space = load_space(space)?;
    let mu = load_measure(&space, mu)?;
    inequality_outcome(&[talagrand_check(&space, &mu, k)?])
}

pub fn poincare(space: &Path, f: &Path, k: f64, radius: Option<f64>, gradient: Gradient) -> Result<Outcome> {
    let space = load_space(space)?;
    let f = load_function(&space, f)?;
    let radius = radius_or_default(&space, radius)?;
    inequality_outcome(&[poincare_check(&space, &f, k, radius, mode(gradient))?])
}

pub fn sobolev(space: &Path, f: &Path, n: f64, radius: Option<f64>) -> Result<Outcome> {
    let space = load_space(space)?;
    let f = load_function(&space, f)?;
    let radius = radius_or_default(&space, radius)?;
    inequality_outcome(&sobolev_check(&space, &f, n, radius)?)
}

pub fn bonnet_myers(space: &Path, n: f64, k: f64) -> Result<Outcome> {
    let space = load_space(space)?;
    inequality_outcome(&[bonnet_myers_check(&space, n, k)?])
}

pub fn mollify(space: &Path, mu: &Path, delta: f64, us: &[String]) -> Result<Outcome> {
    ensure!(delta > 0.0 && delta.is_finite(), "delta must be positive, got {delta}");
    let space = load_space(space)?;
    let mu = load_measure(&space, mu)?;
    let kernel = build_mollifier(&space, delta)?;
    let out = mollify_measure(&space, &kernel, &mu)?;
    let symmetric = kernel.is_symmetric();
    let stochasticity = kernel.stochasticity_error(space.nu());
    let support_radius = kernel.support_radius(&space);
    let displacement = solve_w2(&space, &out, &mu)?.distance;
    let mut pass = symmetric && stochasticity <= 1e-12 && support_radius < 2.0 * delta && displacement <= 2.0 * delta;
    let mut contraction = Vec::new();
    for u in parse_family(us)? {
        let before = evaluate(&u, &mu, space.nu())?;
        let after = evaluate(&u, &out, space.nu())?;
        let holds = after <= before + 1e-12 * (1.0 + before.abs());
        pass &= holds;
        contraction.push(json!({ "u": u.name(), "before": num(before), "after": num(after), "holds": holds }));
    }
    let centers: Vec<&str> = kernel.centers.iter().map(|&c| space.id(c)).collect();
    let result = json!({
        "delta": delta,
        "centers": centers,
        "degenerate": kernel.degenerate,
        "symmetric": symmetric,
        "stochasticity_error": stochasticity,
        "support_radius": support_radius,
        "w2_displacement": displacement,
        "contraction": contraction,
        "measure": measure_to_table(&space, &out),
    });
    let budget = json!({ "stochasticity_error": 1e-12, "support_radius": 2.0 * delta, "w2_displacement": 2.0 * delta });
    Ok(Outcome::new(pass, budget, result))
}

pub fn gh_distort(
    source: &Path,
    target: Option<&Path>,
    map: Option<&Path>,
    stride: Option<usize>,
    pairs: &str,
    seed: u64,
) -> Result<Outcome> {
    let source = load_space(source)?;
    let (target, map): (FiniteMetricMeasureSpace, GhMap) = match (target, map, stride) {
        (_, _, Some(stride)) => canonical_coarsening(&source, stride)?,
        (Some(t), Some(m), None) => {
            let target = load_space(t)?;
            let map = load_gh_map(&source, &target, m)?;
            (target, map)
        }
        _ => bail!("give either --target with --map, or --stride"),
    };
    let bound = pushforward_distortion_bound(map.epsilon, target.diameter());
    let trials = trial_pairs(&source, pairs, seed)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["pair", "w2_source", "w2_target", "distortion"])?;
    for (i, (a, b)) in trials.iter().enumerate() {
        let up = solve_w2(&source, a, b)?.distance;
        let down = solve_w2(&target, &map.push(a, target.len())?, &map.push(b, target.len())?)?.distance;
        worst = worst.max((up - down).abs());
        csv.write_record([i.to_string(), format!("{up:e}"), format!("{down:e}"), format!("{:e}", (up - down).abs())])?;
        rows.push(json!({ "pair": i, "w2_source": up, "w2_target": down }));
    }
    let (back, forth) = map.inverse_displacements(&source, &target);
    let result = json!({
        "epsilon": map.epsilon,
        "distortion": map.distortion,
        "covering": map.covering,
        "inverse_source_displacement": back,
        "inverse_target_displacement": forth,
        "target_points": target.len(),
        "worst_distortion": worst,
        "pairs": rows,
    });
    Ok(Outcome::new(worst <= bound, json!({ "epsilon_tilde": bound }), result).with_csv(csv.into_inner()?))
}

fn generator_from_file(space: &FiniteMetricMeasureSpace, path: &Path) -> Result<Vec<usize>> {
    let table: BTreeMap<String, String> = read_json(path)?;
    let mut perm: Vec<usize> = (0..space.len()).collect();
    for (from, to) in &table {
        perm[space.index_of(from)?] = space.index_of(to)?;
    }
    Ok(perm)
}

pub fn quotient(
    space: &Path,
    generators: &[std::path::PathBuf],
    rotations: &[usize],
    pair: Option<(&Path, &Path)>,
) -> Result<Outcome> {
    let space = load_space(space)?;
    let mut gens = generators.iter().map(|g| generator_from_file(&space, g)).collect::<Result<Vec<_>>>()?;
    gens.extend(rotations.iter().map(|&k| rotation(space.len(), k)));
    ensure!(!gens.is_empty(), "give at least one --generator or --rotation");
    let q = quotient_by_group(&space, &gens)?;
    let orbits: Vec<Vec<&str>> = q.orbits.iter().map(|o| o.iter().map(|&x| space.id(x)).collect()).collect();
    let mut result =
        json!({ "orbits": orbits, "quotient_ids": q.space.ids(), "quotient_diameter": q.space.diameter() });
    let mut pass = true;
    if let Some((a, b)) = pair {
        let (mu0, mu1) = (load_measure(&space, a)?, load_measure(&space, b)?);
        for (name, m) in [("mu0", &mu0), ("mu1", &mu1)] {
            for g in &gens {
                let moved = (0..space.len()).map(|x| (m.mass(g[x]) - m.mass(x)).abs()).fold(0.0, f64::max);
                ensure!(moved <= 1e-12, "{name} is not invariant under the group (mass moves by {moved:e})");
            }
        }
        let up = solve_w2(&space, &mu0, &mu1)?.distance;
        let down = solve_w2(&q.space, &q.project(&mu0)?, &q.project(&mu1)?)?.distance;
        pass = (up - down).abs() <= 1e-9;
        result["w2_space"] = json!(up);
        result["w2_quotient"] = json!(down);
    }
    Ok(Outcome::new(pass, json!({ "isometry": 1e-9 }), result))
}

pub fn stability(
    limit: &Path,
    members: &[String],
    n: f64,
    us: &[String],
    pairs: usize,
    seed: u64,
    depth: usize,
) -> Result<Outcome> {
    ensure!(pairs > 0, "at least one trial pair is needed");
    let limit = load_space(limit)?;
    let sequence = members
        .iter()
        .map(|m| {
            let (space, map) = m.rsplit_once(':').ok_or_else(|| anyhow!("member {m:?} is not SPACE:MAP"))?;
            let space = load_space(space)?;
            let map = load_gh_map(&space, &limit, map)?;
            Ok(SequenceMember { space, map })
        })
        .collect::<Result<Vec<_>>>()?;
    let family = if us.is_empty() {
        let mut f = vec![EntropyFunction::shannon(), EntropyFunction::power(2.0)?];
        if n.is_finite() && n > 1.0 {
            f.insert(0, EntropyFunction::power_entropy(n)?);
        }
        f
    } else {
        parse_family(us)?
    };
    let options = ProbeOptions { depth, ..ProbeOptions::default() };
    let report = stability_harness(&sequence, &limit, &family, n, pairs, seed, options)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let budgets: Vec<f64> = report.rows.iter().map(|r| r.budget).collect();
    let pass = report.rows.iter().all(|r| r.pass) && report.budgets_decreasing;
    Ok(Outcome::new(pass, json!({ "per_member": budgets, "limit": report.limit_budget }), json_of(&report)?)
        .with_csv(csv))
}

/// Density on a line grid, against `dx`.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum DensityFile {
    /// Normal density plus a constant floor.
    Gaussian {
        mean: f64,
        sd: f64,
        #[serde(default)]
        floor: f64,
    },
    Values {
        values: Vec<f64>,
    },
    /// `e^{-Psi}`
    Reference,
}

fn load_density(line: &WeightedLine, path: &Path) -> Result<GridDensity> {
    Ok(match read_json::<DensityFile>(path)? {
        DensityFile::Gaussian { mean, sd, floor } => {
            ensure!(sd > 0.0 && floor >= 0.0, "gaussian density needs sd > 0 and floor >= 0");
            GridDensity::from_fn(line, |x| (-(x - mean).powi(2) / (2.0 * sd * sd)).exp() + floor)?
        }
        DensityFile::Values { values } => GridDensity::new(line, values)?,
        DensityFile::Reference => GridDensity::reference(line),
    })
}

fn load_potential(line: &WeightedLine, path: &Path) -> Result<Vec<f64>> {
    Ok(read_json::<Potential>(path)?.sample(line)?)
}

pub fn line_ricci(line: &Path, n: f64, k: f64) -> Result<Outcome> {
    let line = load_line(line)?;
    let values = (0..line.len()).map(|i| ric_n(&line, n, i)).collect::<ricci_transport::Result<Vec<f64>>>()?;
    let min = min_ric_n(&line, n)?;
    let at = values.iter().position(|&v| v == min).map(|i| line.grid()[i]);
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["x", "ric"])?;
    for (x, v) in line.grid().iter().zip(&values) {
        csv.write_record([x.to_string(), v.to_string()])?;
    }
    let result = json!({ "N": num(n), "min_ric": num(min), "argmin": at });
    Ok(Outcome::new(min >= k, json!({ "K": k }), result).with_csv(csv.into_inner()?))
}

pub fn line_geodesic(
    line: &Path,
    rho0: &Path,
    rho1: &Path,
    u: &str,
    lambda: f64,
    steps: usize,
    budget: f64,
) -> Result<Outcome> {
    ensure!(steps >= 2, "need at least 2 time steps");
    ensure!(budget >= 0.0, "budget must be nonnegative");
    let line = load_line(line)?;
    let (r0, r1) = (load_density(&line, rho0)?, load_density(&line, rho1)?);
    let u = EntropyFunction::parse(u)?;
    let ts: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let w = quantile_transport(&line, &r0, &r1, &[])?.w2;
    let values = entropy_along_geodesic(&line, &u, &r0, &r1, &ts)?;
    let (e0, e1) = (values[0].1, values[steps].1);
    let mut defect = f64::NEG_INFINITY;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["t", "entropy"])?;
    for &(t, e) in &values {
        defect = defect.max(e - ((1.0 - t) * e0 + t * e1 - 0.5 * lambda * t * (1.0 - t) * w * w));
        csv.write_record([t.to_string(), format!("{e:e}")])?;
    }
    let result = json!({ "u": u.name(), "lambda": lambda, "w2": w, "defect": defect, "entropy": values });
    Ok(Outcome::new(defect <= budget, json!({ "defect": budget }), result).with_csv(csv.into_inner()?))
}

pub fn line_hessian(line: &Path, u: &str, phi: &Path, rho: Option<&Path>, step: Option<f64>) -> Result<Outcome> {
    let line = load_line(line)?;
    let u = EntropyFunction::parse(u)?;
    let phi = load_potential(&line, phi)?;
    let rho = match rho {
        Some(p) => load_density(&line, p)?,
        None => GridDensity::reference(&line),
    };
    let report = hessian_formula_with_step(&line, &u, &rho, &phi, step.unwrap_or(HESSIAN_STEP))?;
    let result = json!({
        "formula": report.formula_value,
        "finite_diff": report.finite_diff_value,
        "difference": report.difference(),
        "step": report.step,
    });
    Ok(Outcome::new(report.pass(), json!({ "difference": report.budget }), result))
}

pub fn line_angle(line: &Path, phi0: &Path, phi1: &Path, mu: Option<&Path>) -> Result<Outcome> {
    let line = load_line(line)?;
    let (p0, p1) = (load_potential(&line, phi0)?, load_potential(&line, phi1)?);
    let mu = match mu {
        Some(p) => load_density(&line, p)?,
        None => GridDensity::reference(&line),
    };
    let angle = geodesic_angle(&line, &p0, &p1, &mu)?;
    Ok(Outcome::new(true, json!(null), json!({ "angle": angle })))
}
