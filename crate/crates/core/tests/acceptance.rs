//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
//! if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ricci_transport::approxgh::{
    build_mollifier, canonical_coarsening, mollify, pushforward_distortion_bound, quotient_by_group, rotation,
    stability_harness, GhMap, SequenceMember,
};
use ricci_transport::curvature::{bishop_gromov_check, ProbeOptions};
use ricci_transport::entropy::{
    dc_membership, dual_lower_bound, evaluate, geometric_grid, lambda_of, optimizing_potential, EntropyFunction,
};
use ricci_transport::geodesy::glue_midpoint_geodesic;
use ricci_transport::inequalities::{hwi_check, log_sobolev_check, poincare_check, talagrand_check};
use ricci_transport::mmspace::{DiscreteMeasure, FiniteMetricMeasureSpace, GradientMode, WeightedGraph};
use ricci_transport::smooth1d::{
    entropy_along_geodesic, geodesic_angle, hessian_formula, quantile_transport, GridDensity, PsiKind, Topology,
    WeightedLine,
};
use ricci_transport::transport::{w2, w2_bruteforce};
use ricci_transport::trial::BumpGenerator;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn random_space(rng: &mut ChaCha8Rng, max_points: usize, zero_nu: bool) -> FiniteMetricMeasureSpace {
    let n = rng.gen_range(3..=max_points);
    let mut g = WeightedGraph::new();
    for i in 0..n {
        g = g.vertex(i.to_string());
    }
    let mut edges = std::collections::BTreeSet::new();
    for i in 1..n {
        edges.insert((rng.gen_range(0..i), i));
    }
    for _ in 0..rng.gen_range(0..n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    for (a, b) in edges {
        g = g.edge(a.to_string(), b.to_string(), rng.gen_range(0.2..2.0));
    }
    let mut nu: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    if zero_nu {
        for w in nu.iter_mut().skip(1) {
            if rng.gen_bool(0.2) {
                *w = 0.0;
            }
        }
    }
    FiniteMetricMeasureSpace::build(&g, &nu, 1).unwrap()
}

fn random_measure(rng: &mut ChaCha8Rng, candidates: &[usize], len: usize, support: usize) -> DiscreteMeasure {
    let mut pool = candidates.to_vec();
    let mut w = vec![0.0; len];
    for _ in 0..support.min(pool.len()) {
        let k = rng.gen_range(0..pool.len());
        w[pool.swap_remove(k)] = rng.gen_range(0.05..1.0);
    }
    DiscreteMeasure::from_unnormalized(w).unwrap()
}

fn random_u(rng: &mut ChaCha8Rng, with_table: bool) -> EntropyFunction {
    match rng.gen_range(0..if with_table { 6 } else { 5 }) {
        0 => EntropyFunction::power_entropy(rng.gen_range(1.2..8.0)).unwrap(),
        1 => EntropyFunction::shannon(),
        2 => EntropyFunction::power(rng.gen_range(1.1..3.0)).unwrap(),
        3 => EntropyFunction::linear(rng.gen_range(-2.0..2.0)).unwrap(),
        4 => EntropyFunction::shifted_quadratic(),
        _ => {
            let mut pts = vec![(0.0, 0.0)];
            let mut slope: f64 = rng.gen_range(-1.0..0.0);
            let mut x = 0.0;
            let mut y = 0.0;
            for _ in 0..5 {
                let dx = rng.gen_range(0.2..2.0);
                x += dx;
                y += slope * dx;
                pts.push((x, y));
                slope += rng.gen_range(0.1..1.5);
            }
            EntropyFunction::tabulated(pts).unwrap()
        }
    }
}

fn unit_cycle(n: usize) -> FiniteMetricMeasureSpace {
    FiniteMetricMeasureSpace::build(&WeightedGraph::cycle(n, 1.0 / n as f64), &vec![1.0; n], 1).unwrap()
}

fn c01_w2_metric() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut sym, mut tri, mut brute): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut instances = 0;
    for _ in 0..50 {
        let s = random_space(&mut rng, 12, false);
        let all: Vec<usize> = (0..s.len()).collect();
        for _ in 0..3 {
            let m: Vec<DiscreteMeasure> = (0..3)
                .map(|_| {
                    let k = rng.gen_range(1..=3);
                    random_measure(&mut rng, &all, s.len(), k)
                })
                .collect();
            let d = |a: usize, b: usize| w2(&s, &m[a], &m[b]).unwrap().distance;
            for a in 0..3 {
                for b in 0..3 {
                    sym = sym.max((d(a, b) - d(b, a)).abs());
                    for c in 0..3 {
                        tri = tri.max(d(a, c) - d(a, b) - d(b, c));
                    }
                    brute = brute.max((d(a, b) - w2_bruteforce(&s, &m[a], &m[b]).unwrap()).abs());
                    instances += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        sym <= 1e-9 && tri <= 1e-9 && brute <= 1e-9 && secs < 30.0,
        format!("symmetry {sym:.1e}, triangle excess {tri:.1e}, |LP - brute| {brute:.1e} over {instances} pairs, {secs:.1}s"),
    )
}

fn c02_dirac_isometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut mismatches = 0;
    for _ in 0..100 {
        let s = random_space(&mut rng, 12, false);
        let (x, y) = (rng.gen_range(0..s.len()), rng.gen_range(0..s.len()));
        let d = w2(&s, &DiscreteMeasure::dirac(s.len(), x), &DiscreteMeasure::dirac(s.len(), y)).unwrap().distance;
        if d != s.dist(x, y) {
            mismatches += 1;
        }
    }
    (mismatches == 0, format!("{mismatches} of 100 Dirac pairs differ from d(x, y)"))
}

fn c03_geodesic_speed() -> Outcome {
    let base = FiniteMetricMeasureSpace::build(&WeightedGraph::cycle(6, 1.0), &[1.0; 6], 8).unwrap();
    let s = base.with_nu(DiscreteMeasure::uniform(base.len())).unwrap();
    let tau = s.mesh();
    let pairs = BumpGenerator::default().pairs(&s, 20, 103).unwrap();
    let times = ricci_transport::geodesy::dyadic_times(4);
    let mut worst: f64 = 0.0;
    for (a, b) in &pairs {
        let path = glue_midpoint_geodesic(&s, a, b, 4).unwrap();
        let total = w2(&s, a, b).unwrap().distance;
        for i in 0..path.len() {
            for j in (i + 1)..path.len() {
                let d = w2(&s, &path[i], &path[j]).unwrap().distance;
                worst = worst.max((d - (times[j] - times[i]) * total).abs());
            }
        }
    }
    (worst <= 2.0 * tau, format!("worst |W2(mu_s, mu_t) - |s - t| W2| = {worst:.4} against 2 tau = {:.4}", 2.0 * tau))
}

fn c04_entropy_functional() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut jensen_failures = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..10);
        let u = random_u(&mut rng, true);
        let all: Vec<usize> = (0..n).collect();
        let (a, b) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
        let nu = random_measure(&mut rng, &all, n, a);
        let mu = random_measure(&mut rng, &all, n, b);
        let value = evaluate(&u, &mu, &nu).unwrap();
        if !(value >= u.eval(1.0)) {
            jensen_failures += 1;
        }
    }
    let mut dirac_err: f64 = 0.0;
    for n in [2usize, 3, 7, 16, 100] {
        let nu = DiscreteMeasure::uniform(n);
        let mu = DiscreteMeasure::dirac(n, 0);
        let h = evaluate(&EntropyFunction::shannon(), &mu, &nu).unwrap();
        dirac_err = dirac_err.max((h - (n as f64).ln()).abs());
        for big_n in [1.5, 2.0, 3.0, 10.0] {
            let v = evaluate(&EntropyFunction::power_entropy(big_n).unwrap(), &mu, &nu).unwrap();
            dirac_err = dirac_err.max((v - (big_n - big_n * (n as f64).powf(-1.0 / big_n))).abs());
        }
    }
    (
        jensen_failures == 0 && dirac_err <= 1e-12,
        format!("Jensen failures {jensen_failures}/200, Dirac value error {dirac_err:.1e}"),
    )
}

fn c05_legendre_duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut dual_excess = f64::NEG_INFINITY;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..10);
        let u = random_u(&mut rng, true);
        let all: Vec<usize> = (0..n).collect();
        let nu = random_measure(&mut rng, &all, n, n);
        let k = rng.gen_range(1..=n);
        let mu = random_measure(&mut rng, &all, n, k);
        let value = evaluate(&u, &mu, &nu).unwrap();
        let cap = u.u_prime_infinity().min(3.0);
        let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..=cap)).collect();
        let dual = dual_lower_bound(&u, &mu, &nu, &phi).unwrap();
        dual_excess = dual_excess.max(dual - value - 1e-12 * (1.0 + value.abs()));
        // strictly positive densities
        let full = random_measure(&mut rng, &all, n, n);
        let value = evaluate(&u, &full, &nu).unwrap();
        let phi = optimizing_potential(&u, &full, &nu, 1e6).unwrap();
        worst_gap = worst_gap.max(value - dual_lower_bound(&u, &full, &nu, &phi).unwrap());
    }
    (
        dual_excess <= 0.0 && worst_gap < 1e-6,
        format!("max(dual - value) {:.1e} (beyond rounding), optimizing gap {worst_gap:.1e}", dual_excess.max(0.0)),
    )
}

fn c06_dc_algebra() -> Outcome {
    let mut pressure_err: f64 = 0.0;
    for big_n in [1.5, 2.0, 3.0, 7.0] {
        let u = EntropyFunction::power_entropy(big_n).unwrap();
        for r in geometric_grid() {
            let p = r.powf(1.0 - 1.0 / big_n);
            pressure_err = pressure_err.max((u.pressure(r) - p).abs() / p);
            pressure_err = pressure_err.max((u.iterated_pressure(r).unwrap() + p / big_n).abs() / p);
        }
    }
    let catalog = [
        EntropyFunction::power_entropy(2.0).unwrap(),
        EntropyFunction::power_entropy(3.0).unwrap(),
        EntropyFunction::power_entropy(5.0).unwrap(),
        EntropyFunction::shannon(),
        EntropyFunction::power(2.0).unwrap(),
        EntropyFunction::power(1.5).unwrap(),
        EntropyFunction::linear(1.0).unwrap(),
        EntropyFunction::shifted_quadratic(),
        EntropyFunction::tabulated(vec![(0.0, 0.0), (1.0, -0.5), (2.0, 0.0), (4.0, 3.0)]).unwrap(),
    ];
    let dims = [1.0, 1.5, 2.0, 3.0, 5.0, 10.0, f64::INFINITY];
    let mut monotone_failures = 0;
    let mut checks = 0;
    for u in &catalog {
        let member: Vec<bool> = dims.iter().map(|&n| dc_membership(u, n).unwrap().member).collect();
        for hi in 0..dims.len() {
            for lo in 0..hi {
                if member[hi] {
                    checks += 1;
                    if !member[lo] {
                        monotone_failures += 1;
                    }
                }
            }
        }
    }
    let mut lambda_err: f64 = 0.0;
    for k in [-3.0, -1.0, 0.0, 0.5, 2.0] {
        lambda_err = lambda_err.max((lambda_of(&EntropyFunction::shannon(), k).unwrap() - k).abs());
    }
    (
        pressure_err <= 1e-10 && monotone_failures == 0 && lambda_err <= 1e-10,
        format!(
            "pressure relative error {pressure_err:.1e}, DC monotonicity failures {monotone_failures}/{checks}, lambda error {lambda_err:.1e}"
        ),
    )
}

fn bump(line: &WeightedLine, c: f64, w: f64) -> GridDensity {
    GridDensity::from_fn(line, |x| (-(x - c).powi(2) / (2.0 * w * w)).exp() + 1e-3).unwrap()
}

fn c07_smooth_equivalence() -> Outcome {
    let start = Instant::now();
    let u = EntropyFunction::shannon();
    let k = 1.0;
    let line = WeightedLine::new(Topology::Interval { a: -5.0, b: 5.0 }, PsiKind::Quadratic { k }, 2048).unwrap();
    let ts: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
    let dt = 1.0 / 16.0;
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst = f64::INFINITY;
    for _ in 0..10 {
        let r0 = bump(&line, rng.gen_range(-2.0..2.0), rng.gen_range(0.3..1.0));
        let r1 = bump(&line, rng.gen_range(-2.0..2.0), rng.gen_range(0.3..1.0));
        let w = quantile_transport(&line, &r0, &r1, &[]).unwrap().w2;
        let e = entropy_along_geodesic(&line, &u, &r0, &r1, &ts).unwrap();
        for i in 1..16 {
            worst = worst.min(e[i + 1].1 - 2.0 * e[i].1 + e[i - 1].1 - k * w * w * dt * dt);
        }
    }
    let well =
        WeightedLine::new(Topology::Interval { a: -PI, b: PI }, PsiKind::Cosine { amp: 1.0, freq: 1.0 }, 2048).unwrap();
    let min_ric = ricci_transport::smooth1d::min_ric_n(&well, f64::INFINITY).unwrap();
    let budget = 1e-4;
    let mut battery: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(0.3..1.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.3..1.0)))
        .collect();
    battery.push((-0.5, 0.1, 0.5, 0.1));
    let mut max_defect = f64::NEG_INFINITY;
    for (c0, w0, c1, w1) in battery {
        let e = entropy_along_geodesic(&well, &u, &bump(&well, c0, w0), &bump(&well, c1, w1), &ts).unwrap();
        let (e0, e1) = (e[0].1, e[16].1);
        for (t, v) in &e {
            max_defect = max_defect.max(v - ((1.0 - t) * e0 + t * e1));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst >= -1e-4 && max_defect > budget && secs < 60.0,
        format!(
            "worst second difference minus K W2^2 dt^2: {worst:.2e}; cosine well (min Ric = {min_ric:.3}) max defect {max_defect:.3e} > {budget:e}; {secs:.1}s"
        ),
    )
}

fn c08_hessian() -> Outcome {
    let u = EntropyFunction::shannon();
    let mut worst_2048: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let lines = |n| {
        [
            WeightedLine::new(Topology::Interval { a: -5.0, b: 5.0 }, PsiKind::Quadratic { k: 1.0 }, n).unwrap(),
            WeightedLine::new(Topology::Interval { a: -PI, b: PI }, PsiKind::Cosine { amp: 1.0, freq: 1.0 }, n)
                .unwrap(),
            WeightedLine::new(Topology::Interval { a: -3.0, b: 3.0 }, PsiKind::Quadratic { k: 0.0 }, n).unwrap(),
        ]
    };
    let diffs = |n| -> Vec<f64> {
        let mut out = Vec::new();
        for l in lines(n) {
            let rho = GridDensity::from_fn(&l, |x| (-(x - 0.3f64).powi(2)).exp() + 0.05).unwrap();
            for phi in
                [l.sample(|x| x.sin()), l.sample(|x| 0.5 * (2.0 * x + 0.5).cos()), l.sample(|x| (-x * x / 2.0).exp())]
            {
                out.push(hessian_formula(&l, &u, &rho, &phi).unwrap().difference());
            }
        }
        out
    };
    let coarse = diffs(1024);
    let fine = diffs(2048);
    for (c, f) in coarse.iter().zip(&fine) {
        worst_2048 = worst_2048.max(*f);
        worst_ratio = worst_ratio.max(f / c);
    }
    (
        worst_2048 <= 1e-3 && worst_ratio <= 0.5,
        format!("max |formula - finite_diff| at grid 2048 {worst_2048:.2e}; worst ratio 2048/1024 {worst_ratio:.3}"),
    )
}

fn c09_gaussian_inequalities() -> Outcome {
    let u = EntropyFunction::shannon();
    let line = WeightedLine::new(Topology::Interval { a: -6.0, b: 6.0 }, PsiKind::Quadratic { k: 1.0 }, 512).unwrap();
    let space = line.to_space().unwrap();
    let r = space.default_gradient_radius();
    let g = |m: f64, s: f64| move |x: f64| (-(x - m).powi(2) / (2.0 * s * s)).exp();
    let densities: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(g(0.3, 0.7)),
        Box::new(g(-0.5, 1.3)),
        Box::new(move |x| g(-1.0, 0.6)(x) + g(1.2, 0.8)(x)),
        Box::new(move |x| (1.0 + 0.5 * x.sin()) * g(0.0, 1.0)(x)),
        Box::new(g(0.5, 0.5)),
    ];
    let mut chain_min = f64::INFINITY;
    let mut talagrand_min = f64::INFINITY;
    for f in &densities {
        let mu = GridDensity::from_fn(&line, f).unwrap().to_measure(&line).unwrap();
        let rep = hwi_check(&space, &mu, &u, 1.0, 0, r).unwrap();
        for res in rep.results.iter().filter(|x| x.name != "entropy-fisher") {
            chain_min = chain_min.min(res.slack);
        }
        talagrand_min = talagrand_min.min(talagrand_check(&space, &mu, 1.0).unwrap().slack);
    }
    let functions: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(|x| 1.0 + 0.3 * x),
        Box::new(|x| x),
        Box::new(|x| x * x - 1.0),
        Box::new(|x: f64| x.sin()),
        Box::new(|x: f64| x.tanh()),
    ];
    let mut functional_failures = 0;
    for f in &functions {
        let v = line.sample(f);
        if !log_sobolev_check(&space, &v, 1.0, r, GradientMode::Descending).unwrap().pass {
            functional_failures += 1;
        }
        if !poincare_check(&space, &v, 1.0, r, GradientMode::Descending).unwrap().pass {
            functional_failures += 1;
        }
    }
    // shifted Gaussian: equality case of HWI, shown for reference
    let shifted = GridDensity::from_fn(&line, g(1.0, 1.0)).unwrap().to_measure(&line).unwrap();
    let eq = hwi_check(&space, &shifted, &u, 1.0, 0, r).unwrap();
    let eq_min =
        eq.results.iter().filter(|x| x.name != "entropy-fisher").map(|x| x.slack).fold(f64::INFINITY, f64::min);
    (
        chain_min >= -1e-3 && talagrand_min >= -1e-3 && functional_failures == 0,
        format!(
            "min HWI chain slack {chain_min:.2e}, min Talagrand slack {talagrand_min:.2e}, LSI/Poincare failures {functional_failures}/10 (equality case N(1,1): min chain slack {eq_min:.2e}, not scored)"
        ),
    )
}

fn c10_bishop_gromov() -> Outcome {
    let s = unit_cycle(256);
    let centers: Vec<usize> = (0..16).map(|i| 16 * i).collect();
    let radii: Vec<f64> = (1..=16).map(|j| (8.0 * j as f64 - 0.5) / 256.0).collect();
    let rep = bishop_gromov_check(&s, 1.0, &centers, &radii).unwrap();
    let lattice: Vec<f64> = (1..=16).map(|j| 8.0 * j as f64 / 256.0).collect();
    let lat = bishop_gromov_check(&s, 1.0, &centers, &lattice).unwrap();
    (
        rep.violation <= rep.mesh,
        format!(
            "violation {:.2e} <= mesh {:.2e} at radii (8j - 1/2)/256 (lattice radii 8j/256: {:.2e}, not scored)",
            rep.violation, rep.mesh, lat.violation
        ),
    )
}

fn c11_mollifier() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let (mut asym, mut stoch, mut radius_excess, mut contraction, mut transport_excess) =
        (0, 0.0f64, 0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..100 {
        let s = random_space(&mut rng, 12, true);
        let support = s.nu().support();
        let k = rng.gen_range(1..=support.len());
        let mu = random_measure(&mut rng, &support, s.len(), k);
        let u = random_u(&mut rng, true);
        let delta = rng.gen_range(0.1..1.2) * s.diameter();
        let k = build_mollifier(&s, delta).unwrap();
        if !k.is_symmetric() {
            asym += 1;
        }
        stoch = stoch.max(k.stochasticity_error(s.nu()));
        if k.support_radius(&s) >= 2.0 * delta {
            radius_excess += 1;
        }
        let out = mollify(&s, &k, &mu).unwrap();
        let before = evaluate(&u, &mu, s.nu()).unwrap();
        let after = evaluate(&u, &out, s.nu()).unwrap();
        contraction = contraction.max(after - before - 1e-12 * (1.0 + before.abs()));
        transport_excess = transport_excess.max(w2(&s, &out, &mu).unwrap().distance - 2.0 * delta);
    }
    (
        asym == 0 && stoch <= 1e-12 && radius_excess == 0 && contraction <= 0.0 && transport_excess <= 0.0,
        format!(
            "asymmetric {asym}, row-sum error {stoch:.1e}, support beyond 2 delta {radius_excess}, contraction excess {:.1e}, max W2 - 2 delta {transport_excess:.3}",
            contraction.max(0.0)
        ),
    )
}

fn c12_gh_distortion() -> Outcome {
    let s = unit_cycle(64);
    let pairs = BumpGenerator::default().pairs(&s, 20, 112).unwrap();
    let mut worst_margin = f64::NEG_INFINITY;
    let mut details = Vec::new();
    for stride in [2, 4, 8] {
        let (c, map) = canonical_coarsening(&s, stride).unwrap();
        let bound = pushforward_distortion_bound(map.epsilon, c.diameter());
        let mut worst: f64 = 0.0;
        for (a, b) in &pairs {
            let up = w2(&s, a, b).unwrap().distance;
            let down = w2(&c, &map.push(a, c.len()).unwrap(), &map.push(b, c.len()).unwrap()).unwrap().distance;
            worst = worst.max((up - down).abs());
        }
        worst_margin = worst_margin.max(worst - bound);
        details.push(format!("{}pt: {worst:.4} <= {bound:.4}", c.len()));
    }
    let value = pushforward_distortion_bound(0.01, 1.0);
    (
        worst_margin <= 0.0 && (value - 0.181774).abs() <= 1e-6,
        format!("{}; eps~(0.01, 1) = {value:.6}", details.join(", ")),
    )
}

fn c13_stability() -> Outcome {
    let start = Instant::now();
    let limit = unit_cycle(128);
    let sequence: Vec<SequenceMember> = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let space = unit_cycle(n);
            let map = GhMap::new(&space, &limit, (0..n).map(|i| i * (128 / n)).collect(), None).unwrap();
            SequenceMember { space, map }
        })
        .collect();
    let family = [
        EntropyFunction::power_entropy(2.0).unwrap(),
        EntropyFunction::shannon(),
        EntropyFunction::power(2.0).unwrap(),
    ];
    let rep = stability_harness(&sequence, &limit, &family, 2.0, 10, 113, ProbeOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("n={}: {:.2e}/{:.2e}", sequence[r.i].space.len(), r.worst_defect, r.budget))
        .collect();
    (
        rep.rows.iter().all(|r| r.pass) && rep.budgets_decreasing && secs < 300.0,
        format!(
            "defect/budget {}; budgets decreasing {}; limit pass {}; {secs:.1}s",
            rows.join(", "),
            rep.budgets_decreasing,
            rep.limit_pass
        ),
    )
}

fn c14_quotient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(114);
    let mut worst_brute: f64 = 0.0;
    let mut worst_lp: f64 = 0.0;
    let mut brute_pairs = 0;
    let mut lp_pairs = 0;
    for n in [4usize, 8] {
        let s = FiniteMetricMeasureSpace::build(&WeightedGraph::cycle(n, 1.0), &vec![1.0; n], 1).unwrap();
        let mut k = 1;
        while k < n {
            if n % k == 0 {
                let q = quotient_by_group(&s, &[rotation(n, k)]).unwrap();
                let m = q.orbits.len();
                let subsets: Vec<Vec<usize>> =
                    (1u32..(1 << m)).map(|mask| (0..m).filter(|o| mask & (1 << o) != 0).collect()).collect();
                for a in &subsets {
                    for b in &subsets {
                        for _ in 0..3 {
                            let weights = |set: &[usize], rng: &mut ChaCha8Rng| -> Vec<f64> {
                                (0..m).map(|o| if set.contains(&o) { rng.gen_range(0.1..1.0) } else { 0.0 }).collect()
                            };
                            let mu = q.lift(&weights(a, &mut rng)).unwrap();
                            let nu = q.lift(&weights(b, &mut rng)).unwrap();
                            let (pm, pn) = (q.project(&mu).unwrap(), q.project(&nu).unwrap());
                            let up_lp = w2(&s, &mu, &nu).unwrap().distance;
                            let down_lp = w2(&q.space, &pm, &pn).unwrap().distance;
                            worst_lp = worst_lp.max((up_lp - down_lp).abs());
                            lp_pairs += 1;
                            if mu.support().len() + nu.support().len() <= 6 {
                                let up = w2_bruteforce(&s, &mu, &nu).unwrap();
                                let down = w2_bruteforce(&q.space, &pm, &pn).unwrap();
                                worst_brute = worst_brute.max((up - down).abs());
                                brute_pairs += 1;
                            }
                        }
                    }
                }
            }
            k *= 2;
        }
    }
    (
        worst_brute <= 1e-9 && worst_lp <= 1e-9 && brute_pairs > 0,
        format!(
            "brute force: {worst_brute:.1e} over {brute_pairs} pairs; exact LP: {worst_lp:.1e} over {lp_pairs} pairs"
        ),
    )
}

fn c15_angles() -> Outcome {
    let line = WeightedLine::new(Topology::Interval { a: -5.0, b: 5.0 }, PsiKind::Quadratic { k: 1.0 }, 2048).unwrap();
    let mu = GridDensity::reference(&line);
    let mut rng = ChaCha8Rng::seed_from_u64(115);
    let random_potential = |rng: &mut ChaCha8Rng| {
        let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        line.sample(|x| c[0] * x + c[1] * x * x + c[2] * x * x * x / 6.0 + c[3] * (c[4] * 3.0 * x + c[5]).sin())
    };
    let mut exact = true;
    let mut worst_sum: f64 = 0.0;
    for _ in 0..50 {
        let p: Vec<Vec<f64>> = (0..3).map(|_| random_potential(&mut rng)).collect();
        let neg: Vec<f64> = p[0].iter().map(|v| -v).collect();
        exact &= geodesic_angle(&line, &p[0], &p[0], &mu).unwrap() == 0.0;
        exact &= geodesic_angle(&line, &p[0], &neg, &mu).unwrap() == PI;
        let a = |i: usize, j: usize| geodesic_angle(&line, &p[i], &p[j], &mu).unwrap();
        worst_sum = worst_sum.max(a(0, 1) + a(1, 2) + a(0, 2));
    }
    (
        exact && worst_sum <= 2.0 * PI + 1e-9,
        format!("identity/antipodal exact: {exact}; max angle sum {worst_sum:.6} (2 pi = {:.6})", 2.0 * PI),
    )
}

fn main() {
    let criteria: [Criterion; 15] = [
        ("W2 metric suite", c01_w2_metric),
        ("Dirac isometry", c02_dirac_isometry),
        ("geodesic speed", c03_geodesic_speed),
        ("entropy functional", c04_entropy_functional),
        ("Legendre duality", c05_legendre_duality),
        ("DC_N algebra", c06_dc_algebra),
        ("1D curvature equivalence", c07_smooth_equivalence),
        ("Hessian formula", c08_hessian),
        ("Gaussian inequality chain", c09_gaussian_inequalities),
        ("Bishop-Gromov", c10_bishop_gromov),
        ("mollifier suite", c11_mollifier),
        ("GH distortion", c12_gh_distortion),
        ("stability trend", c13_stability),
        ("group quotient", c14_quotient),
        ("angle geometry", c15_angles),
    ];
    let mut passed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg =
                    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        if ok {
            passed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if passed != criteria.len() {
        std::process::exit(1);
    }
}
