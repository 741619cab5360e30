//! The acceptance suite shared by `specmdp verify` and the `acceptance` test.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use specmdp_core::innovations::stream;
use specmdp_core::process::{periodogram, periodogram_functional_toeplitz, simulate_path};
use specmdp_core::rates::{
    bias_bound, rate_functional, rate_functional_variational, rate_quadratic, rate_scalar, sigma_matrix,
    sigma_matrix_timedomain, bartlett_covariance,
};
use specmdp_core::spectral::spectral_density;
use specmdp_core::toeplitz::{gaussian_quadratic_logmgf, norm_bound, operator_norm, similarity_eigenvalues, trace_limit, trace_product};
use specmdp_core::{CovarianceMatrix, InnovationLaw, MACoefficients, ToeplitzOperator, TorusFunction};

use crate::config::{ExperimentConfig, TolerancePolicy};
use crate::io::{csv_bytes, FunctionSpec};
use crate::montecarlo::{self, bartlett_mc, gaussian_quadratic_mc, Harness, LagTriple};
use crate::Result;

pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    check: fn(&Harness, u64) -> Result<(bool, String)>,
}

impl Criterion {
    pub fn run(&self, harness: &Harness, seed: u64) -> Outcome {
        let start = Instant::now();
        let (pass, detail) = match (self.check)(harness, seed) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        Outcome { id: self.id, name: self.name, pass, detail, elapsed: start.elapsed() }
    }
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "trace asymptotics", check: trace_asymptotics },
        Criterion { id: 2, name: "norm bound", check: norm_bound_domination },
        Criterion { id: 3, name: "gaussian quadratic log-mgf", check: gaussian_logmgf },
        Criterion { id: 4, name: "mgf domination", check: mgf_domination },
        Criterion { id: 5, name: "sigma cross-oracle", check: sigma_cross_oracle },
        Criterion { id: 6, name: "variance convergence", check: variance_convergence },
        Criterion { id: 7, name: "clt variance", check: clt_variance },
        Criterion { id: 8, name: "rate consistency", check: rate_consistency },
        Criterion { id: 9, name: "bias bound", check: bias },
        Criterion { id: 10, name: "mdp tail trend", check: tail_trend },
        Criterion { id: 11, name: "parseval and dual routes", check: parseval_dual_routes },
    ]
}

pub fn run_all(harness: &Harness, seed: u64) -> Vec<Outcome> {
    criteria().iter().map(|c| c.run(harness, seed)).collect()
}

pub fn outcome_line(o: &Outcome) -> String {
    format!("criterion {:>2} [{}] {}: {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail)
}

/// Outcomes as CSV; wall time is left out so reruns are byte-identical.
pub fn outcomes_csv(outcomes: &[Outcome]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| vec![o.id.to_string(), o.name.to_string(), o.pass.to_string(), o.detail.clone()])
        .collect();
    csv_bytes(&["id", "criterion", "pass", "detail"], &rows)
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("runtime under {}s", limit.as_secs()))
}

fn random_coeffs<R: Rng>(rng: &mut R) -> MACoefficients {
    let len = rng.random_range(1..=4);
    let lo = rng.random_range(-2..=1);
    let mut values: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    values[0] += if values[0] >= 0.0 { 0.1 } else { -0.1 };
    MACoefficients::new(lo, values).expect("finite coefficients")
}

fn random_cosine<R: Rng>(rng: &mut R, max_degree: usize) -> TorusFunction {
    let d = rng.random_range(0..=max_degree);
    let c: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect();
    TorusFunction::from_cosine_series(&c)
}

fn trace_asymptotics(_: &Harness, _: u64) -> Result<(bool, String)> {
    let start = Instant::now();
    let f = TorusFunction::from_cosine_series(&[1.25, 1.0]);
    let gens = [f.clone(), f];
    let limit = trace_limit(&gens)?;
    let ns = [128usize, 256, 512, 1024];
    let errors: Vec<f64> = ns
        .iter()
        .map(|&n| trace_product(&gens, n).map(|v| (v - limit).abs()))
        .collect::<specmdp_core::Result<_>>()?;
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ratios_ok = ratios.iter().all(|r| (1.6..=2.4).contains(r));
    let (fast, time) = within(Duration::from_secs(30), start);
    Ok((
        ratios_ok && fast && (limit - 2.0625).abs() < 1e-14,
        format!("limit {limit}, error ratios {ratios:.4?}, {time}"),
    ))
}

fn norm_bound_domination(_: &Harness, seed: u64) -> Result<(bool, String)> {
    let mut rng = stream(seed, 2);
    let mut violations = 0;
    let mut checks = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..50 {
        let h = spectral_density(&random_coeffs(&mut rng), rng.random_range(0.2..2.0))?;
        for n in [16usize, 64, 256] {
            let norm = operator_norm(&ToeplitzOperator::build(&h, n)?)?;
            for q in [2.0, 4.0, f64::INFINITY] {
                let bound = norm_bound(&h, q, n)?;
                checks += 1;
                tightest = tightest.min(bound - norm);
                if norm > bound {
                    violations += 1;
                }
            }
        }
    }
    Ok((violations == 0, format!("{violations} violations in {checks} checks, smallest slack {tightest:.3e}")))
}

fn gaussian_logmgf(harness: &Harness, seed: u64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut count = 0;
    let f = TorusFunction::from_cosine_series(&[1.25, 1.0]);
    for n in [1usize, 2, 4] {
        let a = if n == 1 { DMatrix::from_element(1, 1, 1.0) } else { ToeplitzOperator::build(&TorusFunction::cosine(2.0, 1), n)?.dense() + DMatrix::identity(n, n) * 0.5 };
        let r = ToeplitzOperator::build(&f, n)?.dense();
        let top = similarity_eigenvalues(&a, &r)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let zs: Vec<f64> = [-0.2, -0.1, 0.05, 0.1, 0.15].iter().map(|c| c / top).collect();
        let mc = gaussian_quadratic_mc(&a, &r, &zs, 1_000_000, seed ^ n as u64, harness)?;
        for (&z, &(est, se)) in zs.iter().zip(&mc) {
            let exact = gaussian_quadratic_logmgf(&a, &r, z)?.to_f64();
            worst = worst.max((est - exact).abs() / se);
            count += 1;
        }
    }
    Ok((worst <= 4.0, format!("{count} (n, z) points, largest deviation {worst:.2} std errors (limit 4)")))
}

fn mgf_domination(harness: &Harness, seed: u64) -> Result<(bool, String)> {
    let mut failures = Vec::new();
    let mut rows = 0;
    for law in ["gaussian", "uniform", "rademacher"] {
        let mut cfg = ExperimentConfig::new("ma1:0.5", law, vec![8], 200_000);
        cfg.lambdas = vec![0.01, 0.02, 0.03, 0.04, 0.05];
        cfg.master_seed = seed;
        let report = montecarlo::mgf_domination(&cfg.resolve()?, harness)?;
        rows += report.rows.len();
        if !report.pass {
            failures.push(law);
        }
    }
    Ok((failures.is_empty(), format!("{rows} (law, lambda) points, violations for {failures:?}")))
}

fn bartlett_configs() -> Result<Vec<(MACoefficients, InnovationLaw)>> {
    Ok(vec![
        (MACoefficients::ma1(0.5), InnovationLaw::gaussian(1.0)?),
        (MACoefficients::new(-1, vec![0.4, 1.0, -0.3])?, InnovationLaw::uniform(1.5)?),
        (MACoefficients::new(0, vec![1.0, 0.6, 0.3])?, InnovationLaw::scaled_mixture(1.0, 0.5, 0.5)?),
    ])
}

fn sigma_cross_oracle(harness: &Harness, seed: u64) -> Result<(bool, String)> {
    let mut triples = Vec::new();
    for a in 0..=2 {
        for b in 0..=2 {
            for k in 0..=3 {
                triples.push(LagTriple { a, b, k });
            }
        }
    }
    let mut worst_mc = 0.0f64;
    for (i, (coeffs, law)) in bartlett_configs()?.iter().enumerate() {
        let mc = bartlett_mc(coeffs, law, &triples, 200_000, seed.wrapping_add(i as u64), harness)?;
        for (t, (est, se)) in triples.iter().zip(mc) {
            let formula = bartlett_covariance(coeffs, law, t.a as i64, t.b as i64, t.k as i64);
            worst_mc = worst_mc.max((est - formula).abs() / se.max(1e-300));
        }
    }
    let mut rng = stream(seed, 5);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let coeffs = random_coeffs(&mut rng);
        let variance = rng.random_range(0.3..2.0);
        let law = if i % 2 == 0 { InnovationLaw::gaussian(variance)? } else { InnovationLaw::uniform(variance)? };
        let m = rng.random_range(0..=3);
        let f = spectral_density(&coeffs, variance)?;
        let fd = sigma_matrix(&f, law.kappa4(), m)?;
        let td = sigma_matrix_timedomain(&coeffs, &law, m)?;
        worst = worst.max(fd.max_abs_diff(&td));
    }
    Ok((
        worst_mc <= 5.0 && worst <= 1e-8,
        format!("time-domain formula vs MC within {worst_mc:.2} std errors (limit 5); 20 configurations agree to {worst:.2e} (limit 1e-8)"),
    ))
}

fn variance_convergence(harness: &Harness, seed: u64) -> Result<(bool, String)> {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new("ma1:0.5", "gaussian", vec![4096], 20_000);
    cfg.lags = 1;
    cfg.master_seed = seed;
    let report = montecarlo::variance_convergence(&cfg.resolve()?, harness)?;
    let (fast, time) = within(Duration::from_secs(300), start);
    let cells: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{} {:.4}±{:.4} vs {}", r.entry, r.estimate, r.std_error, r.target))
        .collect();
    Ok((report.pass && fast, format!("{}; {time}", cells.join(", "))))
}

fn clt_variance(harness: &Harness, seed: u64) -> Result<(bool, String)> {
    let cases = [("gaussian", "1", 2.0), ("gaussian", "cos", 1.0), ("uniform", "1", 0.8)];
    let mut pass = true;
    let mut cells = Vec::new();
    for (law, h, expected) in cases {
        let mut cfg = ExperimentConfig::new("iid", law, vec![1024], 20_000);
        cfg.h = Some(FunctionSpec::Shortcut(h.into()));
        cfg.master_seed = seed;
        cfg.tolerance = TolerancePolicy { std_errors: 0.0, relative: 0.05 };
        let report = montecarlo::clt_check(&cfg.resolve()?, harness)?;
        let row = &report.rows[0];
        pass &= report.pass && (row.target - expected).abs() < 1e-12;
        cells.push(format!("{law}/h={h}: {:.4} vs {}", row.estimate, row.target));
    }
    Ok((pass, cells.join(", ")))
}

/// Maximizes `<l, z> - l' S l / 2` by zooming grids, doubling the box until
/// the maximizer is interior.
pub fn legendre_grid_sup(z: &[f64], s: &DMatrix<f64>) -> f64 {
    let d = z.len();
    let objective = |l: &[f64]| {
        let v = DVector::from_column_slice(l);
        v.dot(&DVector::from_column_slice(z)) - 0.5 * v.dot(&(s * &v))
    };
    let steps = 21usize;
    let mut radius = 1.0;
    loop {
        let mut center = vec![0.0; d];
        let mut half = radius;
        let mut best = objective(&center);
        for _ in 0..60 {
            let mut best_point = center.clone();
            for idx in 0..steps.pow(d as u32) {
                let mut rem = idx;
                let point: Vec<f64> = (0..d)
                    .map(|i| {
                        let step = rem % steps;
                        rem /= steps;
                        center[i] - half + 2.0 * half * step as f64 / (steps - 1) as f64
                    })
                    .collect();
                let v = objective(&point);
                if v > best {
                    best = v;
                    best_point = point;
                }
            }
            center = best_point;
            half *= 0.5;
        }
        if center.iter().all(|c| c.abs() < 0.9 * radius) || radius > 1e8 {
            return best;
        }
        radius *= 4.0;
    }
}

fn rate_consistency(_: &Harness, seed: u64) -> Result<(bool, String)> {
    let one = TorusFunction::constant(1.0);
    let two = TorusFunction::constant(2.0);
    let functional = rate_functional(&two, &one, -1.2)?.value.to_f64();
    let scalar = rate_scalar(2.0, &one, -1.2, 0)?.value.to_f64();
    let contraction = (functional - 2.5).abs() < 1e-9 && (functional - scalar).abs() < 1e-9;

    let variational = rate_functional_variational(&two, &one, -1.2, 8)?;
    let f = spectral_density(&MACoefficients::ma1(0.5), 1.0)?;
    let eta = f.mul(&f)?.scaled(2.0);
    let closed = rate_functional(&eta, &f, 0.0)?.value.to_f64();
    let var_gap = (variational - functional)
        .abs()
        .max((rate_functional_variational(&eta, &f, 0.0, 8)? - closed).abs());

    let mut rng = stream(seed, 8);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = rng.random_range(1..=3);
        let rank = rng.random_range(1..=d);
        let b = DMatrix::from_fn(d, rank, |_, _| rng.random_range(-1.0..1.0));
        let s = &b * b.transpose();
        let w = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let z = &s * w;
        let closed = rate_quadratic(z.as_slice(), &CovarianceMatrix::new(s.clone())?)?.value.to_f64();
        worst = worst.max((closed - legendre_grid_sup(z.as_slice(), &s)).abs());
    }
    Ok((
        contraction && var_gap < 1e-6 && worst < 1e-6,
        format!(
            "functional {functional} vs scalar {scalar}; degree-8 variational gap {var_gap:.2e}; Legendre gap over 50 instances {worst:.2e}"
        ),
    ))
}

fn bias(_: &Harness, _: u64) -> Result<(bool, String)> {
    let f = spectral_density(&MACoefficients::ma1(0.5), 1.0)?;
    let mut pass = true;
    let mut worst = 0.0f64;
    for n in [128usize, 256, 512, 1024, 2048] {
        let b = bias_bound(&f, &f, n, None)?;
        worst = worst.max((b.exact_bias * n as f64 + 0.5).abs());
        pass &= b.exact_bias.abs() <= b.bound;
    }
    Ok((pass && worst <= 1e-12, format!("max |n * bias + 0.5| = {worst:.1e}, bound holds: {pass}")))
}

fn tail_trend(harness: &Harness, seed: u64) -> Result<(bool, String)> {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new("iid", "gaussian", vec![1 << 8, 1 << 10, 1 << 12, 1 << 14], 100_000);
    cfg.threshold = 1.0;
    cfg.b_exponent = 0.1;
    cfg.master_seed = seed;
    let report = montecarlo::mdp_tail_trend(&cfg.resolve()?, harness)?;
    let (fast, time) = within(Duration::from_secs(600), start);
    let errs: Vec<String> = report.rows.iter().map(|r| format!("{:.4}", r.abs_error)).collect();
    Ok((report.pass && fast, format!("|L(n) + 0.25| along the ladder: {}; {time}", errs.join(" > "))))
}

fn parseval_dual_routes(_: &Harness, seed: u64) -> Result<(bool, String)> {
    let mut rng = stream(seed, 11);
    let law = InnovationLaw::gaussian(1.0)?;
    let mut parseval = 0.0f64;
    let mut routes = 0.0f64;
    for _ in 0..100 {
        let coeffs = random_coeffs(&mut rng);
        let h = random_cosine(&mut rng, 6);
        let n = rng.random_range(16..=512);
        let raw = simulate_path(&coeffs, &law, n, 0, &mut rng)?;
        let energy = raw.observed().iter().map(|x| x * x).sum::<f64>() / n as f64;
        let scaled: Vec<f64> = raw.observed().iter().map(|x| x / energy.sqrt()).collect();
        let path = specmdp_core::SamplePath::new(scaled, n)?;
        let g = (n + h.degree()? + 1).next_power_of_two();
        let per = periodogram(&path, g)?;
        let grid = per.grid().expect("periodogram grid");
        let mean = grid.iter().sum::<f64>() / g as f64;
        parseval = parseval.max((mean - 1.0).abs());
        let hg = h.sample_grid(g)?;
        let quadrature = grid.iter().zip(&hg).map(|(a, b)| a * b).sum::<f64>() / g as f64;
        let quadratic = periodogram_functional_toeplitz(path.observed(), &h)?;
        let mass: f64 = h.fourier()?.iter().map(|c| c.abs()).sum();
        routes = routes.max((quadrature - quadratic).abs() / quadratic.abs().max(mass));
    }
    Ok((
        parseval <= 1e-10 && routes <= 1e-9,
        format!("Parseval error {parseval:.1e} (limit 1e-10), route disagreement {routes:.1e} (limit 1e-9)"),
    ))
}
