//! Seeded parallel Monte Carlo experiments for the limit theorems.
//!
//! Every replicate draws from its own ChaCha stream, indexed by
//! `(rung << 40) | replicate` under the master seed. Replicates are grouped
//! in fixed blocks; each block is reduced sequentially and the blocks are
//! merged in index order, so reports are bit-identical for any worker count.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use specmdp_core::innovations::{stream, RandomStream};
use specmdp_core::process::{expected_periodogram_functional, periodogram_functional_toeplitz, PathSimulator};
use specmdp_core::rates::{clt_variance, rate_scalar, sigma_matrix};
use specmdp_core::spectral::spectral_density;
use specmdp_core::toeplitz::{gaussian_quadratic_logmgf, psd_sqrt, quadratic_mgf_bound, ExtendedReal};
use specmdp_core::{CovarianceMatrix, Family, Functional, InnovationLaw, MACoefficients, ToeplitzOperator, TorusFunction};

use crate::config::{Experiment, TolerancePolicy};
use crate::io::{csv_bytes, fmt};
use crate::stats::RunningStats;
use crate::{Error, Result};

const BLOCK: usize = 1024;
const RUNG_SHIFT: u32 = 40;
/// Upper limit on `n` for MGF estimation.
pub const MGF_MAX_N: usize = 64;
/// Largest relative MC error of an MGF mean before the point is rejected.
pub const MGF_MAX_RELATIVE_ERROR: f64 = 0.2;
/// Smallest expected number of tail hits for a feasible tail experiment.
pub const MIN_TAIL_COUNT: f64 = 10.0;

pub struct Harness {
    workers: usize,
    pool: rayon::ThreadPool,
}

impl Harness {
    pub fn new(workers: usize) -> Result<Self> {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::validation(format!("cannot start {workers} workers: {e}")))?;
        Ok(Harness { workers, pool })
    }

    pub fn default_workers() -> usize {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `replicates` draws of a `width`-vector and returns per-component statistics.
    ///
    /// `init` builds per-worker scratch state; it must not influence results.
    pub fn accumulate<S, I, F>(&self, seed: u64, rung: u64, replicates: usize, width: usize, init: I, sample: F) -> Vec<RunningStats>
    where
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, &mut RandomStream, &mut [f64]) + Sync + Send,
    {
        let blocks = replicates.div_ceil(BLOCK);
        let partial: Vec<Vec<RunningStats>> = self.pool.install(|| {
            (0..blocks)
                .into_par_iter()
                .map_init(
                    || (init(), vec![0.0; width]),
                    |(state, buf), b| {
                        let mut stats = vec![RunningStats::new(); width];
                        for r in b * BLOCK..((b + 1) * BLOCK).min(replicates) {
                            let mut rng = stream(seed, (rung << RUNG_SHIFT) | r as u64);
                            sample(state, &mut rng, buf);
                            for (s, v) in stats.iter_mut().zip(buf.iter()) {
                                s.push(*v);
                            }
                        }
                        stats
                    },
                )
                .collect()
        });
        let mut total = vec![RunningStats::new(); width];
        for block in &partial {
            for (t, s) in total.iter_mut().zip(block) {
                t.merge(s);
            }
        }
        total
    }
}

/// How a report decides pass/fail from its recorded rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    /// Rows at the largest `n` within `max(std_errors * SE, relative * |target|)`.
    Band { std_errors: f64, relative: f64 },
    /// Every row has `target >= estimate - std_errors * SE`.
    Dominated { std_errors: f64 },
    /// `abs_error` nonincreasing along the ladder, allowing `max_inversions`
    /// increases each within one combined standard error.
    Trend { max_inversions: usize },
}

impl From<TolerancePolicy> for Rule {
    fn from(p: TolerancePolicy) -> Self {
        Rule::Band { std_errors: p.std_errors, relative: p.relative }
    }
}

impl Rule {
    pub fn row_pass(&self, estimate: f64, std_error: f64, target: f64) -> bool {
        match *self {
            Rule::Band { std_errors, relative } => {
                (estimate - target).abs() <= (std_errors * std_error).max(relative * target.abs())
            }
            Rule::Dominated { std_errors } => target >= estimate - std_errors * std_error,
            Rule::Trend { .. } => estimate.is_finite(),
        }
    }

    /// Report verdict from the rows alone.
    pub fn report_pass(&self, rows: &[ReportRow]) -> bool {
        if rows.is_empty() {
            return false;
        }
        match *self {
            Rule::Band { .. } => {
                let top = rows.iter().map(|r| r.n).max().unwrap_or(0);
                rows.iter().filter(|r| r.n == top).all(|r| r.pass)
            }
            Rule::Dominated { .. } => rows.iter().all(|r| r.pass),
            Rule::Trend { max_inversions } => trend_inversions(rows).is_some_and(|k| k <= max_inversions),
        }
    }
}

/// Number of increases of `abs_error` along the rows, or `None` when an
/// increase exceeds one combined standard error or a row is not finite.
pub fn trend_inversions(rows: &[ReportRow]) -> Option<usize> {
    if rows.iter().any(|r| !r.pass) {
        return None;
    }
    let mut inversions = 0;
    for w in rows.windows(2) {
        let rise = w[1].abs_error - w[0].abs_error;
        if rise > 0.0 {
            inversions += 1;
            if rise > w[0].std_error.hypot(w[1].std_error) {
                return None;
            }
        }
    }
    Some(inversions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub entry: String,
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub abs_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rule: Rule,
    pub rows: Vec<ReportRow>,
    pub pass: bool,
    pub config_digest: String,
    pub replicates: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

impl ExperimentReport {
    fn new(experiment: &str, rule: Rule, exp: &Experiment) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            rule,
            rows: Vec::new(),
            pass: false,
            config_digest: exp.digest.clone(),
            replicates: exp.replicates,
            diagnostics: BTreeMap::new(),
        }
    }

    fn push(&mut self, n: usize, entry: impl Into<String>, estimate: f64, std_error: f64, target: f64) {
        let pass = self.rule.row_pass(estimate, std_error, target);
        self.rows.push(ReportRow {
            n,
            entry: entry.into(),
            estimate,
            std_error,
            target,
            abs_error: (estimate - target).abs(),
            pass,
        });
    }

    fn finish(mut self) -> Self {
        self.pass = self.rule.report_pass(&self.rows);
        self
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.entry.clone(),
                    fmt(r.estimate),
                    fmt(r.std_error),
                    fmt(r.target),
                    fmt(r.abs_error),
                    r.pass.to_string(),
                ]
            })
            .collect();
        csv_bytes(&["n", "entry", "estimate", "std_error", "target", "abs_error", "pass"], &rows)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec_pretty(self)?)
    }
}

fn lag_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..=m).flat_map(|k| (k..=m).map(move |l| (k, l))).collect()
}

fn lagged_sum(x: &[f64], n: usize, lag: usize) -> f64 {
    x[..n].iter().zip(&x[lag..lag + n]).map(|(a, b)| a * b).sum()
}

fn simulator(exp: &Experiment, n: usize, extension: usize) -> impl Fn() -> PathSimulator + Sync + Send {
    let coeffs = exp.coeffs.clone();
    let law = exp.law.clone();
    move || PathSimulator::new(coeffs.clone(), law.clone(), n, extension).expect("validated n")
}

/// Empirical covariance of `n^{-1/2} sum_k (X_k X_{k+l} - r_l(f))`, `l = 0..=m`,
/// against the `Sigma` matrix. Centering uses the exact `r_l(f)`.
pub fn variance_convergence(exp: &Experiment, harness: &Harness) -> Result<ExperimentReport> {
    let m = exp.lags;
    let f = spectral_density(&exp.coeffs, exp.law.variance())?;
    let sigma = sigma_matrix(&f, exp.law.kappa4(), m)?;
    let means: Vec<f64> = (0..=m).map(|l| f.coefficient(l as i64)).collect();
    let pairs = lag_pairs(m);
    let mut report = ExperimentReport::new("variance_convergence", exp.policy.into(), exp);
    for (rung, &n) in exp.n_ladder.iter().enumerate() {
        let scale = 1.0 / (n as f64).sqrt();
        let stats = harness.accumulate(exp.master_seed, rung as u64, exp.replicates, pairs.len(), simulator(exp, n, m), |sim, rng, out| {
            let x = sim.next(rng);
            let v: Vec<f64> = (0..=m).map(|l| (lagged_sum(x, n, l) - n as f64 * means[l]) * scale).collect();
            for (o, &(k, l)) in out.iter_mut().zip(&pairs) {
                *o = v[k] * v[l];
            }
        });
        for (s, &(k, l)) in stats.iter().zip(&pairs) {
            report.push(n, format!("sigma[{k}][{l}]"), s.mean(), s.std_error(), sigma.get(k, l));
        }
    }
    Ok(report.finish())
}

/// `Var(sqrt(n) (I_n(h) - E I_n(h)))` against the CLT variance, with the
/// standardized fourth moment of the replicates as a normality diagnostic.
pub fn clt_check(exp: &Experiment, harness: &Harness) -> Result<ExperimentReport> {
    let h = exp.h.clone().ok_or_else(|| Error::validation("clt needs a functional h"))?;
    let f = spectral_density(&exp.coeffs, exp.law.variance())?;
    let target = clt_variance(&f, &h, exp.law.kappa4())?;
    let mut report = ExperimentReport::new("clt_check", exp.policy.into(), exp);
    for (rung, &n) in exp.n_ladder.iter().enumerate() {
        let mean = expected_periodogram_functional(&f, &h, n)?;
        let root_n = (n as f64).sqrt();
        let stats = harness.accumulate(exp.master_seed, rung as u64, exp.replicates, 2, simulator(exp, n, 0), |sim, rng, out| {
            let x = sim.next(rng);
            let value = periodogram_functional_toeplitz(&x[..n], &h).expect("h has Fourier coefficients");
            let y2 = (root_n * (value - mean)).powi(2);
            out[0] = y2;
            out[1] = y2 * y2;
        });
        report.push(n, "variance", stats[0].mean(), stats[0].std_error(), target);
        if stats[0].mean() > 0.0 {
            report
                .diagnostics
                .insert(format!("standardized_fourth_moment[n={n}]"), stats[1].mean() / stats[0].mean().powi(2));
        }
    }
    Ok(report.finish())
}

/// `P(Z >= t)` for a standard normal `Z`.
pub fn normal_tail(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// Finite-n diagnostic `L(n) = b_n^{-2} log P(Q_n >= x)` with
/// `Q_n = (b_n sqrt(n))^{-1} sum_k (X_k X_{k+l} - r_l(f))` and `b_n = n^{b_exponent}`,
/// compared with `-I^l(x)`.
pub fn mdp_tail_trend(exp: &Experiment, harness: &Harness) -> Result<ExperimentReport> {
    let lag = exp.lags;
    let x = exp.threshold;
    let f = spectral_density(&exp.coeffs, exp.law.variance())?;
    let rate = rate_scalar(x, &f, exp.law.kappa4(), lag)?;
    let target = match rate.value {
        ExtendedReal::Finite(v) => -v,
        ExtendedReal::PosInfinity => {
            return Err(Error::Infeasible(format!("rate at x = {x} is infinite ({})", rate.branch.name())))
        }
    };
    let d = sigma_matrix(&f, exp.law.kappa4(), lag)?.get(lag, lag);
    for &n in &exp.n_ladder {
        let b = (n as f64).powf(exp.b_exponent);
        let proxy = normal_tail(b * x / d.sqrt());
        if proxy * (exp.replicates as f64) < MIN_TAIL_COUNT {
            return Err(Error::Infeasible(format!(
                "expected tail count {:.3} < {MIN_TAIL_COUNT} at n = {n}",
                proxy * exp.replicates as f64
            )));
        }
    }
    let mean = f.coefficient(lag as i64);
    let mut report = ExperimentReport::new("mdp_tail_trend", Rule::Trend { max_inversions: 1 }, exp);
    for (rung, &n) in exp.n_ladder.iter().enumerate() {
        let b = (n as f64).powf(exp.b_exponent);
        let scale = 1.0 / (b * (n as f64).sqrt());
        let stats = harness.accumulate(exp.master_seed, rung as u64, exp.replicates, 1, simulator(exp, n, lag), |sim, rng, out| {
            let path = sim.next(rng);
            let q = (lagged_sum(path, n, lag) - n as f64 * mean) * scale;
            out[0] = if q >= x { 1.0 } else { 0.0 };
        });
        let p = stats[0].mean();
        let b2 = b * b;
        let (estimate, se) = if p > 0.0 {
            (p.ln() / b2, ((1.0 - p) / (p * exp.replicates as f64)).sqrt() / b2)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        report.push(n, "log_tail_rate", estimate, se, target);
        report.diagnostics.insert(format!("tail_frequency[n={n}]"), p);
    }
    let mut report = report.finish();
    if let Some(k) = trend_inversions(&report.rows) {
        report.diagnostics.insert("inversions".into(), k as f64);
    }
    Ok(report)
}

/// `log E exp(lambda <X, T_n(h) X>)` by Monte Carlo against the sub-Gaussian
/// quadratic-form bound, for each `n` in the ladder and each `lambda`.
pub fn mgf_domination(exp: &Experiment, harness: &Harness) -> Result<ExperimentReport> {
    if exp.lambdas.is_empty() {
        return Err(Error::validation("mgf needs a nonempty lambda grid"));
    }
    if exp.lambdas.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::validation("lambda values must be nonnegative"));
    }
    let h = exp.h.clone().unwrap_or_else(|| TorusFunction::constant(1.0));
    let unit = spectral_density(&exp.coeffs, 1.0)?;
    let k = exp.law.subgaussian_constant();
    let mut report = ExperimentReport::new("mgf_domination", Rule::Dominated { std_errors: 3.0 }, exp);
    report.diagnostics.insert("subgaussian_constant".into(), k);
    for (rung, &n) in exp.n_ladder.iter().enumerate() {
        if n > MGF_MAX_N {
            return Err(Error::validation(format!("mgf needs n <= {MGF_MAX_N}, got {n}")));
        }
        let b = ToeplitzOperator::build(&h, n)?;
        let bd = b.dense();
        psd_sqrt(&bd)?;
        let lambdas = exp.lambdas.clone();
        let stats = harness.accumulate(exp.master_seed, rung as u64, exp.replicates, lambdas.len(), simulator(exp, n, 0), |sim, rng, out| {
            let x = nalgebra::DVector::from_column_slice(&sim.next(rng)[..n]);
            let q = x.dot(&(&bd * &x));
            for (o, l) in out.iter_mut().zip(&lambdas) {
                *o = (l * q).exp();
            }
        });
        let cov = ToeplitzOperator::build(&unit, n)?.dense() * exp.law.variance();
        for (s, &lambda) in stats.iter().zip(&exp.lambdas) {
            let bound = quadratic_mgf_bound(&b, &unit, lambda, k)?.to_f64();
            let (estimate, se) = if lambda == 0.0 { (0.0, 0.0) } else { (s.mean().ln(), s.std_error() / s.mean()) };
            if se > MGF_MAX_RELATIVE_ERROR {
                return Err(Error::Infeasible(format!(
                    "relative MC error {se:.3} at lambda = {lambda}, n = {n}: too close to the boundary"
                )));
            }
            report.push(n, format!("lambda={lambda}"), estimate, se, bound);
            if exp.law.family() == Family::Gaussian {
                let exact = gaussian_quadratic_logmgf(&bd, &cov, lambda)?.to_f64();
                report.diagnostics.insert(format!("gaussian_exact[n={n},lambda={lambda}]"), exact);
            }
        }
    }
    Ok(report.finish())
}

/// Estimate of the limiting covariance of `n^{-1/2} sum_k (F(X_k..X_{k+l}) - E F)`.
#[derive(Debug, Clone)]
pub struct SigmaFEstimate {
    pub matrix: CovarianceMatrix,
    pub std_errors: DMatrix<f64>,
    pub report: ExperimentReport,
}

/// Covariance target for catalog functionals: `Sigma` for product lags and
/// `x^2`, `f(0)` for the identity.
pub fn sigma_f_target(kind: Functional, coeffs: &MACoefficients, law: &InnovationLaw) -> Result<DMatrix<f64>> {
    let f = spectral_density(coeffs, law.variance())?;
    Ok(match kind {
        Functional::Identity => DMatrix::from_element(1, 1, f.value_at(0.0)?.re),
        Functional::QuadraticSmooth => sigma_matrix(&f, law.kappa4(), 0)?.entries().clone(),
        Functional::ProductLags { max_lag } => sigma_matrix(&f, law.kappa4(), max_lag)?.entries().clone(),
    })
}

pub fn sigma_f_estimate(exp: &Experiment, harness: &Harness) -> Result<SigmaFEstimate> {
    let functional = exp.functional.clone().ok_or_else(|| Error::validation("sigma_f needs a functional"))?;
    let n = exp.largest_n();
    let rung = exp.n_ladder.iter().position(|&v| v == n).unwrap_or(0);
    let f = spectral_density(&exp.coeffs, exp.law.variance())?;
    let expectation = functional.expectation(&f);
    let target = sigma_f_target(functional.kind(), &exp.coeffs, &exp.law)?;
    let dim = functional.output_dim();
    let arity = functional.arity();
    let pairs = lag_pairs(dim - 1);
    let scale = 1.0 / (n as f64).sqrt();
    let stats = harness.accumulate(exp.master_seed, rung as u64, exp.replicates, pairs.len(), simulator(exp, n, arity - 1), |sim, rng, out| {
        let x = sim.next(rng);
        let mut sums = vec![0.0; dim];
        let mut value = vec![0.0; dim];
        for k in 0..n {
            functional.evaluate(&x[k..k + arity], &mut value).expect("arity checked");
            for (s, v) in sums.iter_mut().zip(&value) {
                *s += v;
            }
        }
        let v: Vec<f64> = sums.iter().zip(&expectation).map(|(s, e)| (s - n as f64 * e) * scale).collect();
        for (o, &(a, b)) in out.iter_mut().zip(&pairs) {
            *o = v[a] * v[b];
        }
    });
    let rule: Rule = exp.policy.into();
    let mut report = ExperimentReport::new("sigma_f_estimate", rule, exp);
    let mut est = DMatrix::zeros(dim, dim);
    let mut se = DMatrix::zeros(dim, dim);
    for (s, &(a, b)) in stats.iter().zip(&pairs) {
        est[(a, b)] = s.mean();
        est[(b, a)] = s.mean();
        se[(a, b)] = s.std_error();
        se[(b, a)] = s.std_error();
        report.push(n, format!("sigma_f[{a}][{b}]"), s.mean(), s.std_error(), target[(a, b)]);
    }
    Ok(SigmaFEstimate { matrix: CovarianceMatrix::new(est)?, std_errors: se, report: report.finish() })
}

/// Monte Carlo `log E exp(z <Y, A Y>)` for `Y ~ N(0, R)`; `(estimate, std_error)` per `z`.
pub fn gaussian_quadratic_mc(
    a: &DMatrix<f64>,
    r: &DMatrix<f64>,
    zs: &[f64],
    samples: usize,
    seed: u64,
    harness: &Harness,
) -> Result<Vec<(f64, f64)>> {
    let root = psd_sqrt(r)?;
    let n = r.nrows();
    if a.shape() != r.shape() {
        return Err(Error::validation("A and R must have the same order"));
    }
    let normal = InnovationLaw::gaussian(1.0)?;
    let stats = harness.accumulate(seed, 0, samples, zs.len(), || vec![0.0; n], |g, rng, out| {
        normal.sample_into(g, rng);
        let y = &root * nalgebra::DVector::from_column_slice(g);
        let q = y.dot(&(a * &y));
        for (o, z) in out.iter_mut().zip(zs) {
            *o = (z * q).exp();
        }
    });
    Ok(stats.iter().map(|s| (s.mean().ln(), s.std_error() / s.mean())).collect())
}

/// `(a, b, k)` of `Cov(X_0 X_a, X_k X_{k+b})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagTriple {
    pub a: usize,
    pub b: usize,
    pub k: usize,
}

/// Monte Carlo `Cov(X_0 X_a, X_k X_{k+b})` with exact centering; `(estimate, std_error)`.
pub fn bartlett_mc(
    coeffs: &MACoefficients,
    law: &InnovationLaw,
    triples: &[LagTriple],
    samples: usize,
    seed: u64,
    harness: &Harness,
) -> Result<Vec<(f64, f64)>> {
    let f = spectral_density(coeffs, law.variance())?;
    let len = triples.iter().map(|t| t.a.max(t.k + t.b)).max().unwrap_or(0) + 1;
    let (c, l) = (coeffs.clone(), law.clone());
    let init = move || PathSimulator::new(c.clone(), l.clone(), len, 0).expect("positive length");
    let stats = harness.accumulate(seed, 0, samples, triples.len(), init, |sim, rng, out| {
        let x = sim.next(rng);
        for (o, t) in out.iter_mut().zip(triples) {
            let left = x[0] * x[t.a] - f.coefficient(t.a as i64);
            let right = x[t.k] * x[t.k + t.b] - f.coefficient(t.b as i64);
            *o = left * right;
        }
    });
    Ok(stats.iter().map(|s| (s.mean(), s.std_error())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::io::FunctionSpec;

    fn run(cfg: &ExperimentConfig, workers: usize, f: fn(&Experiment, &Harness) -> Result<ExperimentReport>) -> ExperimentReport {
        f(&cfg.resolve().unwrap(), &Harness::new(workers).unwrap()).unwrap()
    }

    #[test]
    fn reports_do_not_depend_on_workers() {
        let mut cfg = ExperimentConfig::new("ma1:0.5", "uniform", vec![64, 128], 3000);
        cfg.lags = 1;
        let a = run(&cfg, 1, variance_convergence);
        let b = run(&cfg, 3, variance_convergence);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        cfg.master_seed = 9;
        let c = run(&cfg, 2, variance_convergence);
        assert_ne!(a.rows[0].estimate, c.rows[0].estimate);
    }

    #[test]
    fn variance_examples() {
        let cfg = ExperimentConfig::new("iid", "uniform", vec![512], 4000);
        let r = run(&cfg, 2, variance_convergence);
        assert_eq!(r.rows[0].target, 0.8);
        assert!(r.pass, "{:?}", r.rows);
        let cfg = ExperimentConfig::new("iid", "rademacher", vec![64], 200);
        let r = run(&cfg, 1, variance_convergence);
        assert_eq!(r.rows[0].estimate, 0.0);
        assert_eq!(r.rows[0].std_error, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn clt_targets() {
        let mut cfg = ExperimentConfig::new("ma1:0.5", "gaussian", vec![256], 4000);
        cfg.h = Some(FunctionSpec::Shortcut("1".into()));
        let r = run(&cfg, 2, clt_check);
        assert!((r.rows[0].target - 4.125).abs() < 1e-12);
        assert!(r.pass, "{:?}", r.rows);
        let k = r.diagnostics["standardized_fourth_moment[n=256]"];
        assert!((k - 3.0).abs() < 0.5, "{k}");
        cfg.h = None;
        assert!(clt_check(&cfg.resolve().unwrap(), &Harness::new(1).unwrap()).is_err());
    }

    #[test]
    fn tail_feasibility_and_median() {
        let mut cfg = ExperimentConfig::new("iid", "gaussian", vec![256, 1024], 20);
        cfg.threshold = 3.0;
        let e = cfg.resolve().unwrap();
        assert!(matches!(mdp_tail_trend(&e, &Harness::new(1).unwrap()), Err(Error::Infeasible(_))));
        cfg.threshold = 0.0;
        cfg.replicates = 4000;
        let r = run(&cfg, 1, mdp_tail_trend);
        for row in &r.rows {
            let b2 = (row.n as f64).powf(0.2);
            assert!((row.estimate - 0.5f64.ln() / b2).abs() < 0.1, "{row:?}");
        }
    }

    #[test]
    fn mgf_examples() {
        let mut cfg = ExperimentConfig::new("iid", "rademacher", vec![8], 2000);
        cfg.lambdas = vec![0.0, 0.05];
        let r = run(&cfg, 1, mgf_domination);
        assert_eq!(r.rows[0].estimate, 0.0);
        assert_eq!(r.rows[0].target, 0.0);
        // sum of squares is constantly 8
        assert!((r.rows[1].estimate - 0.4).abs() < 1e-12);
        assert!((r.rows[1].target + 4.0 * 0.9f64.ln()).abs() < 1e-12);
        assert!(r.pass);
        cfg.law = crate::io::LawSpec::Family("gaussian".into());
        let r = run(&cfg, 1, mgf_domination);
        assert!(r.pass);
        let exact = r.diagnostics["gaussian_exact[n=8,lambda=0.05]"];
        assert!(exact <= r.rows[1].target + 1e-12);
        cfg.n_ladder = vec![65];
        assert!(mgf_domination(&cfg.resolve().unwrap(), &Harness::new(1).unwrap()).is_err());
    }

    #[test]
    fn sigma_f_catalog() {
        let mut cfg = ExperimentConfig::new("ma1:0.5", "gaussian", vec![256], 4000);
        cfg.functional = Some("identity".into());
        let e = sigma_f_estimate(&cfg.resolve().unwrap(), &Harness::new(2).unwrap()).unwrap();
        assert!((e.report.rows[0].target - 2.25).abs() < 1e-12);
        assert!(e.report.pass, "{:?}", e.report.rows);
        let mut cfg = ExperimentConfig::new("iid", "gaussian", vec![256], 4000);
        cfg.functional = Some("product_lags".into());
        cfg.lags = 1;
        let e = sigma_f_estimate(&cfg.resolve().unwrap(), &Harness::new(2).unwrap()).unwrap();
        assert_eq!(e.report.rows.iter().map(|r| r.target).collect::<Vec<_>>(), vec![2.0, 0.0, 1.0]);
        assert!(e.report.rows.iter().all(|r| (r.estimate - r.target).abs() <= 5.0 * r.std_error));
    }

    #[test]
    fn trend_rule() {
        let row = |n, abs_error, std_error| ReportRow {
            n,
            entry: String::new(),
            estimate: 0.0,
            std_error,
            target: 0.0,
            abs_error,
            pass: true,
        };
        let rule = Rule::Trend { max_inversions: 1 };
        assert!(rule.report_pass(&[row(1, 0.5, 0.01), row(2, 0.4, 0.01), row(3, 0.3, 0.01)]));
        assert!(rule.report_pass(&[row(1, 0.5, 0.01), row(2, 0.505, 0.01), row(3, 0.3, 0.01)]));
        assert!(!rule.report_pass(&[row(1, 0.5, 0.01), row(2, 0.6, 0.01), row(3, 0.3, 0.01)]));
        assert!(!rule.report_pass(&[row(1, 0.5, 0.01), row(2, 0.505, 0.01), row(3, 0.3, 0.01), row(4, 0.305, 0.01)]));
    }
}
