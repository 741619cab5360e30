//! Moving-average paths and their empirical statistics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::fft;
use crate::innovations::InnovationLaw;
use crate::spectral::{MACoefficients, TorusFunction};
use crate::{Error, Result};

/// `X_1, ..., X_{n + lag_extension}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    values: Vec<f64>,
    n: usize,
    lag_extension: usize,
}

impl SamplePath {
    pub fn new(values: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 || values.len() < n {
            return Err(Error::invalid(format!(
                "path of length {} cannot carry n = {n}",
                values.len()
            )));
        }
        let lag_extension = values.len() - n;
        Ok(SamplePath { values, n, lag_extension })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lag_extension(&self) -> usize {
        self.lag_extension
    }

    /// All stored values, including the extension.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `X_1..X_n`.
    pub fn observed(&self) -> &[f64] {
        &self.values[..self.n]
    }
}

/// Number of innovations needed for a path of `n + lag_extension` values.
pub fn innovation_window(coeffs: &MACoefficients, n: usize, lag_extension: usize) -> usize {
    n + lag_extension + coeffs.width()
}

/// `X_k = sum_j a_j xi_{k+j}` where `innovations[i]` holds `xi_{1 + support_lo + i}`.
pub fn filter_innovations(
    coeffs: &MACoefficients,
    innovations: &[f64],
    n: usize,
    lag_extension: usize,
) -> Result<SamplePath> {
    let len = n + lag_extension;
    let need = innovation_window(coeffs, n, lag_extension);
    if innovations.len() != need {
        return Err(Error::DimensionMismatch { expected: need, got: innovations.len() });
    }
    let mut values = vec![0.0; len];
    filter_into(coeffs.values(), innovations, &mut values);
    SamplePath::new(values, n)
}

fn filter_into(a: &[f64], xi: &[f64], out: &mut [f64]) {
    if a.len() == 1 {
        let c = a[0];
        for (o, x) in out.iter_mut().zip(xi) {
            *o = c * x;
        }
        return;
    }
    for (k, o) in out.iter_mut().enumerate() {
        *o = a.iter().zip(&xi[k..]).map(|(c, x)| c * x).sum();
    }
}

/// Simulates `X_1..X_{n + lag_extension}` of the moving average driven by `law`.
pub fn simulate_path<R: Rng + ?Sized>(
    coeffs: &MACoefficients,
    law: &InnovationLaw,
    n: usize,
    lag_extension: usize,
    rng: &mut R,
) -> Result<SamplePath> {
    if n == 0 {
        return Err(Error::invalid("path length n must be at least 1"));
    }
    let xi = law.sample(innovation_window(coeffs, n, lag_extension), rng);
    filter_innovations(coeffs, &xi, n, lag_extension)
}

/// Reusable buffers for simulating many paths of the same shape.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    coeffs: MACoefficients,
    law: InnovationLaw,
    n: usize,
    lag_extension: usize,
    xi: Vec<f64>,
    values: Vec<f64>,
}

impl PathSimulator {
    pub fn new(coeffs: MACoefficients, law: InnovationLaw, n: usize, lag_extension: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("path length n must be at least 1"));
        }
        let xi = vec![0.0; innovation_window(&coeffs, n, lag_extension)];
        let values = vec![0.0; n + lag_extension];
        Ok(PathSimulator { coeffs, law, n, lag_extension, xi, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lag_extension(&self) -> usize {
        self.lag_extension
    }

    /// Draws a fresh path and returns `X_1..X_{n + lag_extension}`.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        self.law.sample_into(&mut self.xi, rng);
        filter_into(self.coeffs.values(), &self.xi, &mut self.values);
        &self.values
    }
}

/// Periodogram `I_n(theta) = (1/n) |sum_{k=1}^n X_k exp(i k theta)|^2`.
///
/// The result carries both the grid values and the exact Fourier
/// coefficients `r_j(I_n) = (1/n) sum_k X_k X_{k+|j|}` (sums inside `1..n`).
pub fn periodogram(path: &SamplePath, grid_size: usize) -> Result<TorusFunction> {
    let n = path.n();
    if grid_size < n {
        return Err(Error::GridTooCoarse { grid_size, required: n });
    }
    let x = path.observed();
    let sums = fft::torus_sum(1, x, 1, grid_size);
    let inv_n = 1.0 / n as f64;
    let grid: Vec<f64> = sums.iter().map(|z| z.norm_sqr() * inv_n).collect();
    let acov = fft::autocorrelation(x);
    let mut sym = vec![0.0; 2 * n - 1];
    for (d, c) in acov.iter().enumerate() {
        sym[n - 1 + d] = c * inv_n;
        sym[n - 1 - d] = c * inv_n;
    }
    let mut f = TorusFunction::from_fourier(-(n as i64 - 1), &sym);
    f.set_grid(grid);
    Ok(f)
}

/// `(1/n) <X, T_n(h) X> = sum_d r_d(h) (1/n) sum_{k, k+d in 1..n} X_k X_{k+d}`.
pub fn periodogram_functional_toeplitz(observed: &[f64], h: &TorusFunction) -> Result<f64> {
    let coeffs = h.fourier()?;
    let n = observed.len();
    let deg = (coeffs.len() - 1) / 2;
    let mut total = 0.0;
    for d in 0..=deg.min(n.saturating_sub(1)) {
        let r_pos = h.coefficient(d as i64);
        let r_neg = h.coefficient(-(d as i64));
        let weight = if d == 0 { r_pos } else { r_pos + r_neg };
        if weight == 0.0 {
            continue;
        }
        let s: f64 = observed[..n - d].iter().zip(&observed[d..]).map(|(a, b)| a * b).sum();
        total += weight * s;
    }
    Ok(total / n as f64)
}

/// `(1/2pi) integral h I_n d theta`, evaluated by grid quadrature and by the
/// Toeplitz quadratic form; the two must agree to `1e-9` relative.
pub fn periodogram_functional(path: &SamplePath, h: &TorusFunction) -> Result<f64> {
    h.require_even()?;
    let n = path.n();
    let deg = h.degree()?;
    let grid_size = (n + deg + 1).next_power_of_two().max(2);
    let per = periodogram(path, grid_size)?;
    let hg = h.sample_grid(grid_size)?;
    let quadrature = per
        .grid()
        .ok_or(Error::MissingFourier)?
        .iter()
        .zip(&hg)
        .map(|(i, w)| i * w)
        .sum::<f64>()
        / grid_size as f64;
    let quadratic = periodogram_functional_toeplitz(path.observed(), h)?;
    let energy = path.observed().iter().map(|x| x * x).sum::<f64>() / n as f64;
    let h_mass: f64 = h.fourier()?.iter().map(|c| libm::fabs(*c)).sum();
    let scale = (energy * h_mass).max(libm::fabs(quadratic)).max(1e-300);
    if libm::fabs(quadrature - quadratic) > 1e-9 * scale {
        return Err(Error::InternalConsistency { first: quadrature, second: quadratic });
    }
    Ok(quadratic)
}

/// `sum_{k=1}^n X_k X_{k+l}` for `l = 0..=m`.
pub fn autocorrelation_sums(path: &SamplePath, m: usize) -> Result<Vec<f64>> {
    if path.lag_extension() < m {
        return Err(Error::InsufficientExtension { required: m, available: path.lag_extension() });
    }
    Ok(lagged_sums(path.values(), path.n(), m))
}

pub(crate) fn lagged_sums(values: &[f64], n: usize, m: usize) -> Vec<f64> {
    (0..=m)
        .map(|l| values[..n].iter().zip(&values[l..l + n]).map(|(a, b)| a * b).sum())
        .collect()
}

/// `E X_k X_{k+l} = r_l(f)`.
pub fn expected_autocovariance(f: &TorusFunction, lag: i64) -> f64 {
    f.coefficient(lag)
}

/// `E (1/2pi) integral h I_n = sum_{|k| <= n-1} (1 - |k|/n) r_k(f) r_k(h)`.
pub fn expected_periodogram_functional(f: &TorusFunction, h: &TorusFunction, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let d = f.degree()?.max(h.degree()?).min(n - 1) as i64;
    Ok((-d..=d)
        .map(|k| (1.0 - k.abs() as f64 / n as f64) * f.coefficient(k) * h.coefficient(k))
        .sum())
}

/// Catalog of functionals `F : R^{l+1} -> R^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// `F(x_0) = x_0`.
    Identity,
    /// `F(x_0..x_l) = (x_0 x_0, x_0 x_1, ..., x_0 x_l)`.
    ProductLags { max_lag: usize },
    /// `F(x_0) = x_0^2`.
    QuadraticSmooth,
}

/// A catalog functional together with the Lipschitz constants of its partial
/// derivatives `d F / d x_i` (as maps into `R^m`, Euclidean norms).
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDescriptor {
    kind: Functional,
    lipschitz: Vec<f64>,
}

impl FunctionalDescriptor {
    pub fn new(kind: Functional) -> Self {
        let lipschitz = match kind {
            Functional::Identity => vec![0.0],
            Functional::QuadraticSmooth => vec![2.0],
            Functional::ProductLags { max_lag } => {
                let mut l = vec![1.0; max_lag + 1];
                l[0] = 2.0;
                l
            }
        };
        FunctionalDescriptor { kind, lipschitz }
    }

    pub fn kind(&self) -> Functional {
        self.kind
    }

    /// `l + 1`.
    pub fn arity(&self) -> usize {
        match self.kind {
            Functional::Identity | Functional::QuadraticSmooth => 1,
            Functional::ProductLags { max_lag } => max_lag + 1,
        }
    }

    /// Output dimension `m`.
    pub fn output_dim(&self) -> usize {
        self.arity()
    }

    pub fn lipschitz_constants(&self) -> &[f64] {
        &self.lipschitz
    }

    pub fn evaluate(&self, window: &[f64], out: &mut [f64]) -> Result<()> {
        if window.len() != self.arity() {
            return Err(Error::ArityMismatch { expected: self.arity(), got: window.len() });
        }
        match self.kind {
            Functional::Identity => out[0] = window[0],
            Functional::QuadraticSmooth => out[0] = window[0] * window[0],
            Functional::ProductLags { .. } => {
                for (o, x) in out.iter_mut().zip(window) {
                    *o = window[0] * x;
                }
            }
        }
        Ok(())
    }

    /// `d F / d x_i` at `window`, a vector of length `m`.
    pub fn partial(&self, i: usize, window: &[f64]) -> Result<Vec<f64>> {
        if window.len() != self.arity() || i >= self.arity() {
            return Err(Error::ArityMismatch { expected: self.arity(), got: window.len() });
        }
        let m = self.output_dim();
        let mut out = vec![0.0; m];
        match self.kind {
            Functional::Identity => out[0] = 1.0,
            Functional::QuadraticSmooth => out[0] = 2.0 * window[0],
            Functional::ProductLags { .. } => {
                if i == 0 {
                    out[0] = 2.0 * window[0];
                    out[1..m].copy_from_slice(&window[1..m]);
                } else {
                    out[i] = window[0];
                }
            }
        }
        Ok(out)
    }

    /// `E F(X_k, ..., X_{k+l})` from the autocovariances of the process.
    pub fn expectation(&self, f: &TorusFunction) -> Vec<f64> {
        match self.kind {
            Functional::Identity => vec![0.0],
            Functional::QuadraticSmooth => vec![f.coefficient(0)],
            Functional::ProductLags { max_lag } => (0..=max_lag as i64).map(|l| f.coefficient(l)).collect(),
        }
    }
}

/// `sum_{k=1}^n F(X_k, ..., X_{k+l})`.
pub fn nonlinear_functional_sum(path: &SamplePath, functional: &FunctionalDescriptor) -> Result<Vec<f64>> {
    let need = functional.arity() - 1;
    if path.lag_extension() < need {
        return Err(Error::ArityMismatch { expected: functional.arity(), got: path.lag_extension() + 1 });
    }
    Ok(functional_sum(path.values(), path.n(), functional))
}

pub(crate) fn functional_sum(values: &[f64], n: usize, functional: &FunctionalDescriptor) -> Vec<f64> {
    let arity = functional.arity();
    let mut total = vec![0.0; functional.output_dim()];
    let mut buf = vec![0.0; functional.output_dim()];
    for k in 0..n {
        functional
            .evaluate(&values[k..k + arity], &mut buf)
            .expect("window has the functional's arity");
        for (t, b) in total.iter_mut().zip(&buf) {
            *t += b;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::stream;
    use crate::spectral::{grid_theta, spectral_density};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn gaussian() -> InnovationLaw {
        InnovationLaw::gaussian(1.0).unwrap()
    }

    #[test]
    fn identity_filter_reproduces_innovations() {
        let xi = [0.5, -1.0, 2.0, 3.0];
        let p = filter_innovations(&MACoefficients::iid(), &xi, 3, 1).unwrap();
        assert_eq!(p.values(), &xi);
        assert_eq!(p.values().len(), p.n() + p.lag_extension());
    }

    #[test]
    fn ma1_filter_entrywise() {
        let xi: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let p = filter_innovations(&MACoefficients::ma1(0.5), &xi, 9, 2).unwrap();
        for k in 0..11 {
            assert_relative_eq!(p.values()[k], xi[k] + 0.5 * xi[k + 1], epsilon = 1e-15);
        }
        // negative support: X_k = 0.3 xi_{k-1} + xi_k
        let a = MACoefficients::new(-1, vec![0.3, 1.0]).unwrap();
        let p = filter_innovations(&a, &xi[..6], 5, 0).unwrap();
        for k in 0..5 {
            assert_relative_eq!(p.values()[k], 0.3 * xi[k] + xi[k + 1], epsilon = 1e-15);
        }
        assert!(filter_innovations(&a, &xi, 5, 0).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = MACoefficients::ma1(0.5);
        let p1 = simulate_path(&a, &gaussian(), 50, 3, &mut stream(9, 1)).unwrap();
        let p2 = simulate_path(&a, &gaussian(), 50, 3, &mut stream(9, 1)).unwrap();
        assert_eq!(p1, p2);
        let mut sim = PathSimulator::new(a, gaussian(), 50, 3).unwrap();
        assert_eq!(sim.next(&mut stream(9, 1)), p1.values());
    }

    #[test]
    fn lag_one_autocovariance_of_ma1() {
        let a = MACoefficients::ma1(0.5);
        let n = 100_000;
        let p = simulate_path(&a, &gaussian(), n, 1, &mut stream(2024, 0)).unwrap();
        let s = autocorrelation_sums(&p, 1).unwrap();
        // Bartlett variance of the lag-1 mean: Sigma_{11} / n = 2.3125 / n
        let band = 3.0 * libm::sqrt(2.3125 / n as f64);
        assert!(libm::fabs(s[1] / n as f64 - 0.5) < band.max(0.02));
    }

    #[test]
    fn periodogram_single_term() {
        let p = SamplePath::new(vec![1.7], 1).unwrap();
        let per = periodogram(&p, 8).unwrap();
        assert!(per.grid().unwrap().iter().all(|v| libm::fabs(v - 2.89) < 1e-14));
        assert!(periodogram(&SamplePath::new(vec![1.0; 10], 10).unwrap(), 8).is_err());
    }

    #[test]
    fn periodogram_matches_double_sum() {
        let p = simulate_path(&MACoefficients::ma1(0.5), &gaussian(), 64, 0, &mut stream(3, 3)).unwrap();
        let per = periodogram(&p, 128).unwrap();
        let x = p.observed();
        for (m, v) in per.grid().unwrap().iter().enumerate() {
            let th = grid_theta(m, 128);
            let mut acc = 0.0;
            for k in 0..64 {
                for l in 0..64 {
                    acc += x[k] * x[l] * libm::cos((k as f64 - l as f64) * th);
                }
            }
            let brute = acc / 64.0;
            assert!(libm::fabs(v - brute) <= 1e-9 * brute.max(1e-3), "m={m}: {v} vs {brute}");
        }
        // evenness and Parseval
        assert!(per.is_even());
        let energy = x.iter().map(|v| v * v).sum::<f64>() / 64.0;
        let mean = per.grid().unwrap().iter().sum::<f64>() / 128.0;
        assert!(libm::fabs(mean - energy) < 1e-10);
        assert!(libm::fabs(per.coefficient(0) - energy) < 1e-10);
        // direct single sum at one point
        let th = grid_theta(5, 128);
        let z: Complex64 = x
            .iter()
            .enumerate()
            .map(|(k, v)| Complex64::from_polar(*v, (k + 1) as f64 * th))
            .sum();
        assert!(libm::fabs(z.norm_sqr() / 64.0 - per.grid().unwrap()[5]) < 1e-9);
    }

    #[test]
    fn periodogram_functional_examples() {
        let p = SamplePath::new(vec![1.0, 1.0], 2).unwrap();
        let v = periodogram_functional(&p, &TorusFunction::cosine(1.0, 1)).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-14);
        let q = simulate_path(&MACoefficients::ma1(0.5), &gaussian(), 40, 0, &mut stream(1, 2)).unwrap();
        let x = q.observed();
        let energy = x.iter().map(|v| v * v).sum::<f64>() / 40.0;
        assert_relative_eq!(periodogram_functional(&q, &TorusFunction::constant(1.0)).unwrap(), energy, max_relative = 1e-12);
        // h = e^{i l theta} + e^{-i l theta}: r_{+-l} = 1
        let l = 3;
        let h = TorusFunction::cosine(2.0, l);
        let direct = 2.0 * (0..40 - l).map(|k| x[k] * x[k + l]).sum::<f64>() / 40.0;
        assert_relative_eq!(periodogram_functional(&q, &h).unwrap(), direct, max_relative = 1e-10);
        let odd = TorusFunction::from_fourier(1, &[1.0]);
        assert_eq!(periodogram_functional(&q, &odd), Err(Error::NotEven));
    }

    #[test]
    fn autocorrelation_sums_examples() {
        let p = SamplePath::new(vec![1.0, 2.0, 3.0, 4.0], 3).unwrap();
        assert_eq!(autocorrelation_sums(&p, 1).unwrap(), vec![14.0, 20.0]);
        assert_eq!(
            autocorrelation_sums(&p, 2),
            Err(Error::InsufficientExtension { required: 2, available: 1 })
        );
    }

    #[test]
    fn iid_lag_one_mean_in_clt_band() {
        let n = 100_000;
        let p = simulate_path(&MACoefficients::iid(), &gaussian(), n, 1, &mut stream(77, 0)).unwrap();
        let s = autocorrelation_sums(&p, 1).unwrap();
        assert!(libm::fabs(s[1] / n as f64) < 3.0 / libm::sqrt(n as f64) * 1.5);
    }

    #[test]
    fn expected_values() {
        let f1 = TorusFunction::constant(2.0);
        assert_eq!(expected_autocovariance(&f1, 0), 2.0);
        let f = spectral_density(&MACoefficients::ma1(0.5), 1.0).unwrap();
        assert_eq!(expected_autocovariance(&f, 1), 0.5);
        assert_eq!(expected_autocovariance(&f, 2), 0.0);
        let h = TorusFunction::from_cosine_series(&[0.3, 1.0, -2.0]);
        assert_relative_eq!(expected_periodogram_functional(&TorusFunction::constant(1.0), &h, 17).unwrap(), 0.3);
        assert_relative_eq!(expected_periodogram_functional(&f, &f, 100).unwrap(), 2.0575, max_relative = 1e-14);
        let limit = f.mul(&f).unwrap().coefficient(0);
        assert!(libm::fabs(expected_periodogram_functional(&f, &f, 1_000_000).unwrap() - limit) < 1e-6);
    }

    #[test]
    fn functional_catalog_consistency() {
        let p = simulate_path(&MACoefficients::ma1(0.5), &gaussian(), 200, 2, &mut stream(4, 4)).unwrap();
        let id = nonlinear_functional_sum(&p, &FunctionalDescriptor::new(Functional::Identity)).unwrap();
        assert_relative_eq!(id[0], p.observed().iter().sum::<f64>(), max_relative = 1e-12);
        let prod = nonlinear_functional_sum(&p, &FunctionalDescriptor::new(Functional::ProductLags { max_lag: 1 })).unwrap();
        let ac = autocorrelation_sums(&p, 1).unwrap();
        assert_relative_eq!(prod[0], ac[0], max_relative = 1e-12);
        assert_relative_eq!(prod[1], ac[1], max_relative = 1e-12);
        let quad = nonlinear_functional_sum(&p, &FunctionalDescriptor::new(Functional::QuadraticSmooth)).unwrap();
        assert_relative_eq!(quad[0], ac[0], max_relative = 1e-12);
        let short = SamplePath::new(vec![1.0; 5], 5).unwrap();
        assert!(matches!(
            nonlinear_functional_sum(&short, &FunctionalDescriptor::new(Functional::ProductLags { max_lag: 2 })),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn lipschitz_constants_dominate_difference_quotients() {
        use rand::Rng;
        let mut rng = stream(123, 0);
        for kind in [Functional::Identity, Functional::QuadraticSmooth, Functional::ProductLags { max_lag: 3 }] {
            let fd = FunctionalDescriptor::new(kind);
            let arity = fd.arity();
            for i in 0..arity {
                let mut worst = 0.0f64;
                for _ in 0..10_000 {
                    let x: Vec<f64> = (0..arity).map(|_| rng.random_range(-5.0..5.0)).collect();
                    let y: Vec<f64> = (0..arity).map(|_| rng.random_range(-5.0..5.0)).collect();
                    let gx = fd.partial(i, &x).unwrap();
                    let gy = fd.partial(i, &y).unwrap();
                    let num: f64 = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum();
                    let den: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                    worst = worst.max(libm::sqrt(num / den));
                }
                assert!(fd.lipschitz_constants()[i] >= worst - 1e-12, "{kind:?} i={i}: {worst}");
            }
        }
    }
}
