//! Transfer function, spectral density, Fourier coefficients and norms on the torus.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::fft;
use crate::{Error, Result, DEFAULT_GRID};

/// Finitely supported moving-average coefficients `a_j`, `j in [support_lo, support_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MACoefficients {
    support_lo: i64,
    values: Vec<f64>,
    l2_norm_sq: f64,
    tail_l2_bound: f64,
}

impl MACoefficients {
    pub fn new(support_lo: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("coefficient sequence is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        let l2_norm_sq = values.iter().map(|v| v * v).sum();
        Ok(MACoefficients { support_lo, values, l2_norm_sq, tail_l2_bound: 0.0 })
    }

    /// Records the caller's bound on `sum a_j^2` over the discarded tail.
    pub fn with_tail_bound(mut self, tail_l2_bound: f64) -> Self {
        self.tail_l2_bound = tail_l2_bound;
        self
    }

    /// `a_0 = 1`, i.i.d. process.
    pub fn iid() -> Self {
        Self::new(0, vec![1.0]).unwrap()
    }

    /// `X_k = xi_k + b xi_{k+1}`.
    pub fn ma1(b: f64) -> Self {
        Self::new(0, vec![1.0, b]).unwrap()
    }

    /// `a_j = rho^j` for `j = 0..=last`, tail bound `rho^{2(last+1)} / (1 - rho^2)`.
    pub fn geometric(rho: f64, last: usize) -> Result<Self> {
        if !(libm::fabs(rho) < 1.0) {
            return Err(Error::invalid(format!("geometric ratio must satisfy |rho| < 1, got {rho}")));
        }
        let values = (0..=last).map(|j| libm::pow(rho, j as f64)).collect();
        let tail = libm::pow(rho * rho, (last + 1) as f64) / (1.0 - rho * rho);
        Ok(Self::new(0, values)?.with_tail_bound(tail))
    }

    pub fn support_lo(&self) -> i64 {
        self.support_lo
    }

    pub fn support_hi(&self) -> i64 {
        self.support_lo + self.values.len() as i64 - 1
    }

    /// `support_hi - support_lo`.
    pub fn width(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: i64) -> f64 {
        let t = j - self.support_lo;
        if t < 0 || t >= self.values.len() as i64 {
            0.0
        } else {
            self.values[t as usize]
        }
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    pub fn tail_l2_bound(&self) -> f64 {
        self.tail_l2_bound
    }

    /// `sum_j a_j a_{j+k}`.
    pub fn autocorrelation(&self, k: i64) -> f64 {
        (self.support_lo..=self.support_hi())
            .map(|j| self.get(j) * self.get(j + k))
            .sum()
    }
}

/// A function on the torus carried as Fourier coefficients `r_k`,
/// `k in [-degree, degree]`, and/or samples on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusFunction {
    fourier: Option<Vec<f64>>,
    grid: Option<Vec<f64>>,
}

impl TorusFunction {
    /// Coefficients `r_k` for `k = offset, offset + 1, ...`.
    pub fn from_fourier(offset: i64, coeffs: &[f64]) -> Self {
        let hi = offset + coeffs.len() as i64 - 1;
        let degree = offset.unsigned_abs().max(hi.unsigned_abs()) as i64;
        let mut sym = vec![0.0; (2 * degree + 1) as usize];
        for (t, &c) in coeffs.iter().enumerate() {
            sym[(offset + t as i64 + degree) as usize] = c;
        }
        TorusFunction { fourier: Some(sym), grid: None }.trimmed()
    }

    /// `c_0 + sum_{k >= 1} c_k cos(k theta)`.
    pub fn from_cosine_series(cos_coeffs: &[f64]) -> Self {
        let d = cos_coeffs.len().saturating_sub(1);
        let mut sym = vec![0.0; 2 * d + 1];
        for (k, &c) in cos_coeffs.iter().enumerate() {
            if k == 0 {
                sym[d] = c;
            } else {
                sym[d + k] = 0.5 * c;
                sym[d - k] = 0.5 * c;
            }
        }
        TorusFunction { fourier: Some(sym), grid: None }.trimmed()
    }

    pub fn constant(c: f64) -> Self {
        TorusFunction { fourier: Some(vec![c]), grid: None }
    }

    /// `amplitude * cos(k theta)`.
    pub fn cosine(amplitude: f64, k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = amplitude;
        if k == 0 {
            return Self::constant(amplitude);
        }
        Self::from_cosine_series(&c)
    }

    /// Samples at `theta_m = -pi + 2 pi m / G`.
    pub fn from_grid(values: Vec<f64>) -> Self {
        TorusFunction { fourier: None, grid: Some(values) }
    }

    /// Attaches grid samples reconstructed from the Fourier coefficients.
    pub fn with_grid(mut self, grid_size: usize) -> Result<Self> {
        let g = self.sample_grid(grid_size)?;
        self.grid = Some(g);
        Ok(self)
    }

    pub(crate) fn set_grid(&mut self, grid: Vec<f64>) {
        self.grid = Some(grid);
    }

    fn trimmed(mut self) -> Self {
        if let Some(c) = self.fourier.as_mut() {
            while c.len() > 1 && c[0] == 0.0 && c[c.len() - 1] == 0.0 {
                c.pop();
                c.remove(0);
            }
        }
        self
    }

    pub fn has_fourier(&self) -> bool {
        self.fourier.is_some()
    }

    pub fn grid(&self) -> Option<&[f64]> {
        self.grid.as_deref()
    }

    /// Coefficients `r_{-d}..=r_d`.
    pub fn fourier(&self) -> Result<&[f64]> {
        self.fourier.as_deref().ok_or(Error::MissingFourier)
    }

    pub fn degree(&self) -> Result<usize> {
        Ok((self.fourier()?.len() - 1) / 2)
    }

    /// `r_k`, zero outside the stored support.
    pub fn coefficient(&self, k: i64) -> f64 {
        match &self.fourier {
            Some(c) => {
                let d = ((c.len() - 1) / 2) as i64;
                if k.abs() > d {
                    0.0
                } else {
                    c[(k + d) as usize]
                }
            }
            None => 0.0,
        }
    }

    /// `r_k == r_{-k}` for every stored lag; grid-only functions are checked
    /// for `h(theta) == h(-theta)` on the grid.
    pub fn is_even(&self) -> bool {
        if let Some(c) = &self.fourier {
            let n = c.len();
            let scale = c.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v))).max(1e-300);
            return (0..n / 2).all(|i| libm::fabs(c[i] - c[n - 1 - i]) <= 1e-12 * scale);
        }
        if let Some(g) = &self.grid {
            let n = g.len();
            let scale = g.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v))).max(1e-300);
            // theta_m and theta_{G-m} are mirror images; theta_0 = -pi is its own mirror
            return (1..n).all(|m| libm::fabs(g[m] - g[n - m]) <= 1e-10 * scale);
        }
        true
    }

    pub(crate) fn require_even(&self) -> Result<()> {
        if self.is_even() {
            Ok(())
        } else {
            Err(Error::NotEven)
        }
    }

    /// Complex value `sum_k r_k exp(-i k theta)`.
    pub fn value_at(&self, theta: f64) -> Result<Complex64> {
        let c = self.fourier()?;
        let d = ((c.len() - 1) / 2) as i64;
        Ok(c.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, &r)| {
            let arg = -((t as i64 - d) as f64) * theta;
            acc + Complex64::new(r * libm::cos(arg), r * libm::sin(arg))
        }))
    }

    /// Real part of the function on a grid of `grid_size` points.
    pub fn sample_grid(&self, grid_size: usize) -> Result<Vec<f64>> {
        if let Some(g) = &self.grid {
            if g.len() == grid_size {
                return Ok(g.clone());
            }
        }
        Ok(self.sample_grid_complex(grid_size)?.into_iter().map(|z| z.re).collect())
    }

    pub fn sample_grid_complex(&self, grid_size: usize) -> Result<Vec<Complex64>> {
        let c = self.fourier()?;
        let d = ((c.len() - 1) / 2) as i64;
        Ok(fft::torus_sum(-d, c, -1, grid_size))
    }

    /// Grid samples, preferring the stored grid.
    pub fn grid_or_default(&self) -> Result<Vec<f64>> {
        match &self.grid {
            Some(g) => Ok(g.clone()),
            None => self.sample_grid(DEFAULT_GRID),
        }
    }

    /// Pointwise product through coefficient convolution.
    pub fn mul(&self, other: &TorusFunction) -> Result<TorusFunction> {
        let a = self.fourier()?;
        let b = other.fourier()?;
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        Ok(TorusFunction { fourier: Some(out), grid: None })
    }

    pub fn scaled(&self, factor: f64) -> TorusFunction {
        TorusFunction {
            fourier: self.fourier.as_ref().map(|c| c.iter().map(|v| v * factor).collect()),
            grid: self.grid.as_ref().map(|g| g.iter().map(|v| v * factor).collect()),
        }
    }

    pub fn add(&self, other: &TorusFunction) -> Result<TorusFunction> {
        let a = self.fourier()?;
        let b = other.fourier()?;
        let d = a.len().max(b.len()) / 2;
        let mut out = vec![0.0; 2 * d + 1];
        for (src, len) in [(a, a.len()), (b, b.len())] {
            let shift = d - len / 2;
            for (t, v) in src.iter().enumerate() {
                out[shift + t] += v;
            }
        }
        Ok(TorusFunction { fourier: Some(out), grid: None }.trimmed())
    }
}

/// `g(theta_m) = sum_j a_j exp(i j theta_m)` on `grid_size` points.
pub fn transfer_function(coeffs: &MACoefficients, grid_size: usize) -> Result<Vec<Complex64>> {
    let required = 2 * coeffs.width() + 1;
    if grid_size < required {
        return Err(Error::GridTooCoarse { grid_size, required });
    }
    Ok(fft::torus_sum(coeffs.support_lo(), coeffs.values(), 1, grid_size))
}

/// `f = variance * |g|^2`, with `r_k(f) = variance * sum_j a_j a_{j+k}`.
pub fn spectral_density(coeffs: &MACoefficients, variance: f64) -> Result<TorusFunction> {
    if !(variance > 0.0) {
        return Err(Error::invalid(format!("variance must be positive, got {variance}")));
    }
    let w = coeffs.width() as i64;
    let c: Vec<f64> = (-w..=w).map(|k| variance * coeffs.autocorrelation(k)).collect();
    Ok(TorusFunction::from_fourier(-w, &c))
}

/// Fejer damping `a_j (1 - |j|/N)` for `|j| <= N`, zero otherwise.
pub fn fejer_truncate(coeffs: &MACoefficients, order: usize) -> Result<MACoefficients> {
    if order == 0 {
        return Err(Error::invalid("Fejer order must be at least 1"));
    }
    let n = order as i64;
    let lo = coeffs.support_lo().max(-n);
    let hi = coeffs.support_hi().min(n);
    if lo > hi {
        return MACoefficients::new(0, vec![0.0]);
    }
    let values = (lo..=hi)
        .map(|j| coeffs.get(j) * (1.0 - j.abs() as f64 / order as f64))
        .collect();
    MACoefficients::new(lo, values)
}

/// `r_k` of the pointwise product of trigonometric polynomials.
pub fn product_fourier_coefficient(functions: &[TorusFunction], k: i64) -> Result<f64> {
    let mut iter = functions.iter();
    let first = match iter.next() {
        Some(f) => f.clone(),
        None => return Ok(if k == 0 { 1.0 } else { 0.0 }),
    };
    let product = iter.try_fold(first, |acc, f| acc.mul(f))?;
    // ensure the representation exists even for a single factor
    product.fourier()?;
    Ok(product.coefficient(k))
}

/// `(integral |h|^q d theta)^{1/q}`; `q = inf` gives the sup norm.
///
/// Uses the stored grid if any, otherwise `DEFAULT_GRID` samples. With a
/// Fourier representation the sup norm is refined around the grid's local
/// maxima.
pub fn lq_norm(h: &TorusFunction, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("norm exponent must be >= 1, got {q}")));
    }
    let grid = h.grid_or_default()?;
    let g = grid.len();
    if q.is_infinite() {
        let grid_max = grid.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
        if !h.has_fourier() {
            return Ok(grid_max);
        }
        let mut best = grid_max;
        for m in 0..g {
            let v = libm::fabs(grid[m]);
            let prev = libm::fabs(grid[(m + g - 1) % g]);
            let next = libm::fabs(grid[(m + 1) % g]);
            if v >= prev && v >= next && v >= 0.5 * grid_max {
                let step = 2.0 * PI / g as f64;
                let th = fft::theta(m, g);
                best = best.max(refine_abs_max(h, th - step, th + step)?);
            }
        }
        return Ok(best);
    }
    let sum: f64 = grid.iter().map(|v| libm::pow(libm::fabs(*v), q)).sum();
    Ok(libm::pow(2.0 * PI * sum / g as f64, 1.0 / q))
}

fn refine_abs_max(h: &TorusFunction, mut lo: f64, mut hi: f64) -> Result<f64> {
    let f = |t: f64| -> Result<f64> { Ok(h.value_at(t)?.norm()) };
    let phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    for _ in 0..60 {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b)?;
        }
    }
    Ok(fa.max(fb))
}

/// `(1/2pi) integral h d theta` by the trapezoid rule on uniform samples.
pub fn grid_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `theta_m` for the uniform grid.
pub fn grid_theta(m: usize, grid_size: usize) -> f64 {
    fft::theta(m, grid_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ma1() -> TorusFunction {
        spectral_density(&MACoefficients::ma1(0.5), 1.0).unwrap()
    }

    /// `(1/G) sum_m exp(i k theta_m) h(theta_m)`.
    fn quadrature_coefficient(h: &[f64], k: i64) -> f64 {
        let g = h.len();
        (0..g).map(|m| libm::cos(k as f64 * grid_theta(m, g)) * h[m]).sum::<f64>() / g as f64
    }

    #[test]
    fn transfer_function_examples() {
        let g = transfer_function(&MACoefficients::iid(), 16).unwrap();
        assert!(g.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let g = transfer_function(&MACoefficients::ma1(0.5), 16).unwrap();
        // theta_8 = 0
        assert_relative_eq!(g[8].re, 1.5, epsilon = 1e-15);
        assert!(g[8].im.abs() < 1e-15);
        assert!(matches!(
            transfer_function(&MACoefficients::ma1(0.5), 2),
            Err(Error::GridTooCoarse { required: 3, .. })
        ));
    }

    #[test]
    fn truncated_geometric_transfer_function() {
        let a = MACoefficients::geometric(0.5, 40).unwrap();
        let g = transfer_function(&a, 256).unwrap();
        for (m, z) in g.iter().enumerate() {
            let th = grid_theta(m, 256);
            let closed = Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - Complex64::from_polar(0.5, th));
            assert!((z - closed).norm() <= 1e-11, "m={m}");
        }
        let f = spectral_density(&a, 1.0).unwrap();
        assert!(libm::fabs(f.coefficient(0) - 4.0 / 3.0) < 1e-10);
    }

    #[test]
    fn spectral_density_examples() {
        let f = spectral_density(&MACoefficients::iid(), 1.0).unwrap();
        assert_eq!(f.coefficient(0), 1.0);
        assert_eq!(f.coefficient(1), 0.0);
        let f = ma1();
        assert_relative_eq!(f.coefficient(0), 1.25);
        assert_relative_eq!(f.coefficient(1), 0.5);
        assert_relative_eq!(f.coefficient(-1), 0.5);
        let grid = f.sample_grid(64).unwrap();
        for (m, v) in grid.iter().enumerate() {
            assert_relative_eq!(*v, 1.25 + libm::cos(grid_theta(m, 64)), epsilon = 1e-13);
        }
        assert!(spectral_density(&MACoefficients::iid(), 0.0).is_err());
    }

    #[test]
    fn fejer_examples() {
        assert_eq!(fejer_truncate(&MACoefficients::iid(), 7).unwrap().values(), &[1.0]);
        let a2 = fejer_truncate(&MACoefficients::ma1(0.5), 2).unwrap();
        assert_eq!(a2.values(), &[1.0, 0.25]);
        let a1 = fejer_truncate(&MACoefficients::ma1(0.5), 1).unwrap();
        assert_eq!(a1.get(0), 1.0);
        assert_eq!(a1.get(1), 0.0);
        assert!(fejer_truncate(&MACoefficients::iid(), 0).is_err());
    }

    #[test]
    fn fejer_approximation_converges() {
        let a = MACoefficients::new(-2, vec![0.3, -0.7, 1.0, 0.5, 0.25, -0.1]).unwrap();
        let g = transfer_function(&a, 512).unwrap();
        let mut prev_sup = f64::INFINITY;
        let mut prev_l4 = f64::INFINITY;
        for n in [4usize, 8, 16, 32, 64, 128] {
            let gn = transfer_function(&fejer_truncate(&a, n).unwrap(), 512).unwrap();
            let diffs: Vec<f64> = g.iter().zip(&gn).map(|(x, y)| (x - y).norm()).collect();
            let sup = diffs.iter().cloned().fold(0.0, f64::max);
            let l4: f64 = diffs.iter().map(|d| d.powi(4)).sum::<f64>() * 2.0 * PI / 512.0;
            assert!(sup < prev_sup && l4 < prev_l4, "N={n}");
            prev_sup = sup;
            prev_l4 = l4;
        }
    }

    #[test]
    fn product_coefficients() {
        let one = TorusFunction::constant(1.0);
        assert_eq!(product_fourier_coefficient(&[one.clone(), one], 0).unwrap(), 1.0);
        let f = ma1();
        // (1.25 + cos)^2 = 2.0625 + 2.5 cos + 0.5 cos 2
        assert_relative_eq!(product_fourier_coefficient(&[f.clone(), f.clone()], 0).unwrap(), 2.0625);
        assert_relative_eq!(product_fourier_coefficient(&[f.clone(), f.clone()], 1).unwrap(), 1.25);
        assert_relative_eq!(product_fourier_coefficient(&[f.clone(), f.clone()], 2).unwrap(), 0.25);
        let c = TorusFunction::cosine(2.0, 1);
        assert_relative_eq!(product_fourier_coefficient(&[c.clone(), c], 0).unwrap(), 2.0);
        // quadrature agreement
        let h = TorusFunction::from_cosine_series(&[0.4, -1.0, 0.3, 0.2]);
        let prod = f.mul(&h).unwrap().mul(&h).unwrap();
        let grid = prod.sample_grid(256).unwrap();
        for k in -8..=8 {
            assert!(libm::fabs(prod.coefficient(k) - quadrature_coefficient(&grid, k)) < 1e-10);
        }
    }

    #[test]
    fn autocorrelation_identity_matches_quadrature() {
        let a = MACoefficients::new(-1, vec![0.2, 1.0, -0.6, 0.3]).unwrap();
        let f = spectral_density(&a, 1.7).unwrap();
        let grid = f.sample_grid(128).unwrap();
        assert!(grid.iter().all(|v| *v >= -1e-12));
        assert!(f.is_even());
        for k in -3..=3 {
            assert!(libm::fabs(f.coefficient(k) - quadrature_coefficient(&grid, k)) < 1e-10);
        }
        assert!(libm::fabs(grid_mean(&grid) - f.coefficient(0)) < 1e-10);
    }

    #[test]
    fn norms() {
        let one = TorusFunction::constant(1.0);
        assert_relative_eq!(lq_norm(&one, f64::INFINITY).unwrap(), 1.0);
        assert_relative_eq!(lq_norm(&one, 2.0).unwrap(), libm::sqrt(2.0 * PI), max_relative = 1e-12);
        assert_relative_eq!(lq_norm(&TorusFunction::cosine(1.0, 1), f64::INFINITY).unwrap(), 1.0, max_relative = 1e-12);
        // sup of an odd-degree polynomial whose max falls between grid points
        let h = TorusFunction::from_cosine_series(&[0.0, 1.0]).with_grid(7).unwrap();
        assert!(lq_norm(&h, f64::INFINITY).unwrap() > 0.9999);
        assert!(lq_norm(&one, 0.5).is_err());
    }

    #[test]
    fn even_and_grid_representations() {
        let odd = TorusFunction::from_fourier(-1, &[1.0, 0.0, -1.0]);
        assert!(!odd.is_even());
        let f = ma1().with_grid(64).unwrap();
        assert!(f.is_even());
        let from_grid = TorusFunction::from_grid(f.grid().unwrap().to_vec());
        assert!(from_grid.is_even());
        assert_eq!(from_grid.fourier(), Err(Error::MissingFourier));
        let sum = ma1().add(&TorusFunction::cosine(2.0, 3)).unwrap();
        assert_eq!(sum.coefficient(3), 1.0);
        assert_eq!(sum.coefficient(0), 1.25);
    }
}
