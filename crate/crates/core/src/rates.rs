//! Closed-form limit objects: the autocovariance covariance matrix, scalar
//! and functional rate functions with their fourth-cumulant correction, the
//! variational form of the functional rate and its maximizer, CLT variance,
//! and the periodogram bias.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::innovations::InnovationLaw;
use crate::spectral::{MACoefficients, TorusFunction};
use crate::toeplitz::ExtendedReal;
use crate::{Error, Result, DEFAULT_GRID};

/// `f` below this is treated as zero on the quadrature grid.
pub const ZERO_DENSITY: f64 = 1e-12;
/// `|eta|` above this where `f` vanishes breaks absolute continuity.
pub const NONZERO_ETA: f64 = 1e-10;
/// Relative singular-value cutoff of the generalized inverse.
pub const PINV_TOLERANCE: f64 = 1e-10;
/// `|2 + kappa4|` below this selects the degenerate branch.
pub const DEGENERATE_KAPPA: f64 = 1e-10;

/// Symmetric positive semidefinite `(m+1) x (m+1)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validates symmetry and `min eigenvalue >= -1e-10 * max(1, ||.||)`.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), got: entries.ncols() });
        }
        let scale = entries.amax().max(1.0);
        let asym = (&entries - entries.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let min = entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -1e-10 * scale {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        Ok(CovarianceMatrix { entries })
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[(k, l)]
    }

    pub fn max_abs_diff(&self, other: &CovarianceMatrix) -> f64 {
        (&self.entries - &other.entries).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateBranch {
    ClosedForm,
    NotAbsolutelyContinuous,
    RatioNotSquareIntegrable,
    DegenerateKappa,
}

impl RateBranch {
    pub fn name(&self) -> &'static str {
        match self {
            RateBranch::ClosedForm => "closed_form",
            RateBranch::NotAbsolutelyContinuous => "not_absolutely_continuous",
            RateBranch::RatioNotSquareIntegrable => "ratio_not_square_integrable",
            RateBranch::DegenerateKappa => "degenerate_kappa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEvaluation {
    pub value: ExtendedReal,
    pub branch: RateBranch,
}

impl RateEvaluation {
    fn closed(value: f64) -> Self {
        RateEvaluation { value: ExtendedReal::Finite(value), branch: RateBranch::ClosedForm }
    }

    fn infinite(branch: RateBranch) -> Self {
        RateEvaluation { value: ExtendedReal::PosInfinity, branch }
    }
}

/// `Sigma_{k,l} = r_{k-l}(f^2) + r_{k+l}(f^2) + kappa4 r_k(f) r_l(f)`, `0 <= k, l <= m`.
pub fn sigma_matrix(f: &TorusFunction, kappa4: f64, m: usize) -> Result<CovarianceMatrix> {
    f.require_even()?;
    let f2 = f.mul(f)?;
    let entries = DMatrix::from_fn(m + 1, m + 1, |k, l| {
        let (k, l) = (k as i64, l as i64);
        f2.coefficient(k - l) + f2.coefficient(k + l) + kappa4 * f.coefficient(k) * f.coefficient(l)
    });
    CovarianceMatrix::new(entries)
}

fn time_autocovariance(a: &MACoefficients, variance: f64, k: i64) -> f64 {
    let mut s = 0.0;
    for j in a.support_lo()..=a.support_hi() {
        s += a.get(j) * a.get(j + k);
    }
    variance * s
}

/// `Cov(X_0 X_a, X_k X_{k+b})` for `X_t = sum_j a_j xi_{t+j}`:
/// `r(k) r(k+b-a) + r(k+b) r(k-a) + kappa4 sigma^4 sum_i a_i a_{i-a} a_{i-k} a_{i-k-b}`.
pub fn bartlett_covariance(coeffs: &MACoefficients, law: &InnovationLaw, a: i64, b: i64, k: i64) -> f64 {
    let v = law.variance();
    let r = |t: i64| time_autocovariance(coeffs, v, t);
    let mut cum = 0.0;
    for i in coeffs.support_lo()..=coeffs.support_hi() {
        cum += coeffs.get(i) * coeffs.get(i - a) * coeffs.get(i - k) * coeffs.get(i - k - b);
    }
    r(k) * r(k + b - a) + r(k + b) * r(k - a) + law.kappa4() * v * v * cum
}

/// `Sigma_{k,l} = sum_t Cov(X_0 X_k, X_t X_{t+l})`, summed in the time domain.
pub fn sigma_matrix_timedomain(coeffs: &MACoefficients, law: &InnovationLaw, m: usize) -> Result<CovarianceMatrix> {
    let reach = (coeffs.width() + m) as i64 + 1;
    let entries = DMatrix::from_fn(m + 1, m + 1, |k, l| {
        (-reach..=reach)
            .map(|t| bartlett_covariance(coeffs, law, k as i64, l as i64, t))
            .sum::<f64>()
    });
    // symmetric in exact arithmetic; remove rounding asymmetry
    let entries = (&entries + entries.transpose()) * 0.5;
    CovarianceMatrix::new(entries)
}

/// `sup_lambda <lambda, z> - lambda' Sigma lambda / 2 = z' Sigma^+ z / 2`, or
/// `+inf` when `z` leaves the range of `Sigma`.
pub fn rate_quadratic(z: &[f64], sigma: &CovarianceMatrix) -> Result<RateEvaluation> {
    let d = sigma.order();
    if z.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: z.len() });
    }
    if z.iter().all(|v| *v == 0.0) {
        return Ok(RateEvaluation::closed(0.0));
    }
    let eig = sigma.entries().clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    let cutoff = PINV_TOLERANCE * top;
    let zv = DVector::from_column_slice(z);
    let znorm = zv.norm();
    let mut value = 0.0;
    let mut residual_sq = 0.0;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        let proj = eig.eigenvectors.column(i).dot(&zv);
        if lam > cutoff {
            value += proj * proj / lam;
        } else {
            residual_sq += proj * proj;
        }
    }
    if libm::sqrt(residual_sq) > 1e-10 * znorm.max(1.0) {
        return Ok(RateEvaluation::infinite(RateBranch::ClosedForm));
    }
    Ok(RateEvaluation::closed(0.5 * value))
}

/// `I^l(z) = z^2 / (2 D)` with `D = r_0(f^2) + r_{2l}(f^2) + kappa4 r_l(f)^2`.
pub fn rate_scalar(z: f64, f: &TorusFunction, kappa4: f64, lag: usize) -> Result<RateEvaluation> {
    let f2 = f.mul(f)?;
    let l = lag as i64;
    let r = f.coefficient(l);
    let denom = f2.coefficient(0) + f2.coefficient(2 * l) + kappa4 * r * r;
    if z == 0.0 {
        return Ok(RateEvaluation::closed(0.0));
    }
    if denom <= 1e-12 * f2.coefficient(0).max(1e-300) {
        return Ok(RateEvaluation::infinite(RateBranch::DegenerateKappa));
    }
    Ok(RateEvaluation::closed(z * z / (2.0 * denom)))
}

/// `Lambda(h) = 2 r_0(h^2 f^2) + kappa4 r_0(h f)^2`.
pub fn lambda_functional(h: &TorusFunction, f: &TorusFunction, kappa4: f64) -> Result<f64> {
    let hf = h.mul(f)?;
    let hf2 = hf.mul(&hf)?;
    let mean = hf.coefficient(0);
    Ok(2.0 * hf2.coefficient(0) + kappa4 * mean * mean)
}

/// Limiting variance of `sqrt(n) (I_n(h) - E I_n(h))`; the same quadratic form as [`lambda_functional`].
pub fn clt_variance(f: &TorusFunction, h: &TorusFunction, kappa4: f64) -> Result<f64> {
    h.require_even()?;
    lambda_functional(h, f, kappa4)
}

struct RatioStats {
    /// mean of (eta / 2f)^2
    square: f64,
    /// mean of eta / 2f
    linear: f64,
}

fn ratio_stats(eta: &[f64], f: &[f64], vanishing: RateBranch) -> core::result::Result<RatioStats, RateBranch> {
    let mut square = 0.0;
    let mut linear = 0.0;
    for (&e, &d) in eta.iter().zip(f) {
        if d < ZERO_DENSITY {
            if libm::fabs(e) > NONZERO_ETA {
                return Err(vanishing);
            }
            continue;
        }
        let w = e / (2.0 * d);
        square += w * w;
        linear += w;
    }
    let g = eta.len() as f64;
    Ok(RatioStats { square: square / g, linear: linear / g })
}

fn odd_points(v: &[f64]) -> Vec<f64> {
    v.iter().skip(1).step_by(2).copied().collect()
}

fn even_points(v: &[f64]) -> Vec<f64> {
    v.iter().step_by(2).copied().collect()
}

/// Grid statistics of `eta / 2f`; the `G` and `2G` shifted grids are the odd
/// points of the `2G` and `4G` grids, which avoids sampling exactly at zeros
/// of `f` that sit on the base grid. Absolute continuity is judged on the
/// base grid; on the shifted grids a vanishing `f` under a visible `eta`
/// means the ratio blows up near a zero.
fn functional_stats(eta: &TorusFunction, f: &TorusFunction, grid_size: usize) -> Result<core::result::Result<RatioStats, RateBranch>> {
    if eta.has_fourier() && f.has_fourier() {
        let e2 = eta.sample_grid(2 * grid_size)?;
        let f2 = f.sample_grid(2 * grid_size)?;
        let e4 = eta.sample_grid(4 * grid_size)?;
        let f4 = f.sample_grid(4 * grid_size)?;
        if let Err(b) = ratio_stats(&even_points(&e2), &even_points(&f2), RateBranch::NotAbsolutelyContinuous) {
            return Ok(Err(b));
        }
        let blowup = RateBranch::RatioNotSquareIntegrable;
        let coarse = ratio_stats(&odd_points(&e2), &odd_points(&f2), blowup);
        let fine = ratio_stats(&odd_points(&e4), &odd_points(&f4), blowup);
        let (coarse, fine) = match (coarse, fine) {
            (Ok(c), Ok(f)) => (c, f),
            (Err(b), _) | (_, Err(b)) => return Ok(Err(b)),
        };
        if fine.square > 1.5 * coarse.square + 1e-12 {
            return Ok(Err(RateBranch::RatioNotSquareIntegrable));
        }
        Ok(Ok(fine))
    } else {
        let e = eta.grid().ok_or(Error::MissingFourier)?;
        let d = f.grid().ok_or(Error::MissingFourier)?;
        if e.len() != d.len() {
            return Err(Error::DimensionMismatch { expected: d.len(), got: e.len() });
        }
        Ok(ratio_stats(e, d, RateBranch::NotAbsolutelyContinuous))
    }
}

fn check_kappa(kappa4: f64) -> Result<()> {
    if kappa4 < -2.0 - DEGENERATE_KAPPA || !kappa4.is_finite() {
        return Err(Error::invalid(format!("kappa4 must be >= -2, got {kappa4}")));
    }
    Ok(())
}

/// Functional rate
/// `I(eta) = r_0(eta^2 / 4f^2) - kappa4/(2+kappa4) * r_0(eta / 2f)^2`
/// evaluated by quadrature on `DEFAULT_GRID` points, with `+inf` branches
/// when `eta` charges the zero set of `f` or `eta/f` is not square integrable.
///
/// At `kappa4 = -2` the constant direction of the quadratic form is
/// degenerate: the rate is `r_0(eta^2/4f^2)` if `r_0(eta/2f) = 0` and `+inf`
/// otherwise.
pub fn rate_functional(eta: &TorusFunction, f: &TorusFunction, kappa4: f64) -> Result<RateEvaluation> {
    rate_functional_on_grid(eta, f, kappa4, DEFAULT_GRID)
}

pub fn rate_functional_on_grid(eta: &TorusFunction, f: &TorusFunction, kappa4: f64, grid_size: usize) -> Result<RateEvaluation> {
    eta.require_even()?;
    check_kappa(kappa4)?;
    let stats = match functional_stats(eta, f, grid_size)? {
        Ok(s) => s,
        Err(branch) => return Ok(RateEvaluation::infinite(branch)),
    };
    if libm::fabs(2.0 + kappa4) < DEGENERATE_KAPPA {
        let tol = 1e-10 * libm::sqrt(stats.square).max(1.0);
        let value = if libm::fabs(stats.linear) <= tol {
            ExtendedReal::Finite(stats.square)
        } else {
            ExtendedReal::PosInfinity
        };
        return Ok(RateEvaluation { value, branch: RateBranch::DegenerateKappa });
    }
    let correction = kappa4 / (2.0 + kappa4);
    Ok(RateEvaluation::closed(stats.square - correction * stats.linear * stats.linear))
}

/// `sup` of `D(h) = r_0(h eta) - Lambda(h)/2` over even trigonometric
/// polynomials `h = sum_{k<=degree} c_k cos(k theta)`.
///
/// In the cosine basis `Lambda` is the `Sigma` matrix of [`sigma_matrix`], so
/// the maximizer solves `Sigma c = b` with `b_k = r_k(eta)`.
pub fn rate_functional_variational(eta: &TorusFunction, f: &TorusFunction, kappa4: f64, degree: usize) -> Result<f64> {
    let (b, c) = variational_maximizer(eta, f, kappa4, degree)?;
    Ok(0.5 * b.dot(&c))
}

/// Returns `(b, c)` with `c` the cosine coefficients of the maximizer.
pub fn variational_maximizer(
    eta: &TorusFunction,
    f: &TorusFunction,
    kappa4: f64,
    degree: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if degree > 64 {
        return Err(Error::invalid(format!("degree must be <= 64, got {degree}")));
    }
    eta.require_even()?;
    check_kappa(kappa4)?;
    let sigma = sigma_matrix(f, kappa4, degree)?;
    let b = DVector::from_fn(degree + 1, |k, _| eta.coefficient(k as i64));
    let m = sigma.entries().clone();
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(libm::fabs(*v)));
    let low = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if low <= 1e-12 * top {
        return Err(Error::SingularSystem);
    }
    let chol = m.cholesky().ok_or(Error::SingularSystem)?;
    let c = chol.solve(&b);
    Ok((b, c))
}

/// `D(h) = mean(h eta) - (2 mean(h^2 f^2) + kappa4 mean(h f)^2) / 2` on a common grid.
pub fn dual_objective(h: &[f64], eta: &[f64], f: &[f64], kappa4: f64) -> f64 {
    let g = h.len() as f64;
    let mut lin = 0.0;
    let mut sq = 0.0;
    let mut hf = 0.0;
    for ((&hv, &ev), &fv) in h.iter().zip(eta).zip(f) {
        lin += hv * ev;
        sq += hv * hv * fv * fv;
        hf += hv * fv;
    }
    let (lin, sq, hf) = (lin / g, sq / g, hf / g);
    lin - 0.5 * (2.0 * sq + kappa4 * hf * hf)
}

/// Maximizer `h_0` of the dual objective on the `grid_size` grid:
/// `h_0 f = eta/2f - kappa4/(2+kappa4) r_0(eta/2f)`; zero where `f` vanishes.
pub fn optimal_h(eta: &TorusFunction, f: &TorusFunction, kappa4: f64) -> Result<TorusFunction> {
    optimal_h_on_grid(eta, f, kappa4, DEFAULT_GRID)
}

pub fn optimal_h_on_grid(eta: &TorusFunction, f: &TorusFunction, kappa4: f64, grid_size: usize) -> Result<TorusFunction> {
    let rate = rate_functional_on_grid(eta, f, kappa4, grid_size)?;
    if rate.branch != RateBranch::ClosedForm {
        return Err(Error::NotClosedForm(rate.branch));
    }
    let e = eta.sample_grid(grid_size)?;
    let d = f.sample_grid(grid_size)?;
    let stats = ratio_stats(&e, &d, RateBranch::NotAbsolutelyContinuous).map_err(Error::NotClosedForm)?;
    let shift = kappa4 / (2.0 + kappa4) * stats.linear;
    let h = e
        .iter()
        .zip(&d)
        .map(|(&ev, &fv)| if fv < ZERO_DENSITY { 0.0 } else { (ev / (2.0 * fv) - shift) / fv })
        .collect();
    Ok(TorusFunction::from_grid(h))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasBound {
    pub exact_bias: f64,
    pub bound: f64,
}

/// `E I_n(h) - r_0(f h)` for trigonometric polynomials, and its bound
/// `(1/n) sqrt(sum k^2 r_k(f)^2) sqrt(sum r_k(h)^2)`.
///
/// `f_derivative_l2` overrides `sqrt(sum k^2 r_k(f)^2)` when given.
pub fn bias_bound(f: &TorusFunction, h: &TorusFunction, n: usize, f_derivative_l2: Option<f64>) -> Result<BiasBound> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let d = f.degree()?.max(h.degree()?) as i64;
    let nf = n as f64;
    let mut inside = 0.0;
    let mut outside = 0.0;
    for k in -d..=d {
        let p = f.coefficient(k) * h.coefficient(k);
        if k.unsigned_abs() < n as u64 {
            inside += k.abs() as f64 * p;
        } else {
            outside += p;
        }
    }
    let exact_bias = -inside / nf - outside;
    let deriv = match f_derivative_l2 {
        Some(v) => v,
        None => libm::sqrt((-d..=d).map(|k| (k * k) as f64 * f.coefficient(k).powi(2)).sum::<f64>()),
    };
    let h_l2 = libm::sqrt(h.fourier()?.iter().map(|c| c * c).sum::<f64>());
    Ok(BiasBound { exact_bias, bound: deriv * h_l2 / nf })
}
