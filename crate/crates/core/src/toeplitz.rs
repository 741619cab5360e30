//! Symmetric Toeplitz operators `T_n(h) = (r_{k-l}(h))`, their norms and
//! trace products, and log-MGF formulas for quadratic forms.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::spectral::{lq_norm, product_fourier_coefficient, TorusFunction};
use crate::{Error, Result, DENSE_LIMIT};

/// Eigenvalues in `[-PSD_TOLERANCE, 0]` are clamped to zero when taking
/// square roots; anything below is rejected.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// A value in `R ∪ {+inf}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// The finite value, or `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInfinity => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => f.write_str("+inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzOperator {
    first_row: Vec<f64>,
    generator: TorusFunction,
}

impl ToeplitzOperator {
    /// `T_n(h)`; `h` must be even so that the matrix is real symmetric.
    pub fn build(h: &TorusFunction, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Toeplitz order must be at least 1"));
        }
        h.fourier()?;
        h.require_even()?;
        let first_row = (0..n as i64).map(|k| h.coefficient(k)).collect();
        Ok(ToeplitzOperator { first_row, generator: h.clone() })
    }

    pub fn order(&self) -> usize {
        self.first_row.len()
    }

    /// `r_0, ..., r_{n-1}`.
    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn generator(&self) -> &TorusFunction {
        &self.generator
    }

    pub fn entry(&self, k: usize, l: usize) -> f64 {
        self.first_row[k.abs_diff(l)]
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.order();
        DMatrix::from_fn(n, n, |k, l| self.entry(k, l))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.order();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        Ok((0..n).map(|k| (0..n).map(|l| self.entry(k, l) * x[l]).sum()).collect())
    }

    /// `<x, T x>`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let y = self.mul_vec(x)?;
        Ok(x.iter().zip(&y).map(|(a, b)| a * b).sum())
    }

    fn check_dense_limit(&self) -> Result<()> {
        check_order(self.order())
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.check_dense_limit()?;
        Ok(self.dense().symmetric_eigenvalues().iter().copied().collect())
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > DENSE_LIMIT {
        Err(Error::SizeLimit { order, limit: DENSE_LIMIT })
    } else {
        Ok(())
    }
}

/// `||T|| = max |eigenvalue|`.
pub fn operator_norm(t: &ToeplitzOperator) -> Result<f64> {
    Ok(t.eigenvalues()?.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v))))
}

/// `n^{1/q} ||h||_q`, norm taken with `d theta` (no `1/2pi`).
pub fn norm_bound(h: &TorusFunction, q: f64, n: usize) -> Result<f64> {
    let norm = lq_norm(h, q)?;
    if q.is_infinite() {
        Ok(norm)
    } else {
        Ok(libm::pow(n as f64, 1.0 / q) * norm)
    }
}

/// `(1/n) tr(T_n(f_1) ... T_n(f_s))`, `1 <= s <= 4`.
pub fn trace_product(generators: &[TorusFunction], n: usize) -> Result<f64> {
    let s = generators.len();
    if s == 0 {
        return Err(Error::invalid("trace product needs at least one generator"));
    }
    if s > 4 {
        return Err(Error::Unsupported(format!("trace products of {s} > 4 factors")));
    }
    check_order(n)?;
    let ops = generators
        .iter()
        .map(|g| ToeplitzOperator::build(g, n))
        .collect::<Result<Vec<_>>>()?;
    let trace = match s {
        1 => n as f64 * ops[0].entry(0, 0),
        2 => {
            // tr(T1 T2) = sum_{ij} (T1)_{ij} (T2)_{ji}
            let (a, b) = (&ops[0], &ops[1]);
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += a.entry(i, j) * b.entry(j, i);
                }
            }
            acc
        }
        _ => {
            let mut prod = ops[0].dense();
            for op in &ops[1..s - 1] {
                prod = &prod * op.dense();
            }
            let last = ops[s - 1].dense();
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += prod[(i, j)] * last[(j, i)];
                }
            }
            acc
        }
    };
    Ok(trace / n as f64)
}

/// `lim (1/n) tr(prod T_n(f_k)) = r_0(prod f_k)`.
pub fn trace_limit(generators: &[TorusFunction]) -> Result<f64> {
    product_fourier_coefficient(generators, 0)
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Symmetric square root of a PSD matrix.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    check_order(m.nrows())?;
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| libm::sqrt(v.max(0.0))),
    );
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// Eigenvalues of `sqrt(R) A sqrt(R)`, which coincide with those of `A R`.
pub fn similarity_eigenvalues(a: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    if a.shape() != r.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: r.nrows() });
    }
    let root = psd_sqrt(r)?;
    let mut s = &root * a * &root;
    // symmetrize rounding noise before the symmetric solver
    s = (&s + s.transpose()) * 0.5;
    Ok(s.symmetric_eigenvalues().iter().copied().collect())
}

fn log_det_term(scale: f64, eigenvalues: &[f64]) -> ExtendedReal {
    // -1/2 sum log(1 - 2 scale mu_j), finite iff every factor is positive
    if eigenvalues.iter().any(|&mu| 2.0 * scale * mu >= 1.0) {
        return ExtendedReal::PosInfinity;
    }
    ExtendedReal::Finite(-0.5 * eigenvalues.iter().map(|&mu| libm::log1p(-2.0 * scale * mu)).sum::<f64>())
}

/// `log E exp(z <Y, A Y>)` for `Y ~ N(0, R)`: `-1/2 sum log(1 - 2 z lambda_j)`
/// over the eigenvalues of `A R`, `+inf` once some `z lambda_j >= 1/2`.
pub fn gaussian_quadratic_logmgf(a: &DMatrix<f64>, r: &DMatrix<f64>, z: f64) -> Result<ExtendedReal> {
    check_symmetric(r)?;
    let eig = similarity_eigenvalues(a, r)?;
    if z == 0.0 {
        return Ok(ExtendedReal::Finite(0.0));
    }
    Ok(log_det_term(z, &eig))
}

/// Upper bound on `log E exp(lambda <X, B X>)` for a moving average
/// `X = sum_j a_j xi_{.+j}` whose innovations have sub-Gaussian constant `k`.
/// `f` is the unit-variance density `|g|^2` (the variance is carried by `k`):
/// `-1/2 sum log(1 - 2 k^2 lambda mu_j)` over the eigenvalues `mu_j` of
/// `sqrt(B) T_n(f) sqrt(B)`.
pub fn quadratic_mgf_bound(b: &ToeplitzOperator, f: &TorusFunction, lambda: f64, k: f64) -> Result<ExtendedReal> {
    let a = ToeplitzOperator::build(f, b.order())?.dense();
    quadratic_mgf_bound_dense(&b.dense(), &a, lambda, k)
}

/// Same bound for an arbitrary symmetric PSD `B` and covariance `A`.
pub fn quadratic_mgf_bound_dense(b: &DMatrix<f64>, a: &DMatrix<f64>, lambda: f64, k: f64) -> Result<ExtendedReal> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    if !(k > 0.0) {
        return Err(Error::invalid(format!("sub-Gaussian constant must be positive, got {k}")));
    }
    check_symmetric(b)?;
    let eig = similarity_eigenvalues(a, b)?;
    if lambda == 0.0 {
        return Ok(ExtendedReal::Finite(0.0));
    }
    Ok(log_det_term(k * k * lambda, &eig))
}
