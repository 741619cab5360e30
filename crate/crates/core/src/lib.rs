//! Numerical core for moderate deviations of moving-average processes.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation: innovation laws and their moments, spectral objects on
//! the torus, path simulation and periodogram statistics, Toeplitz operators
//! with their quadratic-form MGF formulas, and the closed-form covariance
//! matrices and rate functions. IO, parallel experiments and the CLI live in
//! the `specmdp` crate.
//!
//! Fourier convention used throughout: for a function `h` on the torus
//! `[-pi, pi)`, `r_k(h) = (1/2pi) * integral of exp(i k theta) h(theta)`, so
//! `h(theta) = sum_k r_k(h) exp(-i k theta)`. Norms `||h||_q` integrate
//! against `d theta` *without* the `1/2pi` factor.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod fft;

pub mod innovations;
pub mod process;
pub mod rates;
pub mod spectral;
pub mod toeplitz;

pub use error::{Error, Result};
pub use innovations::{Family, InnovationLaw};
pub use process::{Functional, FunctionalDescriptor, SamplePath};

pub use rates::{CovarianceMatrix, RateBranch, RateEvaluation};
pub use spectral::{MACoefficients, TorusFunction};
pub use toeplitz::{ExtendedReal, ToeplitzOperator};

/// Grid size used when an operation needs samples and none were supplied.
pub const DEFAULT_GRID: usize = 4096;

/// Largest order for which dense eigensolves are attempted.
pub const DENSE_LIMIT: usize = 4096;
