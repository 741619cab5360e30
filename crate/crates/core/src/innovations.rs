//! Innovation laws: moments, excess kurtosis, sub-Gaussian constant, sampling.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Random stream handed to every sampling routine.
pub type RandomStream = ChaCha8Rng;

/// Independent stream for `(master_seed, index)`.
///
/// Streams are keyed by index rather than by worker, so a replicate draws the
/// same numbers however the replicates are partitioned across threads.
pub fn stream(master_seed: u64, index: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Lower and upper end of the log-spaced verification grid for the MGF bound.
pub const MGF_GRID_RANGE: (f64, f64) = (1e-3, 20.0);
pub const MGF_GRID_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Gaussian,
    /// Uniform on `[-a, a]` with `a = sqrt(3 variance)`.
    UniformSymmetric,
    /// `+-sqrt(variance)` with equal probability.
    Rademacher,
    /// With probability `weight` a centered Gaussian of variance
    /// `first_scale * variance`, otherwise one of variance
    /// `(1 - weight * first_scale) / (1 - weight) * variance`.
    ScaledMixture { weight: f64, first_scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnovationLaw {
    family: Family,
    variance: f64,
    fourth_moment: f64,
    kappa4: f64,
    subgaussian_k: Option<f64>,
    lsi_constant: Option<f64>,
    integ_delta: Option<f64>,
}

/// `(E xi^4 - 3 (E xi^2)^2) / (E xi^2)^2`.
pub fn excess_kurtosis(variance: f64, fourth_moment: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::invalid(format!("variance must be positive, got {variance}")));
    }
    if !fourth_moment.is_finite() {
        return Err(Error::invalid("fourth moment is undefined"));
    }
    let v2 = variance * variance;
    if fourth_moment < v2 * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "fourth moment {fourth_moment} below variance^2 {v2}"
        )));
    }
    Ok((fourth_moment - 3.0 * v2) / v2)
}

fn check_variance(variance: f64) -> Result<()> {
    if variance > 0.0 && variance.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("variance must be positive, got {variance}")))
    }
}

impl InnovationLaw {
    fn build(family: Family, variance: f64, fourth_moment: f64) -> Result<Self> {
        let kappa4 = excess_kurtosis(variance, fourth_moment)?;
        let (lsi_constant, integ_delta) = match family {
            Family::Gaussian => (Some(variance), Some(0.25 / variance)),
            Family::UniformSymmetric | Family::Rademacher => (None, Some(1.0 / variance)),
            Family::ScaledMixture { .. } => (None, None),
        };
        let mut law = InnovationLaw {
            family,
            variance,
            fourth_moment,
            kappa4,
            subgaussian_k: None,
            lsi_constant,
            integ_delta,
        };
        if let Family::ScaledMixture { .. } = family {
            let (v1, v2) = law.mixture_variances();
            law.integ_delta = Some(0.25 / v1.max(v2));
        }
        law.subgaussian_k = Some(law.compute_subgaussian_constant());
        Ok(law)
    }

    pub fn gaussian(variance: f64) -> Result<Self> {
        check_variance(variance)?;
        let law = Self::build(Family::Gaussian, variance, 3.0 * variance * variance)?;
        Ok(InnovationLaw { kappa4: 0.0, ..law })
    }

    pub fn uniform(variance: f64) -> Result<Self> {
        check_variance(variance)?;
        // a^4 / 5 with a^2 = 3 variance
        Self::build(Family::UniformSymmetric, variance, 9.0 * variance * variance / 5.0)
    }

    pub fn rademacher(variance: f64) -> Result<Self> {
        check_variance(variance)?;
        Self::build(Family::Rademacher, variance, variance * variance)
    }

    pub fn scaled_mixture(variance: f64, weight: f64, first_scale: f64) -> Result<Self> {
        check_variance(variance)?;
        if !(weight > 0.0 && weight < 1.0) {
            return Err(Error::invalid(format!("mixture weight must lie in (0, 1), got {weight}")));
        }
        if !(first_scale > 0.0 && weight * first_scale < 1.0) {
            return Err(Error::invalid(format!(
                "first_scale must lie in (0, 1/weight), got {first_scale}"
            )));
        }
        let second_scale = (1.0 - weight * first_scale) / (1.0 - weight);
        let fourth = 3.0
            * variance
            * variance
            * (weight * first_scale * first_scale + (1.0 - weight) * second_scale * second_scale);
        Self::build(Family::ScaledMixture { weight, first_scale }, variance, fourth)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn fourth_moment(&self) -> f64 {
        self.fourth_moment
    }

    pub fn kappa4(&self) -> f64 {
        self.kappa4
    }

    pub fn lsi_constant(&self) -> Option<f64> {
        self.lsi_constant
    }

    pub fn integ_delta(&self) -> Option<f64> {
        self.integ_delta
    }

    /// Recomputes the excess kurtosis from the stored moments.
    pub fn excess_kurtosis(&self) -> Result<f64> {
        excess_kurtosis(self.variance, self.fourth_moment)
    }

    /// Smallest `K` with `E exp(y xi) <= exp(K^2 y^2 / 2)`.
    ///
    /// The ratio `2 log E exp(y xi) / y^2` tends to the variance as `y -> 0`,
    /// so `K^2` is the larger of the variance and the maximum of the ratio over
    /// the verification grid; for the Gaussian mixture the `y -> infinity`
    /// limit (the larger component variance) is included as well.
    pub fn subgaussian_constant(&self) -> f64 {
        self.subgaussian_k
            .unwrap_or_else(|| self.compute_subgaussian_constant())
    }

    fn compute_subgaussian_constant(&self) -> f64 {
        if self.family == Family::Gaussian {
            return libm::sqrt(self.variance);
        }
        let mut k2 = mgf_grid()
            .map(|y| 2.0 * self.log_mgf(y) / (y * y))
            .fold(self.variance, f64::max);
        if let Family::ScaledMixture { .. } = self.family {
            let (v1, v2) = self.mixture_variances();
            k2 = k2.max(v1).max(v2);
        }
        libm::sqrt(k2)
    }

    fn mixture_variances(&self) -> (f64, f64) {
        match self.family {
            Family::ScaledMixture { weight, first_scale } => {
                let second = (1.0 - weight * first_scale) / (1.0 - weight);
                (first_scale * self.variance, second * self.variance)
            }
            _ => (self.variance, self.variance),
        }
    }

    /// `log E exp(y xi)`, evaluated stably for large `|y|`.
    pub fn log_mgf(&self, y: f64) -> f64 {
        match self.family {
            Family::Gaussian => 0.5 * self.variance * y * y,
            Family::UniformSymmetric => {
                let x = libm::fabs(libm::sqrt(3.0 * self.variance) * y);
                if x < 0.1 {
                    let x2 = x * x;
                    x2 / 6.0 - x2 * x2 / 180.0 + x2 * x2 * x2 / 2835.0
                } else {
                    // log(sinh(x) / x)
                    x - core::f64::consts::LN_2 + libm::log1p(-libm::exp(-2.0 * x)) - libm::log(x)
                }
            }
            Family::Rademacher => {
                let x = libm::fabs(libm::sqrt(self.variance) * y);
                if x < 0.1 {
                    let x2 = x * x;
                    x2 / 2.0 - x2 * x2 / 12.0 + x2 * x2 * x2 / 45.0
                } else {
                    x + libm::log1p(libm::exp(-2.0 * x)) - core::f64::consts::LN_2
                }
            }
            Family::ScaledMixture { weight, .. } => {
                let (v1, v2) = self.mixture_variances();
                let a = libm::log(weight) + 0.5 * v1 * y * y;
                let b = libm::log(1.0 - weight) + 0.5 * v2 * y * y;
                let m = a.max(b);
                m + libm::log(libm::exp(a - m) + libm::exp(b - m))
            }
        }
    }

    /// One draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Gaussian => libm::sqrt(self.variance) * rng.sample::<f64, _>(StandardNormal),
            Family::UniformSymmetric => {
                let a = libm::sqrt(3.0 * self.variance);
                a * (2.0 * rng.random::<f64>() - 1.0)
            }
            Family::Rademacher => {
                let s = libm::sqrt(self.variance);
                if rng.random::<bool>() {
                    s
                } else {
                    -s
                }
            }
            Family::ScaledMixture { weight, .. } => {
                let (v1, v2) = self.mixture_variances();
                let v = if rng.random::<f64>() < weight { v1 } else { v2 };
                libm::sqrt(v) * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        for x in out.iter_mut() {
            *x = self.draw(rng);
        }
    }

    /// `count` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let mut out = alloc::vec![0.0; count];
        self.sample_into(&mut out, rng);
        out
    }
}

/// The 200 log-spaced points in `[1e-3, 20]` used to verify the MGF bound.
pub fn mgf_grid() -> impl Iterator<Item = f64> {
    let (lo, hi) = MGF_GRID_RANGE;
    let ratio = libm::log(hi / lo);
    (0..MGF_GRID_POINTS)
        .map(move |i| lo * libm::exp(ratio * i as f64 / (MGF_GRID_POINTS - 1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn builtins() -> [InnovationLaw; 4] {
        [
            InnovationLaw::gaussian(1.0).unwrap(),
            InnovationLaw::uniform(1.0).unwrap(),
            InnovationLaw::rademacher(1.0).unwrap(),
            InnovationLaw::scaled_mixture(1.0, 0.5, 0.5).unwrap(),
        ]
    }

    #[test]
    fn kurtosis_of_builtin_families() {
        assert_eq!(InnovationLaw::gaussian(2.5).unwrap().kappa4(), 0.0);
        // E xi^4 = a^4/5 with a = sqrt 3
        let a4 = 9.0;
        assert_relative_eq!(excess_kurtosis(1.0, a4 / 5.0).unwrap(), -1.2, max_relative = 1e-14);
        assert_relative_eq!(InnovationLaw::uniform(1.0).unwrap().kappa4(), -1.2, max_relative = 1e-12);
        assert_relative_eq!(InnovationLaw::uniform(3.0).unwrap().kappa4(), -1.2, max_relative = 1e-12);
        assert_eq!(InnovationLaw::rademacher(1.0).unwrap().kappa4(), -2.0);
        // 3 (0.5 * 0.25 + 0.5 * 2.25) - 3
        assert_relative_eq!(
            InnovationLaw::scaled_mixture(1.0, 0.5, 0.5).unwrap().kappa4(),
            0.75,
            max_relative = 1e-12
        );
    }

    #[test]
    fn moment_invariants() {
        for law in builtins() {
            let v = law.variance();
            assert!(law.fourth_moment() >= v * v);
            assert!(law.kappa4() >= -2.0);
            assert_relative_eq!(law.excess_kurtosis().unwrap(), law.kappa4(), max_relative = 1e-12);
        }
        assert!(excess_kurtosis(1.0, 0.5).is_err());
        assert!(excess_kurtosis(0.0, 1.0).is_err());
        assert!(excess_kurtosis(1.0, f64::NAN).is_err());
        assert!(InnovationLaw::scaled_mixture(1.0, 0.5, 2.5).is_err());
    }

    #[test]
    fn rademacher_is_only_builtin_at_kurtosis_floor() {
        for law in builtins() {
            let at_floor = libm::fabs(law.kappa4() + 2.0) < 1e-12;
            assert_eq!(at_floor, law.family() == Family::Rademacher);
        }
    }

    #[test]
    fn lsi_metadata() {
        assert_eq!(InnovationLaw::rademacher(1.0).unwrap().lsi_constant(), None);
        assert_eq!(InnovationLaw::gaussian(2.0).unwrap().lsi_constant(), Some(2.0));
        for law in builtins() {
            assert!(law.integ_delta().unwrap() > 0.0);
        }
    }

    #[test]
    fn subgaussian_constants() {
        assert_eq!(InnovationLaw::gaussian(1.0).unwrap().subgaussian_constant(), 1.0);
        assert_relative_eq!(InnovationLaw::rademacher(1.0).unwrap().subgaussian_constant(), 1.0, max_relative = 1e-12);
        let k = InnovationLaw::uniform(1.0).unwrap().subgaussian_constant();
        assert!(k <= 1.0 + 1e-12 && k >= 1.0 - 1e-6, "{k}");
        assert_relative_eq!(
            InnovationLaw::scaled_mixture(1.0, 0.5, 0.5).unwrap().subgaussian_constant(),
            libm::sqrt(1.5),
            max_relative = 1e-12
        );
    }

    #[test]
    fn mgf_bound_holds_on_grid() {
        for law in builtins() {
            let k = law.subgaussian_constant();
            for y in mgf_grid() {
                for s in [y, -y] {
                    assert!(law.log_mgf(s) <= 0.5 * k * k * s * s + 1e-12, "{law:?} y={s}");
                }
            }
        }
    }

    #[test]
    fn log_mgf_branches_are_continuous() {
        // closed forms vs series at the switch point
        let u = InnovationLaw::uniform(1.0).unwrap();
        let x: f64 = 0.1;
        let exact = libm::log(libm::sinh(x) / x);
        assert_relative_eq!(u.log_mgf(x / libm::sqrt(3.0)), exact, max_relative = 1e-10);
        let r = InnovationLaw::rademacher(1.0).unwrap();
        assert_relative_eq!(r.log_mgf(0.1), libm::log(libm::cosh(0.1)), max_relative = 1e-10);
        assert_relative_eq!(r.log_mgf(3.0), libm::log(libm::cosh(3.0)), max_relative = 1e-12);
    }

    #[test]
    fn rademacher_support_and_determinism() {
        let law = InnovationLaw::rademacher(1.0).unwrap();
        let xs = law.sample(4, &mut stream(11, 0));
        assert!(xs.iter().all(|&x| x == 1.0 || x == -1.0));
        let g = InnovationLaw::gaussian(1.0).unwrap();
        assert_eq!(g.sample(100, &mut stream(5, 3)), g.sample(100, &mut stream(5, 3)));
        assert_ne!(g.sample(100, &mut stream(5, 3)), g.sample(100, &mut stream(5, 4)));
    }

    #[test]
    fn uniform_draws_stay_in_support() {
        let law = InnovationLaw::uniform(2.0).unwrap();
        let a = libm::sqrt(6.0);
        assert!(law.sample(10_000, &mut stream(1, 1)).iter().all(|x| libm::fabs(*x) <= a));
    }
}
