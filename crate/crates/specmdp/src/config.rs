//! Experiment configuration: the JSON form and its validated resolution.

use serde::{Deserialize, Serialize};
use specmdp_core::{Functional, FunctionalDescriptor, InnovationLaw, MACoefficients, TorusFunction};

use crate::io::{sha256_hex, CoefficientsSpec, FunctionSpec, LawSpec};
use crate::{Error, Result};

/// Environment variable that overrides `master_seed`.
pub const SEED_ENV: &str = "SPECMDP_SEED";

/// Pass when `|estimate - target| <= max(std_errors * SE, relative * |target|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancePolicy {
    pub std_errors: f64,
    pub relative: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy { std_errors: 5.0, relative: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_coeffs")]
    pub coeffs: CoefficientsSpec,
    #[serde(default = "default_law")]
    pub law: LawSpec,
    pub n_ladder: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "default_b_exponent")]
    pub b_exponent: f64,
    #[serde(default)]
    pub lags: usize,
    /// Periodogram weight for `clt`, or the generator of `B` for `mgf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<FunctionSpec>,
    /// `identity`, `product_lags` or `quadratic_smooth`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub tolerance: TolerancePolicy,
}

fn default_coeffs() -> CoefficientsSpec {
    CoefficientsSpec::Shortcut("iid".into())
}

fn default_law() -> LawSpec {
    LawSpec::Family("gaussian".into())
}

fn default_b_exponent() -> f64 {
    0.1
}

fn default_threshold() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn new(coeffs: &str, law: &str, n_ladder: Vec<usize>, replicates: usize) -> Self {
        ExperimentConfig {
            coeffs: CoefficientsSpec::Shortcut(coeffs.into()),
            law: LawSpec::Family(law.into()),
            n_ladder,
            replicates,
            b_exponent: default_b_exponent(),
            lags: 0,
            h: None,
            functional: None,
            threshold: default_threshold(),
            lambdas: Vec::new(),
            master_seed: 0,
            tolerance: TolerancePolicy::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve(&self) -> Result<Experiment> {
        if self.n_ladder.is_empty() || self.n_ladder.contains(&0) {
            return Err(Error::validation("n_ladder must be a nonempty list of positive integers"));
        }
        if self.replicates == 0 {
            return Err(Error::validation("replicates must be positive"));
        }
        if !(self.b_exponent > 0.0 && self.b_exponent < 0.5) {
            return Err(Error::validation(format!("b_exponent must lie in (0, 0.5), got {}", self.b_exponent)));
        }
        if !self.threshold.is_finite() {
            return Err(Error::validation("threshold must be finite"));
        }
        let t = self.tolerance;
        if !(t.std_errors >= 0.0 && t.relative >= 0.0) {
            return Err(Error::validation("tolerance entries must be nonnegative"));
        }
        let functional = self.functional.as_deref().map(|f| parse_functional(f, self.lags)).transpose()?;
        let h = self.h.as_ref().map(FunctionSpec::resolve).transpose()?;
        if let Some(h) = &h {
            if !h.is_even() {
                return Err(Error::Core(specmdp_core::Error::NotEven));
            }
        }
        Ok(Experiment {
            coeffs: self.coeffs.resolve()?,
            law: self.law.resolve()?,
            n_ladder: self.n_ladder.clone(),
            replicates: self.replicates,
            b_exponent: self.b_exponent,
            lags: self.lags,
            h,
            functional,
            threshold: self.threshold,
            lambdas: self.lambdas.clone(),
            master_seed: self.master_seed,
            policy: self.tolerance,
            digest: self.digest(),
        })
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn parse_functional(name: &str, lags: usize) -> Result<FunctionalDescriptor> {
    let kind = match name {
        "identity" => Functional::Identity,
        "product_lags" => Functional::ProductLags { max_lag: lags },
        "quadratic_smooth" => Functional::QuadraticSmooth,
        other => return Err(Error::validation(format!("unknown functional {other:?}"))),
    };
    Ok(FunctionalDescriptor::new(kind))
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub coeffs: MACoefficients,
    pub law: InnovationLaw,
    pub n_ladder: Vec<usize>,
    pub replicates: usize,
    pub b_exponent: f64,
    pub lags: usize,
    pub h: Option<TorusFunction>,
    pub functional: Option<FunctionalDescriptor>,
    pub threshold: f64,
    pub lambdas: Vec<f64>,
    pub master_seed: u64,
    pub policy: TolerancePolicy,
    pub digest: String,
}

impl Experiment {
    pub fn largest_n(&self) -> usize {
        *self.n_ladder.iter().max().expect("nonempty ladder")
    }
}
