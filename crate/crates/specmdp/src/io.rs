//! JSON and shortcut forms of coefficients, torus functions and laws, plus
//! CSV writers and content digests.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use specmdp_core::spectral::{grid_theta, spectral_density};
use specmdp_core::{InnovationLaw, MACoefficients, TorusFunction};

use crate::{Error, Result};

/// Geometric coefficients are cut once `|rho|^j` drops below this.
const GEOMETRIC_CUTOFF: f64 = 1e-10;
const GEOMETRIC_MAX_LAST: usize = 400;

fn number(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::validation(format!("cannot parse {what} from {s:?}")))
}

fn numbers(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| number(v, what)).collect()
}

fn geometric(rho: f64) -> Result<MACoefficients> {
    if !(rho.abs() < 1.0) {
        return Err(Error::validation(format!("geom needs |rho| < 1, got {rho}")));
    }
    let last = if rho == 0.0 {
        0
    } else {
        ((GEOMETRIC_CUTOFF.ln() / rho.abs().ln()).ceil() as usize).min(GEOMETRIC_MAX_LAST)
    };
    Ok(MACoefficients::geometric(rho, last)?)
}

/// Coefficients as `{"support_lo": .., "values": [..]}` or a shortcut string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientsSpec {
    Shortcut(String),
    Explicit { support_lo: i64, values: Vec<f64> },
}

impl CoefficientsSpec {
    /// Shortcuts: `iid`, `ma1:b`, `geom:rho`, `lo:a,b,c` (explicit support start).
    pub fn resolve(&self) -> Result<MACoefficients> {
        match self {
            CoefficientsSpec::Explicit { support_lo, values } => Ok(MACoefficients::new(*support_lo, values.clone())?),
            CoefficientsSpec::Shortcut(s) => parse_coefficients(s),
        }
    }
}

pub fn parse_coefficients(s: &str) -> Result<MACoefficients> {
    let s = s.trim();
    if s == "iid" {
        return Ok(MACoefficients::iid());
    }
    match s.split_once(':') {
        Some(("ma1", b)) => Ok(MACoefficients::ma1(number(b, "ma1 coefficient")?)),
        Some(("geom", rho)) => geometric(number(rho, "geometric ratio")?),
        Some((lo, values)) => {
            let lo = lo
                .trim()
                .parse::<i64>()
                .map_err(|_| Error::validation(format!("unknown coefficient shortcut {s:?}")))?;
            Ok(MACoefficients::new(lo, numbers(values, "coefficient")?)?)
        }
        None => Err(Error::validation(format!("unknown coefficient shortcut {s:?}"))),
    }
}

/// A torus function as Fourier coefficients, a cosine series, or a shortcut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Shortcut(String),
    Fourier { offset: i64, fourier: Vec<f64> },
    Cosine { cosine: Vec<f64> },
}

impl FunctionSpec {
    pub fn resolve(&self) -> Result<TorusFunction> {
        match self {
            FunctionSpec::Shortcut(s) => parse_function(s),
            FunctionSpec::Fourier { offset, fourier } => Ok(TorusFunction::from_fourier(*offset, fourier)),
            FunctionSpec::Cosine { cosine } => Ok(TorusFunction::from_cosine_series(cosine)),
        }
    }
}

/// Shortcuts: `iid` (the constant 1), `const:c`, `cos`, `2cos`, `cos:c0,c1,..`
/// (cosine series), and the unit-variance spectral densities `ma1:b`, `geom:rho`.
pub fn parse_function(s: &str) -> Result<TorusFunction> {
    let s = s.trim();
    match s {
        "iid" | "1" => return Ok(TorusFunction::constant(1.0)),
        "cos" => return Ok(TorusFunction::cosine(1.0, 1)),
        "2cos" => return Ok(TorusFunction::cosine(2.0, 1)),
        _ => {}
    }
    match s.split_once(':') {
        Some(("const", c)) => Ok(TorusFunction::constant(number(c, "constant")?)),
        Some(("cos", c)) => Ok(TorusFunction::from_cosine_series(&numbers(c, "cosine coefficient")?)),
        Some(("ma1", _)) | Some(("geom", _)) => Ok(spectral_density(&parse_coefficients(s)?, 1.0)?),
        _ => Err(Error::validation(format!("unknown function shortcut {s:?}"))),
    }
}

/// `{"family": "gaussian", "variance": 1.0}`; the mixture also takes
/// `weight` and `first_scale`. A bare family name means unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LawSpec {
    Family(String),
    Full {
        family: String,
        #[serde(default = "one")]
        variance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        first_scale: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl LawSpec {
    pub fn resolve(&self) -> Result<InnovationLaw> {
        match self {
            LawSpec::Family(f) => build_law(f, 1.0, None, None),
            LawSpec::Full { family, variance, weight, first_scale } => build_law(family, *variance, *weight, *first_scale),
        }
    }
}

pub const DEFAULT_MIXTURE_WEIGHT: f64 = 0.5;
pub const DEFAULT_MIXTURE_FIRST_SCALE: f64 = 0.5;

pub fn build_law(family: &str, variance: f64, weight: Option<f64>, first_scale: Option<f64>) -> Result<InnovationLaw> {
    let law = match family {
        "gaussian" => InnovationLaw::gaussian(variance),
        "uniform" | "uniform_symmetric" => InnovationLaw::uniform(variance),
        "rademacher" => InnovationLaw::rademacher(variance),
        "scaled_mixture" | "mixture" => InnovationLaw::scaled_mixture(
            variance,
            weight.unwrap_or(DEFAULT_MIXTURE_WEIGHT),
            first_scale.unwrap_or(DEFAULT_MIXTURE_FIRST_SCALE),
        ),
        other => return Err(Error::validation(format!("unknown innovation family {other:?}"))),
    };
    Ok(law?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientsJson {
    pub support_lo: i64,
    pub values: Vec<f64>,
}

impl From<&MACoefficients> for CoefficientsJson {
    fn from(a: &MACoefficients) -> Self {
        CoefficientsJson { support_lo: a.support_lo(), values: a.values().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierJson {
    pub offset: i64,
    pub fourier: Vec<f64>,
}

impl FourierJson {
    pub fn from_function(h: &TorusFunction) -> Result<Self> {
        let c = h.fourier()?;
        Ok(FourierJson { offset: -(h.degree()? as i64), fourier: c.to_vec() })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Renders rows with a header as CSV.
pub fn csv_bytes<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::validation(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row.as_ref()).map_err(io_err)?;
    }
    w.into_inner().map_err(|e| Error::validation(format!("csv encoding failed: {e}")))
}

/// Shortest round-trip formatting; non-finite values as `inf`, `-inf`, `nan`.
pub fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// `(theta, value)` rows on the uniform grid.
pub fn grid_csv(values: &[f64]) -> Result<Vec<u8>> {
    let g = values.len();
    let rows: Vec<Vec<String>> = values
        .iter()
        .enumerate()
        .map(|(m, v)| vec![fmt(grid_theta(m, g)), fmt(*v)])
        .collect();
    csv_bytes(&["theta", "value"], &rows)
}

pub fn column_csv(name: &str, values: &[f64]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = values.iter().map(|v| vec![fmt(*v)]).collect();
    csv_bytes(&[name], &rows)
}

pub fn matrix_csv(m: &nalgebra::DMatrix<f64>) -> Result<Vec<u8>> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| fmt(m[(i, j)])).collect())
        .collect();
    csv_bytes(&header, &rows)
}
