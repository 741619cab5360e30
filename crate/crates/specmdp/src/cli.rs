//! `specmdp` command line: argument parsing, dispatch, output files and the run manifest.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use specmdp_core::innovations::stream;
use specmdp_core::process::{periodogram, simulate_path};
use specmdp_core::rates::{rate_functional, rate_functional_variational, rate_scalar, RateEvaluation};
use specmdp_core::spectral::spectral_density;
use specmdp_core::toeplitz::{norm_bound, operator_norm, trace_limit, trace_product};
use specmdp_core::{ExtendedReal, ToeplitzOperator, TorusFunction, DEFAULT_GRID};

use crate::config::{ExperimentConfig, SEED_ENV};
use crate::io::{
    build_law, column_csv, csv_bytes, fmt, grid_csv, matrix_csv, parse_coefficients, parse_function, sha256_hex,
    write_bytes, CoefficientsJson, CoefficientsSpec, FourierJson, FunctionSpec, LawSpec,
};
use crate::montecarlo::{self, ExperimentReport, Harness};
use crate::verification;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "specmdp", version, about = "Moderate-deviation numerics for moving-average periodograms")]
pub struct Cli {
    /// Directory receiving all output files and the manifest.
    #[arg(long, global = true, default_value = "specmdp-out")]
    pub out: PathBuf,
    /// Master seed; overrides the config and the SPECMDP_SEED variable.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for Monte Carlo (results do not depend on it).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one moving-average path.
    Simulate {
        #[command(flatten)]
        process: ProcessArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        lag_extension: usize,
    },
    /// Spectral density on the uniform grid.
    Spectrum {
        #[arg(long, default_value = "iid")]
        coeffs: String,
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
    },
    /// Periodogram of one simulated path.
    Periodogram {
        #[command(flatten)]
        process: ProcessArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Toeplitz operators: traces, norms, bounds, dense matrices.
    Toeplitz {
        #[command(subcommand)]
        op: ToeplitzOp,
    },
    /// Scalar rate `I^l(z)` or, with `--eta`, the functional rate.
    Rate {
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        kappa4: f64,
        #[arg(long, default_value_t = 0)]
        lag: usize,
        #[arg(long, allow_negative_numbers = true)]
        z: Option<f64>,
        #[arg(long)]
        eta: Option<String>,
        /// Also evaluate the variational form at this cosine degree.
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Covariance of autocorrelation sums (or of a catalog functional) against Sigma.
    Variance(ExperimentArgs),
    /// CLT variance of the periodogram functional.
    Clt(ExperimentArgs),
    /// Moderate-deviation tail trend.
    Tail(ExperimentArgs),
    /// Monte Carlo quadratic-form MGF against its bound.
    Mgf(ExperimentArgs),
    /// Run the acceptance suite.
    Verify {
        /// Restrict to these criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    #[arg(long, default_value = "iid")]
    pub coeffs: String,
    #[arg(long, default_value = "gaussian")]
    pub law: String,
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
}

#[derive(Debug, Subcommand)]
pub enum ToeplitzOp {
    /// `(1/n) tr(T_n(f) T_n(h))`.
    Trace {
        #[arg(long)]
        f: String,
        #[arg(long)]
        h: String,
        #[arg(long)]
        n: usize,
    },
    /// Operator norm of `T_n(h)`.
    Norm {
        #[arg(long)]
        h: String,
        #[arg(long)]
        n: usize,
    },
    /// `n^{1/q} ||h||_q` next to the operator norm.
    Bound {
        #[arg(long)]
        h: String,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        n: usize,
    },
    /// Dense `T_n(h)` as CSV.
    Matrix {
        #[arg(long)]
        h: String,
        #[arg(long)]
        n: usize,
    },
    /// Trace-product convergence table.
    Convergence {
        #[arg(long)]
        f: String,
        #[arg(long)]
        h: String,
        #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024")]
        ns: Vec<usize>,
    },
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config JSON; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub coeffs: Option<String>,
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub b_exponent: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                ExperimentConfig::from_json(&text)?
            }
            None => {
                let replicates = self
                    .replicates
                    .ok_or_else(|| Error::validation("--replicates is required without --config"))?;
                if self.n.is_empty() {
                    return Err(Error::validation("--n is required without --config"));
                }
                ExperimentConfig::new("iid", "gaussian", self.n.clone(), replicates)
            }
        };
        if let Some(c) = &self.coeffs {
            cfg.coeffs = CoefficientsSpec::Shortcut(c.clone());
        }
        if let Some(l) = &self.law {
            cfg.law = LawSpec::Family(l.clone());
        }
        if !self.n.is_empty() {
            cfg.n_ladder = self.n.clone();
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if let Some(l) = self.lags {
            cfg.lags = l;
        }
        if let Some(h) = &self.h {
            cfg.h = Some(FunctionSpec::Shortcut(h.clone()));
        }
        if let Some(f) = &self.functional {
            cfg.functional = Some(f.clone());
        }
        if let Some(x) = self.threshold {
            cfg.threshold = x;
        }
        if let Some(b) = self.b_exponent {
            cfg.b_exponent = b;
        }
        if !self.lambdas.is_empty() {
            cfg.lambdas = self.lambdas.clone();
        }
        Ok(cfg)
    }
}

/// Result of a subcommand before anything touches the disk.
struct Output {
    stdout: String,
    files: Vec<(String, Vec<u8>)>,
    config: Value,
    status: i32,
}

impl Output {
    fn new(stdout: String, config: Value) -> Self {
        Output { stdout, files: Vec::new(), config, status: EXIT_OK }
    }

    fn file(mut self, name: &str, bytes: Vec<u8>) -> Self {
        self.files.push((name.into(), bytes));
        self
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config: &'a Value,
    outputs: Vec<ManifestEntry>,
}

fn resolve_seed(flag: Option<u64>, configured: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(configured),
    }
}

fn extended(v: ExtendedReal) -> Value {
    match v {
        ExtendedReal::Finite(x) => json!(x),
        ExtendedReal::PosInfinity => json!("inf"),
    }
}

fn evaluation(r: &RateEvaluation) -> Value {
    json!({ "value": extended(r.value), "branch": r.branch.name() })
}

fn function(s: &str) -> Result<TorusFunction> {
    parse_function(s)
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate { .. } => "simulate",
        Command::Spectrum { .. } => "spectrum",
        Command::Periodogram { .. } => "periodogram",
        Command::Toeplitz { .. } => "toeplitz",
        Command::Rate { .. } => "rate",
        Command::Variance(_) => "variance",
        Command::Clt(_) => "clt",
        Command::Tail(_) => "tail",
        Command::Mgf(_) => "mgf",
        Command::Verify { .. } => "verify",
    }
}

fn harness(workers: Option<usize>) -> Result<Harness> {
    Harness::new(workers.unwrap_or_else(Harness::default_workers))
}

fn experiment(cli: &Cli, args: &ExperimentArgs, kind: &str) -> Result<Output> {
    let mut cfg = args.config()?;
    cfg.master_seed = resolve_seed(cli.seed, cfg.master_seed)?;
    let exp = cfg.resolve()?;
    let h = harness(cli.workers)?;
    let report: ExperimentReport = match kind {
        "variance" if exp.functional.is_some() => montecarlo::sigma_f_estimate(&exp, &h)?.report,
        "variance" => montecarlo::variance_convergence(&exp, &h)?,
        "clt" => montecarlo::clt_check(&exp, &h)?,
        "tail" => montecarlo::mdp_tail_trend(&exp, &h)?,
        _ => montecarlo::mgf_domination(&exp, &h)?,
    };
    let summary = json!({
        "experiment": report.experiment,
        "pass": report.pass,
        "config_digest": report.config_digest,
        "rows": report.rows.len(),
    });
    Ok(Output::new(summary.to_string(), serde_json::to_value(&cfg)?)
        .file("report.csv", report.to_csv()?)
        .file("report.json", report.to_json()?))
}

fn toeplitz(op: &ToeplitzOp) -> Result<Output> {
    match op {
        ToeplitzOp::Trace { f, h, n } => {
            let gens = [function(f)?, function(h)?];
            let value = trace_product(&gens, *n)?;
            let limit = trace_limit(&gens)?;
            let body = json!({ "value": value, "limit": limit });
            let cfg = json!({ "op": "trace", "f": f, "h": h, "n": n });
            Ok(Output::new(fmt(value), cfg).file("trace.json", serde_json::to_vec_pretty(&body)?))
        }
        ToeplitzOp::Norm { h, n } => {
            let norm = operator_norm(&ToeplitzOperator::build(&function(h)?, *n)?)?;
            let cfg = json!({ "op": "norm", "h": h, "n": n });
            Ok(Output::new(fmt(norm), cfg).file("norm.json", serde_json::to_vec_pretty(&json!({ "operator_norm": norm }))?))
        }
        ToeplitzOp::Bound { h, q, n } => {
            if !(*q >= 1.0) {
                return Err(Error::validation(format!("q must be >= 1, got {q}")));
            }
            let hf = function(h)?;
            let bound = norm_bound(&hf, *q, *n)?;
            let norm = operator_norm(&ToeplitzOperator::build(&hf, *n)?)?;
            let body = json!({ "bound": bound, "operator_norm": norm, "holds": norm <= bound });
            let cfg = json!({ "op": "bound", "h": h, "q": q, "n": n });
            Ok(Output::new(body.to_string(), cfg).file("bound.json", serde_json::to_vec_pretty(&body)?))
        }
        ToeplitzOp::Matrix { h, n } => {
            let t = ToeplitzOperator::build(&function(h)?, *n)?;
            let cfg = json!({ "op": "matrix", "h": h, "n": n });
            Ok(Output::new(format!("{n}x{n} matrix written"), cfg).file("matrix.csv", matrix_csv(&t.dense())?))
        }
        ToeplitzOp::Convergence { f, h, ns } => {
            let gens = [function(f)?, function(h)?];
            let limit = trace_limit(&gens)?;
            let mut rows = Vec::new();
            for &n in ns {
                let v = trace_product(&gens, n)?;
                rows.push(vec![n.to_string(), fmt(v), fmt(limit), fmt((v - limit).abs())]);
            }
            let cfg = json!({ "op": "convergence", "f": f, "h": h, "ns": ns });
            Ok(Output::new(format!("limit {}", fmt(limit)), cfg)
                .file("convergence.csv", csv_bytes(&["n", "value", "limit", "error"], &rows)?))
        }
    }
}

fn rate(f: &str, kappa4: f64, lag: usize, z: Option<f64>, eta: Option<&str>, degree: Option<usize>) -> Result<Output> {
    let fd = function(f)?;
    let mut inputs = json!({ "f": f, "kappa4": kappa4 });
    let mut body = match (eta, z) {
        (Some(e), _) => {
            inputs["eta"] = json!(e);
            let ef = function(e)?;
            let mut v = evaluation(&rate_functional(&ef, &fd, kappa4)?);
            if let Some(d) = degree {
                inputs["degree"] = json!(d);
                v["variational"] = json!(rate_functional_variational(&ef, &fd, kappa4, d)?);
            }
            v
        }
        (None, Some(z)) => {
            inputs["lag"] = json!(lag);
            inputs["z"] = json!(z);
            evaluation(&rate_scalar(z, &fd, kappa4, lag)?)
        }
        (None, None) => return Err(Error::validation("rate needs --z (scalar rate) or --eta (functional rate)")),
    };
    body["inputs_digest"] = json!(sha256_hex(inputs.to_string().as_bytes()));
    let text = body.to_string();
    Ok(Output::new(text.clone(), inputs).file("rate.json", text.into_bytes()))
}

fn dispatch(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Simulate { process, n, lag_extension } => {
            let seed = resolve_seed(cli.seed, 0)?;
            let coeffs = parse_coefficients(&process.coeffs)?;
            let law = build_law(&process.law, process.variance, None, None)?;
            let path = simulate_path(&coeffs, &law, *n, *lag_extension, &mut stream(seed, 0))?;
            let cfg = json!({
                "coeffs": CoefficientsJson::from(&coeffs), "law": process.law, "variance": process.variance,
                "n": n, "lag_extension": lag_extension, "seed": seed,
            });
            Ok(Output::new(format!("{} values written", path.values().len()), cfg).file("path.csv", column_csv("x", path.values())?))
        }
        Command::Spectrum { coeffs, variance, grid } => {
            let a = parse_coefficients(coeffs)?;
            let f = spectral_density(&a, *variance)?;
            let values = f.sample_grid(*grid)?;
            let fourier = FourierJson::from_function(&f)?;
            let cfg = json!({ "coeffs": CoefficientsJson::from(&a), "variance": variance, "grid": grid });
            Ok(Output::new(serde_json::to_string(&fourier)?, cfg)
                .file("spectrum.csv", grid_csv(&values)?)
                .file("spectrum.json", serde_json::to_vec_pretty(&fourier)?))
        }
        Command::Periodogram { process, n, grid } => {
            let seed = resolve_seed(cli.seed, 0)?;
            let coeffs = parse_coefficients(&process.coeffs)?;
            let law = build_law(&process.law, process.variance, None, None)?;
            let g = grid.unwrap_or_else(|| (*n).next_power_of_two().max(2));
            let path = simulate_path(&coeffs, &law, *n, 0, &mut stream(seed, 0))?;
            let p = periodogram(&path, g)?;
            let cfg = json!({
                "coeffs": CoefficientsJson::from(&coeffs), "law": process.law, "variance": process.variance,
                "n": n, "grid": g, "seed": seed,
            });
            let values = p.grid().expect("periodogram carries its grid");
            Ok(Output::new(format!("{g} grid points written"), cfg).file("periodogram.csv", grid_csv(values)?))
        }
        Command::Toeplitz { op } => toeplitz(op),
        Command::Rate { f, kappa4, lag, z, eta, degree } => rate(f, *kappa4, *lag, *z, eta.as_deref(), *degree),
        Command::Variance(a) => experiment(cli, a, "variance"),
        Command::Clt(a) => experiment(cli, a, "clt"),
        Command::Tail(a) => experiment(cli, a, "tail"),
        Command::Mgf(a) => experiment(cli, a, "mgf"),
        Command::Verify { only } => {
            let seed = resolve_seed(cli.seed, verification::DEFAULT_SEED)?;
            let h = harness(cli.workers)?;
            let outcomes: Vec<_> = verification::criteria()
                .iter()
                .filter(|c| only.is_empty() || only.contains(&c.id))
                .map(|c| {
                    let o = c.run(&h, seed);
                    eprintln!("criterion {} finished in {:.1}s", o.id, o.elapsed.as_secs_f64());
                    o
                })
                .collect();
            if outcomes.is_empty() {
                return Err(Error::validation("no criterion matches --only"));
            }
            let lines: Vec<String> = outcomes.iter().map(verification::outcome_line).collect();
            let cfg = json!({ "seed": seed, "only": only });
            let mut out = Output::new(lines.join("\n"), cfg).file("verify.csv", verification::outcomes_csv(&outcomes)?);
            if outcomes.iter().any(|o| !o.pass) {
                out.status = EXIT_VERIFY_FAILED;
            }
            Ok(out)
        }
    }
}

fn write_outputs(dir: &Path, subcommand: &str, out: &Output) -> Result<()> {
    let mut entries = Vec::new();
    for (name, bytes) in &out.files {
        write_bytes(&dir.join(name), bytes)?;
        entries.push(ManifestEntry { file: name.clone(), sha256: sha256_hex(bytes) });
    }
    let manifest = Manifest { subcommand, config: &out.config, outputs: entries };
    write_bytes(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)
}

/// Parses `args` (including the program name), runs, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = dispatch(&cli).and_then(|out| {
        write_outputs(&cli.out, subcommand_name(&cli.command), &out)?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            println!("{}", out.stdout);
            out.status
        }
        Err(e) => {
            eprintln!("specmdp: {e}");
            e.exit_code()
        }
    }
}
