//! The `oscillab` command line.

pub mod selftest;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::experiments::{
    atom_image_l1, config_hash, counterexample_growth, decay_sweep_with, sweep_csv, sweep_json,
    sweep_probe, sweep_svg, uniformity_sweep, AtomSeriesConfig, CounterexampleConfig,
    DampingConfig, ExperimentError, PhaseSpec, SweepConfig, UniformityConfig,
};
use crate::numerics::{
    auto_grid, build_cutoff, build_kernel, opnorm_l2_vector, opnorm_lp_lower_from,
    opnorm_lp_upper_with, BoxRegion, CutoffSpec, GridCaps, GridSpec, L2Options, LpUpperOptions,
    NumericsError,
};
use crate::predict::{self, exact, PredictError};
use crate::wpoly::{detect_weights, factorize, WPoly, WPolyError, DEFAULT_N0};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Math(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("self-test failed: {0} suite(s)")]
    Selftest(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Math(_) => 2,
            CliError::Io(_) => 3,
            CliError::Selftest(_) => 4,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidConfig(m) => CliError::Parse(m),
            other => CliError::Math(other.to_string()),
        }
    }
}

impl From<WPolyError> for CliError {
    fn from(e: WPolyError) -> Self {
        CliError::Math(e.to_string())
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        CliError::Math(e.to_string())
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        CliError::Math(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "oscillab", version, about = "Oscillatory integral operator decay lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory for CSV, JSON and SVG files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write an SVG chart (sweeps).
    #[arg(long, global = true)]
    pub plot: bool,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weights, Hessian factorization and exponent predictions for a polynomial.
    Analyze(ConfigArg),
    /// One norm bracket at a single lambda.
    Norm(RunArgs),
    /// Lambda sweep with slope fits.
    Sweep(RunArgs),
    /// Normalized constants over a random coefficient family.
    Uniformity(ConfigArg),
    /// Growth of the radial counterexample.
    Counterexample(ConfigArg),
    /// L^1 images of shrinking atoms.
    Atoms(ConfigArg),
    /// Exact-arithmetic and small numeric invariant suites.
    Selftest,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// JSON config, or a JSON report from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub quadrant: Option<u8>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub lambda_count: Option<usize>,
    /// Exponent as NUM/DEN or an integer.
    #[arg(long, value_parser = parse_ratio)]
    pub p: Option<Rational64>,
}

fn parse_ratio(s: &str) -> Result<Rational64, String> {
    let bad = || format!("expected NUM/DEN, got {s:?}");
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<i64>().map_err(|_| bad())?, d.trim().parse::<i64>().map_err(|_| bad())?),
        None => (s.trim().parse::<i64>().map_err(|_| bad())?, 1),
    };
    if d == 0 {
        return Err(bad());
    }
    Ok(Rational64::new(n, d))
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(out) => {
            // A closed pipe downstream is not a failure of the run.
            let _ = writeln!(std::io::stdout(), "{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Reads a config of type `T`; a report with an embedded `config` is
/// accepted in its place.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let inner = match &value {
        Value::Object(o) if o.get("tool") == Some(&json!("oscillab")) && o.contains_key("config") => {
            o["config"].clone()
        }
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| CliError::Parse(e.to_string()))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value serializes")
}

fn report<T: Serialize>(config: &T, seed: u64, result: Value) -> Value {
    json!({
        "tool": "oscillab",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config_hash": config_hash(config),
        "config": config,
        "result": result,
    })
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        // Fails only if a pool already exists, which keeps the earlier cap.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Analyze(a) => {
            let poly: WPoly = load_config(&a.config)?;
            let v = analyze(&poly)?;
            if let Some(dir) = out {
                write_out(dir, "analysis.json", &pretty(&v))?;
            }
            Ok(pretty(&v))
        }
        Command::Norm(a) => {
            let mut cfg: NormConfig = load_config(&a.config)?;
            if let Some(p) = a.p {
                cfg.p = p;
            }
            if a.quadrant.is_some() {
                cfg.quadrant = a.quadrant;
            }
            let seed = cli.seed.unwrap_or(cfg.seed);
            cfg.seed = seed;
            let v = report(&cfg, seed, run_norm(&cfg)?);
            if let Some(dir) = out {
                write_out(dir, "norm.json", &pretty(&v))?;
            }
            Ok(pretty(&v))
        }
        Command::Sweep(a) => {
            let mut cfg: SweepConfig = load_config(&a.config)?;
            apply_overrides(&mut cfg, a, cli.seed);
            let probe = cached_probe(&cfg)?;
            let result = decay_sweep_with(&cfg, Some(probe))?;
            let v = sweep_json(&cfg, &result);
            if let Some(dir) = out {
                write_out(dir, "sweep.csv", &sweep_csv(&cfg, &result)?)?;
                write_out(dir, "sweep.json", &pretty(&v))?;
                if cli.plot {
                    let header = format!(
                        "<!-- oscillab {} seed={} config_sha256={} -->\n",
                        env!("CARGO_PKG_VERSION"),
                        cfg.seed,
                        config_hash(&cfg)
                    );
                    write_out(dir, "sweep.svg", &(header + &sweep_svg(&result)))?;
                }
            }
            Ok(pretty(&v))
        }
        Command::Uniformity(a) => {
            let mut cfg: UniformityConfig = load_config(&a.config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let r = uniformity_sweep(&cfg)?;
            let v = report(&cfg, cfg.seed, serde_json::to_value(&r).expect("report serializes"));
            if let Some(dir) = out {
                let mut csv = format!("{}\ndraw,norm_upper,normalized\n", header_line(&cfg, cfg.seed));
                for (i, d) in r.draws.iter().enumerate() {
                    csv.push_str(&format!("{i},{:e},{:e}\n", d.norm_upper, d.normalized));
                }
                write_out(dir, "uniformity.csv", &csv)?;
                write_out(dir, "uniformity.json", &pretty(&v))?;
            }
            Ok(pretty(&v))
        }
        Command::Counterexample(a) => {
            let cfg: CounterexampleConfig = load_config(&a.config)?;
            let seed = cli.seed.unwrap_or(0);
            let r = counterexample_growth(&cfg)?;
            let mut result = serde_json::to_value(&r).expect("result serializes");
            result["growth_exponent"] = json!(r.exponent());
            let v = report(&cfg, seed, result);
            if let Some(dir) = out {
                let mut csv = format!("{}\nK,value\n", header_line(&cfg, seed));
                for (k, x) in r.ks.iter().zip(&r.values) {
                    csv.push_str(&format!("{k},{x:e}\n"));
                }
                write_out(dir, "counterexample.csv", &csv)?;
                write_out(dir, "counterexample.json", &pretty(&v))?;
            }
            Ok(pretty(&v))
        }
        Command::Atoms(a) => {
            let cfg: AtomSeriesConfig = load_config(&a.config)?;
            let seed = cli.seed.unwrap_or(0);
            let r = atom_image_l1(&cfg)?;
            let v = report(&cfg, seed, serde_json::to_value(&r).expect("report serializes"));
            if let Some(dir) = out {
                let mut csv = format!("{}\nlength,l1\n", header_line(&cfg, seed));
                for (l, x) in r.lengths.iter().zip(&r.l1) {
                    csv.push_str(&format!("{l:e},{x:e}\n"));
                }
                write_out(dir, "atoms.csv", &csv)?;
                write_out(dir, "atoms.json", &pretty(&v))?;
            }
            Ok(pretty(&v))
        }
        Command::Selftest => {
            let seed = cli.seed.unwrap_or(0);
            let suites = selftest::run_all(&selftest::Formulas::default(), seed);
            let failed = suites.iter().filter(|s| !s.passed()).count();
            let lines: Vec<String> = suites
                .iter()
                .map(|s| {
                    format!(
                        "{} {} ({} cases){}",
                        if s.passed() { "PASS" } else { "FAIL" },
                        s.name,
                        s.cases,
                        s.first_failure.as_deref().map(|f| format!(": {f}")).unwrap_or_default()
                    )
                })
                .collect();
            if failed > 0 {
                eprintln!("{}", lines.join("\n"));
                return Err(CliError::Selftest(failed));
            }
            Ok(lines.join("\n"))
        }
    }
}

fn header_line<T: Serialize>(cfg: &T, seed: u64) -> String {
    format!("# oscillab {} seed={seed} config_sha256={}", env!("CARGO_PKG_VERSION"), config_hash(cfg))
}

fn apply_overrides(cfg: &mut SweepConfig, a: &RunArgs, seed: Option<u64>) {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = a.tolerance {
        cfg.tolerance = Some(t);
    }
    if a.quadrant.is_some() {
        cfg.quadrant = a.quadrant;
    }
    if let Some(v) = a.lambda_min {
        cfg.lambda.min = v;
    }
    if let Some(v) = a.lambda_max {
        cfg.lambda.max = v;
    }
    if let Some(v) = a.lambda_count {
        cfg.lambda.count = v;
    }
    if let Some(p) = a.p {
        cfg.p = p;
    }
}

/// Derivative probe, memoized under `$OSCILLAB_CACHE` when set.
fn cached_probe(cfg: &SweepConfig) -> Result<(f64, f64), CliError> {
    let dir = match std::env::var_os("OSCILLAB_CACHE") {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => return Ok(sweep_probe(cfg)?),
    };
    let key = config_hash(&json!({ "phase": cfg.phase, "region": cfg.region()? }));
    let path = dir.join(format!("probe-{key}.json"));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok([lx, ly]) = serde_json::from_str::<[f64; 2]>(&text) {
            return Ok((lx, ly));
        }
    }
    let (lx, ly) = sweep_probe(cfg)?;
    write_out(&dir, &format!("probe-{key}.json"), &json!([lx, ly]).to_string())?;
    Ok((lx, ly))
}

/// Single-`lambda` norm request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    pub phase: PhaseSpec,
    pub cutoff: CutoffSpec,
    pub lambda: f64,
    #[serde(with = "exact")]
    pub p: Rational64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<DampingConfig>,
    #[serde(default)]
    pub caps: GridCaps,
    /// Explicit sample counts; chosen automatically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrant: Option<u8>,
    #[serde(default)]
    pub seed: u64,
}

fn run_norm(cfg: &NormConfig) -> Result<Value, CliError> {
    let cutoff = build_cutoff(&cfg.cutoff)?;
    let mut region = cutoff.support();
    if let Some(q) = cfg.quadrant {
        let quad = BoxRegion::quadrant(q).ok_or_else(|| CliError::Parse(format!("quadrant {q}")))?;
        region = region
            .intersect(&quad)
            .ok_or_else(|| CliError::Math(format!("cutoff support misses quadrant {q}")))?;
    }
    let phase = cfg.phase.evaluator();
    let grid = match cfg.grid {
        Some([mx, my]) => GridSpec::new(region, mx, my)?,
        None => auto_grid(phase.as_ref(), cfg.lambda, region, &cfg.caps)?,
    };
    let damping = cfg.damping.as_ref().map(|d| d.build(&cfg.phase, cfg.lambda)).transpose()?;
    let k = build_kernel(Arc::clone(&phase), cfg.lambda, &cutoff, damping, &grid)?;
    let l2 = L2Options { seed: cfg.seed, ..L2Options::default() };
    let (b2, right) = opnorm_l2_vector(&k, &l2);
    let p = cfg.p.to_f64().unwrap_or(2.0);
    let mut result = json!({ "grid": grid, "l2": b2 });
    if cfg.p != Rational64::from_integer(2) {
        let opts = LpUpperOptions { l2, l2_upper: Some(b2.upper), ..LpUpperOptions::default() };
        let (upper, method) = opnorm_lp_upper_with(&k, p, &opts);
        let lower = if p > 1.0 && p.is_finite() {
            opnorm_lp_lower_from(&k, p, 8, cfg.seed, &[right])
        } else {
            upper
        };
        result["lp"] = json!({
            "p": exact::ExactJson::from(cfg.p),
            "lower": lower,
            "upper": upper,
            "upper_method": method,
        });
    }
    Ok(result)
}

/// Weights, Hessian factorization and prediction table of `poly`.
pub fn analyze(poly: &WPoly) -> Result<Value, CliError> {
    let weights = detect_weights(poly)?;
    let hessian = poly.hessian_xy();
    let mut v = json!({
        "polynomial": poly.to_string(),
        "weights": weights,
        "hessian": hessian.to_string(),
    });
    let sharp: Vec<Value> = poly
        .terms()
        .iter()
        .filter(|t| t.k > 0 && t.l > 0)
        .map(|t| predict::sharp_lp(t.k, t.l).map(|s| serde_json::to_value(s).expect("serializes")))
        .collect::<Result<_, _>>()?;
    v["sharp_lp"] = json!(sharp);
    if hessian.is_zero() {
        return Ok(v);
    }
    let f = factorize(&hessian, &detect_weights(&hessian)?)?;
    let big_n = f.linear_count() as u32;
    let roots: Vec<Value> = f
        .linear_roots()
        .iter()
        .map(|r| json!({ "re": r.beta.re, "im": r.beta.im, "modulus": r.modulus }))
        .collect();
    v["factorization"] = json!({
        "c": f.c,
        "m": f.m,
        "n": f.n,
        "N": big_n,
        "eta": exact::ExactJson::from(f.eta()),
        "roots": roots,
        "gap_indices": f.gap_indices(DEFAULT_N0).indices,
    });
    let mut damped = Vec::new();
    let mut lp = Vec::new();
    for s in 0..=big_n {
        damped.push(serde_json::to_value(predict::damped_l2_exponents(f.m, f.n, big_n, s, f.eta())?).expect("serializes"));
        if f.m + s > 0 {
            let (p, delta) = predict::lp_from_damping(f.m, f.n, big_n, s, f.eta())?;
            lp.push(json!({ "s": s, "p": exact::ExactJson::from(p), "delta": exact::ExactJson::from(delta) }));
        }
    }
    v["damped_l2"] = json!(damped);
    v["lp_from_damping"] = json!(lp);
    Ok(v)
}
