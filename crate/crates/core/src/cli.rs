//! Command-line front end. Every command reads one strict JSON document and
//! writes one JSON result document.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::complex::ComplexPoint;
use crate::decider::{cross_validate, decide_multipliers, DecideConfig, MifPair};
use crate::density::{
    estimate_density_bracket, DiscreteSequence, SequenceSource, WindowSchedule, DEFAULT_REGULARITY_TOL,
};
use crate::error::{Error, Result};
use crate::hilbert::{hilbert_transform, outer_from_modulus, weak_l1_tail, PVSchedule, PiSource};
use crate::inner::{InnerFunctionSpec, TruncationSchedule};
use crate::toeplitz::{
    carleson_for, kernel_triviality_probe, lemma1_construct, multiplier_residual, multiplier_residual_sampled,
    seeded_points, MultiplierSpec, ProbeConfig, ProbeVerdict, SymbolFactor, ToeplitzSymbol, WeightedZero,
};

#[derive(Debug, Parser)]
#[command(name = "modelkit", version, about = "Inner functions, model spaces and multiplier decisions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Density bracket of a sequence.
    Density(CommonArgs),
    /// Decide whether M(U, V) is nontrivial.
    Decide {
        #[command(flatten)]
        common: CommonArgs,
        /// Also run the kernel probe on U conj(V).
        #[arg(long)]
        cross_validate: bool,
    },
    /// Singular-value probe of a Toeplitz kernel.
    Probe(CommonArgs),
    /// Regularized Hilbert transform and outer functions.
    Hilbert(CommonArgs),
    /// Residuals of Phi K_U in K_V.
    VerifyMultiplier(CommonArgs),
    /// Kernel element vanishing at prescribed zeros.
    Lemma1(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Result document; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Command-specific schedule overrides (JSON).
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Side file for the numeric series of the command.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Outcome of a command before it is written out.
struct Outcome {
    result: Value,
    schedule: Value,
    definite: bool,
    citations: Vec<String>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct DensityInput {
    sequence: SequenceSource,
    #[serde(default)]
    a_grid: Option<Vec<f64>>,
    #[serde(default)]
    coverage: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ProbeInput {
    symbol: Vec<SymbolFactor>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct HilbertInput {
    function: PiSource,
    points: Vec<f64>,
    #[serde(default)]
    outer_grid: Vec<f64>,
    #[serde(default)]
    weak_tail: Vec<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct VerifyInput {
    #[serde(rename = "U")]
    u: InnerFunctionSpec,
    #[serde(rename = "V")]
    v: InnerFunctionSpec,
    phi: MultiplierSpec,
    #[serde(default)]
    test_points: Option<Vec<ComplexPoint>>,
    #[serde(default = "default_test_count")]
    test_count: usize,
    #[serde(default)]
    sampled_check: Option<usize>,
    #[serde(default = "default_carleson_radius")]
    carleson_radius: f64,
}

fn default_test_count() -> usize {
    10
}

fn default_carleson_radius() -> f64 {
    50.0
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Lemma1Input {
    theta: InnerFunctionSpec,
    zeros: Vec<WeightedZero>,
    #[serde(default)]
    points: Option<Vec<ComplexPoint>>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn read_schedule<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn density(args: &CommonArgs) -> Result<Outcome> {
    let input: DensityInput = read_json(&args.input)?;
    let mut seq = DiscreteSequence::from_source(&input.sequence)?;
    if let Some(r) = input.coverage {
        seq = seq.with_coverage(r);
    }
    let tol = args.tolerance.unwrap_or(DEFAULT_REGULARITY_TOL);
    let mut sched: Option<WindowSchedule> = args.schedule.as_deref().map(read_json).transpose()?;
    if let Some(s) = sched.as_mut() {
        if let Some(t) = args.tolerance {
            s.tolerance = t;
        }
    } else if args.tolerance.is_some() && !seq.is_infinite() {
        sched = Some(WindowSchedule::doubling(seq.coverage(), tol));
    }
    let est = estimate_density_bracket(&seq, input.a_grid.as_deref(), sched.as_ref())?;
    if let Some(p) = &args.csv {
        let rows: Vec<Vec<String>> = est
            .reports
            .iter()
            .flat_map(|r| r.window_integrals.iter().map(move |(w, v)| vec![r.a.to_string(), w.to_string(), v.to_string()]))
            .collect();
        write_csv(p, &["a", "W", "integral"], &rows)?;
    }
    let effective = sched.unwrap_or_else(|| WindowSchedule::doubling(seq.coverage(), tol));
    let mut citations = vec!["the lower and upper densities bracket the exponents a for which \
         the counting function is strongly a-regular on a sub- or supersequence"
        .to_string()];
    if seq.is_infinite() {
        citations.push("a two-sided progression {alpha n + i beta : n in Z} has lower and upper density 1/|alpha|".into());
    }
    Ok(Outcome {
        definite: est.bracket.exact,
        result: to_value(&est)?,
        schedule: json!({ "windows": effective.windows, "tolerance": effective.tolerance, "input": to_value(&input)? }),
        citations,
    })
}

fn decide(args: &CommonArgs, cross: bool) -> Result<Outcome> {
    let pair: MifPair = read_json(&args.input)?;
    let mut cfg: DecideConfig = read_schedule(args.schedule.as_deref())?;
    if let Some(t) = args.tolerance {
        cfg.tau = t;
    }
    let cert = decide_multipliers(&pair, &cfg)?;
    let mut result = json!({ "certificate": to_value(&cert)? });
    let probe_cfg = ProbeConfig::default();
    if cross {
        result["cross_validation"] = to_value(&cross_validate(&pair, &cert, &probe_cfg)?)?;
    }
    Ok(Outcome {
        definite: cert.is_definite(),
        citations: cert.citations.clone(),
        result,
        schedule: json!({ "decide": to_value(&cfg)?, "probe": if cross { to_value(&probe_cfg)? } else { Value::Null } }),
    })
}

fn probe(args: &CommonArgs) -> Result<Outcome> {
    let input: ProbeInput = read_json(&args.input)?;
    let sym = ToeplitzSymbol::new(input.symbol)?;
    let mut cfg: ProbeConfig = read_schedule(args.schedule.as_deref())?;
    if let Some(t) = args.tolerance {
        cfg.thresholds.floor = t;
    }
    let report = kernel_triviality_probe(&sym, &cfg)?;
    if let Some(p) = &args.csv {
        let rows: Vec<Vec<String>> =
            report.basis_sizes.iter().zip(&report.sigma_min).map(|(n, s)| vec![n.to_string(), s.to_string()]).collect();
        write_csv(p, &["basis_size", "sigma_min"], &rows)?;
    }
    Ok(Outcome {
        definite: report.verdict != ProbeVerdict::Inconclusive,
        result: to_value(&report)?,
        schedule: to_value(&cfg)?,
        citations: vec!["ker T[conj(U)] = K_U for inner U".into()],
    })
}

fn hilbert(args: &CommonArgs) -> Result<Outcome> {
    let input: HilbertInput = read_json(&args.input)?;
    let base = args.input.parent();
    let h = input.function.build(base)?;
    let mut sched: PVSchedule = read_schedule(args.schedule.as_deref())?;
    if let Some(t) = args.tolerance {
        sched.quad_tolerance = t;
    }
    let values = input
        .points
        .iter()
        .map(|&x| hilbert_transform(&h, x, &sched).map(|v| json!({ "x": x, "value": v.value, "richardson_error": v.richardson_error })))
        .collect::<Result<Vec<_>>>()?;
    let outer = if input.outer_grid.is_empty() { Vec::new() } else { outer_from_modulus(&h, &input.outer_grid, &sched)? };
    let tail = if input.weak_tail.is_empty() { Vec::new() } else { weak_l1_tail(&h, &input.weak_tail, &sched)? };
    Ok(Outcome {
        definite: true,
        result: json!({ "transform": values, "outer": to_value(&outer)?, "weak_tail": tail }),
        schedule: json!({ "pv": to_value(&sched)?, "input": to_value(&input)? }),
        citations: vec![
            "the conjugate function of h in L^1(dt/(1+t^2)) is a principal value with the kernel \
             1/(x - t) + t/(1 + t^2), divided by pi"
                .into(),
            "H = exp(h + i h~) is outer with |H| = e^h on the line".into(),
        ],
    })
}

fn verify_multiplier(args: &CommonArgs) -> Result<Outcome> {
    let input: VerifyInput = read_json(&args.input)?;
    let sched: TruncationSchedule = read_schedule(args.schedule.as_deref())?;
    let tol = args.tolerance.unwrap_or(1e-4);
    let level = sched.final_level();
    let phi = input.phi.to_exprational(level)?;
    let points = match &input.test_points {
        Some(p) => p.clone(),
        None => seeded_points(args.seed, input.test_count),
    };
    let residuals = multiplier_residual(&input.u, &input.v, &phi, &points, level)?;
    let sampled = match input.sampled_check {
        Some(m) => Some(multiplier_residual_sampled(&input.u, &input.v, |x| phi.eval(x.into()), &points, &sched, m)?),
        None => None,
    };
    let carleson = carleson_for(|t| phi.eval(t.into()), input.carleson_radius, 32)?;
    let max = residuals.iter().cloned().fold(0.0, f64::max);
    let min = residuals.iter().cloned().fold(f64::INFINITY, f64::min);
    let status = if max < tol {
        "consistent_with_multiplier"
    } else if min > tol {
        "not_a_multiplier"
    } else {
        "mixed"
    };
    Ok(Outcome {
        definite: status != "mixed",
        result: json!({
            "status": status,
            "test_points": points,
            "residuals": residuals,
            "sampled_residuals": sampled,
            "max_residual": max,
            "min_residual": min,
            "carleson": to_value(&carleson)?,
        }),
        schedule: json!({ "truncation": to_value(&sched)?, "tolerance": tol, "seed": args.seed, "input": to_value(&input)? }),
        citations: vec![
            "M(U, V) is the set of analytic Phi with Phi K_U contained in K_V".into(),
            "K_V = H^2 intersected with V conj(H^2)".into(),
        ],
    })
}

fn lemma1(args: &CommonArgs) -> Result<Outcome> {
    let input: Lemma1Input = read_json(&args.input)?;
    let sched: TruncationSchedule = read_schedule(args.schedule.as_deref())?;
    let tol = args.tolerance.unwrap_or(1e-8);
    let level = sched.final_level();
    let el = lemma1_construct(&input.theta, &input.zeros, tol, args.seed, level, input.points.as_deref())?;
    Ok(Outcome {
        definite: true,
        result: to_value(&el)?,
        schedule: json!({ "truncation": to_value(&sched)?, "tolerance": tol, "seed": args.seed, "input": to_value(&input)? }),
        citations: vec![
            "if Theta is not a finite Blaschke product and B is a finite Blaschke product, \
             ker T[B conj(Theta)] is nontrivial"
                .into(),
        ],
    })
}

fn document(command: &str, args: &CommonArgs, out: &Outcome) -> Value {
    json!({
        "command": command,
        "config": {
            "input": args.input,
            "schedule": out.schedule,
            "seed": args.seed,
            "tolerance": args.tolerance,
        },
        "result": out.result,
        "citations": out.citations,
        "metadata": {
            "version": env!("CARGO_PKG_VERSION"),
            "threads": std::env::var("MODELKIT_THREADS").ok(),
        },
    })
}

fn emit(path: Option<&Path>, doc: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(doc).expect("values serialize");
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

/// Runs one command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (name, args, outcome) = match &cli.command {
        Command::Density(a) => ("density", a, density(a)),
        Command::Decide { common, cross_validate } => ("decide", common, decide(common, *cross_validate)),
        Command::Probe(a) => ("probe", a, probe(a)),
        Command::Hilbert(a) => ("hilbert", a, hilbert(a)),
        Command::VerifyMultiplier(a) => ("verify-multiplier", a, verify_multiplier(a)),
        Command::Lemma1(a) => ("lemma1", a, lemma1(a)),
    };
    match outcome {
        Ok(out) => {
            let doc = document(name, args, &out);
            if let Err(e) = emit(args.output.as_deref(), &doc) {
                eprintln!("modelkit: cannot write output: {e}");
                return 1;
            }
            if out.definite {
                0
            } else {
                2
            }
        }
        Err(e) => {
            let doc = error_document(name, &e);
            if emit(args.output.as_deref(), &doc).is_err() {
                eprintln!("{doc}");
            }
            eprintln!("modelkit {name}: {}: {e}", e.kind());
            1
        }
    }
}

pub fn error_document(command: &str, e: &Error) -> Value {
    json!({ "command": command, "error": { "kind": e.kind(), "message": e.to_string() } })
}
