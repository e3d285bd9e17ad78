use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;

use calib_core::fixtures::{
    discontinuity_pair, f_eps_problem, gap_pa_pair, gap_quadratic, gen_dbeta, gen_gauss_gap,
    induce_gamma, FiniteProblem, GaussGapConfig, SyntheticConfig,
};
use calib_core::kernel::KernelMode;
use calib_core::{reliability_bins, CalibError, EmpiricalDistribution, SeededRng};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::input::{digest, read_input, write_samples};
use crate::metrics::{
    compute, entry_json, parse_kce_mode, parse_metric_list, sig12, Metric, MetricSettings,
};

#[derive(Parser, Debug)]
#[command(
    name = "calib",
    version,
    about = "Calibration error measures for prediction-label samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute calibration measures of a `v,y` CSV file and emit a JSON report.
    Measure(MeasureArgs),
    /// Sample a synthetic family or fixture to CSV.
    Generate(GenerateArgs),
    /// Run the inverse-temperature sweep and emit beta,trial,metric,value rows.
    Sweep(SweepArgs),
    /// Emit reliability-diagram bins as CSV.
    Reliability(ReliabilityArgs),
}

#[derive(Args, Debug)]
struct MetricFlags {
    /// Comma-separated metric names, or `all`.
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// exact, subsample, fourier or binning.
    #[arg(long)]
    kce_mode: Option<String>,
    /// Subsampled terms for --kce-mode subsample (default 10 n).
    #[arg(long)]
    kce_terms: Option<usize>,
    /// Repetitions for --kce-mode fourier or binning (default ceil(10 / eps^2)).
    #[arg(long)]
    kce_reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long)]
    input: String,
    #[arg(long)]
    output: Option<String>,
    #[command(flatten)]
    metric: MetricFlags,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// dbeta, pa-gap, quad-gap, discontinuity, gauss-gap or f-eps.
    #[arg(long)]
    family: String,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Which member of a fixture pair (1 or 2).
    #[arg(long)]
    which: Option<u8>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated positive inverse temperatures.
    #[arg(long)]
    beta_grid: String,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long)]
    output: Option<String>,
    #[command(flatten)]
    metric: MetricFlags,
}

#[derive(Args, Debug)]
struct ReliabilityArgs {
    #[arg(long)]
    input: String,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long)]
    output: Option<String>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let res = match cli.command {
        Command::Measure(a) => measure(a, out),
        Command::Generate(a) => generate(a, out, err),
        Command::Sweep(a) => sweep(a, out),
        Command::Reliability(a) => reliability(a, out),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(output: Option<&str>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {path}: {e}"))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write output: {e}"))),
    }
}

fn settings(f: &MetricFlags, default_mode: KernelMode) -> Result<MetricSettings, CliError> {
    let kce_mode = match &f.kce_mode {
        Some(m) => parse_kce_mode(m)?,
        None => default_mode,
    };
    Ok(MetricSettings {
        bins: f.bins,
        eps: f.eps,
        kce_mode,
        kce_terms: f.kce_terms,
        kce_reps: f.kce_reps,
        seed: f.seed,
    })
}

fn measure(a: MeasureArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let metrics = parse_metric_list(a.metric.metrics.as_deref().unwrap_or("all"))?;
    let s = settings(&a.metric, KernelMode::Subsample)?;
    s.validate(&metrics)?;
    let (bytes, dist) = read_input(&a.input)?;
    let (report, failure) = build_report(&bytes, &dist, &metrics, &s);
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    emit(a.output.as_deref(), &text, out)?;
    match failure {
        Some(msg) => Err(CliError::Solver(msg)),
        None => Ok(()),
    }
}

/// The JSON report and, if any metric failed, a message naming the failures.
pub fn build_report(
    bytes: &[u8],
    dist: &EmpiricalDistribution,
    metrics: &[Metric],
    s: &MetricSettings,
) -> (Value, Option<String>) {
    let mut entries = BTreeMap::new();
    let mut failed = Vec::new();
    for &m in metrics {
        let res = compute(m, dist, s);
        if let Err(e) = &res {
            failed.push(format!("{}: {e}", m.name()));
        }
        entries.insert(m.name().to_string(), entry_json(m, &res, s.seed));
    }
    let report = json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "n": dist.len(),
        "input_digest": digest(bytes),
        "metrics": entries,
    });
    let failure =
        (!failed.is_empty()).then(|| format!("metric computation failed ({})", failed.join("; ")));
    (report, failure)
}

fn require<T>(v: Option<T>, flag: &str, family: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::BadFlags(format!("--family {family} requires --{flag}")))
}

fn pick_pair(pair: (FiniteProblem, FiniteProblem), which: u8) -> Result<FiniteProblem, CliError> {
    match which {
        1 => Ok(pair.0),
        2 => Ok(pair.1),
        w => Err(CliError::BadFlags(format!(
            "--which must be 1 or 2, got {w}"
        ))),
    }
}

fn describe_problem(name: &str, prob: &FiniteProblem) -> String {
    let mut s = format!(
        "{name}: finite domain with {} points (mass, Bayes value, prediction)\n",
        prob.len()
    );
    for (i, p) in prob.points().iter().enumerate() {
        s.push_str(&format!("  x{i}: {}, {}, {}\n", p.mass, p.f_star, p.f));
    }
    s
}

fn bad_param(e: CalibError) -> CliError {
    CliError::BadFlags(e.to_string())
}

fn generate(a: GenerateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::BadFlags("--n must be at least 1".into()));
    }
    let mut rng = SeededRng::new(a.seed);
    let fam = a.family.as_str();
    let from_problem = |name: String, prob: FiniteProblem, rng: &mut SeededRng| {
        let dist = induce_gamma(&prob, a.n, rng).map_err(bad_param)?;
        Ok::<_, CliError>((dist, describe_problem(&name, &prob)))
    };
    let (dist, description) = match fam {
        "dbeta" => {
            let beta = require(a.beta, "beta", fam)?;
            let mut cfg = SyntheticConfig { beta, n: a.n, rng };
            let dist = gen_dbeta(&mut cfg).map_err(bad_param)?;
            let d = format!(
                "dbeta beta={beta}: f ~ U[0,1], y ~ Bernoulli(f), v = f^beta / (f^beta + (1-f)^beta)\n"
            );
            (dist, d)
        }
        "pa-gap" => {
            let alpha = require(a.alpha, "alpha", fam)?;
            let which = require(a.which, "which", fam)?;
            let prob = pick_pair(gap_pa_pair(alpha).map_err(bad_param)?, which)?;
            from_problem(
                format!("pa-gap alpha={alpha} which={which}"),
                prob,
                &mut rng,
            )?
        }
        "quad-gap" => {
            let alpha = require(a.alpha, "alpha", fam)?;
            let prob = gap_quadratic(alpha).map_err(bad_param)?;
            from_problem(format!("quad-gap alpha={alpha}"), prob, &mut rng)?
        }
        "discontinuity" => {
            let eps = require(a.eps, "eps", fam)?;
            let which = require(a.which, "which", fam)?;
            let prob = pick_pair(discontinuity_pair(eps).map_err(bad_param)?, which)?;
            from_problem(
                format!("discontinuity eps={eps} which={which}"),
                prob,
                &mut rng,
            )?
        }
        "gauss-gap" => {
            let eps = require(a.eps, "eps", fam)?;
            let mut cfg = GaussGapConfig { eps, n: a.n, rng };
            let dist = gen_gauss_gap(&mut cfg).map_err(bad_param)?;
            let d = format!(
                "gauss-gap eps={eps}: v ~ U[1/4,3/4], y ~ Bernoulli(v + cos((v-1/2)/eps) exp(-(v-1/2)^2/eps) / 4)\n"
            );
            (dist, d)
        }
        "f-eps" => {
            let eps = require(a.eps, "eps", fam)?;
            let prob = f_eps_problem(eps).map_err(bad_param)?;
            from_problem(format!("f-eps eps={eps}"), prob, &mut rng)?
        }
        other => {
            return Err(CliError::BadFlags(format!(
                "--family: unknown family `{other}`"
            )))
        }
    };
    let csv = write_samples(&dist);
    match a.output.as_deref() {
        Some(path) => {
            emit(Some(path), &csv, out)?;
            out.write_all(description.as_bytes())
        }
        None => {
            emit(None, &csv, out)?;
            err.write_all(description.as_bytes())
        }
    }
    .map_err(|e| CliError::Io(e.to_string()))
}

pub fn parse_beta_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::BadFlags(format!(
            "--beta-grid: expected comma-separated positive reals, got `{s}`"
        ))
    };
    let grid: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    if grid.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(bad());
    }
    Ok(grid)
}

/// Seed of trial `t` at grid index `b`, derived from the base seed.
pub fn trial_rng(seed: u64, b: usize, t: usize) -> SeededRng {
    SeededRng::new(seed).fork(((b as u64) << 32) | t as u64)
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let grid = parse_beta_grid(&a.beta_grid)?;
    let metrics = parse_metric_list(
        a.metric
            .metrics
            .as_deref()
            .unwrap_or("binned-ece,sintce,smce,kce-laplace"),
    )?;
    let s = settings(&a.metric, KernelMode::Exact)?;
    s.validate(&metrics)?;
    if a.n == 0 || a.trials == 0 {
        return Err(CliError::BadFlags(
            "--n and --trials must be at least 1".into(),
        ));
    }
    let rows = sweep_rows(&grid, a.n, a.trials, &metrics, &s)?;
    let mut text = String::from("beta,trial,metric,value\n");
    for (beta, trial, m, v) in rows {
        text.push_str(&format!("{beta},{trial},{},{}\n", m.name(), sig12(v)));
    }
    emit(a.output.as_deref(), &text, out)
}

/// (beta, trial, metric, value).
pub type SweepRow = (f64, usize, Metric, f64);

/// Sweep rows in grid, trial, metric order.
pub fn sweep_rows(
    grid: &[f64],
    n: usize,
    trials: usize,
    metrics: &[Metric],
    s: &MetricSettings,
) -> Result<Vec<SweepRow>, CliError> {
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|b| (0..trials).map(move |t| (b, t)))
        .collect();
    let results: Vec<Result<Vec<SweepRow>, CliError>> = jobs
        .par_iter()
        .map(|&(b, t)| {
            let rng = trial_rng(s.seed, b, t);
            let trial_settings = MetricSettings {
                seed: rng.seed(),
                ..s.clone()
            };
            let mut cfg = SyntheticConfig {
                beta: grid[b],
                n,
                rng,
            };
            let dist = gen_dbeta(&mut cfg).map_err(bad_param)?;
            metrics
                .iter()
                .map(|&m| {
                    let e = compute(m, &dist, &trial_settings).map_err(|e| {
                        CliError::Solver(format!("beta={} trial={t} {}: {e}", grid[b], m.name()))
                    })?;
                    Ok((grid[b], t, m, e.value))
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| sig12(v).to_string()).unwrap_or_default()
}

fn reliability(a: ReliabilityArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.bins == 0 {
        return Err(CliError::BadFlags("--bins must be at least 1".into()));
    }
    let (_, dist) = read_input(&a.input)?;
    let bins = reliability_bins(&dist, a.bins).map_err(bad_param)?;
    let mut text = String::from("lo,hi,count,mean_v,mean_y\n");
    for b in bins {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            sig12(b.lo),
            sig12(b.hi),
            b.count,
            opt(b.mean_v),
            opt(b.mean_y)
        ));
    }
    emit(a.output.as_deref(), &text, out)
}
