//! Metric selection and evaluation shared by `measure` and `sweep`.

use std::str::FromStr;

use calib_core::binning::{binned_ece, ece, uniform_partition};
use calib_core::interval::{sintce_hat, IntervalEstimatorConfig};
use calib_core::kernel::{
    default_reps, kce_estimate, KernelEstimatorConfig, KernelKind, KernelMode,
};
use calib_core::lowerdist::{ldce, LdceForm, DEFAULT_EPS};
use calib_core::smooth::smce;
use calib_core::{CalibError, EmpiricalDistribution};
use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Ece,
    BinnedEce,
    BinnedEceW,
    Sintce,
    Smce,
    Ldce,
    KceLaplace,
    KceGaussian,
}

pub const ALL_METRICS: [Metric; 8] = [
    Metric::Ece,
    Metric::BinnedEce,
    Metric::BinnedEceW,
    Metric::Sintce,
    Metric::Smce,
    Metric::Ldce,
    Metric::KceLaplace,
    Metric::KceGaussian,
];

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Ece => "ece",
            Metric::BinnedEce => "binned-ece",
            Metric::BinnedEceW => "binned-ece-w",
            Metric::Sintce => "sintce",
            Metric::Smce => "smce",
            Metric::Ldce => "ldce",
            Metric::KceLaplace => "kce-laplace",
            Metric::KceGaussian => "kce-gaussian",
        }
    }

    fn kernel(self) -> Option<KernelKind> {
        match self {
            Metric::KceLaplace => Some(KernelKind::Laplace),
            Metric::KceGaussian => Some(KernelKind::Gaussian),
            _ => None,
        }
    }
}

impl FromStr for Metric {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        ALL_METRICS
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CliError::BadFlags(format!("--metrics: unknown metric `{s}`")))
    }
}

/// Comma-separated names, `all` expanding to every metric; order kept, duplicates dropped.
pub fn parse_metric_list(s: &str) -> Result<Vec<Metric>, CliError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let add: Vec<Metric> = if part == "all" {
            ALL_METRICS.to_vec()
        } else {
            vec![part.parse()?]
        };
        for m in add {
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::BadFlags("--metrics: no metrics given".into()));
    }
    Ok(out)
}

pub fn parse_kce_mode(s: &str) -> Result<KernelMode, CliError> {
    match s {
        "exact" => Ok(KernelMode::Exact),
        "subsample" => Ok(KernelMode::Subsample),
        "fourier" => Ok(KernelMode::Fourier),
        "binning" => Ok(KernelMode::Binning),
        _ => Err(CliError::BadFlags(format!(
            "--kce-mode: unknown mode `{s}`"
        ))),
    }
}

#[derive(Clone, Debug)]
pub struct MetricSettings {
    pub bins: usize,
    pub eps: f64,
    pub kce_mode: KernelMode,
    pub kce_terms: Option<usize>,
    pub kce_reps: Option<usize>,
    pub seed: u64,
}

impl MetricSettings {
    /// Rejects flag combinations before any work is done.
    pub fn validate(&self, metrics: &[Metric]) -> Result<(), CliError> {
        if self.bins == 0 {
            return Err(CliError::BadFlags("--bins must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(CliError::BadFlags(format!(
                "--eps {} must lie in (0, 1)",
                self.eps
            )));
        }
        if self.kce_terms == Some(0) {
            return Err(CliError::BadFlags("--kce-terms must be at least 1".into()));
        }
        if self.kce_reps == Some(0) {
            return Err(CliError::BadFlags("--kce-reps must be at least 1".into()));
        }
        if metrics.contains(&Metric::KceGaussian)
            && matches!(self.kce_mode, KernelMode::Fourier | KernelMode::Binning)
        {
            return Err(CliError::BadFlags(format!(
                "--kce-mode {} supports only the Laplace kernel",
                self.kce_mode.name()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricEntry {
    pub value: f64,
    pub squared: Option<f64>,
    pub config: Value,
    pub caveats: Vec<String>,
}

/// Rounds to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(sig12(x)).map_or(Value::Null, Value::Number)
}

pub fn compute(
    metric: Metric,
    dist: &EmpiricalDistribution,
    s: &MetricSettings,
) -> Result<MetricEntry, CalibError> {
    let n = dist.len();
    let entry = |value: f64, config: Value, caveats: Vec<String>| MetricEntry {
        value,
        squared: None,
        config,
        caveats,
    };
    match metric {
        Metric::Ece => Ok(entry(
            ece(dist),
            json!({ "grouping": "exact-value" }),
            vec![
                "groups by exact prediction value; meaningful only when predictions repeat".into(),
            ],
        )),
        Metric::BinnedEce | Metric::BinnedEceW => {
            let part = uniform_partition(s.bins)?;
            let penalty = metric == Metric::BinnedEceW;
            Ok(entry(
                binned_ece(dist, &part, penalty),
                json!({ "bins": s.bins, "width_penalty": penalty }),
                vec![],
            ))
        }
        Metric::Sintce => {
            let cfg = IntervalEstimatorConfig::new(s.eps, s.seed)?;
            let r = sintce_hat(dist, &cfg)?;
            let shifts = serde_json::to_value(r.shifts).unwrap_or(Value::Null);
            Ok(entry(
                r.value,
                json!({
                    "eps": s.eps,
                    "k_star": r.k_star,
                    "argmin_k": r.argmin_k,
                    "shifts": shifts,
                    "n": r.n,
                }),
                vec![
                    "sample-size requirement of the estimator is not enforced; n is reported"
                        .into(),
                ],
            ))
        }
        Metric::Smce => Ok(entry(smce(dist).0, json!({ "solver": "exact-dp" }), vec![])),
        Metric::Ldce => Ok(entry(
            ldce(dist, DEFAULT_EPS, DEFAULT_EPS, LdceForm::Dual)?,
            json!({ "eps1": DEFAULT_EPS, "eps2": DEFAULT_EPS, "form": "dual" }),
            vec![
                "LP value on the empirical distribution; sampling error is O(n^-1/2)".into(),
                format!("discretization slack up to {}", 3.0 * 2.0 * DEFAULT_EPS),
            ],
        )),
        Metric::KceLaplace | Metric::KceGaussian => {
            let kind = metric.kernel().expect("kernel metric");
            let mut cfg = KernelEstimatorConfig::new(s.kce_mode, s.seed);
            cfg.terms_m = s.kce_terms;
            cfg.reps_r = s.kce_reps.unwrap_or_else(|| default_reps(s.eps));
            let est = kce_estimate(dist, kind, &cfg)?;
            let mut config = json!({ "mode": s.kce_mode.name() });
            let mut caveats = Vec::new();
            match s.kce_mode {
                KernelMode::Exact => {}
                KernelMode::Subsample => {
                    config["terms"] = json!(cfg.terms_m.unwrap_or(10 * n));
                    caveats.push(
                        "value is sqrt(max(squared, 0)); the subsampled square can be negative"
                            .into(),
                    );
                }
                KernelMode::Fourier | KernelMode::Binning => {
                    config["reps"] = json!(cfg.reps_r);
                }
            }
            if let Some(se) = est.std_error {
                config["std_error"] = num(se);
            }
            Ok(MetricEntry {
                value: est.value,
                squared: Some(est.squared),
                config,
                caveats,
            })
        }
    }
}

/// One report entry: the value and its metadata, or the error that stopped it.
pub fn entry_json(metric: Metric, res: &Result<MetricEntry, CalibError>, seed: u64) -> Value {
    match res {
        Ok(e) => {
            let mut v = json!({
                "value": num(e.value),
                "config": e.config,
                "seed": seed,
                "caveats": e.caveats,
            });
            if let Some(sq) = e.squared {
                v["squared"] = num(sq);
            }
            v
        }
        Err(err) => json!({ "error": err.to_string(), "seed": seed, "metric": metric.name() }),
    }
}
