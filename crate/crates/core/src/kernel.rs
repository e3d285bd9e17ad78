//! Kernel calibration error for the Laplace and Gaussian kernels.
//!
//! With a_i = w_i (y_i - v_i), the squared error is sum_{i,j} a_i a_j K(v_i, v_j).
//! Exact evaluation runs on data sorted by (v, y): the Laplace kernel
//! factorizes along the sorted order, and the Gaussian kernel is expanded
//! as exp(-s_i^2) exp(-s_j^2) sum_k (2 s_i s_j)^k / k! on centred values.

use serde::Serialize;

use crate::empirical::EmpiricalDistribution;
use crate::error::{CalibError, Result};
use crate::rng::SeededRng;

pub const PAIRWISE_CAP: usize = 20_000;
const GAUSS_TERMS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Laplace,
    Gaussian,
}

impl KernelKind {
    pub fn eval(self, u: f64, v: f64) -> f64 {
        match self {
            KernelKind::Laplace => (-(u - v).abs()).exp(),
            KernelKind::Gaussian => (-(u - v) * (u - v)).exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    Exact,
    Subsample,
    Fourier,
    Binning,
}

impl KernelMode {
    pub fn name(self) -> &'static str {
        match self {
            KernelMode::Exact => "exact",
            KernelMode::Subsample => "subsample",
            KernelMode::Fourier => "fourier",
            KernelMode::Binning => "binning",
        }
    }
}

#[derive(Clone, Debug)]
pub struct KernelEstimatorConfig {
    pub mode: KernelMode,
    /// Subsampled terms; `None` means 10 n.
    pub terms_m: Option<usize>,
    pub reps_r: usize,
    pub rng: SeededRng,
}

/// ceil(10 / eps^2) repetitions for accuracy eps on the squared value.
pub fn default_reps(eps: f64) -> usize {
    (10.0 / (eps * eps)).ceil() as usize
}

impl KernelEstimatorConfig {
    pub fn new(mode: KernelMode, seed: u64) -> Self {
        Self {
            mode,
            terms_m: None,
            reps_r: default_reps(0.01),
            rng: SeededRng::new(seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KceEstimate {
    /// sqrt of the clamped squared estimate.
    pub value: f64,
    /// Raw squared estimate; subsampling can make it negative.
    pub squared: f64,
    /// Standard error of `squared` for randomized modes.
    pub std_error: Option<f64>,
    /// Number of terms or repetitions averaged.
    pub draws: Option<usize>,
}

/// (v, a) sorted by (v, y, a), with a = w (y - v).
fn sorted_residuals(dist: &EmpiricalDistribution) -> Vec<(f64, f64)> {
    let mut items: Vec<(f64, u8, f64)> = dist
        .iter()
        .map(|(s, w)| (s.v, s.y, w * s.residual()))
        .collect();
    items.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    items.into_iter().map(|(v, _, a)| (v, a)).collect()
}

fn laplace_sum(xs: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    let mut carry = 0.0;
    for (i, &(v, a)) in xs.iter().enumerate() {
        if i > 0 {
            let (pv, pa) = xs[i - 1];
            carry = (-(v - pv)).exp() * (carry + pa);
        }
        acc += a * a + 2.0 * a * carry;
    }
    acc
}

fn gaussian_sum(xs: &[(f64, f64)]) -> f64 {
    let lo = xs.first().map_or(0.0, |x| x.0);
    let hi = xs.last().map_or(0.0, |x| x.0);
    let centre = 0.5 * (lo + hi);
    let mut moments = [0.0f64; GAUSS_TERMS];
    for &(v, a) in xs {
        let s = v - centre;
        let mut term = a * (-s * s).exp();
        for m in moments.iter_mut() {
            *m += term;
            term *= s;
        }
    }
    let mut coef = 1.0;
    let mut acc = 0.0;
    for (k, m) in moments.iter().enumerate() {
        acc += coef * m * m;
        coef *= 2.0 / (k as f64 + 1.0);
    }
    acc
}

/// Squared kernel calibration error, unclamped.
pub fn kce_exact_squared(dist: &EmpiricalDistribution, kind: KernelKind) -> f64 {
    let xs = sorted_residuals(dist);
    match kind {
        KernelKind::Laplace => laplace_sum(&xs),
        KernelKind::Gaussian => gaussian_sum(&xs),
    }
}

pub fn kce_exact(dist: &EmpiricalDistribution, kind: KernelKind) -> f64 {
    signed_sqrt(kce_exact_squared(dist, kind))
}

fn signed_sqrt(sq: f64) -> f64 {
    sq.max(0.0).sqrt()
}

/// Literal double sum over all pairs; quadratic, capped at [`PAIRWISE_CAP`] samples.
pub fn kce_pairwise(dist: &EmpiricalDistribution, kind: KernelKind) -> Result<f64> {
    let n = dist.len();
    if n > PAIRWISE_CAP {
        return Err(CalibError::TooLarge {
            size: n,
            limit: PAIRWISE_CAP,
        });
    }
    let xs: Vec<(f64, f64)> = dist.iter().map(|(s, w)| (s.v, w * s.residual())).collect();
    let mut acc = 0.0;
    for &(u, a) in &xs {
        for &(v, b) in &xs {
            acc += a * b * kind.eval(u, v);
        }
    }
    Ok(signed_sqrt(acc))
}

/// One random-Fourier-feature draw |sum_j a_j e^{-i w v_j}|^2 with w ~ Cauchy(1).
fn fourier_draw(xs: &[(f64, f64)], rng: &mut SeededRng) -> f64 {
    let omega = rng.cauchy();
    let (mut c, mut s) = (0.0, 0.0);
    for &(v, a) in xs {
        let (sin, cos) = (omega * v).sin_cos();
        c += a * cos;
        s += a * sin;
    }
    c * c + s * s
}

/// One random-binning draw: bins of width delta ~ Gamma(2, 1) shifted by tau ~ U[0, delta).
fn binning_draw(xs: &[(f64, f64)], rng: &mut SeededRng) -> f64 {
    let delta = rng.gamma2();
    let tau = rng.uniform() * delta;
    let mut acc = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    // xs is sorted by v, so bins arrive in order.
    for &(v, a) in xs {
        let bin = ((v + tau) / delta).floor();
        match cur {
            Some((b, sum)) if b == bin => cur = Some((b, sum + a)),
            Some((_, sum)) => {
                acc += sum * sum;
                cur = Some((bin, a));
            }
            None => cur = Some((bin, a)),
        }
    }
    if let Some((_, sum)) = cur {
        acc += sum * sum;
    }
    acc
}

fn draws(
    dist: &EmpiricalDistribution,
    reps: usize,
    rng: &SeededRng,
    draw: fn(&[(f64, f64)], &mut SeededRng) -> f64,
) -> Vec<f64> {
    let xs = sorted_residuals(dist);
    (0..reps)
        .map(|r| draw(&xs, &mut rng.fork(r as u64)))
        .collect()
}

/// Individual Fourier draws; repetition r uses `rng.fork(r)`.
pub fn fourier_draws(dist: &EmpiricalDistribution, reps: usize, rng: &SeededRng) -> Vec<f64> {
    draws(dist, reps, rng, fourier_draw)
}

/// Individual binning draws; repetition r uses `rng.fork(r)`.
pub fn binning_draws(dist: &EmpiricalDistribution, reps: usize, rng: &SeededRng) -> Vec<f64> {
    draws(dist, reps, rng, binning_draw)
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn kce_estimate(
    dist: &EmpiricalDistribution,
    kind: KernelKind,
    cfg: &KernelEstimatorConfig,
) -> Result<KceEstimate> {
    if matches!(cfg.mode, KernelMode::Fourier | KernelMode::Binning) && kind != KernelKind::Laplace
    {
        return Err(CalibError::ModeKindMismatch {
            mode: cfg.mode.name(),
        });
    }
    let n = dist.len();
    let estimate = |squared: f64, se: Option<f64>, k: Option<usize>| KceEstimate {
        value: signed_sqrt(squared),
        squared,
        std_error: se,
        draws: k,
    };
    match cfg.mode {
        KernelMode::Exact => Ok(estimate(kce_exact_squared(dist, kind), None, None)),
        KernelMode::Subsample => {
            let m = cfg.terms_m.unwrap_or(10 * n);
            if m == 0 {
                return Err(CalibError::BadConfig(
                    "subsample size must be at least 1".into(),
                ));
            }
            let xs: Vec<(f64, f64)> = dist.iter().map(|(s, w)| (s.v, w * s.residual())).collect();
            let scale = (n * n) as f64;
            let mut rng = cfg.rng.clone();
            let terms: Vec<f64> = (0..m)
                .map(|_| {
                    let (u, a) = xs[rng.index(n)];
                    let (v, b) = xs[rng.index(n)];
                    scale * a * b * kind.eval(u, v)
                })
                .collect();
            let (mean, se) = mean_and_se(&terms);
            Ok(estimate(mean, Some(se), Some(m)))
        }
        KernelMode::Fourier | KernelMode::Binning => {
            if cfg.reps_r == 0 {
                return Err(CalibError::BadConfig(
                    "repetitions must be at least 1".into(),
                ));
            }
            let d = if cfg.mode == KernelMode::Fourier {
                fourier_draws(dist, cfg.reps_r, &cfg.rng)
            } else {
                binning_draws(dist, cfg.reps_r, &cfg.rng)
            };
            let (mean, se) = mean_and_se(&d);
            Ok(estimate(mean, Some(se), Some(cfg.reps_r)))
        }
    }
}

/// Monte Carlo estimates of E[cos(w d)], w ~ Cauchy(1), and of the probability
/// that points at distance d share a random bin. Both tend to exp(-d).
pub fn kernel_identity_check(d: f64, reps: usize, rng: &mut SeededRng) -> Result<(f64, f64)> {
    if d.is_nan() || d < 0.0 {
        return Err(CalibError::BadConfig(format!(
            "distance {d} must be non-negative"
        )));
    }
    if reps == 0 {
        return Err(CalibError::BadConfig(
            "repetitions must be at least 1".into(),
        ));
    }
    let mut cos_acc = 0.0;
    let mut same = 0usize;
    for _ in 0..reps {
        cos_acc += (rng.cauchy() * d).cos();
        let delta = rng.gamma2();
        let tau = rng.uniform() * delta;
        if (tau / delta).floor() == ((d + tau) / delta).floor() {
            same += 1;
        }
    }
    Ok((cos_acc / reps as f64, same as f64 / reps as f64))
}
