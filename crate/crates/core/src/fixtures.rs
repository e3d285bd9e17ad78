//! Finite constructions with known Bayes values, synthetic generators, and
//! exhaustive oracles for the true and upper distances to calibration.
//!
//! Finite problems are held in exact rational arithmetic so the oracles can
//! certify bounds that hold with equality.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::empirical::{EmpiricalDistribution, Sample};
use crate::error::{CalibError, Result};
use crate::partitions::for_each_set_partition;
use crate::rng::SeededRng;

pub type Q = BigRational;

pub const ORACLE_LIMIT: usize = 10;

fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

/// Shortest rational within float precision of `x`, so 0.1 becomes 1/10.
pub fn rational(x: f64) -> Option<Q> {
    let r = Ratio::<i64>::approximate_float(x)?;
    Some(q(*r.numer(), *r.denom()))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainPoint {
    pub mass: Q,
    pub f_star: Q,
    pub f: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteProblem {
    points: Vec<DomainPoint>,
}

fn unit(x: &Q) -> bool {
    !x.is_negative() && *x <= Q::one()
}

impl FiniteProblem {
    pub fn new(points: Vec<DomainPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(CalibError::EmptyInput);
        }
        let mut total = Q::zero();
        for p in &points {
            if !p.mass.is_positive() || !unit(&p.f_star) || !unit(&p.f) {
                return Err(CalibError::BadConfig(format!("invalid domain point {p:?}")));
            }
            total += &p.mass;
        }
        if !total.is_one() {
            return Err(CalibError::BadConfig(format!(
                "masses sum to {total}, not 1"
            )));
        }
        Ok(Self { points })
    }

    fn from_rows(rows: &[(Q, Q, Q)]) -> Result<Self> {
        let points = rows
            .iter()
            .filter(|r| r.0.is_positive())
            .map(|(m, s, f)| DomainPoint {
                mass: m.clone(),
                f_star: s.clone(),
                f: f.clone(),
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[DomainPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact l1 distance sum mass |f - g| to another predictor on the same domain.
    pub fn l1_to(&self, g: &[Q]) -> Q {
        self.points
            .iter()
            .zip(g)
            .map(|(p, g)| &p.mass * (&p.f - g).abs())
            .sum()
    }
}

fn parse(x: f64, err: fn(f64) -> CalibError) -> Result<Q> {
    rational(x).ok_or(err(x))
}

/// Two problems on {00, 01, 10, 11} with the same prediction-label distribution.
///
/// Masses alpha, 1/2 - alpha, 1/2 - alpha, alpha; f = 1/2 + alpha when x1 = 0 and
/// 1/2 - alpha when x1 = 1. The first has Bayes values (x1 + x2)/2, the second
/// 1/2 - alpha when x1 = 0 and 1/2 + alpha when x1 = 1.
pub fn gap_pa_pair(alpha: f64) -> Result<(FiniteProblem, FiniteProblem)> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(CalibError::BadAlpha(alpha));
    }
    let a = parse(alpha, CalibError::BadAlpha)?;
    let half = q(1, 2);
    let (hi, lo) = (&half + &a, &half - &a);
    let mass = [a.clone(), &half - &a, &half - &a, a.clone()];
    let f = [hi.clone(), hi.clone(), lo.clone(), lo.clone()];
    let star1 = [Q::zero(), half.clone(), half.clone(), Q::one()];
    let star2 = [lo.clone(), lo.clone(), hi.clone(), hi.clone()];
    let build = |star: &[Q; 4]| {
        let rows: Vec<(Q, Q, Q)> = (0..4)
            .map(|i| (mass[i].clone(), star[i].clone(), f[i].clone()))
            .collect();
        FiniteProblem::from_rows(&rows)
    };
    Ok((build(&star1)?, build(&star2)?))
}

/// First problem of [`gap_pa_pair`] with predictions pushed apart by beta = alpha/2 at 00 and 11.
pub fn gap_quadratic(alpha: f64) -> Result<FiniteProblem> {
    if !(alpha > 0.0 && alpha < 0.25) {
        return Err(CalibError::BadAlpha(alpha));
    }
    let a = parse(alpha, CalibError::BadAlpha)?;
    let b = &a / q(2, 1);
    let half = q(1, 2);
    let rows = [
        (a.clone(), Q::zero(), &half + &a + &b),
        (&half - &a, half.clone(), &half + &a),
        (&half - &a, half.clone(), &half - &a),
        (a.clone(), Q::one(), &half - &a - &b),
    ];
    FiniteProblem::from_rows(&rows)
}

/// Uniform four-point pair (f1, f2) where f2 tends to f1 as eps tends to 0 but
/// the interval calibration error jumps.
pub fn discontinuity_pair(eps: f64) -> Result<(FiniteProblem, FiniteProblem)> {
    if !(eps > 0.0 && eps < 1.0 / 48.0) {
        return Err(CalibError::BadEps(eps));
    }
    let e = parse(eps, CalibError::BadEps)?;
    let (alpha, beta, half) = (q(1, 6), q(1, 48), q(1, 2));
    let quarter = q(1, 4);
    let star = [
        &half - &beta + &alpha,
        &half - &e - &alpha,
        &half + &e + &alpha * q(2, 1),
        &half + &beta - &alpha * q(2, 1),
    ];
    let f1 = [&half - &beta, half.clone(), half.clone(), &half + &beta];
    let f2 = [&half - &beta, &half - &e, &half + &e, &half + &beta];
    let build = |f: &[Q; 4]| {
        let rows: Vec<(Q, Q, Q)> = (0..4)
            .map(|i| (quarter.clone(), star[i].clone(), f[i].clone()))
            .collect();
        FiniteProblem::from_rows(&rows)
    };
    Ok((build(&f1)?, build(&f2)?))
}

/// Two equally likely points with Bayes values 0 and 1 predicted as 1/2 - eps and 1/2 + eps.
pub fn f_eps_problem(eps: f64) -> Result<FiniteProblem> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(CalibError::BadEps(eps));
    }
    let e = parse(eps, CalibError::BadEps)?;
    let half = q(1, 2);
    FiniteProblem::from_rows(&[
        (half.clone(), Q::zero(), &half - &e),
        (half.clone(), Q::one(), &half + &e),
    ])
}

/// Minimum expected block cost over set partitions of weighted items.
/// Each item is (mass, label mean, prediction); a block predicts its mass-weighted label mean.
fn partition_min(items: &[(Q, Q, Q)]) -> Q {
    let mut best: Option<Q> = None;
    let mut mass = vec![Q::zero(); items.len()];
    let mut lab = vec![Q::zero(); items.len()];
    for_each_set_partition(items.len(), |labels, blocks| {
        for b in 0..blocks {
            mass[b] = Q::zero();
            lab[b] = Q::zero();
        }
        for (it, &b) in items.iter().zip(labels) {
            mass[b] += &it.0;
            lab[b] += &it.0 * &it.1;
        }
        let mut cost = Q::zero();
        for (it, &b) in items.iter().zip(labels) {
            let g = &lab[b] / &mass[b];
            cost += &it.0 * (&it.2 - g).abs();
        }
        if best.as_ref().is_none_or(|x| cost < *x) {
            best = Some(cost);
        }
    });
    best.unwrap_or_else(Q::zero)
}

/// Exact distance to the nearest calibrated predictor on the same domain.
pub fn dce_bruteforce(prob: &FiniteProblem) -> Result<Q> {
    if prob.len() > ORACLE_LIMIT {
        return Err(CalibError::TooLarge {
            size: prob.len(),
            limit: ORACLE_LIMIT,
        });
    }
    let items: Vec<(Q, Q, Q)> = prob
        .points
        .iter()
        .map(|p| (p.mass.clone(), p.f_star.clone(), p.f.clone()))
        .collect();
    Ok(partition_min(&items))
}

/// Upper distance over post-processings of the prediction, from an empirical distribution.
pub fn udce_bruteforce(dist: &EmpiricalDistribution) -> Result<f64> {
    let mut by_v: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for (s, w) in dist.iter() {
        let e = by_v.entry(s.v.to_bits()).or_insert((0.0, 0.0));
        e.0 += w;
        e.1 += w * f64::from(s.y);
    }
    if by_v.len() > ORACLE_LIMIT {
        return Err(CalibError::TooLarge {
            size: by_v.len(),
            limit: ORACLE_LIMIT,
        });
    }
    let items: Vec<(f64, f64, f64)> = by_v
        .into_iter()
        .map(|(b, (m, l))| (m, l, f64::from_bits(b)))
        .collect();
    let mut best = f64::INFINITY;
    let k = items.len();
    let mut mass = vec![0.0; k];
    let mut lab = vec![0.0; k];
    for_each_set_partition(k, |labels, blocks| {
        mass[..blocks].fill(0.0);
        lab[..blocks].fill(0.0);
        for (it, &b) in items.iter().zip(labels) {
            mass[b] += it.0;
            lab[b] += it.1;
        }
        let cost: f64 = items
            .iter()
            .zip(labels)
            .map(|(it, &b)| it.0 * (it.2 - lab[b] / mass[b]).abs())
            .sum();
        best = best.min(cost);
    });
    Ok(best)
}

/// Upper distance of a finite problem's prediction-label distribution, exactly.
pub fn udce_bruteforce_exact(prob: &FiniteProblem) -> Result<Q> {
    let mut by_f: BTreeMap<Q, (Q, Q)> = BTreeMap::new();
    for p in &prob.points {
        let e = by_f.entry(p.f.clone()).or_insert((Q::zero(), Q::zero()));
        e.0 += &p.mass;
        e.1 += &p.mass * &p.f_star;
    }
    if by_f.len() > ORACLE_LIMIT {
        return Err(CalibError::TooLarge {
            size: by_f.len(),
            limit: ORACLE_LIMIT,
        });
    }
    let items: Vec<(Q, Q, Q)> = by_f
        .into_iter()
        .map(|(f, (m, l))| {
            let mean = &l / &m;
            (m, mean, f)
        })
        .collect();
    Ok(partition_min(&items))
}

/// Population prediction-label distribution: one weighted entry per (f, y) with positive mass,
/// sorted by f then y. Masses are aggregated exactly before conversion.
pub fn induce_gamma_exact(prob: &FiniteProblem) -> Result<EmpiricalDistribution> {
    let mut cells: BTreeMap<(Q, u8), Q> = BTreeMap::new();
    for p in &prob.points {
        *cells.entry((p.f.clone(), 1)).or_insert_with(Q::zero) += &p.mass * &p.f_star;
        *cells.entry((p.f.clone(), 0)).or_insert_with(Q::zero) += &p.mass * (Q::one() - &p.f_star);
    }
    let items = cells
        .into_iter()
        .filter(|(_, m)| m.is_positive())
        .map(|((f, y), m)| (Sample { v: to_f64(&f), y }, to_f64(&m)))
        .collect();
    EmpiricalDistribution::from_weighted(items)
}

/// n i.i.d. draws: a point by mass, a label by its Bayes value, emitted as (f, y).
pub fn induce_gamma(
    prob: &FiniteProblem,
    n: usize,
    rng: &mut SeededRng,
) -> Result<EmpiricalDistribution> {
    if n == 0 {
        return Err(CalibError::EmptyInput);
    }
    let mut cum = Vec::with_capacity(prob.len());
    let mut acc = 0.0;
    for p in &prob.points {
        acc += to_f64(&p.mass);
        cum.push(acc);
    }
    let stars: Vec<f64> = prob.points.iter().map(|p| to_f64(&p.f_star)).collect();
    let fs: Vec<f64> = prob.points.iter().map(|p| to_f64(&p.f)).collect();
    let samples = (0..n)
        .map(|_| {
            let u = rng.uniform() * acc;
            let i = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
            Sample {
                v: fs[i],
                y: u8::from(rng.bernoulli(stars[i])),
            }
        })
        .collect();
    EmpiricalDistribution::from_samples(samples)
}

#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub beta: f64,
    pub n: usize,
    pub rng: SeededRng,
}

#[derive(Clone, Debug)]
pub struct GaussGapConfig {
    pub eps: f64,
    pub n: usize,
    pub rng: SeededRng,
}

/// f^beta / (f^beta + (1 - f)^beta), evaluated as a logistic of beta * logit(f).
pub fn temperature_map(f: f64, beta: f64) -> f64 {
    if f == 0.5 {
        return 0.5;
    }
    let t = beta * (f.ln() - (1.0 - f).ln());
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// f ~ U[0, 1], y ~ Bernoulli(f), emitted as (temperature_map(f, beta), y).
pub fn gen_dbeta(cfg: &mut SyntheticConfig) -> Result<EmpiricalDistribution> {
    if !(cfg.beta > 0.0 && cfg.beta.is_finite()) {
        return Err(CalibError::BadConfig(format!(
            "beta {} must be positive",
            cfg.beta
        )));
    }
    if cfg.n == 0 {
        return Err(CalibError::EmptyInput);
    }
    let samples = (0..cfg.n)
        .map(|_| {
            let f = cfg.rng.uniform();
            let y = u8::from(cfg.rng.bernoulli(f));
            Sample {
                v: temperature_map(f, cfg.beta),
                y,
            }
        })
        .collect();
    EmpiricalDistribution::from_samples(samples)
}

/// cos(t / eps) exp(-t^2 / eps).
pub fn h_eps(t: f64, eps: f64) -> f64 {
    (t / eps).cos() * (-t * t / eps).exp()
}

pub fn gauss_gap_success(v: f64, eps: f64) -> f64 {
    v + h_eps(v - 0.5, eps) / 4.0
}

/// v ~ U[1/4, 3/4], y ~ Bernoulli(v + h_eps(v - 1/2) / 4).
pub fn gen_gauss_gap(cfg: &mut GaussGapConfig) -> Result<EmpiricalDistribution> {
    if !(cfg.eps > 0.0 && cfg.eps < 0.25) {
        return Err(CalibError::BadEps(cfg.eps));
    }
    if cfg.n == 0 {
        return Err(CalibError::EmptyInput);
    }
    let samples = (0..cfg.n)
        .map(|_| {
            let v = 0.25 + 0.5 * cfg.rng.uniform();
            let y = u8::from(cfg.rng.bernoulli(gauss_gap_success(v, cfg.eps)));
            Sample { v, y }
        })
        .collect();
    EmpiricalDistribution::from_samples(samples)
}
