use serde::Serialize;

use crate::binning::IntervalPartition;
use crate::error::{CalibError, Result};

/// One prediction-label pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub v: f64,
    pub y: u8,
}

impl Sample {
    pub fn residual(&self) -> f64 {
        f64::from(self.y) - self.v
    }
}

/// Weighted multiset of prediction-label pairs in insertion order.
///
/// Weights are uniform (1/n) unless the distribution was built with
/// [`EmpiricalDistribution::from_weighted`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<Sample>,
    weights: Vec<f64>,
}

fn check_v(index: usize, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(CalibError::OutOfRange { index, value: v })
    }
}

fn check_y(index: usize, y: i64) -> Result<u8> {
    match y {
        0 => Ok(0),
        1 => Ok(1),
        _ => Err(CalibError::BadLabel { index, value: y }),
    }
}

impl EmpiricalDistribution {
    pub fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(CalibError::EmptyInput);
        }
        for (i, s) in samples.iter().enumerate() {
            check_v(i, s.v)?;
            check_y(i, i64::from(s.y))?;
        }
        let w = 1.0 / samples.len() as f64;
        let weights = vec![w; samples.len()];
        Ok(Self { samples, weights })
    }

    /// Builds a distribution with explicit positive weights, normalized to sum 1.
    pub fn from_weighted(items: Vec<(Sample, f64)>) -> Result<Self> {
        if items.is_empty() {
            return Err(CalibError::EmptyInput);
        }
        let mut total = 0.0;
        for (i, (s, w)) in items.iter().enumerate() {
            check_v(i, s.v)?;
            check_y(i, i64::from(s.y))?;
            if !(w.is_finite() && *w > 0.0) {
                return Err(CalibError::BadWeight {
                    index: i,
                    value: *w,
                });
            }
            total += w;
        }
        let (samples, weights) = items.into_iter().map(|(s, w)| (s, w / total)).unzip();
        Ok(Self { samples, weights })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (Sample, f64)> + '_ {
        self.samples
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    pub fn to_pairs(&self) -> Vec<(f64, u8)> {
        self.samples.iter().map(|s| (s.v, s.y)).collect()
    }

    /// Sorted distinct predictions with summed weighted residuals w (y - v).
    pub fn merged_residuals(&self) -> (Vec<f64>, Vec<f64>) {
        let mut items: Vec<(f64, f64)> =
            self.iter().map(|(s, w)| (s.v, w * s.residual())).collect();
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut vs: Vec<f64> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        for (v, c) in items {
            match vs.last() {
                Some(&last) if last == v => *cs.last_mut().unwrap() += c,
                _ => {
                    vs.push(v);
                    cs.push(c);
                }
            }
        }
        (vs, cs)
    }

    fn map_v(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| Sample { v: f(s.v), y: s.y })
                .collect(),
            weights: self.weights.clone(),
        }
    }
}

pub fn make_empirical(pairs: &[(f64, i64)]) -> Result<EmpiricalDistribution> {
    if pairs.is_empty() {
        return Err(CalibError::EmptyInput);
    }
    let mut samples = Vec::with_capacity(pairs.len());
    for (i, &(v, y)) in pairs.iter().enumerate() {
        check_v(i, v)?;
        let y = check_y(i, y)?;
        samples.push(Sample { v, y });
    }
    EmpiricalDistribution::from_samples(samples)
}

/// Nearest multiple of `step`, ties upward, clamped to 1.
pub fn round_value(v: f64, step: f64) -> f64 {
    let k = (v / step + 0.5).floor();
    (k * step).clamp(0.0, 1.0)
}

pub fn round_to_grid(dist: &EmpiricalDistribution, step: f64) -> Result<EmpiricalDistribution> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(CalibError::BadStep(step));
    }
    Ok(dist.map_v(|v| round_value(v, step)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_v: Option<f64>,
    pub mean_y: Option<f64>,
}

pub fn reliability_bins(dist: &EmpiricalDistribution, bins: usize) -> Result<Vec<ReliabilityBin>> {
    let part = IntervalPartition::uniform(bins)?;
    let m = part.len();
    let mut count = vec![0usize; m];
    let mut mass = vec![0.0; m];
    let mut sv = vec![0.0; m];
    let mut sy = vec![0.0; m];
    for (s, w) in dist.iter() {
        let j = part.locate(s.v);
        count[j] += 1;
        mass[j] += w;
        sv[j] += w * s.v;
        sy[j] += w * f64::from(s.y);
    }
    Ok((0..m)
        .map(|j| {
            let (lo, hi) = part.interval(j);
            let defined = count[j] > 0;
            ReliabilityBin {
                lo,
                hi,
                count: count[j],
                mean_v: defined.then(|| sv[j] / mass[j]),
                mean_y: defined.then(|| sy[j] / mass[j]),
            }
        })
        .collect())
}
