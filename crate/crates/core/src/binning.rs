//! Exact ECE and binned ECE over interval partitions of [0, 1].

use std::collections::HashMap;

use crate::empirical::EmpiricalDistribution;
use crate::error::{CalibError, Result};

/// Boundaries 0 = b_0 < ... < b_m = 1. Interval j is [b_j, b_{j+1}), the last one closed.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalPartition {
    boundaries: Vec<f64>,
}

impl IntervalPartition {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(CalibError::BadPartition(
                "need at least two boundaries".into(),
            ));
        }
        if boundaries[0] != 0.0 || *boundaries.last().unwrap() != 1.0 {
            return Err(CalibError::BadPartition(
                "boundaries must start at 0 and end at 1".into(),
            ));
        }
        if boundaries
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(CalibError::BadPartition(
                "boundaries must be strictly increasing".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    pub fn uniform(bins: usize) -> Result<Self> {
        if bins < 1 {
            return Err(CalibError::BadBins(bins));
        }
        let b = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        Self::new(b)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interval(&self, j: usize) -> (f64, f64) {
        (self.boundaries[j], self.boundaries[j + 1])
    }

    pub fn width(&self, j: usize) -> f64 {
        self.boundaries[j + 1] - self.boundaries[j]
    }

    /// Index of the interval containing `v`, for v in [0, 1].
    pub fn locate(&self, v: f64) -> usize {
        let p = self.boundaries.partition_point(|&b| b <= v);
        p.saturating_sub(1).min(self.len() - 1)
    }
}

pub fn uniform_partition(bins: usize) -> Result<IntervalPartition> {
    IntervalPartition::uniform(bins)
}

/// Expected calibration error, grouping samples by bitwise-equal prediction.
pub fn ece(dist: &EmpiricalDistribution) -> f64 {
    let mut groups: HashMap<u64, (f64, f64)> = HashMap::new();
    let mut order = Vec::new();
    for (s, w) in dist.iter() {
        let e = groups.entry(s.v.to_bits()).or_insert_with(|| {
            order.push(s.v.to_bits());
            (0.0, 0.0)
        });
        e.0 += w;
        e.1 += w * s.residual();
    }
    // Summing in first-seen order keeps the result independent of hash iteration.
    order.iter().map(|k| groups[k].1.abs()).sum()
}

/// Mass-weighted average interval width.
pub fn average_width(dist: &EmpiricalDistribution, part: &IntervalPartition) -> f64 {
    dist.iter()
        .map(|(s, w)| w * part.width(part.locate(s.v)))
        .sum()
}

pub fn binned_ece(
    dist: &EmpiricalDistribution,
    part: &IntervalPartition,
    width_penalty: bool,
) -> f64 {
    let mut sums = vec![0.0; part.len()];
    for (s, w) in dist.iter() {
        sums[part.locate(s.v)] += w * s.residual();
    }
    let base: f64 = sums.iter().map(|x| x.abs()).sum();
    if width_penalty {
        base + average_width(dist, part)
    } else {
        base
    }
}
