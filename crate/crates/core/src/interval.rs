//! Randomly shifted interval calibration error and its dyadic surrogate.
//!
//! For a fixed width w the binned error is piecewise constant in the shift
//! r, changing only when r passes the phase v mod w of some sample. All
//! pieces are tabulated once; sampled shifts then cost a binary search each.

use serde::Serialize;

use crate::empirical::EmpiricalDistribution;
use crate::error::{CalibError, Result};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftAveraging {
    /// Average over this many uniform shifts.
    Sampled(usize),
    /// Integrate over the shift analytically.
    Exact,
}

#[derive(Clone, Debug)]
pub struct IntervalEstimatorConfig {
    pub epsilon: f64,
    pub shifts: ShiftAveraging,
    pub rng: SeededRng,
}

pub const DEFAULT_C: f64 = 8.0;
pub const DEFAULT_DELTA: f64 = 0.05;

/// Smallest k with 2^-k <= eps/2; then eps/4 < 2^-k as well.
pub fn k_star(epsilon: f64) -> u32 {
    let mut k = 0;
    while 0.5f64.powi(k as i32) > epsilon / 2.0 {
        k += 1;
    }
    k
}

pub fn default_shift_count(epsilon: f64, c: f64, delta: f64) -> usize {
    let ks = f64::from(k_star(epsilon).max(1));
    (c * (ks / delta).ln() / (epsilon * epsilon))
        .ceil()
        .max(1.0) as usize
}

impl IntervalEstimatorConfig {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(CalibError::BadEps(epsilon));
        }
        Ok(Self {
            epsilon,
            shifts: ShiftAveraging::Sampled(default_shift_count(epsilon, DEFAULT_C, DEFAULT_DELTA)),
            rng: SeededRng::new(seed),
        })
    }

    pub fn with_shifts(mut self, shifts: ShiftAveraging) -> Result<Self> {
        if shifts == ShiftAveraging::Sampled(0) {
            return Err(CalibError::BadConfig(
                "shift count must be at least 1".into(),
            ));
        }
        self.shifts = shifts;
        Ok(self)
    }
}

/// Binned error as a step function of the shift r in [0, w).
struct ShiftProfile {
    width: f64,
    /// Sorted phases in [0, w).
    phases: Vec<f64>,
    /// totals[p]: value when exactly the first p phases lie strictly below r.
    totals: Vec<f64>,
}

impl ShiftProfile {
    fn build(dist: &EmpiricalDistribution, width: f64) -> Self {
        let mut items: Vec<(f64, i64, f64)> = dist
            .iter()
            .map(|(s, w)| {
                let mut b = (s.v / width).floor();
                let mut q = s.v - b * width;
                if q < 0.0 {
                    b -= 1.0;
                    q = s.v - b * width;
                } else if q >= width {
                    b += 1.0;
                    q = (s.v - b * width).max(0.0);
                }
                (q, b as i64, w * s.residual())
            })
            .collect();
        items.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut ids: Vec<i64> = items.iter().flat_map(|t| [t.1, t.1 - 1]).collect();
        ids.sort_unstable();
        ids.dedup();
        let slot = |b: i64| ids.binary_search(&b).unwrap();
        let mut sums = vec![0.0; ids.len()];
        for t in &items {
            sums[slot(t.1)] += t.2;
        }
        let mut total: f64 = sums.iter().map(|s| s.abs()).sum();
        let mut totals = Vec::with_capacity(items.len() + 1);
        totals.push(total);
        for t in &items {
            let (from, to) = (slot(t.1), slot(t.1 - 1));
            total -= sums[from].abs() + sums[to].abs();
            sums[from] -= t.2;
            sums[to] += t.2;
            total += sums[from].abs() + sums[to].abs();
            totals.push(total.max(0.0));
        }
        Self {
            width,
            phases: items.iter().map(|t| t.0).collect(),
            totals,
        }
    }

    fn at(&self, r: f64) -> f64 {
        self.totals[self.phases.partition_point(|&q| q < r)]
    }

    fn exact(&self) -> f64 {
        let mut acc = 0.0;
        let mut prev = 0.0;
        for (p, &q) in self.phases.iter().enumerate() {
            acc += self.totals[p] * (q - prev);
            prev = q;
        }
        acc += self.totals[self.phases.len()] * (self.width - prev);
        (acc / self.width).clamp(0.0, 1.0)
    }

    fn sampled(&self, m: usize, rng: &mut SeededRng) -> f64 {
        let mut acc = 0.0;
        for _ in 0..m {
            acc += self.at(self.width * rng.uniform());
        }
        (acc / m as f64).clamp(0.0, 1.0)
    }
}

fn check_width(width: f64) -> Result<()> {
    if width > 0.0 && width <= 1.0 {
        Ok(())
    } else {
        Err(CalibError::BadWidth(width))
    }
}

/// Monte Carlo RintCE at `width` using `shifts_m` uniform shifts.
pub fn rintce_hat(
    dist: &EmpiricalDistribution,
    width: f64,
    shifts_m: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    check_width(width)?;
    if shifts_m == 0 {
        return Err(CalibError::BadConfig(
            "shift count must be at least 1".into(),
        ));
    }
    Ok(ShiftProfile::build(dist, width).sampled(shifts_m, rng))
}

/// RintCE at `width` with the expectation over the shift taken exactly.
pub fn rintce_exact(dist: &EmpiricalDistribution, width: f64) -> Result<f64> {
    check_width(width)?;
    Ok(ShiftProfile::build(dist, width).exact())
}

/// Binned error for one fixed shift r in [0, width).
pub fn rintce_at_shift(dist: &EmpiricalDistribution, width: f64, r: f64) -> Result<f64> {
    check_width(width)?;
    if !(0.0..width).contains(&r) {
        return Err(CalibError::BadConfig(format!(
            "shift {r} outside [0, {width})"
        )));
    }
    Ok(ShiftProfile::build(dist, width).at(r))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SintceResult {
    pub value: f64,
    pub argmin_k: u32,
    pub k_star: u32,
    /// RintCE estimate at width 2^-k for k = 0..=k_star.
    pub rintce: Vec<f64>,
    pub shifts: ShiftAveraging,
    pub n: usize,
}

/// min over k in 0..=k* of RintCE(2^-k) + 2^-k. Width k draws from `cfg.rng.fork(k)`.
pub fn sintce_hat(
    dist: &EmpiricalDistribution,
    cfg: &IntervalEstimatorConfig,
) -> Result<SintceResult> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(CalibError::BadEps(cfg.epsilon));
    }
    let ks = k_star(cfg.epsilon);
    let mut rintce = Vec::with_capacity(ks as usize + 1);
    let mut best = (f64::INFINITY, 0);
    for k in 0..=ks {
        let width = 0.5f64.powi(k as i32);
        let profile = ShiftProfile::build(dist, width);
        let r = match cfg.shifts {
            ShiftAveraging::Exact => profile.exact(),
            ShiftAveraging::Sampled(m) => {
                if m == 0 {
                    return Err(CalibError::BadConfig(
                        "shift count must be at least 1".into(),
                    ));
                }
                profile.sampled(m, &mut cfg.rng.fork(u64::from(k)))
            }
        };
        rintce.push(r);
        if r + width < best.0 {
            best = (r + width, k);
        }
    }
    Ok(SintceResult {
        value: best.0,
        argmin_k: best.1,
        k_star: ks,
        rintce,
        shifts: cfg.shifts,
        n: dist.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::make_empirical;
    use proptest::prelude::*;

    fn d(p: &[(f64, i64)]) -> EmpiricalDistribution {
        make_empirical(p).unwrap()
    }

    /// Direct evaluation of the binned sum for one shift.
    fn direct(dist: &EmpiricalDistribution, width: f64, r: f64) -> f64 {
        let mut sums = std::collections::BTreeMap::new();
        for (s, w) in dist.iter() {
            let j = ((s.v - r) / width).floor() as i64;
            *sums.entry(j).or_insert(0.0) += w * s.residual();
        }
        sums.values().map(|x: &f64| x.abs()).sum()
    }

    #[test]
    fn k_star_brackets() {
        for &eps in &[0.9, 0.5, 0.3, 0.1, 0.05, 0.01, 0.001] {
            let k = k_star(eps);
            let w = 0.5f64.powi(k as i32);
            assert!(eps / 4.0 < w && w <= eps / 2.0, "eps {eps}");
        }
        assert_eq!(k_star(0.01), 8);
        assert_eq!(k_star(0.5), 2);
    }

    #[test]
    fn default_shifts() {
        let m = default_shift_count(0.01, 8.0, 0.05);
        assert_eq!(m, (8.0 * (8.0f64 / 0.05).ln() * 1e4).ceil() as usize);
    }

    #[test]
    fn rintce_examples() {
        let mut rng = SeededRng::new(1);
        assert_eq!(
            rintce_hat(&d(&[(0.0, 0), (1.0, 1)]), 0.3, 1000, &mut rng).unwrap(),
            0.0
        );
        let one = d(&[(0.5, 1)]);
        for &r in &[0.0, 0.25, 0.5, 0.99] {
            assert_eq!(rintce_at_shift(&one, 1.0, r).unwrap(), 0.5);
        }
        assert_eq!(rintce_hat(&one, 1.0, 100, &mut rng).unwrap(), 0.5);
        // The two points sit exactly one width apart, so no shift puts them together.
        let two = d(&[(0.25, 1), (0.75, 0)]);
        assert!((rintce_exact(&two, 0.5).unwrap() - 0.75).abs() < 1e-15);
        let grid: f64 = (0..1000)
            .map(|i| direct(&two, 0.5, 0.5 * f64::from(i) / 1000.0))
            .sum::<f64>()
            / 1000.0;
        assert!((grid - 0.75).abs() < 1e-12);
        assert_eq!(rintce_exact(&two, 0.0), Err(CalibError::BadWidth(0.0)));
        assert_eq!(rintce_exact(&two, 1.5), Err(CalibError::BadWidth(1.5)));
    }

    #[test]
    fn sintce_examples() {
        let cfg = IntervalEstimatorConfig::new(0.01, 3).unwrap();
        let r = sintce_hat(&d(&[(0.0, 0), (1.0, 1)]), &cfg).unwrap();
        assert_eq!(r.value, 0.00390625);
        assert_eq!(r.k_star, 8);
        let cfg = IntervalEstimatorConfig::new(0.5, 3).unwrap();
        let r = sintce_hat(&d(&[(0.5, 1)]), &cfg).unwrap();
        assert_eq!(r.k_star, 2);
        assert_eq!(r.value, 0.75);
        assert!(IntervalEstimatorConfig::new(1.0, 0).is_err());
    }

    #[test]
    fn sintce_deterministic() {
        let dist = d(&[(0.1, 1), (0.4, 0), (0.45, 1), (0.8, 0), (0.95, 1)]);
        let cfg = IntervalEstimatorConfig::new(0.05, 11).unwrap();
        assert_eq!(
            sintce_hat(&dist, &cfg).unwrap(),
            sintce_hat(&dist, &cfg).unwrap()
        );
    }

    fn pairs() -> impl Strategy<Value = Vec<(f64, i64)>> {
        prop::collection::vec((0.0f64..=1.0, 0i64..=1), 1..40)
    }

    proptest! {
        #[test]
        fn profile_matches_direct(p in pairs(), k in 0i32..6, u in 0.0f64..1.0) {
            let dist = d(&p);
            let w = 0.5f64.powi(k);
            let r = u * w;
            let a = rintce_at_shift(&dist, w, r).unwrap();
            prop_assert!((a - direct(&dist, w, r)).abs() < 1e-12);
        }

        #[test]
        fn exact_is_mean_over_fine_grid(p in pairs(), k in 0i32..4) {
            let dist = d(&p);
            let w = 0.5f64.powi(k);
            let steps = 4000;
            let grid: f64 = (0..steps)
                .map(|i| direct(&dist, w, w * (f64::from(i) + 0.5) / f64::from(steps)))
                .sum::<f64>() / f64::from(steps);
            // Each breakpoint misplaces at most one grid cell.
            let tol = 2.0 * (p.len() as f64 + 1.0) / f64::from(steps);
            prop_assert!((rintce_exact(&dist, w).unwrap() - grid).abs() <= tol);
        }

        #[test]
        fn dyadic_monotone(p in pairs(), k in 1i32..8) {
            let dist = d(&p);
            let w = 0.5f64.powi(k);
            prop_assert!(rintce_exact(&dist, 2.0 * w).unwrap() <= rintce_exact(&dist, w).unwrap() + 1e-12);
        }

        #[test]
        fn ranges(p in pairs(), seed in 0u64..1000) {
            let dist = d(&p);
            let cfg = IntervalEstimatorConfig::new(0.1, seed).unwrap()
                .with_shifts(ShiftAveraging::Sampled(200)).unwrap();
            let r = sintce_hat(&dist, &cfg).unwrap();
            prop_assert!(r.value > 0.0 && r.value <= 2.0);
            prop_assert!(r.rintce.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}
