//! Lower distance to calibration via discretized coupling LPs.
//!
//! Predictions are rounded to multiples of `eps1`; the calibrated side of
//! the coupling lives on a grid containing the rounded support and {0, 1}
//! with spacing at most `eps2`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::empirical::{round_to_grid, EmpiricalDistribution};
use crate::error::{CalibError, Result};
use crate::lp::{Cmp, LinearProgram, Sense};

pub const DEFAULT_EPS: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LdceForm {
    Primal,
    Dual,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    radius: f64,
}

impl Grid {
    /// Union of `anchors` and {0, 1}, refined so consecutive gaps are <= `radius`.
    pub fn covering(anchors: &[f64], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(CalibError::BadEps(radius));
        }
        let mut base: Vec<f64> = anchors.iter().copied().chain([0.0, 1.0]).collect();
        base.sort_by(f64::total_cmp);
        base.dedup();
        let mut points = vec![base[0]];
        for w in base.windows(2) {
            let (a, b) = (w[0], w[1]);
            let pieces = ((b - a) / radius).ceil().max(1.0) as usize;
            for i in 1..pieces {
                points.push(a + (b - a) * i as f64 / pieces as f64);
            }
            points.push(b);
        }
        Ok(Self { points, radius })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn index_of(&self, v: f64) -> usize {
        self.points
            .binary_search_by(|p| p.total_cmp(&v))
            .expect("support point missing from grid")
    }
}

/// Population mass per (v, y) after rounding, keyed by sorted v then y.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundedSupport {
    pub entries: Vec<(f64, u8, f64)>,
}

fn check_eps(eps1: f64, eps2: f64) -> Result<()> {
    for e in [eps1, eps2] {
        if !(e > 0.0 && e <= 0.5) {
            return Err(CalibError::BadEps(e));
        }
    }
    Ok(())
}

fn prepare(dist: &EmpiricalDistribution, eps1: f64, eps2: f64) -> Result<(RoundedSupport, Grid)> {
    check_eps(eps1, eps2)?;
    let rounded = round_to_grid(dist, eps1)?;
    let mut mass: BTreeMap<(u64, u8), f64> = BTreeMap::new();
    for (s, w) in rounded.iter() {
        // Non-negative floats order the same as their bit patterns.
        *mass.entry((s.v.to_bits(), s.y)).or_insert(0.0) += w;
    }
    let entries: Vec<(f64, u8, f64)> = mass
        .into_iter()
        .map(|((b, y), m)| (f64::from_bits(b), y, m))
        .collect();
    let anchors: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let grid = Grid::covering(&anchors, eps2)?;
    Ok((RoundedSupport { entries }, grid))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingSolution {
    /// Nonzero masses (u, v, y, mass).
    pub mass: Vec<(f64, f64, u8, f64)>,
    pub objective: f64,
}

impl CouplingSolution {
    /// Largest violation of the marginal and balance constraints against `support`.
    pub fn max_violation(&self, support: &RoundedSupport) -> f64 {
        let mut worst: f64 = 0.0;
        for &(v, y, g) in &support.entries {
            let got: f64 = self
                .mass
                .iter()
                .filter(|m| m.1 == v && m.2 == y)
                .map(|m| m.3)
                .sum();
            worst = worst.max((got - g).abs());
        }
        let mut bal: BTreeMap<u64, f64> = BTreeMap::new();
        for &(u, _, y, m) in &self.mass {
            worst = worst.max(-m);
            *bal.entry(u.to_bits()).or_insert(0.0) += (f64::from(y) - u) * m;
        }
        bal.values().fold(worst, |w, b| w.max(b.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualSolution {
    pub grid: Vec<f64>,
    /// r[y][i]: potential at grid point i for label y.
    pub r: [Vec<f64>; 2],
    pub s: Vec<f64>,
    pub objective: f64,
}

impl DualSolution {
    pub fn max_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &u) in self.grid.iter().enumerate() {
            worst = worst.max(self.s[i].abs() - 1.0);
            for y in 0..2 {
                worst = worst.max(self.r[y][i] - (y as f64 - u) * self.s[i]);
                if i > 0 {
                    let gap = u - self.grid[i - 1];
                    worst = worst.max((self.r[y][i] - self.r[y][i - 1]).abs() - gap);
                }
            }
        }
        worst
    }
}

pub fn ldce_primal_solution(
    dist: &EmpiricalDistribution,
    eps1: f64,
    eps2: f64,
) -> Result<CouplingSolution> {
    let (support, grid) = prepare(dist, eps1, eps2)?;
    let us = grid.points();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut var_of = Vec::with_capacity(support.entries.len());
    for &(v, _, _) in &support.entries {
        let vars: Vec<usize> = us
            .iter()
            .map(|&u| lp.add_var((u - v).abs(), 0.0, f64::INFINITY))
            .collect();
        var_of.push(vars);
    }
    for (k, &(_, _, g)) in support.entries.iter().enumerate() {
        lp.add_row(var_of[k].iter().map(|&x| (x, 1.0)).collect(), Cmp::Eq, g);
    }
    for (i, &u) in us.iter().enumerate() {
        let terms: Vec<(usize, f64)> = support
            .entries
            .iter()
            .enumerate()
            .map(|(k, &(_, y, _))| (var_of[k][i], f64::from(y) - u))
            .filter(|t| t.1 != 0.0)
            .collect();
        if !terms.is_empty() {
            lp.add_row(terms, Cmp::Eq, 0.0);
        }
    }
    let sol = lp.solve()?;
    let mut mass = Vec::new();
    for (k, &(v, y, _)) in support.entries.iter().enumerate() {
        for (i, &u) in us.iter().enumerate() {
            let m = sol.primal[var_of[k][i]];
            if m > 0.0 {
                mass.push((u, v, y, m));
            }
        }
    }
    Ok(CouplingSolution {
        mass,
        objective: sol.objective,
    })
}

pub fn ldce_dual_solution(
    dist: &EmpiricalDistribution,
    eps1: f64,
    eps2: f64,
) -> Result<DualSolution> {
    let (support, grid) = prepare(dist, eps1, eps2)?;
    let us = grid.points();
    let m = us.len();
    let mut obj = [vec![0.0; m], vec![0.0; m]];
    for &(v, y, g) in &support.entries {
        obj[y as usize][grid.index_of(v)] += g;
    }
    let mut lp = LinearProgram::new(Sense::Maximize);
    let r: Vec<Vec<usize>> = (0..2)
        .map(|y| (0..m).map(|i| lp.add_var(obj[y][i], -1.0, 1.0)).collect())
        .collect();
    let s: Vec<usize> = (0..m).map(|_| lp.add_var(0.0, -1.0, 1.0)).collect();
    for (i, &u) in us.iter().enumerate() {
        for (y, ry) in r.iter().enumerate() {
            // r(u, y) - (y - u) s(u) <= 0
            lp.add_row(vec![(ry[i], 1.0), (s[i], -(y as f64 - u))], Cmp::Le, 0.0);
            if i > 0 {
                let gap = u - us[i - 1];
                lp.add_row(vec![(ry[i], 1.0), (ry[i - 1], -1.0)], Cmp::Le, gap);
                lp.add_row(vec![(ry[i], 1.0), (ry[i - 1], -1.0)], Cmp::Ge, -gap);
            }
        }
    }
    let sol = lp.solve()?;
    let pick = |ids: &[usize]| ids.iter().map(|&j| sol.primal[j]).collect::<Vec<f64>>();
    Ok(DualSolution {
        grid: us.to_vec(),
        r: [pick(&r[0]), pick(&r[1])],
        s: pick(&s),
        objective: sol.objective,
    })
}

pub fn ldce(dist: &EmpiricalDistribution, eps1: f64, eps2: f64, form: LdceForm) -> Result<f64> {
    let raw = match form {
        LdceForm::Primal => ldce_primal_solution(dist, eps1, eps2)?.objective,
        LdceForm::Dual => ldce_dual_solution(dist, eps1, eps2)?.objective,
    };
    Ok(raw.clamp(0.0, 1.0))
}

pub fn ldce_both_forms(dist: &EmpiricalDistribution, eps1: f64, eps2: f64) -> Result<(f64, f64)> {
    Ok((
        ldce(dist, eps1, eps2, LdceForm::Primal)?,
        ldce(dist, eps1, eps2, LdceForm::Dual)?,
    ))
}

/// Rounded support and grid the LPs are built on, exposed for checking solutions.
pub fn discretize(
    dist: &EmpiricalDistribution,
    eps1: f64,
    eps2: f64,
) -> Result<(RoundedSupport, Grid)> {
    prepare(dist, eps1, eps2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::make_empirical;
    use crate::smooth::smce;
    use proptest::prelude::*;

    const E: f64 = DEFAULT_EPS;

    fn d(p: &[(f64, i64)]) -> EmpiricalDistribution {
        make_empirical(p).unwrap()
    }

    #[test]
    fn grid_covers() {
        let g = Grid::covering(&[0.3, 0.31], 0.1).unwrap();
        let p = g.points();
        assert_eq!((p[0], *p.last().unwrap()), (0.0, 1.0));
        assert!(p
            .windows(2)
            .all(|w| w[0] < w[1] && w[1] - w[0] <= 0.1 + 1e-15));
        assert!(p.contains(&0.3) && p.contains(&0.31));
    }

    #[test]
    fn examples() {
        let one = d(&[(0.5, 1)]);
        assert!((ldce(&one, E, E, LdceForm::Dual).unwrap() - 0.5).abs() < 1e-9);
        let (a, b) = ldce_both_forms(&one, E, E).unwrap();
        assert!((a - 0.5).abs() < 1e-9 && (b - 0.5).abs() < 1e-9);
        let (a, b) = ldce_both_forms(&d(&[(0.0, 0), (1.0, 1)]), E, E).unwrap();
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        assert_eq!(
            ldce(&one, 0.0, E, LdceForm::Dual),
            Err(CalibError::BadEps(0.0))
        );
        assert_eq!(
            ldce(&one, E, 0.6, LdceForm::Dual),
            Err(CalibError::BadEps(0.6))
        );
    }

    #[test]
    fn two_point_closed_form() {
        // Half mass at 1/4 with mean label 3/4, half at 3/4 with mean label 1/4.
        // The LP optimum is 2a^2 / (1/2 + a) at a = 1/4, i.e. 1/6.
        let g = d(&[
            (0.25, 1),
            (0.25, 1),
            (0.25, 1),
            (0.25, 0),
            (0.75, 0),
            (0.75, 0),
            (0.75, 0),
            (0.75, 1),
        ]);
        let (a, b) = ldce_both_forms(&g, E, E).unwrap();
        assert!((a - 1.0 / 6.0).abs() < 1e-7, "{a}");
        assert!((b - a).abs() < 1e-6);
    }

    #[test]
    fn solutions_feasible() {
        let g = d(&[(0.12, 1), (0.33, 0), (0.5, 1), (0.71, 1), (0.9, 0)]);
        let c = ldce_primal_solution(&g, E, E).unwrap();
        let (support, _) = discretize(&g, E, E).unwrap();
        assert!(c.max_violation(&support) < 1e-8);
        let dual = ldce_dual_solution(&g, E, E).unwrap();
        assert!(dual.max_violation() < 1e-9);
        assert!((c.objective - dual.objective).abs() < 1e-6);
    }

    fn pairs() -> impl Strategy<Value = Vec<(f64, i64)>> {
        prop::collection::vec((0.0f64..=1.0, 0i64..=1), 1..25)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn strong_duality(p in pairs()) {
            let (a, b) = ldce_both_forms(&d(&p), E, E).unwrap();
            prop_assert!((a - b).abs() < 1e-6, "primal {} dual {}", a, b);
        }

        #[test]
        fn smooth_sandwich(p in pairs()) {
            let dist = d(&p);
            let l = ldce(&dist, E, E, LdceForm::Dual).unwrap();
            let s = smce(&dist).0;
            let slack = 3.0 * (E + E) + 1e-6;
            prop_assert!(0.5 * l - slack <= s && s <= 2.0 * l + slack, "ldce {} smce {}", l, s);
        }

        #[test]
        fn refinement(p in pairs()) {
            let dist = d(&p);
            let coarse = ldce(&dist, E, 0.02, LdceForm::Dual).unwrap();
            let fine = ldce(&dist, E, E, LdceForm::Dual).unwrap();
            prop_assert!(fine <= coarse + 2.0 * (0.02 - E) + 1e-6);
        }
    }
}
