//! Smooth calibration error: the best 1-Lipschitz weighting bounded by 1.
//!
//! [`smce`] solves the program exactly with a dynamic program over the sorted
//! support. The value function of the prefix problem is concave and piecewise
//! linear in the last weight, so it is stored as two heaps of breakpoints
//! (left and right of its maximum) with lazy shifts. [`smce_full_pairwise`]
//! states the same program with every pairwise constraint and hands it to the
//! LP solver; it exists as an independent check.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::empirical::EmpiricalDistribution;
use crate::error::{CalibError, Result};
use crate::lp::{Cmp, LinearProgram, Sense};

pub const PAIRWISE_LIMIT: usize = 500;

/// Weights z_i on the sorted distinct predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub z: Vec<f64>,
}

impl WeightVector {
    pub fn is_feasible(&self) -> bool {
        self.z.iter().all(|z| z.abs() <= 1.0)
            && self.values.windows(2).all(|w| w[0] < w[1])
            && (1..self.z.len())
                .all(|i| (self.z[i] - self.z[i - 1]).abs() <= self.values[i] - self.values[i - 1])
    }
}

#[derive(Clone, Copy, Debug)]
struct Bp {
    pos: f64,
    wt: f64,
}

impl PartialEq for Bp {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Bp {}
impl PartialOrd for Bp {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Bp {
    fn cmp(&self, o: &Self) -> Ordering {
        self.pos.total_cmp(&o.pos).then(self.wt.total_cmp(&o.wt))
    }
}

/// Concave piecewise-linear function on the line, kept as breakpoints with
/// slope drops. `left` holds breakpoints at or left of the maximum, `right`
/// those to its right; `mid` is the slope between the two innermost ones.
struct Concave {
    left: BinaryHeap<Bp>,
    right: BinaryHeap<Reverse<Bp>>,
    shift_l: f64,
    shift_r: f64,
    mid: f64,
}

// Exceeds any |c_i| (at most 1), so clamping to the box always pays off.
const WALL: f64 = 4.0;

impl Concave {
    fn new() -> Self {
        Self {
            left: BinaryHeap::new(),
            right: BinaryHeap::new(),
            shift_l: 0.0,
            shift_r: 0.0,
            mid: 0.0,
        }
    }

    fn top_l(&self) -> Option<Bp> {
        self.left.peek().map(|b| Bp {
            pos: b.pos + self.shift_l,
            wt: b.wt,
        })
    }

    fn top_r(&self) -> Option<Bp> {
        self.right.peek().map(|b| Bp {
            pos: b.0.pos + self.shift_r,
            wt: b.0.wt,
        })
    }

    fn push_l(&mut self, pos: f64, wt: f64) {
        if wt > 0.0 {
            self.left.push(Bp {
                pos: pos - self.shift_l,
                wt,
            });
        }
    }

    fn push_r(&mut self, pos: f64, wt: f64) {
        if wt > 0.0 {
            self.right.push(Reverse(Bp {
                pos: pos - self.shift_r,
                wt,
            }));
        }
    }

    /// Adds -w * max(0, x - z): slopes left of x rise by w.
    fn add_left_wall(&mut self, x: f64, w: f64) {
        match self.top_r() {
            Some(r) if x > r.pos => {
                self.push_r(x, w);
                self.mid += w;
            }
            _ => self.push_l(x, w),
        }
    }

    /// Adds -w * max(0, z - x): slopes right of x fall by w.
    fn add_right_wall(&mut self, x: f64, w: f64) {
        match self.top_l() {
            Some(l) if x < l.pos => {
                self.push_l(x, w);
                self.mid -= w;
            }
            _ => self.push_r(x, w),
        }
    }

    fn add_linear(&mut self, c: f64) {
        self.mid += c;
    }

    /// Restores: slope right of the left top is <= 0, slope left of it is >= 0.
    fn rebalance(&mut self) {
        while self.mid > 0.0 {
            let Some(r) = self.top_r() else { break };
            self.right.pop();
            self.push_l(r.pos, r.wt);
            self.mid -= r.wt;
        }
        while let Some(l) = self.top_l() {
            if self.mid + l.wt >= 0.0 {
                break;
            }
            self.left.pop();
            self.push_r(l.pos, l.wt);
            self.mid += l.wt;
        }
    }

    fn argmax(&self) -> f64 {
        self.top_l().map_or(-1.0, |b| b.pos)
    }

    /// Replaces F by z -> max over |z' - z| <= d of F(z').
    fn window_max(&mut self, d: f64) {
        if let Some(m) = self.top_l() {
            self.left.pop();
            self.push_l(m.pos, m.wt + self.mid);
            self.push_r(m.pos, -self.mid);
            self.mid = 0.0;
        }
        self.shift_l -= d;
        self.shift_r += d;
    }
}

/// Maximizes sum c_i z_i over |z_i| <= 1, |z_{i+1} - z_i| <= v_{i+1} - v_i.
fn lipschitz_max(values: &[f64], c: &[f64]) -> Vec<f64> {
    let d = values.len();
    let mut f = Concave::new();
    let mut peaks = Vec::with_capacity(d);
    for i in 0..d {
        if i > 0 {
            f.window_max(values[i] - values[i - 1]);
        }
        f.add_left_wall(-1.0, WALL);
        f.add_right_wall(1.0, WALL);
        f.add_linear(c[i]);
        f.rebalance();
        peaks.push(f.argmax());
    }
    let mut z = vec![0.0; d];
    z[d - 1] = peaks[d - 1].clamp(-1.0, 1.0);
    for i in (0..d - 1).rev() {
        let gap = values[i + 1] - values[i];
        let mut zi = peaks[i]
            .clamp(z[i + 1] - gap, z[i + 1] + gap)
            .clamp(-1.0, 1.0);
        // Rounding in the clamp bounds can overshoot the gap by an ulp.
        while (zi - z[i + 1]).abs() > gap {
            zi = if zi > z[i + 1] {
                zi.next_down()
            } else {
                zi.next_up()
            };
        }
        z[i] = zi;
    }
    z
}

pub fn smce(dist: &EmpiricalDistribution) -> (f64, WeightVector) {
    let (values, c) = dist.merged_residuals();
    let z = lipschitz_max(&values, &c);
    let value: f64 = c.iter().zip(&z).map(|(a, b)| a * b).sum();
    if value > 0.0 {
        (value.min(1.0), WeightVector { values, z })
    } else {
        let z = vec![0.0; values.len()];
        (0.0, WeightVector { values, z })
    }
}

/// smCE as an LP with one variable per sample and all pairwise Lipschitz rows.
pub fn smce_full_pairwise(dist: &EmpiricalDistribution) -> Result<f64> {
    let n = dist.len();
    if n > PAIRWISE_LIMIT {
        return Err(CalibError::TooLarge {
            size: n,
            limit: PAIRWISE_LIMIT,
        });
    }
    let mut lp = LinearProgram::new(Sense::Maximize);
    let vars: Vec<usize> = dist
        .iter()
        .map(|(s, w)| lp.add_var(w * s.residual(), -1.0, 1.0))
        .collect();
    let s = dist.samples();
    for i in 0..n {
        for j in i + 1..n {
            let gap = (s[i].v - s[j].v).abs();
            lp.add_row(vec![(vars[i], 1.0), (vars[j], -1.0)], Cmp::Le, gap);
            lp.add_row(vec![(vars[i], 1.0), (vars[j], -1.0)], Cmp::Ge, -gap);
        }
    }
    Ok(lp.solve()?.objective)
}
