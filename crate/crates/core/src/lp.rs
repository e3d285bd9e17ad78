//! Small linear-programming layer over `microlp` with post-solve feasibility checks.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::Serialize;

use crate::error::{CalibError, Result};

pub const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
struct Row {
    terms: Vec<(usize, f64)>,
    cmp: Cmp,
    rhs: f64,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    sense: Sense,
    obj: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearProgramSolution {
    pub objective: f64,
    pub primal: Vec<f64>,
    pub status: LpStatus,
    /// `microlp` does not expose duals; always `None` from [`LinearProgram::solve`].
    pub dual: Option<Vec<f64>>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            obj: Vec::new(),
            bounds: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, obj: f64, lo: f64, hi: f64) -> usize {
        self.obj.push(obj);
        self.bounds.push((lo, hi));
        self.obj.len() - 1
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push(Row { terms, cmp, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`, each row scaled by its coefficient norm.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (&v, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - v).max(v - hi);
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
            let scale = row.terms.iter().map(|t| t.1.abs()).fold(1.0, f64::max);
            let gap = match row.cmp {
                Cmp::Le => lhs - row.rhs,
                Cmp::Ge => row.rhs - lhs,
                Cmp::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(gap / scale);
        }
        worst
    }

    pub fn solve(&self) -> Result<LinearProgramSolution> {
        let dir = match self.sense {
            Sense::Minimize => OptimizationDirection::Minimize,
            Sense::Maximize => OptimizationDirection::Maximize,
        };
        let mut p = Problem::new(dir);
        let vars: Vec<_> = self
            .obj
            .iter()
            .zip(&self.bounds)
            .map(|(&c, &b)| p.add_var(c, b))
            .collect();
        for row in &self.rows {
            let op = match row.cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Eq => ComparisonOp::Eq,
                Cmp::Ge => ComparisonOp::Ge,
            };
            let expr: Vec<_> = row.terms.iter().map(|&(j, a)| (vars[j], a)).collect();
            p.add_constraint(expr.as_slice(), op, row.rhs);
        }
        let status_err = |s| CalibError::SolverFailure(s);
        let outcome = p.solve().map_err(|e| match e {
            microlp::Error::Infeasible => status_err(LpStatus::Infeasible),
            microlp::Error::Unbounded => status_err(LpStatus::Unbounded),
            _ => status_err(LpStatus::NumericalFailure),
        })?;
        let sol = outcome
            .into_solution()
            .map_err(|_| status_err(LpStatus::NumericalFailure))?;
        let primal: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
        if self.max_violation(&primal) > FEAS_TOL {
            return Err(status_err(LpStatus::NumericalFailure));
        }
        Ok(LinearProgramSolution {
            objective: self.objective_at(&primal),
            primal,
            status: LpStatus::Optimal,
            dual: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_max() {
        // max x + y, x + 2y <= 4, 3x + y <= 6, x, y >= 0 -> (1.6, 1.2)
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(1.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0), (y, 2.0)], Cmp::Le, 4.0);
        lp.add_row(vec![(x, 3.0), (y, 1.0)], Cmp::Le, 6.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 2.8).abs() < 1e-9);
        assert_eq!(s.status, LpStatus::Optimal);
    }

    #[test]
    fn infeasible_reported() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(vec![(x, 1.0)], Cmp::Ge, 2.0);
        assert_eq!(
            lp.solve(),
            Err(CalibError::SolverFailure(LpStatus::Infeasible))
        );
    }
}
