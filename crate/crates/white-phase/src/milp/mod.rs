//! Exact solver for small mixed-integer linear programs.
//!
//! A dense-simplex LP core drives best-first branch-and-bound on the
//! binary variables. Everything is deterministic for identical inputs:
//! Dantzig pricing with a Bland-rule anti-cycling fallback, best-bound node
//! selection with depth/variable-index tie-breaks, and the down branch
//! explored first. Node budgets make the solver preemptible; a warm-start
//! assignment seeds the incumbent.
//!
//! Tolerances: feasibility 1e-6 absolute, integrality 1e-6.

mod branch;
mod simplex;
mod text;

pub use branch::{solve_mip, solve_mip_warm, Budget, MipSolution, MipStatus};
pub use text::write_lp;

use thiserror::Error;

pub(crate) use simplex::{CoreLp, LpStatus, Simplex};

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("cut references unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("simplex iteration limit exceeded")]
    IterationLimit,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// One variable: bounds plus a binary flag (binaries must be 0/1 bounded).
#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub is_binary: bool,
}

/// One constraint row over sparse coefficients.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization program. Build with [`LinearProgram::add_var`],
/// [`LinearProgram::add_binary`], and [`LinearProgram::add_row`].
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Sparse objective, minimized.
    pub objective: Vec<(usize, f64)>,
    /// Constant term reported with every objective value.
    pub objective_constant: f64,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            is_binary: false,
        });
        self.variables.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            is_binary: true,
        });
        self.variables.len() - 1
    }

    /// Fixes a variable to a constant by collapsing its bounds.
    pub fn fix_var(&mut self, var: usize, value: f64) {
        self.variables[var].lower = value;
        self.variables[var].upper = value;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row { coeffs, sense, rhs });
    }

    /// Accumulates an objective coefficient.
    pub fn obj(&mut self, var: usize, coeff: f64) {
        if coeff != 0.0 {
            self.objective.push((var, coeff));
        }
    }

    pub fn binary_count(&self) -> usize {
        self.variables.iter().filter(|v| v.is_binary).count()
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.variables.len();
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper + 1e-12 {
                return Err(MilpError::InvalidProgram(format!(
                    "variable {} ({}) has bounds [{}, {}]",
                    i, v.name, v.lower, v.upper
                )));
            }
            if v.is_binary && (v.lower < -1e-12 || v.upper > 1.0 + 1e-12) {
                return Err(MilpError::InvalidProgram(format!(
                    "binary {} must be bounded within [0, 1]",
                    v.name
                )));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(MilpError::InvalidProgram(format!("row {r} rhs not finite")));
            }
            for &(c, a) in &row.coeffs {
                if c >= n {
                    return Err(MilpError::InvalidProgram(format!(
                        "row {r} references variable {c} of {n}"
                    )));
                }
                if !a.is_finite() {
                    return Err(MilpError::InvalidProgram(format!(
                        "row {r} has a non-finite coefficient"
                    )));
                }
            }
        }
        for &(c, a) in &self.objective {
            if c >= n || !a.is_finite() {
                return Err(MilpError::InvalidProgram(
                    "objective references an unknown variable or is not finite".into(),
                ));
            }
        }
        Ok(())
    }

    /// Dense objective vector.
    fn dense_objective(&self) -> Vec<f64> {
        let mut obj = vec![0.0; self.variables.len()];
        for &(c, a) in &self.objective {
            obj[c] += a;
        }
        obj
    }

    /// Objective value of an assignment, including the constant.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .map(|&(c, a)| a * x[c])
                .sum::<f64>()
    }

    /// Checks an assignment against bounds, rows, and integrality.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.variables.len() {
            return false;
        }
        for (v, &xi) in self.variables.iter().zip(x) {
            if xi < v.lower - tol || xi > v.upper + tol {
                return false;
            }
            if v.is_binary && (xi - xi.round()).abs() > tol {
                return false;
            }
        }
        self.rows.iter().all(|row| {
            let lhs: f64 = row.coeffs.iter().map(|&(c, a)| a * x[c]).sum();
            match row.sense {
                Sense::Le => lhs <= row.rhs + tol,
                Sense::Ge => lhs >= row.rhs - tol,
                Sense::Eq => (lhs - row.rhs).abs() <= tol,
            }
        })
    }

    /// Lowers the program into solver form: singleton rows become bound
    /// tightenings, duplicate-support rows merge into ranged activities.
    /// Returns `None` if presolve detects an empty-support contradiction.
    pub(crate) fn to_core(&self) -> Option<CoreLp> {
        let n = self.variables.len();
        let mut lb: Vec<f64> = self.variables.iter().map(|v| v.lower).collect();
        let mut ub: Vec<f64> = self.variables.iter().map(|v| v.upper).collect();

        let mut activities: Vec<(Vec<(usize, f64)>, f64, f64)> = Vec::new();
        use std::collections::HashMap;
        let mut seen: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
        for row in &self.rows {
            let mut coeffs: Vec<(usize, f64)> = row
                .coeffs
                .iter()
                .copied()
                .filter(|&(_, a)| a != 0.0)
                .collect();
            coeffs.sort_by_key(|&(c, _)| c);
            coeffs.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            coeffs.retain(|&(_, a)| a != 0.0);
            let (lo, hi) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            if coeffs.is_empty() {
                // 0 <=/=/>= rhs: either vacuous or contradictory.
                if lo > 1e-9 || hi < -1e-9 {
                    return None;
                }
                continue;
            }
            if coeffs.len() == 1 {
                let (c, a) = coeffs[0];
                let (mut vlo, mut vhi) = (lo / a, hi / a);
                if a < 0.0 {
                    std::mem::swap(&mut vlo, &mut vhi);
                }
                lb[c] = lb[c].max(vlo);
                ub[c] = ub[c].min(vhi);
                continue;
            }
            let key: Vec<(usize, u64)> = coeffs.iter().map(|&(c, a)| (c, a.to_bits())).collect();
            match seen.get(&key) {
                Some(&idx) => {
                    activities[idx].1 = activities[idx].1.max(lo);
                    activities[idx].2 = activities[idx].2.min(hi);
                }
                None => {
                    seen.insert(key, activities.len());
                    activities.push((coeffs, lo, hi));
                }
            }
        }

        let nrows = activities.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, (coeffs, _, _)) in activities.iter().enumerate() {
            for &(c, a) in coeffs {
                cols[c].push((r, a));
            }
        }
        for (_, lo, hi) in &activities {
            lb.push(*lo);
            ub.push(*hi);
        }
        Some(CoreLp {
            ncols: n,
            nrows,
            cols,
            lb,
            ub,
            obj: self.dense_objective(),
        })
    }
}

/// Outcome of a relaxed LP solve.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// Solves the LP relaxation (binaries relaxed to `[0, 1]`).
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, MilpError> {
    lp.validate()?;
    let Some(core) = lp.to_core() else {
        return Ok(LpOutcome::Infeasible);
    };
    // Presolve bound tightening can itself expose infeasibility.
    if core.lb.iter().zip(&core.ub).any(|(l, u)| l > &(u + 1e-9)) {
        return Ok(LpOutcome::Infeasible);
    }
    let mut s = Simplex::new(&core);
    match s.solve(&core)? {
        LpStatus::Infeasible => Ok(LpOutcome::Infeasible),
        LpStatus::Unbounded => Ok(LpOutcome::Unbounded),
        LpStatus::Optimal => {
            let full = s.extract(&core);
            let x = full[..lp.variables.len()].to_vec();
            let value = lp.objective_value(&x);
            Ok(LpOutcome::Optimal { x, value })
        }
    }
}

/// Appends cut rows, verifying the variable references.
pub fn apply_cuts(lp: &LinearProgram, cuts: Vec<Row>) -> Result<LinearProgram, MilpError> {
    let n = lp.variables.len();
    let mut out = lp.clone();
    for cut in cuts {
        if let Some(&(c, _)) = cut.coeffs.iter().find(|&&(c, _)| c >= n) {
            return Err(MilpError::UnknownVariable(c));
        }
        out.rows.push(cut);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_attained_optimum() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 1.0);
        lp.obj(x, -1.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal { x: sol, value } => {
                assert!((sol[x] - 1.0).abs() < 1e-9);
                assert!((value + 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tight_corner() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 1.0);
        let y = lp.add_var("y", 0.0, 1.0);
        lp.obj(x, 1.0);
        lp.obj(y, 1.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Ge, 2.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal { x: sol, value } => {
                assert!((value - 2.0).abs() < 1e-9);
                assert!((sol[x] - 1.0).abs() < 1e-9);
                assert!((sol[y] - 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contradictions_are_infeasible() {
        // A zero-coefficient row that cannot reach its rhs.
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 1.0);
        lp.add_row(vec![(x, 0.0)], Sense::Ge, 1.0);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
        // A real row out of reach of the variable bounds.
        let mut lp2 = LinearProgram::new();
        let a = lp2.add_var("a", 0.0, 1.0);
        let b = lp2.add_var("b", 0.0, 1.0);
        lp2.add_row(vec![(a, 1.0), (b, 1.0)], Sense::Ge, 3.0);
        assert_eq!(solve_lp(&lp2).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_is_reported_distinctly() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY);
        lp.obj(x, -1.0);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_rows_bind() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 10.0);
        let y = lp.add_var("y", 0.0, 10.0);
        lp.obj(x, 1.0);
        lp.obj(y, 2.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Eq, 4.0);
        lp.add_row(vec![(x, 1.0), (y, -1.0)], Sense::Le, 2.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal { x: sol, value } => {
                assert!((sol[x] + sol[y] - 4.0).abs() < 1e-8);
                assert!((sol[x] - 3.0).abs() < 1e-8, "{sol:?}");
                assert!((value - 5.0).abs() < 1e-8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn range_merge_keeps_both_sides() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", -10.0, 10.0);
        let y = lp.add_var("y", -10.0, 10.0);
        lp.obj(x, 1.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Ge, -1.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
        lp.add_row(vec![(y, 1.0), (x, 0.5)], Sense::Eq, 0.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal { x: sol, .. } => {
                let s = sol[x] + sol[y];
                assert!((-1.0 - 1e-8..=1.0 + 1e-8).contains(&s), "{sol:?}");
                assert!((sol[y] + 0.5 * sol[x]).abs() < 1e-8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cuts_must_reference_known_variables() {
        let mut lp = LinearProgram::new();
        lp.add_var("x", 0.0, 1.0);
        let err = apply_cuts(
            &lp,
            vec![Row {
                coeffs: vec![(3, 1.0)],
                sense: Sense::Le,
                rhs: 0.0,
            }],
        )
        .unwrap_err();
        assert!(matches!(err, MilpError::UnknownVariable(3)));
    }
}
