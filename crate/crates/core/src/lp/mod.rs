//! Linear and mixed-binary programming.
//!
//! [`LinearProgram`] is a plain minimisation model with bounded variables and
//! bounded rows. [`solve_lp`] runs a bounded-variable primal simplex that
//! returns row duals, and [`solve_mbp`] wraps it in a deterministic
//! branch-and-bound for programs with binary variables.

mod branch;
mod simplex;

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use thiserror::Error;

pub use branch::{solve_mbp, MbpOptions, MbpOutcome, MbpSolution, MixedBinaryProgram};
pub use simplex::{solve_lp, solve_lp_with, SimplexOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("simplex iteration cap exceeded after {iterations} iterations")]
    IterationLimit { iterations: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Index of a column in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Index of a row in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub cost: f64,
    pub lo: f64,
    pub hi: f64,
}

/// A row `lo <= sum(coeffs) <= hi`. One-sided rows use an infinite bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub lo: f64,
    pub hi: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }
}

/// Minimise `c·x` subject to bounded rows and bounded variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lo: f64, hi: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            cost,
            lo,
            hi,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> RowId {
        let (lo, hi) = match relation {
            Relation::Le => (f64::NEG_INFINITY, rhs),
            Relation::Eq => (rhs, rhs),
            Relation::Ge => (rhs, f64::INFINITY),
        };
        self.add_range(name, coeffs, lo, hi)
    }

    /// Adds a two-sided row `lo <= a·x <= hi`.
    pub fn add_range(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        lo: f64,
        hi: f64,
    ) -> RowId {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            lo,
            hi,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn set_bounds(&mut self, var: VarId, lo: f64, hi: f64) {
        let v = &mut self.vars[var.0];
        v.lo = lo;
        v.hi = hi;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn row_by_name(&self, name: &str) -> Option<RowId> {
        self.rows.iter().position(|r| r.name == name).map(RowId)
    }

    /// Checks finiteness, bound order, index ranges and label uniqueness.
    pub fn validate(&self) -> Result<(), LpError> {
        let bad = |msg: String| Err(LpError::InvalidProgram(msg));
        let mut seen = HashSet::with_capacity(self.vars.len());
        for v in &self.vars {
            if !v.cost.is_finite() {
                return bad(format!("variable `{}` has non-finite cost", v.name));
            }
            if v.lo.is_nan() || v.hi.is_nan() || v.lo > v.hi {
                return bad(format!("variable `{}` has bounds [{}, {}]", v.name, v.lo, v.hi));
            }
            if v.lo == f64::INFINITY || v.hi == f64::NEG_INFINITY {
                return bad(format!("variable `{}` has an empty domain", v.name));
            }
            if !seen.insert(v.name.as_str()) {
                return bad(format!("duplicate variable label `{}`", v.name));
            }
        }
        let mut seen = HashSet::with_capacity(self.rows.len());
        for r in &self.rows {
            if r.lo.is_nan() || r.hi.is_nan() || r.lo > r.hi {
                return bad(format!("row `{}` has bounds [{}, {}]", r.name, r.lo, r.hi));
            }
            if r.lo == f64::INFINITY || r.hi == f64::NEG_INFINITY {
                return bad(format!("row `{}` has an empty range", r.name));
            }
            for &(v, a) in &r.coeffs {
                if v.0 >= self.vars.len() {
                    return bad(format!("row `{}` references missing variable {}", r.name, v.0));
                }
                if !a.is_finite() {
                    return bad(format!("row `{}` has a non-finite coefficient", r.name));
                }
            }
            if !seen.insert(r.name.as_str()) {
                return bad(format!("duplicate row label `{}`", r.name));
            }
        }
        Ok(())
    }

    /// Writes the program in CPLEX LP text format (debugging aid).
    pub fn write_lp_format<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let term = |a: f64, name: &str| {
            if a < 0.0 {
                format!(" - {} {}", -a, name)
            } else {
                format!(" + {} {}", a, name)
            }
        };
        writeln!(out, "Minimize")?;
        write!(out, " obj:")?;
        for v in &self.vars {
            if v.cost != 0.0 {
                write!(out, "{}", term(v.cost, &v.name))?;
            }
        }
        writeln!(out)?;
        writeln!(out, "Subject To")?;
        for r in &self.rows {
            let lhs: String = r
                .coeffs
                .iter()
                .map(|&(v, a)| term(a, &self.vars[v.0].name))
                .collect();
            if r.lo == r.hi {
                writeln!(out, " {}:{} = {}", r.name, lhs, r.lo)?;
            } else {
                if r.lo.is_finite() {
                    writeln!(out, " {}_lo:{} >= {}", r.name, lhs, r.lo)?;
                }
                if r.hi.is_finite() {
                    writeln!(out, " {}_hi:{} <= {}", r.name, lhs, r.hi)?;
                }
            }
        }
        writeln!(out, "Bounds")?;
        for v in &self.vars {
            match (v.lo.is_finite(), v.hi.is_finite()) {
                (true, true) => writeln!(out, " {} <= {} <= {}", v.lo, v.name, v.hi)?,
                (true, false) => writeln!(out, " {} >= {}", v.name, v.lo)?,
                (false, true) => writeln!(out, " -inf <= {} <= {}", v.name, v.hi)?,
                (false, false) => writeln!(out, " {} free", v.name)?,
            }
        }
        writeln!(out, "End")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

/// Result of a simplex solve.
///
/// `duals[r]` is the sensitivity of the optimal objective to a shift of row
/// `r`'s active bound (for equality rows: to its right-hand side).
/// `reduced_costs[j]` is `c_j - y·A_j`. Both are only meaningful when
/// `status == Optimal`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub(crate) fn non_optimal(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        LpSolution {
            status,
            x: vec![0.0; n],
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_duplicate_labels() {
        let mut lp = LinearProgram::new();
        lp.add_var("x", 1.0, 0.0, 1.0);
        lp.add_var("x", 1.0, 0.0, 1.0);
        assert!(matches!(lp.validate(), Err(LpError::InvalidProgram(_))));
    }

    #[test]
    fn validate_rejects_nan() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0, 0.0, 1.0);
        lp.add_row("r", vec![(x, f64::NAN)], Relation::Le, 1.0);
        assert!(lp.validate().is_err());
    }

    #[test]
    fn lp_format_dump_mentions_every_row() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0, 0.0, f64::INFINITY);
        lp.add_row("floor", vec![(x, 1.0)], Relation::Ge, 3.0);
        let mut buf = Vec::new();
        lp.write_lp_format(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("floor_lo: + 1 x >= 3"));
        assert!(text.starts_with("Minimize"));
    }
}
