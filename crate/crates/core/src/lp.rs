//! Thin wrapper around `minilp` for the small dense feasibility problems used
//! throughout the crate.
//!
//! Every feasibility question is posed in phase-one form: each equality row
//! gets a pair of nonnegative slacks and the solver minimizes their sum. The
//! program is then always feasible, and the caller decides feasibility by
//! comparing the optimal residual against [`FEASIBILITY_TOL`]. This keeps
//! "infeasible" (large residual) distinct from "solver failure" (an error).

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

/// Residual below which a phase-one program counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    terms: Vec<(usize, f64)>,
    cmp: Cmp,
    rhs: f64,
}

/// Linear feasibility problem over real variables with box bounds.
#[derive(Debug, Clone, Default)]
pub struct FeasibilityProblem {
    bounds: Vec<(f64, f64)>,
    rows: Vec<Row>,
}

/// Outcome of a phase-one solve.
#[derive(Debug, Clone)]
pub struct PhaseOne {
    /// Minimal total constraint violation.
    pub residual: f64,
    /// Variable values at the optimum (slacks excluded).
    pub values: Vec<f64>,
}

impl PhaseOne {
    pub fn is_feasible(&self) -> bool {
        self.residual <= FEASIBILITY_TOL
    }
}

impl FeasibilityProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, lo: f64, hi: f64) -> usize {
        self.bounds.push((lo, hi));
        self.bounds.len() - 1
    }

    pub fn add_nonneg(&mut self) -> usize {
        self.add_var(0.0, f64::INFINITY)
    }

    pub fn add_free(&mut self) -> usize {
        self.add_var(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        debug_assert!(terms.iter().all(|&(v, _)| v < self.bounds.len()));
        self.rows.push(Row { terms, cmp, rhs });
    }

    /// Minimizes the total violation of all rows. Variable bounds are kept
    /// hard; only rows receive slack.
    pub fn solve(&self) -> Result<PhaseOne> {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = self
            .bounds
            .iter()
            .map(|&(lo, hi)| problem.add_var(0.0, (lo, hi)))
            .collect();

        for row in &self.rows {
            let mut expr: Vec<(minilp::Variable, f64)> = row
                .terms
                .iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|&(v, c)| (vars[v], c))
                .collect();
            // lhs + up - down (cmp) rhs; Le only needs `down`, Ge only `up`.
            match row.cmp {
                Cmp::Eq => {
                    expr.push((problem.add_var(1.0, (0.0, f64::INFINITY)), 1.0));
                    expr.push((problem.add_var(1.0, (0.0, f64::INFINITY)), -1.0));
                    problem.add_constraint(expr.as_slice(), ComparisonOp::Eq, row.rhs);
                }
                Cmp::Le => {
                    expr.push((problem.add_var(1.0, (0.0, f64::INFINITY)), -1.0));
                    problem.add_constraint(expr.as_slice(), ComparisonOp::Le, row.rhs);
                }
                Cmp::Ge => {
                    expr.push((problem.add_var(1.0, (0.0, f64::INFINITY)), 1.0));
                    problem.add_constraint(expr.as_slice(), ComparisonOp::Ge, row.rhs);
                }
            }
        }

        let solution = problem.solve().map_err(|e| Error::Solver(e.to_string()))?;
        let values = vars.iter().map(|&v| solution[v]).collect();
        Ok(PhaseOne {
            residual: solution.objective().max(0.0),
            values,
        })
    }
}
