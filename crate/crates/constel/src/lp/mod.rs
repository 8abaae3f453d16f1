//! Self-contained LP solver: bounded-variable primal simplex with two phases,
//! lazy activation of inequality rows, dual multipliers and reduced costs,
//! plus Lagrangian-relaxation machinery (value oracle and projected
//! subgradient ascent on the dual).

mod lagrangian;
mod simplex;

pub use lagrangian::{dual_ascent, lagrangian_value, DualAscentResult, LagrangianValue, StepSizes};

use crate::error::{Error, Result};
use crate::model::LinearProgram;

/// Numerical tolerances for feasibility, complementary slackness, and the
/// primal/dual objective gap.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub feas: f64,
    pub comp: f64,
    pub gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas: 1e-7,
            comp: 1e-6,
            gap: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution of a linear program.
///
/// At `Optimal` the solver has verified primal feasibility, dual sign
/// conditions, complementary slackness, and the primal/dual gap against the
/// supplied tolerances. `duals_ub` are nonnegative multipliers of the
/// inequality rows; `duals_eq` are free multipliers of the equality rows,
/// both in shadow-price orientation (`duals_eq[i]` is d(objective)/d(rhs),
/// `duals_ub[i]` is the objective improvement per unit of slack added).
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals_ub: Vec<f64>,
    pub duals_eq: Vec<f64>,
    pub reduced_costs: Vec<f64>,
}

impl LpSolution {
    fn empty(status: LpStatus, lp: &LinearProgram) -> Self {
        LpSolution {
            status,
            x: vec![0.0; lp.ncols()],
            objective: match status {
                LpStatus::Infeasible => f64::INFINITY,
                LpStatus::Unbounded => f64::NEG_INFINITY,
                LpStatus::Optimal => 0.0,
            },
            duals_ub: vec![0.0; lp.a_ub.nrows()],
            duals_eq: vec![0.0; lp.a_eq.nrows()],
            reduced_costs: vec![0.0; lp.ncols()],
        }
    }
}

/// Solve a linear program (integrality flags are ignored here).
pub fn solve_lp(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution> {
    solve_lp_with_bounds(lp, &lp.lb, &lp.ub, tol)
}

/// Dual objective implied by a solution's multipliers and reduced costs,
/// taking variable bounds from the program. Equals the primal objective at
/// optimality (within the gap tolerance).
pub fn dual_objective(lp: &LinearProgram, sol: &LpSolution) -> f64 {
    let mut g = 0.0;
    for (i, &b) in lp.b_ub.iter().enumerate() {
        g -= sol.duals_ub[i] * b;
    }
    for (i, &b) in lp.b_eq.iter().enumerate() {
        g += sol.duals_eq[i] * b;
    }
    for (j, &dj) in sol.reduced_costs.iter().enumerate() {
        if dj > 0.0 && lp.lb[j].is_finite() {
            g += dj * lp.lb[j];
        } else if dj < 0.0 && lp.ub[j].is_finite() {
            g += dj * lp.ub[j];
        }
    }
    g
}

/// Solve with overridden variable bounds; used by branch-and-bound so nodes
/// do not clone the constraint matrices.
pub fn solve_lp_with_bounds(
    lp: &LinearProgram,
    lb: &[f64],
    ub: &[f64],
    tol: &Tolerances,
) -> Result<LpSolution> {
    lp.check_consistent()?;
    if lb.len() != lp.ncols() || ub.len() != lp.ncols() {
        return Err(Error::Input("bound vectors sized unlike the program".into()));
    }
    if lb.iter().zip(ub).any(|(l, u)| l > u) {
        // A branching fixation emptied the box.
        return Ok(LpSolution::empty(LpStatus::Infeasible, lp));
    }
    if lp.ncols() == 0 {
        let feasible = lp.b_ub.iter().all(|&b| b >= -tol.feas)
            && lp.b_eq.iter().all(|&b| b.abs() <= tol.feas);
        let status = if feasible {
            LpStatus::Optimal
        } else {
            LpStatus::Infeasible
        };
        return Ok(LpSolution::empty(status, lp));
    }
    simplex::Simplex::new(lp, lb, ub, *tol).solve()
}

#[cfg(test)]
mod tests;
