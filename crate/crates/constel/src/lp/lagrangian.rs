//! Lagrangian relaxation of a row subset: the value oracle v(lambda) and a
//! projected subgradient ascent searching for the tightest lower bound.

use crate::error::{Error, Result};
use crate::model::LinearProgram;

use super::{solve_lp, LpStatus, Tolerances};

/// Value of the Lagrangian relaxation at a fixed multiplier vector.
#[derive(Debug, Clone)]
pub struct LagrangianValue {
    pub status: LpStatus,
    /// v(lambda) = min f'x + lambda'(Ax - b) over the remaining constraints.
    pub value: f64,
    /// Minimizer of the inner problem.
    pub x: Vec<f64>,
    /// Subgradient A x* - b of v at lambda.
    pub subgradient: Vec<f64>,
}

fn check_rows(lp: &LinearProgram, dualized: &[usize]) -> Result<()> {
    let mut seen = vec![false; lp.a_ub.nrows()];
    for &r in dualized {
        if r >= lp.a_ub.nrows() {
            return Err(Error::Input(format!("dualized row {r} out of range")));
        }
        if seen[r] {
            return Err(Error::Input(format!("dualized row {r} repeated")));
        }
        seen[r] = true;
    }
    Ok(())
}

/// Drop the dualized inequality rows and price them into the objective.
fn relaxation(lp: &LinearProgram, dualized: &[usize], lambda: &[f64]) -> LinearProgram {
    let mut inner = lp.clone();
    let drop: std::collections::BTreeMap<usize, f64> =
        dualized.iter().copied().zip(lambda.iter().copied()).collect();
    for (&row, &mult) in &drop {
        for (&c, &v) in lp.a_ub.rows[row].cols.iter().zip(&lp.a_ub.rows[row].vals) {
            inner.c[c as usize] += mult * v;
        }
    }
    let keep: Vec<usize> = (0..lp.a_ub.nrows()).filter(|r| !drop.contains_key(r)).collect();
    inner.a_ub.rows = keep.iter().map(|&r| lp.a_ub.rows[r].clone()).collect();
    inner.b_ub = keep.iter().map(|&r| lp.b_ub[r]).collect();
    inner.tags_ub = keep.iter().map(|&r| lp.tags_ub[r]).collect();
    inner
}

/// Evaluate v(lambda) for nonnegative multipliers on a subset of the
/// inequality rows. Weak duality gives v(lambda) <= v for every lambda >= 0.
pub fn lagrangian_value(
    lp: &LinearProgram,
    dualized: &[usize],
    lambda: &[f64],
    tol: &Tolerances,
) -> Result<LagrangianValue> {
    if lambda.len() != dualized.len() {
        return Err(Error::Input("lambda sized unlike the dualized row set".into()));
    }
    if lambda.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Input("multipliers must be finite and nonnegative".into()));
    }
    check_rows(lp, dualized)?;
    let inner = relaxation(lp, dualized, lambda);
    let sol = solve_lp(&inner, tol)?;
    match sol.status {
        LpStatus::Optimal => {
            let offset: f64 = dualized
                .iter()
                .zip(lambda)
                .map(|(&r, &l)| l * lp.b_ub[r])
                .sum();
            let subgradient: Vec<f64> = dualized
                .iter()
                .map(|&r| lp.a_ub.rows[r].dot(&sol.x) - lp.b_ub[r])
                .collect();
            Ok(LagrangianValue {
                status: LpStatus::Optimal,
                value: sol.objective - offset,
                x: sol.x,
                subgradient,
            })
        }
        LpStatus::Unbounded => Ok(LagrangianValue {
            status: LpStatus::Unbounded,
            value: f64::NEG_INFINITY,
            x: sol.x,
            subgradient: vec![0.0; dualized.len()],
        }),
        LpStatus::Infeasible => Err(Error::Infeasible(
            "inner Lagrangian problem infeasible; relax the kept constraints".into(),
        )),
    }
}

/// Step-size family for the dual ascent.
#[derive(Debug, Clone, Copy)]
pub enum StepSizes {
    /// alpha_t = scale / (t + t0): divergent sum, square-summable.
    Harmonic { t0: f64, scale: f64 },
    /// Constant step (not square-summable; useful for short runs).
    Constant(f64),
}

impl StepSizes {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            StepSizes::Harmonic { t0, scale } => scale / (t as f64 + t0),
            StepSizes::Constant(a) => a,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSizes::Harmonic { t0, scale } => t0 > 0.0 && scale > 0.0,
            StepSizes::Constant(a) => a > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("step sizes must be positive".into()))
        }
    }
}

/// Trace of a projected subgradient ascent on lambda >= 0.
#[derive(Debug, Clone)]
pub struct DualAscentResult {
    /// Best (largest) lower bound seen.
    pub best_bound: f64,
    pub best_lambda: Vec<f64>,
    /// Running best bound per iteration; nondecreasing by construction.
    pub bound_trace: Vec<f64>,
    pub lambda_trace: Vec<Vec<f64>>,
}

/// Maximize v(lambda) over lambda >= 0 by projected subgradient ascent with
/// subgradient A x*(lambda) - b.
pub fn dual_ascent(
    lp: &LinearProgram,
    dualized: &[usize],
    steps: StepSizes,
    iterations: usize,
    tol: &Tolerances,
) -> Result<DualAscentResult> {
    steps.validate()?;
    check_rows(lp, dualized)?;
    let mut lambda = vec![0.0; dualized.len()];
    let mut best_bound = f64::NEG_INFINITY;
    let mut best_lambda = lambda.clone();
    let mut bound_trace = Vec::with_capacity(iterations);
    let mut lambda_trace = Vec::with_capacity(iterations);
    for t in 0..iterations {
        let val = lagrangian_value(lp, dualized, &lambda, tol)?;
        if val.status == LpStatus::Unbounded {
            // This lambda certifies nothing; keep the best bound and move on
            // along the last subgradient direction is undefined, so stop.
            break;
        }
        if val.value > best_bound {
            best_bound = val.value;
            best_lambda = lambda.clone();
        }
        bound_trace.push(best_bound);
        lambda_trace.push(lambda.clone());
        let a = steps.at(t);
        for (lk, gk) in lambda.iter_mut().zip(&val.subgradient) {
            *lk = (*lk + a * gk).max(0.0);
        }
    }
    Ok(DualAscentResult {
        best_bound,
        best_lambda,
        bound_trace,
        lambda_trace,
    })
}
