//! Bounded-variable two-phase revised simplex with a dense basis inverse and
//! lazy activation of inequality rows.
//!
//! Working rows are the equality rows plus whichever inequality rows have
//! been activated. Each inequality row carries a slack column; rows violated
//! at activation time get a phase-1 artificial. The engine keeps the basis
//! inverse explicitly and grows it when rows are appended, so reoptimization
//! after an activation batch starts from the previous vertex.
//!
//! Pivot rules: Dantzig pricing with lowest-index tie-break, switching to
//! Bland's rule after `3 * (rows + cols)` degenerate steps. All choices are
//! deterministic, so identical inputs replay identical pivot sequences.

use crate::error::{Error, Result};
use crate::model::{LinearProgram, SpRow};

use super::{LpSolution, LpStatus, Tolerances};

const EPS_PRICE: f64 = 1e-9;
const EPS_PIVOT: f64 = 1e-9;
const EPS_STEP: f64 = 1e-12;
/// Inequality-row count above which rows are activated lazily.
const LAZY_UB_THRESHOLD: usize = 512;
/// Most-violated rows activated per outer round.
const ACTIVATION_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

#[derive(Debug, Clone, Copy)]
enum RowSource {
    Ub(usize),
    Eq(usize),
}

pub(super) struct Simplex<'a> {
    lp: &'a LinearProgram,
    tol: Tolerances,

    // Columns: structurals first, then slacks/artificials appended as rows
    // activate. Sparse entries index working-row positions.
    col_rows: Vec<Vec<u32>>,
    col_vals: Vec<Vec<f64>>,
    kind: Vec<ColKind>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    /// Basis position of the column, or -1 when nonbasic.
    in_basis: Vec<i32>,

    // Working rows.
    source: Vec<RowSource>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    active_ub: Vec<bool>,

    degenerate_steps: usize,
    bland: bool,
    pivots: usize,
}

impl<'a> Simplex<'a> {
    pub(super) fn new(lp: &'a LinearProgram, lb: &[f64], ub: &[f64], tol: Tolerances) -> Self {
        let n = lp.ncols();
        let mut s = Simplex {
            lp,
            tol,
            col_rows: vec![Vec::new(); n],
            col_vals: vec![Vec::new(); n],
            kind: vec![ColKind::Structural; n],
            lo: lb.to_vec(),
            hi: ub.to_vec(),
            x: vec![0.0; n],
            in_basis: vec![-1; n],
            source: Vec::new(),
            rhs: Vec::new(),
            basis: Vec::new(),
            binv: Vec::new(),
            active_ub: vec![false; lp.a_ub.nrows()],
            degenerate_steps: 0,
            bland: false,
            pivots: 0,
        };
        for j in 0..n {
            s.x[j] = if s.lo[j].is_finite() {
                s.lo[j]
            } else if s.hi[j].is_finite() {
                s.hi[j]
            } else {
                0.0
            };
        }
        s
    }

    fn nrows(&self) -> usize {
        self.basis.len()
    }

    fn is_free(&self, j: usize) -> bool {
        self.lo[j] == f64::NEG_INFINITY && self.hi[j] == f64::INFINITY
    }

    /// Row value over structural columns at the current point.
    fn row_activity(&self, row: &SpRow) -> f64 {
        row.cols
            .iter()
            .zip(&row.vals)
            .map(|(&c, &v)| v * self.x[c as usize])
            .sum()
    }

    /// Append one working row, assign it a basic slack or artificial, and
    /// grow the basis inverse.
    fn activate(&mut self, source: RowSource) {
        let (row, rhs) = match source {
            RowSource::Ub(i) => (&self.lp.a_ub.rows[i], self.lp.b_ub[i]),
            RowSource::Eq(i) => (&self.lp.a_eq.rows[i], self.lp.b_eq[i]),
        };
        if let RowSource::Ub(i) = source {
            debug_assert!(!self.active_ub[i]);
            self.active_ub[i] = true;
        }
        let pos = self.nrows();
        let res = rhs - self.row_activity(row);

        // Extend structural columns with this row's entries.
        for (&c, &v) in row.cols.iter().zip(&row.vals) {
            self.col_rows[c as usize].push(pos as u32);
            self.col_vals[c as usize].push(v);
        }

        let mut basic_col = usize::MAX;
        let mut basic_coeff = 1.0;
        let mut basic_val = 0.0;
        if let RowSource::Ub(_) = source {
            let slack = self.push_col(ColKind::Slack, pos, 1.0, 0.0, f64::INFINITY);
            if res >= 0.0 {
                basic_col = slack;
                basic_coeff = 1.0;
                basic_val = res;
            }
        }
        if basic_col == usize::MAX {
            // Violated inequality or any equality: an artificial carries the
            // residual so the basis stays primal feasible.
            let coeff = if res >= 0.0 { 1.0 } else { -1.0 };
            let art = self.push_col(ColKind::Artificial, pos, coeff, 0.0, f64::INFINITY);
            basic_col = art;
            basic_coeff = coeff;
            basic_val = res.abs();
        }

        // Grow the inverse: with B' = [[B, 0], [w', d]] the inverse is
        // [[Binv, 0], [-(w' Binv)/d, 1/d]], where w is the new row restricted
        // to the current basic columns and d the new basic column's entry.
        let r = self.nrows();
        let mut u = vec![0.0; r];
        for (&c, &v) in row.cols.iter().zip(&row.vals) {
            let bpos = self.in_basis[c as usize];
            if bpos >= 0 {
                let brow = &self.binv[bpos as usize];
                for (uk, &bk) in u.iter_mut().zip(brow) {
                    *uk += v * bk;
                }
            }
        }
        let d = basic_coeff;
        for (i, row_i) in self.binv.iter_mut().enumerate() {
            row_i.push(0.0);
            let _ = i;
        }
        let mut last: Vec<f64> = u.iter().map(|&uk| -uk / d).collect();
        last.push(1.0 / d);
        self.binv.push(last);

        self.source.push(source);
        self.rhs.push(rhs);
        self.basis.push(basic_col);
        self.in_basis[basic_col] = pos as i32;
        self.x[basic_col] = basic_val;
    }

    fn push_col(&mut self, kind: ColKind, row: usize, coeff: f64, lo: f64, hi: f64) -> usize {
        self.col_rows.push(vec![row as u32]);
        self.col_vals.push(vec![coeff]);
        self.kind.push(kind);
        self.lo.push(lo);
        self.hi.push(hi);
        self.x.push(0.0);
        self.in_basis.push(-1);
        self.col_rows.len() - 1
    }

    fn cost(&self, j: usize, phase1: bool) -> f64 {
        if phase1 {
            if self.kind[j] == ColKind::Artificial {
                1.0
            } else {
                0.0
            }
        } else if self.kind[j] == ColKind::Structural {
            self.lp.c[j]
        } else {
            0.0
        }
    }

    /// Simplex multipliers y = c_B' Binv for the phase cost.
    fn multipliers(&self, phase1: bool) -> Vec<f64> {
        let r = self.nrows();
        let mut y = vec![0.0; r];
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = self.cost(bj, phase1);
            if cb != 0.0 {
                let row = &self.binv[i];
                for (yk, &bk) in y.iter_mut().zip(row) {
                    *yk += cb * bk;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let mut d = self.cost(j, phase1);
        for (&p, &v) in self.col_rows[j].iter().zip(&self.col_vals[j]) {
            d -= y[p as usize] * v;
        }
        d
    }

    /// Direction t = Binv * A_j for an entering column.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let r = self.nrows();
        let mut t = vec![0.0; r];
        for (&p, &v) in self.col_rows[j].iter().zip(&self.col_vals[j]) {
            let p = p as usize;
            for (ti, row_i) in t.iter_mut().zip(&self.binv) {
                *ti += v * row_i[p];
            }
        }
        t
    }

    /// One phase of the simplex. Returns Unbounded only in phase 2.
    fn run_phase(&mut self, phase1: bool) -> Result<PhaseOutcome> {
        let ncols = self.col_rows.len();
        let max_iters = 50_000 + 200 * (self.nrows() + ncols);
        for _ in 0..max_iters {
            let y = self.multipliers(phase1);
            // Entering column.
            let mut enter = usize::MAX;
            let mut enter_score = EPS_PRICE;
            let mut enter_dir = 1.0;
            for j in 0..ncols {
                if self.in_basis[j] >= 0 || self.lo[j] == self.hi[j] {
                    continue;
                }
                if phase1 && self.kind[j] == ColKind::Artificial {
                    continue;
                }
                let d = self.reduced_cost(j, &y, phase1);
                let (eligible, dir) = if self.is_free(j) {
                    (d.abs() > EPS_PRICE, if d < 0.0 { 1.0 } else { -1.0 })
                } else if self.x[j] <= self.lo[j] {
                    (d < -EPS_PRICE, 1.0)
                } else {
                    (d > EPS_PRICE, -1.0)
                };
                if !eligible {
                    continue;
                }
                if self.bland {
                    enter = j;
                    enter_dir = dir;
                    break;
                }
                if d.abs() > enter_score {
                    enter_score = d.abs();
                    enter = j;
                    enter_dir = dir;
                }
            }
            if enter == usize::MAX {
                return Ok(PhaseOutcome::Optimal);
            }

            let t = self.ftran(enter);
            // Ratio test over basics, plus the entering bound flip.
            let flip_limit = self.hi[enter] - self.lo[enter];
            let mut step = flip_limit;
            let mut leave = usize::MAX;
            let mut leave_to_upper = false;
            let mut leave_pivot = 0.0f64;
            for (i, &ti) in t.iter().enumerate() {
                let tb = enter_dir * ti;
                if tb.abs() <= EPS_PIVOT {
                    continue;
                }
                let bj = self.basis[i];
                let (room, to_upper) = if tb > 0.0 {
                    (self.x[bj] - self.lo[bj], false)
                } else {
                    (self.hi[bj] - self.x[bj], true)
                };
                let ratio = (room.max(0.0)) / tb.abs();
                let better = if leave == usize::MAX && ratio < step {
                    true
                } else if leave != usize::MAX && ratio < step - 1e-10 {
                    true
                } else if leave != usize::MAX && ratio < step + 1e-10 {
                    // Tie: Bland takes the lowest variable index, otherwise
                    // prefer the largest pivot for stability.
                    if self.bland {
                        bj < self.basis[leave]
                    } else {
                        ti.abs() > leave_pivot.abs()
                    }
                } else {
                    false
                };
                if better {
                    step = ratio.min(step);
                    leave = i;
                    leave_to_upper = to_upper;
                    leave_pivot = ti;
                }
            }

            if step == f64::INFINITY {
                if phase1 {
                    return Err(Error::Numerical(
                        "phase-1 objective unbounded; inconsistent state".into(),
                    ));
                }
                return Ok(PhaseOutcome::Unbounded {
                    enter,
                    dir: enter_dir,
                    t,
                });
            }

            if step <= EPS_STEP {
                self.degenerate_steps += 1;
                if self.degenerate_steps > 3 * (self.nrows() + ncols) {
                    self.bland = true;
                }
            } else {
                self.degenerate_steps = 0;
            }

            // Apply the step.
            let delta = step.max(0.0);
            self.x[enter] += enter_dir * delta;
            for (i, &ti) in t.iter().enumerate() {
                if ti != 0.0 {
                    let bj = self.basis[i];
                    self.x[bj] -= enter_dir * delta * ti;
                }
            }

            if leave == usize::MAX || (flip_limit <= step && flip_limit.is_finite()) {
                // Bound flip: snap to the opposite bound, basis unchanged.
                self.x[enter] = if enter_dir > 0.0 {
                    self.hi[enter]
                } else {
                    self.lo[enter]
                };
                continue;
            }

            let out = self.basis[leave];
            self.x[out] = if leave_to_upper { self.hi[out] } else { self.lo[out] };
            self.in_basis[out] = -1;
            self.basis[leave] = enter;
            self.in_basis[enter] = leave as i32;
            self.update_binv(leave, &t)?;
            self.pivots += 1;
        }
        Err(Error::Numerical(format!(
            "simplex cycling guard exceeded after {max_iters} iterations ({} rows, {} cols, bland={})",
            self.nrows(),
            ncols,
            self.bland
        )))
    }

    /// Product-form update of the inverse after a pivot in row `r`.
    fn update_binv(&mut self, r: usize, t: &[f64]) -> Result<()> {
        let piv = t[r];
        if piv.abs() <= EPS_PIVOT {
            return Err(Error::Numerical("vanishing pivot element".into()));
        }
        let inv = 1.0 / piv;
        let mut pivot_row = std::mem::take(&mut self.binv[r]);
        for v in pivot_row.iter_mut() {
            *v *= inv;
        }
        for (i, row_i) in self.binv.iter_mut().enumerate() {
            if i == r || t[i] == 0.0 {
                continue;
            }
            let f = t[i];
            for (a, &b) in row_i.iter_mut().zip(&pivot_row) {
                *a -= f * b;
            }
        }
        self.binv[r] = pivot_row;
        Ok(())
    }

    /// Rebuild the inverse from the basis columns and recompute basic values.
    fn refactor(&mut self) -> Result<()> {
        let r = self.nrows();
        let mut b = vec![vec![0.0; r]; r];
        for (i, &bj) in self.basis.iter().enumerate() {
            for (&p, &v) in self.col_rows[bj].iter().zip(&self.col_vals[bj]) {
                b[p as usize][i] = v;
            }
        }
        self.binv = invert(b).ok_or_else(|| Error::Numerical("singular basis".into()))?;
        // Effective rhs: subtract nonbasic contributions.
        let mut eff = self.rhs.clone();
        for j in 0..self.col_rows.len() {
            if self.in_basis[j] >= 0 || self.x[j] == 0.0 {
                continue;
            }
            for (&p, &v) in self.col_rows[j].iter().zip(&self.col_vals[j]) {
                eff[p as usize] -= v * self.x[j];
            }
        }
        for (i, &bj) in self.basis.iter().enumerate() {
            let mut v = 0.0;
            for (k, &e) in eff.iter().enumerate() {
                v += self.binv[i][k] * e;
            }
            self.x[bj] = v;
        }
        Ok(())
    }

    /// After phase 1: freeze artificials at zero and try to pivot basic ones
    /// out; rows whose artificial cannot leave are dependent and keep it.
    fn retire_artificials(&mut self) {
        for j in 0..self.kind.len() {
            if self.kind[j] == ColKind::Artificial {
                self.lo[j] = 0.0;
                self.hi[j] = 0.0;
            }
        }
        for i in 0..self.nrows() {
            let bj = self.basis[i];
            if self.kind[bj] != ColKind::Artificial {
                continue;
            }
            // Row i of Binv gives tableau row i; pick any usable pivot column.
            let brow = self.binv[i].clone();
            let mut candidate = usize::MAX;
            let mut best = EPS_PIVOT * 10.0;
            for j in 0..self.col_rows.len() {
                if self.in_basis[j] >= 0 || self.kind[j] == ColKind::Artificial {
                    continue;
                }
                let mut a = 0.0;
                for (&p, &v) in self.col_rows[j].iter().zip(&self.col_vals[j]) {
                    a += brow[p as usize] * v;
                }
                if a.abs() > best {
                    best = a.abs();
                    candidate = j;
                }
            }
            if candidate == usize::MAX {
                continue;
            }
            let t = self.ftran(candidate);
            if t[i].abs() <= EPS_PIVOT {
                continue;
            }
            // Degenerate swap: the artificial sits at zero, so x is unchanged.
            self.in_basis[bj] = -1;
            self.x[bj] = 0.0;
            self.basis[i] = candidate;
            self.in_basis[candidate] = i as i32;
            if self.update_binv(i, &t).is_err() {
                // Roll back on a numerically bad pivot.
                self.in_basis[candidate] = -1;
                self.basis[i] = bj;
                self.in_basis[bj] = i as i32;
            }
        }
    }

    fn has_positive_artificial(&self) -> bool {
        (0..self.kind.len())
            .any(|j| self.kind[j] == ColKind::Artificial && self.x[j] > self.tol.feas)
    }

    fn phase1_objective(&self) -> f64 {
        (0..self.kind.len())
            .filter(|&j| self.kind[j] == ColKind::Artificial)
            .map(|j| self.x[j])
            .sum()
    }

    /// Violated-at-x inactive rows, most violated first; ties by index.
    fn violated_inactive(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (i, active) in self.active_ub.iter().enumerate() {
            if *active {
                continue;
            }
            let v = self.row_activity(&self.lp.a_ub.rows[i]) - self.lp.b_ub[i];
            if v > self.tol.feas {
                out.push((i, v));
            }
        }
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.truncate(ACTIVATION_BATCH);
        out
    }

    /// Inactive rows that increase along an unbounded ray.
    fn ray_cut_rows(&self, enter: usize, dir: f64, t: &[f64]) -> Vec<usize> {
        let mut d = vec![0.0; self.lp.ncols()];
        if self.kind[enter] == ColKind::Structural {
            d[enter] = dir;
        }
        for (i, &ti) in t.iter().enumerate() {
            let bj = self.basis[i];
            if self.kind[bj] == ColKind::Structural {
                d[bj] = -dir * ti;
            }
        }
        let mut out = Vec::new();
        for (i, active) in self.active_ub.iter().enumerate() {
            if *active {
                continue;
            }
            let grow: f64 = self.lp.a_ub.rows[i]
                .cols
                .iter()
                .zip(&self.lp.a_ub.rows[i].vals)
                .map(|(&c, &v)| v * d[c as usize])
                .sum();
            if grow > 1e-9 {
                out.push(i);
            }
        }
        out
    }

    pub(super) fn solve(mut self) -> Result<LpSolution> {
        for i in 0..self.lp.a_eq.nrows() {
            self.activate(RowSource::Eq(i));
        }
        if self.lp.a_ub.nrows() <= LAZY_UB_THRESHOLD {
            for i in 0..self.lp.a_ub.nrows() {
                self.activate(RowSource::Ub(i));
            }
        }

        loop {
            if self.has_positive_artificial() {
                self.run_phase(true)?;
                if self.phase1_objective() > self.tol.feas {
                    return Ok(LpSolution::empty(LpStatus::Infeasible, self.lp));
                }
                self.retire_artificials();
            } else {
                self.retire_artificials();
            }

            match self.run_phase(false)? {
                PhaseOutcome::Optimal => {
                    let violated = self.violated_inactive();
                    if violated.is_empty() {
                        return self.finish();
                    }
                    for (i, _) in violated {
                        self.activate(RowSource::Ub(i));
                    }
                }
                PhaseOutcome::Unbounded { enter, dir, t } => {
                    let cuts = self.ray_cut_rows(enter, dir, &t);
                    if cuts.is_empty() {
                        return Ok(LpSolution::empty(LpStatus::Unbounded, self.lp));
                    }
                    for i in cuts.into_iter().take(ACTIVATION_BATCH) {
                        self.activate(RowSource::Ub(i));
                    }
                }
            }
        }
    }

    /// Assemble the solution and verify optimality certificates, with one
    /// refactorization retry on drift.
    fn finish(&mut self) -> Result<LpSolution> {
        for attempt in 0..2 {
            let sol = self.extract();
            match self.verify(&sol) {
                Ok(()) => return Ok(sol),
                Err(msg) => {
                    if attempt == 1 {
                        return Err(Error::Numerical(format!(
                            "optimality verification failed after refactorization: {msg}"
                        )));
                    }
                    self.refactor()?;
                    if self.has_positive_artificial() {
                        self.run_phase(true)?;
                        if self.phase1_objective() > self.tol.feas {
                            return Ok(LpSolution::empty(LpStatus::Infeasible, self.lp));
                        }
                        self.retire_artificials();
                    }
                    if let PhaseOutcome::Unbounded { .. } = self.run_phase(false)? {
                        return Ok(LpSolution::empty(LpStatus::Unbounded, self.lp));
                    }
                }
            }
        }
        unreachable!("finish retries exhausted");
    }

    fn extract(&self) -> LpSolution {
        let n = self.lp.ncols();
        let y = self.multipliers(false);
        let mut duals_ub = vec![0.0; self.lp.a_ub.nrows()];
        let mut duals_eq = vec![0.0; self.lp.a_eq.nrows()];
        for (p, src) in self.source.iter().enumerate() {
            match *src {
                RowSource::Ub(i) => duals_ub[i] = (-y[p]).max(0.0),
                RowSource::Eq(i) => duals_eq[i] = y[p],
            }
        }
        let reduced_costs: Vec<f64> = (0..n).map(|j| self.reduced_cost(j, &y, false)).collect();
        let x: Vec<f64> = self.x[..n].to_vec();
        let objective = x.iter().zip(&self.lp.c).map(|(a, b)| a * b).sum();
        LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            duals_ub,
            duals_eq,
            reduced_costs,
        }
    }

    /// Optimality certificates: primal feasibility, dual signs, complementary
    /// slackness, and the primal/dual objective gap.
    fn verify(&self, sol: &LpSolution) -> std::result::Result<(), String> {
        let lp = self.lp;
        let feas = self.tol.feas;
        let comp = self.tol.comp;
        let cscale = 1.0 + lp.c.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for (j, &xj) in sol.x.iter().enumerate() {
            let scale = 1.0 + self.lo[j].abs().min(1e6).max(self.hi[j].abs().min(1e6));
            if xj < self.lo[j] - feas * scale || xj > self.hi[j] + feas * scale {
                return Err(format!("bound violated at column {j}"));
            }
        }
        for (i, row) in lp.a_ub.rows.iter().enumerate() {
            let v = row.dot(&sol.x);
            let scale = 1.0 + lp.b_ub[i].abs();
            if v > lp.b_ub[i] + feas * scale * 10.0 {
                return Err(format!("inequality row {i} violated by {}", v - lp.b_ub[i]));
            }
            if sol.duals_ub[i] * (lp.b_ub[i] - v) > comp * scale * (1.0 + sol.duals_ub[i]) {
                return Err(format!("complementary slackness failed on ub row {i}"));
            }
        }
        for (i, row) in lp.a_eq.rows.iter().enumerate() {
            let v = row.dot(&sol.x);
            let scale = 1.0 + lp.b_eq[i].abs();
            if (v - lp.b_eq[i]).abs() > feas * scale * 10.0 {
                return Err(format!("equality row {i} violated"));
            }
        }
        // Dual feasibility via reduced-cost signs. Columns pinned by equal
        // bounds admit any reduced cost.
        for (j, &dj) in sol.reduced_costs.iter().enumerate() {
            if self.hi[j] - self.lo[j] <= comp {
                continue;
            }
            let interior = sol.x[j] > self.lo[j] + comp && sol.x[j] < self.hi[j] - comp;
            if interior && dj.abs() > comp * cscale * 10.0 {
                return Err(format!("interior column {j} has nonzero reduced cost"));
            }
            if sol.x[j] <= self.lo[j] + comp && dj < -comp * cscale * 10.0 {
                return Err(format!("column {j} at lower bound has negative reduced cost"));
            }
            if sol.x[j] >= self.hi[j] - comp && dj > comp * cscale * 10.0 {
                return Err(format!("column {j} at upper bound has positive reduced cost"));
            }
        }
        let dual_obj = self.dual_objective(sol);
        let scale = 1.0 + sol.objective.abs();
        if (dual_obj - sol.objective).abs() > self.tol.gap * scale * 10.0 {
            return Err(format!(
                "primal/dual gap {} exceeds tolerance",
                (dual_obj - sol.objective).abs()
            ));
        }
        Ok(())
    }

    fn dual_objective(&self, sol: &LpSolution) -> f64 {
        let lp = self.lp;
        let mut g = 0.0;
        for (i, &b) in lp.b_ub.iter().enumerate() {
            g -= sol.duals_ub[i] * b;
        }
        for (i, &b) in lp.b_eq.iter().enumerate() {
            g += sol.duals_eq[i] * b;
        }
        for (j, &dj) in sol.reduced_costs.iter().enumerate() {
            if dj > 0.0 && self.lo[j].is_finite() {
                g += dj * self.lo[j];
            } else if dj < 0.0 && self.hi[j].is_finite() {
                g += dj * self.hi[j];
            }
        }
        g
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded { enter: usize, dir: f64, t: Vec<f64> },
}

/// Dense Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row
        })
        .collect();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let f = a[col][col];
        for v in a[col].iter_mut() {
            *v /= f;
        }
        for v in inv[col].iter_mut() {
            *v /= f;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col];
            if f == 0.0 {
                continue;
            }
            let (pivot_row, other_row) = if r < col {
                let (lo, hi) = a.split_at_mut(col);
                (&hi[0], &mut lo[r])
            } else {
                let (lo, hi) = a.split_at_mut(r);
                (&lo[col], &mut hi[0])
            };
            for (o, &p) in other_row.iter_mut().zip(pivot_row) {
                *o -= f * p;
            }
            let (pivot_row, other_row) = if r < col {
                let (lo, hi) = inv.split_at_mut(col);
                (&hi[0], &mut lo[r])
            } else {
                let (lo, hi) = inv.split_at_mut(r);
                (&lo[col], &mut hi[0])
            };
            for (o, &p) in other_row.iter_mut().zip(pivot_row) {
                *o -= f * p;
            }
        }
    }
    Some(inv)
}
