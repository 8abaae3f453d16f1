use super::*;
use crate::model::{LinearProgram, SpRow};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Small builder for test programs.
fn lp(
    c: &[f64],
    ub_rows: &[(&[f64], f64)],
    eq_rows: &[(&[f64], f64)],
    bounds: &[(f64, f64)],
) -> LinearProgram {
    let n = c.len();
    let mut out = LinearProgram::binary(n);
    out.c = c.to_vec();
    out.integrality = vec![false; n];
    out.lb = bounds.iter().map(|b| b.0).collect();
    out.ub = bounds.iter().map(|b| b.1).collect();
    let tag = crate::model::RowTag::Window;
    for (row, rhs) in ub_rows {
        let entries: Vec<(u32, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j as u32, v))
            .collect();
        out.push_ub(SpRow::new(entries), *rhs, tag);
    }
    for (row, rhs) in eq_rows {
        let entries: Vec<(u32, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j as u32, v))
            .collect();
        out.push_eq(SpRow::new(entries), *rhs, tag);
    }
    out
}

#[test]
fn single_bound_row_gives_unit_dual() {
    // min -x s.t. x <= 1, 0 <= x <= 2
    let p = lp(&[-1.0], &[(&[1.0], 1.0)], &[], &[(0.0, 2.0)]);
    let sol = solve_lp(&p, &tol()).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.x[0] - 1.0).abs() < 1e-9);
    assert!((sol.objective + 1.0).abs() < 1e-9);
    assert!((sol.duals_ub[0] - 1.0).abs() < 1e-9);
}

#[test]
fn equality_row_dual_is_shadow_price() {
    // min x s.t. x = 0.5, 0 <= x <= 1
    let p = lp(&[1.0], &[], &[(&[1.0], 0.5)], &[(0.0, 1.0)]);
    let sol = solve_lp(&p, &tol()).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.x[0] - 0.5).abs() < 1e-9);
    assert!((sol.duals_eq[0] - 1.0).abs() < 1e-9);
}

#[test]
fn detects_infeasible() {
    // x <= -1 with x >= 0
    let p = lp(&[1.0], &[(&[1.0], -1.0)], &[], &[(0.0, 1.0)]);
    let sol = solve_lp(&p, &tol()).unwrap();
    assert_eq!(sol.status, LpStatus::Infeasible);
}

#[test]
fn detects_unbounded() {
    // min -x with x >= 0 unbounded above
    let p = lp(&[-1.0], &[], &[], &[(0.0, f64::INFINITY)]);
    let sol = solve_lp(&p, &tol()).unwrap();
    assert_eq!(sol.status, LpStatus::Unbounded);
}

#[test]
fn empty_inequality_row_feasibility() {
    // A row with no variables: 0 <= -1 is infeasible, 0 <= 1 is fine.
    let mut p = lp(&[1.0], &[], &[], &[(0.0, 1.0)]);
    p.push_ub(SpRow::new(vec![]), 1.0, crate::model::RowTag::Window);
    let sol = solve_lp(&p, &tol()).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    let mut p = lp(&[1.0], &[], &[], &[(0.0, 1.0)]);
    p.push_ub(SpRow::new(vec![]), -1.0, crate::model::RowTag::Window);
    let sol = solve_lp(&p, &tol()).unwrap();
    assert_eq!(sol.status, LpStatus::Infeasible);
}

#[test]
fn redundant_equality_rows_are_tolerated() {
    // x + y = 1 twice, plus its double.
    let p = lp(
        &[1.0, 2.0],
        &[],
        &[
            (&[1.0, 1.0], 1.0),
            (&[1.0, 1.0], 1.0),
            (&[2.0, 2.0], 2.0),
        ],
        &[(0.0, 1.0), (0.0, 1.0)],
    );
    let sol = solve_lp(&p, &tol()).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-8);
    assert!((sol.x[0] - 1.0).abs() < 1e-8);
}

// ---------------------------------------------------------------------------
// Independent oracle: exhaustive vertex enumeration. A vertex of the feasible
// box-plus-rows polytope solves n active constraints chosen from inequality
// rows (at equality), equality rows (always active), and variable bounds.
// ---------------------------------------------------------------------------

fn solve_dense(a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn dense_row(row: &SpRow, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&c, &v) in row.cols.iter().zip(&row.vals) {
        out[c as usize] = v;
    }
    out
}

/// Exhaustive vertex enumeration for small LPs with finite bounds.
fn brute_force_min(p: &LinearProgram) -> Option<f64> {
    let n = p.ncols();
    #[derive(Clone)]
    enum Active {
        Row(Vec<f64>, f64),
        Lo(usize),
        Hi(usize),
    }
    let mut pool: Vec<Active> = Vec::new();
    for (i, row) in p.a_ub.rows.iter().enumerate() {
        pool.push(Active::Row(dense_row(row, n), p.b_ub[i]));
    }
    for j in 0..n {
        pool.push(Active::Lo(j));
        pool.push(Active::Hi(j));
    }
    let eq: Vec<(Vec<f64>, f64)> = p
        .a_eq
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| (dense_row(row, n), p.b_eq[i]))
        .collect();
    let need = n.saturating_sub(eq.len());
    let mut best: Option<f64> = None;
    let mut chosen = vec![0usize; need];
    let mut consider = |chosen: &[usize], best: &mut Option<f64>| {
        let mut a: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut b: Vec<f64> = Vec::with_capacity(n);
        for (row, rhs) in &eq {
            a.push(row.clone());
            b.push(*rhs);
        }
        for &pick in chosen {
            match &pool[pick] {
                Active::Row(row, rhs) => {
                    a.push(row.clone());
                    b.push(*rhs);
                }
                Active::Lo(j) => {
                    let mut row = vec![0.0; n];
                    row[*j] = 1.0;
                    a.push(row);
                    b.push(p.lb[*j]);
                }
                Active::Hi(j) => {
                    let mut row = vec![0.0; n];
                    row[*j] = 1.0;
                    a.push(row);
                    b.push(p.ub[*j]);
                }
            }
        }
        if a.len() != n {
            return;
        }
        let Some(x) = solve_dense(&mut a, &mut b) else {
            return;
        };
        // Feasibility of the candidate vertex.
        for j in 0..n {
            if x[j] < p.lb[j] - 1e-7 || x[j] > p.ub[j] + 1e-7 {
                return;
            }
        }
        for (i, row) in p.a_ub.rows.iter().enumerate() {
            if row.dot(&x) > p.b_ub[i] + 1e-7 {
                return;
            }
        }
        for (i, row) in p.a_eq.rows.iter().enumerate() {
            if (row.dot(&x) - p.b_eq[i]).abs() > 1e-7 {
                return;
            }
        }
        let obj: f64 = x.iter().zip(&p.c).map(|(a, b)| a * b).sum();
        *best = Some(best.map_or(obj, |b: f64| b.min(obj)));
    };
    // Enumerate combinations of `need` picks from the pool.
    fn combos(
        pool_len: usize,
        need: usize,
        start: usize,
        chosen: &mut Vec<usize>,
        depth: usize,
        f: &mut impl FnMut(&[usize]),
    ) {
        if depth == need {
            f(chosen);
            return;
        }
        for pick in start..pool_len {
            chosen[depth] = pick;
            combos(pool_len, need, pick + 1, chosen, depth + 1, f);
        }
    }
    combos(pool.len(), need, 0, &mut chosen, 0, &mut |c| {
        consider(c, &mut best)
    });
    best
}

fn random_lp(seed: u64, allow_eq: bool) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=5usize);
    let n_ub = rng.random_range(1..=4usize);
    let n_eq = if allow_eq { rng.random_range(0..=1usize) } else { 0 };
    let bounds: Vec<(f64, f64)> = (0..n)
        .map(|_| (0.0, 1.0 + 2.0 * rng.random::<f64>()))
        .collect();
    // Anchor point inside the box keeps the program feasible.
    let x0: Vec<f64> = bounds
        .iter()
        .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect();
    let c: Vec<f64> = (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
    let mut ub_rows = Vec::new();
    for _ in 0..n_ub {
        let row: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.3 {
                    0.0
                } else {
                    4.0 * rng.random::<f64>() - 2.0
                }
            })
            .collect();
        let slack = rng.random::<f64>();
        let rhs = row.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>() + slack;
        ub_rows.push((row, rhs));
    }
    let mut eq_rows = Vec::new();
    for _ in 0..n_eq {
        let row: Vec<f64> = (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
        let rhs = row.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>();
        eq_rows.push((row, rhs));
    }
    let ub_refs: Vec<(&[f64], f64)> = ub_rows.iter().map(|(r, b)| (r.as_slice(), *b)).collect();
    let eq_refs: Vec<(&[f64], f64)> = eq_rows.iter().map(|(r, b)| (r.as_slice(), *b)).collect();
    lp(&c, &ub_refs, &eq_refs, &bounds)
}

#[test]
fn random_lps_match_vertex_enumeration() {
    for seed in 0..120u64 {
        let p = random_lp(seed, true);
        let sol = solve_lp(&p, &tol()).unwrap();
        let brute = brute_force_min(&p);
        match (sol.status, brute) {
            (LpStatus::Optimal, Some(expect)) => {
                assert!(
                    (sol.objective - expect).abs() <= 1e-6 * (1.0 + expect.abs()),
                    "seed {seed}: solver {} vs enumeration {expect}",
                    sol.objective
                );
            }
            (LpStatus::Infeasible, None) => {}
            (status, brute) => panic!("seed {seed}: {status:?} vs brute {brute:?}"),
        }
    }
}

#[test]
fn strong_duality_on_random_lps() {
    let mut optimal = 0;
    for seed in 1000..1100u64 {
        let p = random_lp(seed, true);
        let sol = solve_lp(&p, &tol()).unwrap();
        if sol.status != LpStatus::Optimal {
            continue;
        }
        optimal += 1;
        let dual = dual_objective(&p, &sol);
        assert!(
            (dual - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()),
            "seed {seed}: primal {} dual {dual}",
            sol.objective
        );
        for &l in &sol.duals_ub {
            assert!(l >= 0.0);
        }
    }
    assert!(optimal > 80, "random generator should mostly be feasible");
}

#[test]
fn deterministic_resolve() {
    let p = random_lp(42, true);
    let a = solve_lp(&p, &tol()).unwrap();
    let b = solve_lp(&p, &tol()).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.objective, b.objective);
    assert_eq!(a.duals_ub, b.duals_ub);
}

#[test]
fn objective_scaling_covariance() {
    for seed in [3u64, 17, 99] {
        let p = random_lp(seed, false);
        let sol = solve_lp(&p, &tol()).unwrap();
        if sol.status != LpStatus::Optimal {
            continue;
        }
        let kappa = 3.5;
        let mut scaled = p.clone();
        for c in scaled.c.iter_mut() {
            *c *= kappa;
        }
        let sol2 = solve_lp(&scaled, &tol()).unwrap();
        assert_eq!(sol2.status, LpStatus::Optimal);
        assert!((sol2.objective - kappa * sol.objective).abs() < 1e-7 * (1.0 + sol.objective.abs()));
        for (a, b) in sol2.duals_ub.iter().zip(&sol.duals_ub) {
            assert!((a - kappa * b).abs() < 1e-6 * (1.0 + b.abs()));
        }
    }
}

// ---------------------------------------------------------------------------
// Lagrangian machinery.
// ---------------------------------------------------------------------------

#[test]
fn lagrangian_at_zero_drops_rows() {
    let p = lp(
        &[-1.0, -1.0],
        &[(&[1.0, 1.0], 1.0)],
        &[],
        &[(0.0, 1.0), (0.0, 1.0)],
    );
    let v0 = lagrangian_value(&p, &[0], &[0.0], &tol()).unwrap();
    // Without the coupling row both variables go to their upper bound.
    assert!((v0.value + 2.0).abs() < 1e-9);
}

#[test]
fn lagrangian_at_optimal_duals_recovers_value() {
    for seed in [5u64, 6, 7, 8] {
        let p = random_lp(seed, false);
        let sol = solve_lp(&p, &tol()).unwrap();
        if sol.status != LpStatus::Optimal || p.a_ub.nrows() == 0 {
            continue;
        }
        let rows: Vec<usize> = (0..p.a_ub.nrows()).collect();
        let v = lagrangian_value(&p, &rows, &sol.duals_ub, &tol()).unwrap();
        assert!(
            (v.value - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()),
            "seed {seed}: v(dual)={} obj={}",
            v.value,
            sol.objective
        );
    }
}

#[test]
fn lagrangian_grid_is_a_lower_bound() {
    let p = lp(
        &[1.0, -2.0, 0.5],
        &[(&[1.0, 1.0, 0.0], 1.5), (&[0.0, 1.0, 1.0], 1.0)],
        &[],
        &[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
    );
    let sol = solve_lp(&p, &tol()).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    for a in 0..6 {
        for b in 0..6 {
            let lambda = [a as f64 * 0.4, b as f64 * 0.4];
            let v = lagrangian_value(&p, &[0, 1], &lambda, &tol()).unwrap();
            assert!(v.value <= sol.objective + 1e-9);
        }
    }
}

#[test]
fn lagrangian_rejects_bad_multipliers() {
    let p = random_lp(1, false);
    assert!(lagrangian_value(&p, &[0], &[-1.0], &tol()).is_err());
    assert!(lagrangian_value(&p, &[0, 0], &[0.1, 0.1], &tol()).is_err());
    assert!(lagrangian_value(&p, &[99], &[0.1], &tol()).is_err());
}

#[test]
fn dual_ascent_on_redundant_row_is_immediate() {
    // x <= 5 never binds inside the unit box.
    let p = lp(
        &[-1.0],
        &[(&[1.0], 5.0), (&[1.0], 1.0)],
        &[],
        &[(0.0, 2.0)],
    );
    let sol = solve_lp(&p, &tol()).unwrap();
    let res = dual_ascent(&p, &[0], StepSizes::Harmonic { t0: 1.0, scale: 1.0 }, 5, &tol()).unwrap();
    assert!((res.bound_trace[0] - sol.objective).abs() < 1e-9);
    assert!((res.best_bound - sol.objective).abs() < 1e-9);
}

#[test]
fn dual_ascent_closes_the_gap_on_a_coupling_row() {
    // min -x - y s.t. x + y <= 1 (dualized), boxes [0,1].
    let p = lp(
        &[-1.0, -1.0],
        &[(&[1.0, 1.0], 1.0)],
        &[],
        &[(0.0, 1.0), (0.0, 1.0)],
    );
    let sol = solve_lp(&p, &tol()).unwrap();
    let res = dual_ascent(
        &p,
        &[0],
        StepSizes::Harmonic { t0: 2.0, scale: 1.0 },
        500,
        &tol(),
    )
    .unwrap();
    assert!(res.best_bound <= sol.objective + 1e-9);
    assert!(
        (res.best_bound - sol.objective).abs() < 1e-4,
        "bound {} vs v {}",
        res.best_bound,
        sol.objective
    );
    // The running best never decreases and never exceeds v.
    for w in res.bound_trace.windows(2) {
        assert!(w[1] >= w[0]);
    }
    for &b in &res.bound_trace {
        assert!(b <= sol.objective + 1e-9);
    }
}

#[test]
fn dimension_mismatch_is_an_input_error() {
    let mut p = random_lp(2, false);
    p.lb.pop();
    assert!(solve_lp(&p, &tol()).is_err());
}
