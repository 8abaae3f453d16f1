//! Direct constraint checker: walks every constraint family straight from
//! the instance data, without building matrices. Serves as the independent
//! oracle against the matrix builders and as the schedule validator backend.

use crate::instance::{Instance, VariableLayout};
use crate::model::{chi, CouplingMode, RowTag};

/// One violated constraint instance.
#[derive(Debug, Clone)]
pub struct Violation {
    pub tag: RowTag,
    /// Family-specific indices (documented per arm in `violations`).
    pub indices: Vec<usize>,
    /// Signed slack `rhs - lhs` for inequalities, `rhs - lhs` for equalities;
    /// negative or (for equalities) nonzero when violated.
    pub slack: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {:?} slack={:.6e}", self.tag, self.indices, self.slack)
    }
}

/// Report all violated constraints of the stacked assignment `z`.
///
/// Index conventions per family:
/// - PREP: `[i, j, k, s, l]` (later event (j,k), earlier event (s,l));
/// - WINDOW: `[i, r]`;
/// - MEMORY: `[i, s, l]` (anchor event);
/// - ORDER / PAIR: `[i, j]`;
/// - COUPLE_ACQ / COUPLE_DL: `[j]`.
pub fn violations(
    inst: &Instance,
    layout: &VariableLayout,
    z: &[f64],
    mode: CouplingMode,
    tol: f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    walk(inst, layout, z, mode, tol, &mut |v| {
        out.push(v);
        true
    });
    out
}

/// Fast feasibility test: stops at the first violation.
pub fn is_feasible(
    inst: &Instance,
    layout: &VariableLayout,
    z: &[f64],
    mode: CouplingMode,
    tol: f64,
) -> bool {
    let mut feasible = true;
    walk(inst, layout, z, mode, tol, &mut |_| {
        feasible = false;
        false
    });
    feasible
}

/// Objective value of an assignment, evaluated straight from the instance.
pub fn objective_value(inst: &Instance, layout: &VariableLayout, z: &[f64]) -> f64 {
    let mut total = 0.0;
    let reward = inst.gamma / inst.m as f64;
    for i in 0..inst.n {
        for j in 0..inst.m {
            for k in 0..inst.theta[i][j] {
                total += z[layout.x_index(i, j, k)] * (inst.alpha * inst.t[i][j][k] - reward);
            }
            for r in 0..inst.omega[i] {
                total += z[layout.y_index(i, j, r)] * inst.beta * inst.s[i][j][r];
            }
        }
    }
    total
}

/// Walk all families in a fixed order, invoking `emit` on each violation.
/// `emit` returns false to stop the walk (first-violation mode). Families are
/// ordered cheapest-first so infeasible points exit early.
fn walk(
    inst: &Instance,
    layout: &VariableLayout,
    z: &[f64],
    mode: CouplingMode,
    tol: f64,
    emit: &mut dyn FnMut(Violation) -> bool,
) {
    debug_assert_eq!(z.len(), layout.nvars());
    let x = |i: usize, j: usize, k: usize| z[layout.x_index(i, j, k)];
    let y = |i: usize, j: usize, r: usize| z[layout.y_index(i, j, r)];

    // Eq. (8) pairing: per (i, j), acquisitions equal downlinks.
    for i in 0..inst.n {
        for j in 0..inst.m {
            let xsum: f64 = (0..inst.theta[i][j]).map(|k| x(i, j, k)).sum();
            let ysum: f64 = (0..inst.omega[i]).map(|r| y(i, j, r)).sum();
            if (xsum - ysum).abs() > tol
                && !emit(Violation {
                    tag: RowTag::Pair,
                    indices: vec![i, j],
                    slack: ysum - xsum,
                })
            {
                return;
            }
        }
    }

    // Coupling: per target across the fleet.
    for j in 0..inst.m {
        let total: f64 = (0..inst.n)
            .map(|i| (0..inst.theta[i][j]).map(|k| x(i, j, k)).sum::<f64>())
            .sum();
        let bad = match mode {
            CouplingMode::Equality => (total - 1.0).abs() > tol,
            CouplingMode::Inequality => total > 1.0 + tol,
        };
        if bad
            && !emit(Violation {
                tag: RowTag::CoupleAcq,
                indices: vec![j],
                slack: 1.0 - total,
            })
        {
            return;
        }
    }
    for j in 0..inst.m {
        let total: f64 = (0..inst.n)
            .map(|i| (0..inst.omega[i]).map(|r| y(i, j, r)).sum::<f64>())
            .sum();
        let bad = match mode {
            CouplingMode::Equality => (total - 1.0).abs() > tol,
            CouplingMode::Inequality => total > 1.0 + tol,
        };
        if bad
            && !emit(Violation {
                tag: RowTag::CoupleDl,
                indices: vec![j],
                slack: 1.0 - total,
            })
        {
            return;
        }
    }

    // Eq. (7) ordering: weighted acquisition time precedes downlink time.
    for i in 0..inst.n {
        for j in 0..inst.m {
            let lhs: f64 = (0..inst.theta[i][j])
                .map(|k| x(i, j, k) * inst.t[i][j][k])
                .sum();
            let rhs: f64 = (0..inst.omega[i])
                .map(|r| y(i, j, r) * inst.s[i][j][r])
                .sum();
            if lhs - rhs > tol
                && !emit(Violation {
                    tag: RowTag::Order,
                    indices: vec![i, j],
                    slack: rhs - lhs,
                })
            {
                return;
            }
        }
    }

    // Eq. (3) windows.
    for i in 0..inst.n {
        for r in 0..inst.omega[i] {
            let lhs: f64 = (0..inst.m)
                .map(|j| y(i, j, r) * inst.download_duration(i, j))
                .sum();
            if lhs - inst.d[i][r] > tol
                && !emit(Violation {
                    tag: RowTag::Window,
                    indices: vec![i, r],
                    slack: inst.d[i][r] - lhs,
                })
            {
                return;
            }
        }
    }

    // Eq. (2) preparation, in its original product form.
    for i in 0..inst.n {
        let events = inst.acquisition_events(i);
        for &(ja, ka, ta) in &events {
            for &(jb, kb, tb) in &events {
                if (ja, ka) == (jb, kb) {
                    continue;
                }
                let lhs =
                    (x(i, ja, ka) + x(i, jb, kb) - 1.0) * inst.p[i][jb][kb] * chi(ta, tb) as f64;
                let rhs = (ta - tb).max(0.0);
                if lhs - rhs > tol
                    && !emit(Violation {
                        tag: RowTag::Prep,
                        indices: vec![i, ja, ka, jb, kb],
                        slack: rhs - lhs,
                    })
                {
                    return;
                }
            }
        }
    }

    // Eq. (4) memory at each acquisition instant.
    for i in 0..inst.n {
        for (js, ls, anchor) in inst.acquisition_events(i) {
            let mut held = 0.0;
            for j in 0..inst.m {
                let acquired: f64 = (0..inst.theta[i][j])
                    .map(|k| x(i, j, k) * chi(anchor, inst.t[i][j][k]) as f64)
                    .sum();
                let released: f64 = (0..inst.omega[i])
                    .map(|r| y(i, j, r) * chi(anchor, inst.s[i][j][r]) as f64)
                    .sum();
                held += (acquired - released) * inst.q[i][j];
            }
            if held - inst.q_max[i] > tol
                && !emit(Violation {
                    tag: RowTag::Memory,
                    indices: vec![i, js, ls],
                    slack: inst.q_max[i] - held,
                })
            {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, GeneratorConfig};
    use crate::model::{assemble_centralized, build_coupling, build_local, LocalColumns};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Matrix-side violation census per family over local blocks + coupling.
    fn matrix_violations(
        inst: &Instance,
        layout: &VariableLayout,
        z: &[f64],
        mode: CouplingMode,
        tol: f64,
    ) -> Vec<(RowTag, f64)> {
        let mut out = Vec::new();
        for i in 0..inst.n {
            let cols = LocalColumns::new(layout, i);
            let zi: Vec<f64> = cols.global.iter().map(|&g| z[g]).collect();
            let local = build_local(inst, layout, i);
            for (idx, row) in local.a_ub.rows.iter().enumerate() {
                let v = row.dot(&zi);
                if v > local.b_ub[idx] + tol {
                    out.push((local.tags_ub[idx], local.b_ub[idx] - v));
                }
            }
            for (idx, row) in local.a_eq.rows.iter().enumerate() {
                let v = row.dot(&zi);
                if (v - local.b_eq[idx]).abs() > tol {
                    out.push((local.tags_eq[idx], local.b_eq[idx] - v));
                }
            }
        }
        let (global, _) = build_coupling(inst, layout);
        for (idx, row) in global.rows.rows.iter().enumerate() {
            let v = row.dot(z);
            let bad = match mode {
                CouplingMode::Equality => (v - 1.0).abs() > tol,
                CouplingMode::Inequality => v > 1.0 + tol,
            };
            if bad {
                let tag = if idx < inst.m {
                    RowTag::CoupleAcq
                } else {
                    RowTag::CoupleDl
                };
                out.push((tag, 1.0 - v));
            }
        }
        out
    }

    fn census(mut v: Vec<(RowTag, f64)>) -> Vec<(RowTag, usize)> {
        use std::collections::BTreeMap;
        v.sort_by_key(|e| e.0.as_str());
        let mut map: BTreeMap<&'static str, (RowTag, usize)> = BTreeMap::new();
        for (tag, _) in v {
            map.entry(tag.as_str()).or_insert((tag, 0)).1 += 1;
        }
        map.into_values().collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn checker_matches_matrices(seed in 0u64..200, point in 0u64..8) {
            let cfg = GeneratorConfig::with_defaults(2, 3, 2, 2, 2);
            let inst = generate(seed, &cfg).unwrap();
            let layout = VariableLayout::new(&inst);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(point));
            let z: Vec<f64> = (0..layout.nvars())
                .map(|_| if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 })
                .collect();
            for mode in [CouplingMode::Equality, CouplingMode::Inequality] {
                let direct = violations(&inst, &layout, &z, mode, 1e-9);
                let matrix = matrix_violations(&inst, &layout, &z, mode, 1e-9);
                let direct_census = census(direct.iter().map(|v| (v.tag, v.slack)).collect());
                let matrix_census = census(matrix);
                prop_assert_eq!(direct_census, matrix_census);
                prop_assert_eq!(
                    direct.is_empty(),
                    is_feasible(&inst, &layout, &z, mode, 1e-9)
                );
            }
        }

        #[test]
        fn assembled_matrix_agrees_on_feasibility(seed in 0u64..100) {
            let cfg = GeneratorConfig::with_defaults(2, 2, 2, 2, 2);
            let inst = generate(seed, &cfg).unwrap();
            let layout = VariableLayout::new(&inst);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 999);
            let z: Vec<f64> = (0..layout.nvars())
                .map(|_| if rng.random::<f64>() < 0.4 { 1.0 } else { 0.0 })
                .collect();
            for mode in [CouplingMode::Equality, CouplingMode::Inequality] {
                let lp = assemble_centralized(&inst, &layout, mode);
                let mat_ok = lp
                    .a_ub
                    .rows
                    .iter()
                    .zip(&lp.b_ub)
                    .all(|(row, &b)| row.dot(&z) <= b + 1e-9)
                    && lp
                        .a_eq
                        .rows
                        .iter()
                        .zip(&lp.b_eq)
                        .all(|(row, &b)| (row.dot(&z) - b).abs() <= 1e-9);
                prop_assert_eq!(mat_ok, is_feasible(&inst, &layout, &z, mode, 1e-9));
            }
        }
    }
}
