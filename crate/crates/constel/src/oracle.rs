//! Brute-force exhaustive solver over all binary assignments. Ground truth
//! for tiny instances: feasibility comes from the direct constraint checker,
//! objective values from the instance itself.

use rayon::prelude::*;

use crate::check::{is_feasible, objective_value};
use crate::error::{Error, Result};
use crate::instance::{Instance, VariableLayout};
use crate::model::CouplingMode;

/// Hard cap on enumerable variables (2^24 assignments at most).
pub const DEFAULT_CAP: usize = 24;

/// Feasibility/objective tolerance used during enumeration.
const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Minimum objective over feasible assignments; +inf when none exists.
    pub objective: f64,
    /// Every optimal 0/1 vector, in ascending bit order.
    pub argmins: Vec<Vec<f64>>,
    pub feasible_count: u64,
    pub total_count: u64,
}

impl OracleResult {
    pub fn is_infeasible(&self) -> bool {
        self.feasible_count == 0
    }
}

/// Enumerate all assignments of the stacked vector in Gray-code order.
pub fn enumerate(inst: &Instance, mode: CouplingMode, cap: usize) -> Result<OracleResult> {
    let layout = VariableLayout::new(inst);
    let nvars = layout.nvars();
    if nvars > cap {
        return Err(Error::OracleCap { nvars, cap });
    }
    let total: u64 = 1u64 << nvars;
    let chunks: u64 = if nvars >= 14 { 64 } else { 1 };
    let chunk_size = total.div_ceil(chunks);

    struct Partial {
        best: f64,
        argmins: Vec<Vec<f64>>,
        feasible: u64,
    }

    let scan = |chunk: u64| -> Partial {
        let lo = chunk * chunk_size;
        let hi = ((chunk + 1) * chunk_size).min(total);
        let mut z = vec![0.0f64; nvars];
        let mut part = Partial {
            best: f64::INFINITY,
            argmins: Vec::new(),
            feasible: 0,
        };
        if lo >= hi {
            return part;
        }
        // Seed the Gray code of `lo`, then flip one bit per step.
        let gray = lo ^ (lo >> 1);
        for (b, zb) in z.iter_mut().enumerate() {
            *zb = ((gray >> b) & 1) as f64;
        }
        let mut counter = lo;
        loop {
            if is_feasible(inst, &layout, &z, mode, ORACLE_TOL) {
                part.feasible += 1;
                let obj = objective_value(inst, &layout, &z);
                if obj < part.best - ORACLE_TOL {
                    part.best = obj;
                    part.argmins.clear();
                    part.argmins.push(z.clone());
                } else if (obj - part.best).abs() <= ORACLE_TOL {
                    part.argmins.push(z.clone());
                }
            }
            counter += 1;
            if counter >= hi {
                break;
            }
            let flip = counter.trailing_zeros() as usize;
            z[flip] = 1.0 - z[flip];
        }
        part
    };

    let parts: Vec<Partial> = (0..chunks).into_par_iter().map(scan).collect();
    let mut best = f64::INFINITY;
    for p in &parts {
        if p.best < best {
            best = p.best;
        }
    }
    let mut argmins = Vec::new();
    let mut feasible = 0u64;
    for p in parts {
        feasible += p.feasible;
        for z in p.argmins {
            let obj = objective_value(inst, &layout, &z);
            if (obj - best).abs() <= ORACLE_TOL {
                argmins.push(z);
            }
        }
    }
    argmins.sort_by(|a, b| {
        a.iter()
            .map(|&v| v as u8)
            .collect::<Vec<_>>()
            .cmp(&b.iter().map(|&v| v as u8).collect::<Vec<_>>())
    });
    Ok(OracleResult {
        objective: best,
        argmins,
        feasible_count: feasible,
        total_count: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, GeneratorConfig, Instance};
    use crate::milp::{solve_milp, BnbLimits, BnbStatus};
    use crate::model::{assemble_centralized, CouplingMode};

    /// Hand-set single-opportunity instance: one satellite, one target,
    /// t = 1, s = 2, everything else slack.
    fn micro(alpha: f64, beta: f64, gamma: f64) -> Instance {
        Instance {
            n: 1,
            m: 1,
            theta: vec![vec![1]],
            omega: vec![1],
            t: vec![vec![vec![1.0]]],
            s: vec![vec![vec![2.0]]],
            p: vec![vec![vec![0.1]]],
            d: vec![vec![5.0]],
            q: vec![vec![10.0]],
            q_max: vec![100.0],
            data_rate: 100.0,
            alpha,
            beta,
            gamma,
            horizon: 24.0,
            meta: None,
        }
    }

    #[test]
    fn micro_instance_schedules_when_reward_dominates() {
        // Four assignments; only (0,0) and (1,1) satisfy pairing, and the
        // scheduled point costs alpha*t + beta*s - gamma/m = 1 + 2 - 10 = -7.
        let inst = micro(1.0, 1.0, 10.0);
        let res = enumerate(&inst, CouplingMode::Inequality, DEFAULT_CAP).unwrap();
        assert_eq!(res.total_count, 4);
        assert_eq!(res.feasible_count, 2);
        assert!((res.objective + 7.0).abs() < 1e-12);
        assert_eq!(res.argmins, vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn micro_instance_stays_idle_without_reward() {
        // gamma ~ 0 keeps the empty schedule optimal at cost 0. The weights
        // must stay positive, so use a vanishing gamma.
        let inst = micro(1.0, 1.0, 1e-9);
        let res = enumerate(&inst, CouplingMode::Inequality, DEFAULT_CAP).unwrap();
        assert!((res.objective - 0.0).abs() < 1e-12);
        assert_eq!(res.argmins, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn unobservable_target_is_infeasible_under_equality() {
        let mut inst = micro(1.0, 1.0, 10.0);
        inst.theta = vec![vec![0]];
        inst.t = vec![vec![vec![]]];
        inst.p = vec![vec![vec![]]];
        let res = enumerate(&inst, CouplingMode::Equality, DEFAULT_CAP).unwrap();
        assert!(res.is_infeasible());
        assert_eq!(res.objective, f64::INFINITY);
    }

    #[test]
    fn cap_is_enforced() {
        let cfg = GeneratorConfig::with_defaults(3, 4, 4, 3, 2);
        let inst = generate(11, &cfg).unwrap();
        match enumerate(&inst, CouplingMode::Inequality, 10) {
            Err(crate::error::Error::OracleCap { .. }) => {}
            other => panic!("expected cap refusal, got {other:?}"),
        }
    }

    #[test]
    fn milp_matches_oracle_on_random_tiny_instances() {
        let mut checked = 0;
        for seed in 0..50u64 {
            let cfg = GeneratorConfig::with_defaults(
                1 + (seed as usize % 2),
                1 + (seed as usize % 3),
                2,
                2,
                2,
            );
            let inst = generate(seed, &cfg).unwrap();
            let layout = crate::instance::VariableLayout::new(&inst);
            if layout.nvars() > 16 {
                continue;
            }
            let mode = if seed % 2 == 0 {
                CouplingMode::Equality
            } else {
                CouplingMode::Inequality
            };
            let oracle = enumerate(&inst, mode, DEFAULT_CAP).unwrap();
            let lp = assemble_centralized(&inst, &layout, mode);
            let bnb = solve_milp(&lp, &BnbLimits::default()).unwrap();
            match bnb.status {
                BnbStatus::Optimal => {
                    assert!(
                        (bnb.objective - oracle.objective).abs() <= 1e-9,
                        "seed {seed}: milp {} oracle {}",
                        bnb.objective,
                        oracle.objective
                    );
                    // The MILP incumbent is among the oracle's optima.
                    let rounded: Vec<f64> = bnb.x.iter().map(|&v| v.round()).collect();
                    assert!(
                        oracle.argmins.iter().any(|z| z == &rounded),
                        "seed {seed}: incumbent not in argmin set"
                    );
                }
                BnbStatus::Infeasible => assert!(oracle.is_infeasible(), "seed {seed}"),
                BnbStatus::GapLimit => panic!("seed {seed}: unexpected gap limit"),
            }
            checked += 1;
        }
        assert!(checked >= 30);
    }
}
