//! Desk-scale verification matrix: each criterion is a self-contained check
//! returning a pass/fail report. The `acceptance` integration test asserts
//! them one by one, and `constel bench --suite desk` prints the same lines.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::centralized::solve_centralized;
use crate::distributed::{
    psi, relaxed_coupled_lp, run as run_distributed, AgentContext, DecompositionConfig,
    StepSchedule,
};
use crate::instance::{
    generate, paper_example_instance, tight_window_instance, GeneratorConfig, Instance,
    VariableLayout,
};
use crate::lp::{dual_objective, lagrangian_value, solve_lp, LpStatus, Tolerances};
use crate::milp::{solve_milp, BnbLimits, BnbStatus};
use crate::model::{
    assemble_centralized, model_counts, CouplingMode, LinearProgram, RowTag, SpRow,
};
use crate::network::{
    check_joint_connectivity, generate_timeline, random_frame_seeded, Connectivity, GraphTimeline,
};
use crate::oracle::enumerate;

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub details: String,
}

impl std::fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(
            f,
            "criterion {} [{}] {} - {}",
            self.id, verdict, self.name, self.details
        )
    }
}

fn report(id: usize, name: &'static str, pass: bool, details: String) -> CriterionReport {
    CriterionReport {
        id,
        name,
        pass,
        details,
    }
}

/// Seeded tiny instances used by the oracle-equivalence check: sizes cycle
/// over n in {1,2}, m in {1,2,3}, opportunity caps at 2; instances whose
/// stacked dimension exceeds 20 are skipped and replaced by later seeds.
fn tiny_instances(count: usize) -> Vec<(u64, Instance)> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < count {
        let n = 1 + (seed % 2) as usize;
        let m = 1 + (seed % 3) as usize;
        let cfg = GeneratorConfig::with_defaults(n, m, 2, 2, 2);
        if let Ok(inst) = generate(seed, &cfg) {
            let layout = VariableLayout::new(&inst);
            if layout.nvars() <= 20 {
                out.push((seed, inst));
            }
        }
        seed += 1;
    }
    out
}

/// Criterion 1: branch-and-bound equals exhaustive enumeration on 200 seeded
/// tiny instances, exactly, within the runtime budget.
pub fn criterion_1() -> CriterionReport {
    let start = Instant::now();
    let mut checked = 0usize;
    for (seed, inst) in tiny_instances(200) {
        let layout = VariableLayout::new(&inst);
        let mode = if seed % 2 == 0 {
            CouplingMode::Equality
        } else {
            CouplingMode::Inequality
        };
        let oracle = match enumerate(&inst, mode, 24) {
            Ok(o) => o,
            Err(e) => return report(1, "oracle equivalence", false, format!("oracle error: {e}")),
        };
        let lp = assemble_centralized(&inst, &layout, mode);
        let bnb = match solve_milp(&lp, &BnbLimits::default()) {
            Ok(b) => b,
            Err(e) => return report(1, "oracle equivalence", false, format!("milp error: {e}")),
        };
        let ok = match bnb.status {
            BnbStatus::Optimal => {
                !oracle.is_infeasible() && (bnb.objective - oracle.objective).abs() <= 1e-9
            }
            BnbStatus::Infeasible => oracle.is_infeasible(),
            BnbStatus::GapLimit => false,
        };
        if !ok {
            return report(
                1,
                "oracle equivalence",
                false,
                format!(
                    "seed {seed}: milp {:?}/{} vs oracle feasible={} obj={}",
                    bnb.status,
                    bnb.objective,
                    !oracle.is_infeasible(),
                    oracle.objective
                ),
            );
        }
        checked += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        "oracle equivalence",
        elapsed < 60.0,
        format!("{checked} instances matched exactly in {elapsed:.1}s (< 60s)"),
    )
}

/// Criterion 2: structure of the worked two-satellite example.
pub fn criterion_2() -> CriterionReport {
    let inst = paper_example_instance();
    let layout = VariableLayout::new(&inst);
    let mut details = Vec::new();
    let mut pass = true;

    if layout.nx() != 8 || layout.ny() != 9 {
        pass = false;
        details.push(format!("|X|={} |Y|={} (want 8/9)", layout.nx(), layout.ny()));
    }
    let lp = assemble_centralized(&inst, &layout, CouplingMode::Equality);
    let coupling_rows = lp
        .tags_eq
        .iter()
        .filter(|t| matches!(t, RowTag::CoupleAcq | RowTag::CoupleDl))
        .count();
    let combined_rows = lp.tags_eq.iter().filter(|t| **t == RowTag::Pair).count()
        - inst.n * inst.m; // per-satellite pairing rows come from local blocks
    if coupling_rows != 6 || combined_rows != 3 {
        pass = false;
        details.push(format!(
            "{coupling_rows} coupling eq rows (want 6), {combined_rows} combined rows (want 3)"
        ));
    }
    match solve_centralized(&inst, CouplingMode::Equality, &BnbLimits::default()) {
        Ok((sched, _)) => {
            for j in 0..inst.m {
                let acq = sched.acquisitions.iter().filter(|a| a.target == j).count();
                let dls = sched.downlinks.iter().filter(|d| d.target == j).count();
                if acq != 1 || dls != 1 {
                    pass = false;
                    details.push(format!("target {j} served {acq}x/{dls}x"));
                }
            }
        }
        Err(e) => {
            pass = false;
            details.push(format!("solve failed: {e}"));
        }
    }
    if details.is_empty() {
        details.push("|X|=8, |Y|=9, 6 coupling + 3 combined rows, all targets served once".into());
    }
    report(2, "worked example structure", pass, details.join("; "))
}

/// Criterion 3: allocation conservation across 20 seeded distributed runs.
pub fn criterion_3() -> CriterionReport {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let n = 2 + (seed % 9) as usize; // 2..=10
        let m = 1 + (seed % 10) as usize; // 1..=10
        let cfg = GeneratorConfig::with_defaults(n, m, 2, 2, 2);
        let inst = match generate(seed + 500, &cfg) {
            Ok(i) => i,
            Err(e) => return report(3, "allocation conservation", false, e.to_string()),
        };
        let delta = if n <= 3 { 6 } else { 2 };
        let tf = 40;
        let tl = match generate_timeline(seed, n, tf + delta, delta) {
            Ok(t) => t,
            Err(e) => return report(3, "allocation conservation", false, e.to_string()),
        };
        let mut dcfg = DecompositionConfig::for_instance(&inst);
        dcfg.tf = tf;
        dcfg.tol_alloc = 0.0;
        match run_distributed(&inst, &tl, &dcfg) {
            Ok(trace) => worst = worst.max(trace.max_sum_residual()),
            Err(e) => return report(3, "allocation conservation", false, e.to_string()),
        }
    }
    report(
        3,
        "allocation conservation",
        worst <= 1e-9,
        format!("20 runs, max residual {worst:.3e} (<= 1e-9)"),
    )
}

/// The ten micro-instances shared by criteria 4 and 5: four single-satellite
/// scenarios (the allocation is the whole budget) and six two-satellite
/// scenarios with capacity-capped windows (the uniform split is slack).
pub fn micro_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for seed in [1u64, 2, 3, 5] {
        let cfg = GeneratorConfig::with_defaults(1, 2 + (seed % 2) as usize, 2, 2, 2);
        out.push(generate(seed, &cfg).expect("valid micro instance"));
    }
    for seed in [3u64, 8, 13, 21, 34, 55] {
        out.push(tight_window_instance(seed, 2, 2 + (seed % 2) as usize, 2).expect("valid"));
    }
    out
}

/// Criterion 4: the decomposition's final allocation prices out to the
/// relaxed assembled optimum on the micro-instances.
pub fn criterion_4() -> CriterionReport {
    let mut worst_gap = 0.0f64;
    let mut worst_time = 0.0f64;
    for (idx, inst) in micro_instances().into_iter().enumerate() {
        let layout = VariableLayout::new(&inst);
        if layout.nvars() > 20 {
            return report(4, "convergence surrogate", false, format!("instance {idx} too large"));
        }
        let start = Instant::now();
        let delta = if inst.n == 1 { 1 } else { 8 };
        let tf = 5000;
        let tl = match generate_timeline(idx as u64, inst.n, tf + delta, delta) {
            Ok(t) => t,
            Err(e) => return report(4, "convergence surrogate", false, e.to_string()),
        };
        let mut dcfg = DecompositionConfig::for_instance(&inst);
        dcfg.tf = tf;
        dcfg.steps = StepSchedule { t0: 10.0 };
        dcfg.tol_alloc = 1e-6;
        dcfg.trace_stride = tf;
        let trace = match run_distributed(&inst, &tl, &dcfg) {
            Ok(t) => t,
            Err(e) => return report(4, "convergence surrogate", false, e.to_string()),
        };
        let mut total = 0.0;
        for (i, st) in trace.final_states.iter().enumerate() {
            let mut ctx = AgentContext::new(&inst, &layout, i, dcfg.penalty);
            match psi(&mut ctx, &st.sigma) {
                Ok(Some(v)) => total += v,
                Ok(None) => {
                    return report(
                        4,
                        "convergence surrogate",
                        false,
                        format!("instance {idx}: final allocation infeasible for agent {i}"),
                    )
                }
                Err(e) => return report(4, "convergence surrogate", false, e.to_string()),
            }
        }
        let relaxed = relaxed_coupled_lp(&inst, &layout, &dcfg.zeta);
        let sol = match solve_lp(&relaxed, &Tolerances::default()) {
            Ok(s) => s,
            Err(e) => return report(4, "convergence surrogate", false, e.to_string()),
        };
        let gap = (total - sol.objective).abs();
        let secs = start.elapsed().as_secs_f64();
        worst_gap = worst_gap.max(gap);
        worst_time = worst_time.max(secs);
        if gap > 1e-3 || secs >= 120.0 {
            return report(
                4,
                "convergence surrogate",
                false,
                format!("instance {idx}: |sum psi - v*| = {gap:.3e}, {secs:.1}s"),
            );
        }
    }
    report(
        4,
        "convergence surrogate",
        true,
        format!("10 runs, worst |sum psi - v*| = {worst_gap:.3e} (<= 1e-3), worst time {worst_time:.1}s"),
    )
}

/// Criterion 5: bound sandwich and recovery slack on the micro-instances.
pub fn criterion_5() -> CriterionReport {
    for (idx, inst) in micro_instances().into_iter().enumerate() {
        let layout = VariableLayout::new(&inst);
        let dcfg = {
            let mut c = DecompositionConfig::for_instance(&inst);
            c.tf = 5000;
            c.tol_alloc = 1e-6;
            c.trace_stride = c.tf;
            c
        };
        let delta = if inst.n == 1 { 1 } else { 8 };
        let tl = match generate_timeline(idx as u64, inst.n, dcfg.tf + delta, delta) {
            Ok(t) => t,
            Err(e) => return report(5, "recovery sandwich", false, e.to_string()),
        };
        let trace = match run_distributed(&inst, &tl, &dcfg) {
            Ok(t) => t,
            Err(e) => return report(5, "recovery sandwich", false, e.to_string()),
        };
        let relaxed = relaxed_coupled_lp(&inst, &layout, &dcfg.zeta);
        let bound = match solve_lp(&relaxed, &Tolerances::default()) {
            Ok(s) => s.objective,
            Err(e) => return report(5, "recovery sandwich", false, e.to_string()),
        };
        let central = match solve_centralized(&inst, CouplingMode::Inequality, &BnbLimits::default())
        {
            Ok((_, r)) => r.objective,
            Err(e) => return report(5, "recovery sandwich", false, e.to_string()),
        };
        let recovered = trace.recovered_cost;
        if !(bound <= central + 1e-9 && central <= recovered + 1e-9) {
            return report(
                5,
                "recovery sandwich",
                false,
                format!("instance {idx}: bound {bound} central {central} recovered {recovered}"),
            );
        }
        if trace.max_coupling_violation() > trace.rho_star_sum() + 1e-9 {
            return report(
                5,
                "recovery sandwich",
                false,
                format!(
                    "instance {idx}: coupling violation {} exceeds rho* sum {}",
                    trace.max_coupling_violation(),
                    trace.rho_star_sum()
                ),
            );
        }
    }
    report(
        5,
        "recovery sandwich",
        true,
        "10 instances: relaxed bound <= central optimum <= recovered cost; violations within rho*".into(),
    )
}

fn random_lp(seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8usize);
    let n_ub = rng.random_range(1..=5usize);
    let n_eq = rng.random_range(0..=1usize);
    let mut lp = LinearProgram::binary(n);
    lp.integrality.iter_mut().for_each(|b| *b = false);
    lp.ub = (0..n).map(|_| 1.0 + 2.0 * rng.random::<f64>()).collect();
    lp.c = (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
    let x0: Vec<f64> = lp.ub.iter().map(|&u| u * rng.random::<f64>()).collect();
    for _ in 0..n_ub {
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for j in 0..n {
            if rng.random::<f64>() > 0.25 {
                entries.push((j as u32, 4.0 * rng.random::<f64>() - 2.0));
            }
        }
        let row = SpRow::new(entries);
        let rhs = row.dot(&x0) + rng.random::<f64>();
        lp.push_ub(row, rhs, RowTag::Window);
    }
    for _ in 0..n_eq {
        let entries: Vec<(u32, f64)> = (0..n)
            .map(|j| (j as u32, 4.0 * rng.random::<f64>() - 2.0))
            .collect();
        let row = SpRow::new(entries);
        let rhs = row.dot(&x0);
        lp.push_eq(row, rhs, RowTag::Pair);
    }
    lp
}

/// Criterion 6: strong duality on random programs and weak duality of the
/// Lagrangian value oracle on multiplier grids.
pub fn criterion_6() -> CriterionReport {
    let tol = Tolerances::default();
    let mut optimal = 0usize;
    let mut seed = 0u64;
    let mut grids = 0usize;
    while optimal < 100 {
        let lp = random_lp(seed);
        seed += 1;
        let sol = match solve_lp(&lp, &tol) {
            Ok(s) => s,
            Err(e) => return report(6, "duality properties", false, format!("seed {seed}: {e}")),
        };
        if sol.status != LpStatus::Optimal {
            continue;
        }
        optimal += 1;
        let dual = dual_objective(&lp, &sol);
        if (dual - sol.objective).abs() > 1e-6 * (1.0 + sol.objective.abs()) {
            return report(
                6,
                "duality properties",
                false,
                format!("seed {seed}: primal {} dual {dual}", sol.objective),
            );
        }
        if grids < 50 && lp.a_ub.nrows() > 0 {
            grids += 1;
            let rows: Vec<usize> = (0..lp.a_ub.nrows()).collect();
            for step in 0..4 {
                let lambda = vec![0.45 * step as f64; rows.len()];
                match lagrangian_value(&lp, &rows, &lambda, &tol) {
                    Ok(v) => {
                        if v.status == LpStatus::Optimal && v.value > sol.objective + 1e-9 {
                            return report(
                                6,
                                "duality properties",
                                false,
                                format!(
                                    "seed {seed}: v(lambda)={} exceeds v={}",
                                    v.value, sol.objective
                                ),
                            );
                        }
                    }
                    Err(e) => {
                        return report(6, "duality properties", false, format!("seed {seed}: {e}"))
                    }
                }
            }
        }
    }
    report(
        6,
        "duality properties",
        grids >= 50,
        format!("{optimal} optimal programs at gap <= 1e-6; {grids} multiplier grids below v"),
    )
}

/// Criterion 7: desk-scale smoke. The 20x30 case must reach a 1% gap inside
/// two minutes; the 30x50 case must exceed 300k modeled constraints and either
/// solve or return a certified bound inside ten minutes.
pub fn criterion_7() -> CriterionReport {
    let cfg = GeneratorConfig::with_defaults(20, 30, 4, 4, 5);
    let inst = match generate(7, &cfg) {
        Ok(i) => i,
        Err(e) => return report(7, "scale smoke", false, e.to_string()),
    };
    let layout = VariableLayout::new(&inst);
    let counts = model_counts(&inst, &layout);
    let mut details = vec![format!(
        "20x30: {} vars, {} modeled constraints",
        counts.variables, counts.constraints
    )];
    if counts.variables <= 2000 {
        return report(7, "scale smoke", false, format!("expected > 2000 variables, got {}", counts.variables));
    }
    let start = Instant::now();
    let mut limits = BnbLimits::default();
    limits.gap_target = 0.01;
    limits.time_max = Some(std::time::Duration::from_secs(110));
    let first = match solve_centralized(&inst, CouplingMode::Equality, &limits) {
        Ok((_, r)) => r,
        Err(e) => return report(7, "scale smoke", false, format!("20x30 solve: {e}")),
    };
    let t1 = start.elapsed().as_secs_f64();
    details.push(format!(
        "solved to gap {:.4} ({:?}) in {t1:.1}s",
        first.gap, first.status
    ));
    if t1 >= 120.0 || first.gap > 0.01 + 1e-12 {
        return report(7, "scale smoke", false, details.join("; "));
    }

    let cfg = GeneratorConfig::with_defaults(30, 50, 4, 4, 5);
    let inst = match generate(0, &cfg) {
        Ok(i) => i,
        Err(e) => return report(7, "scale smoke", false, e.to_string()),
    };
    let layout = VariableLayout::new(&inst);
    let counts = model_counts(&inst, &layout);
    details.push(format!(
        "30x50: {} vars, {} modeled constraints",
        counts.variables, counts.constraints
    ));
    if counts.constraints <= 300_000 {
        return report(7, "scale smoke", false, details.join("; "));
    }
    let start = Instant::now();
    let mut limits = BnbLimits::default();
    limits.gap_target = 0.01;
    limits.time_max = Some(std::time::Duration::from_secs(540));
    let second = match solve_centralized(&inst, CouplingMode::Equality, &limits) {
        Ok((_, r)) => r,
        Err(e) => return report(7, "scale smoke", false, format!("30x50 solve: {e}")),
    };
    let t2 = start.elapsed().as_secs_f64();
    let certified = second.status == BnbStatus::Optimal
        || (second.status == BnbStatus::GapLimit && second.bound.is_finite());
    details.push(format!(
        "status {:?}, bound {:.3}, gap {:.4}, {t2:.1}s",
        second.status, second.bound, second.gap
    ));
    report(
        7,
        "scale smoke",
        certified && t2 < 600.0,
        details.join("; "),
    )
}

/// Criterion 8: generator conformance and joint-connectivity checker against
/// brute force.
pub fn criterion_8() -> CriterionReport {
    for seed in 0..1000u64 {
        let n = 1 + (seed % 8) as usize;
        let frame = random_frame_seeded(seed, n);
        for i in 0..n {
            if frame[i][i] != 0 {
                return report(8, "network conformance", false, format!("seed {seed}: diagonal"));
            }
            for j in 0..n {
                if frame[i][j] > 1 || frame[i][j] != frame[j][i] {
                    return report(
                        8,
                        "network conformance",
                        false,
                        format!("seed {seed}: not symmetric 0/1"),
                    );
                }
            }
        }
    }
    // Brute-force cross-check of the window scan.
    for seed in 0..200u64 {
        let n = 1 + (seed % 6) as usize;
        let delta = 1 + (seed % 3) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames: Vec<_> = (0..8)
            .map(|_| crate::network::random_frame(&mut rng, n))
            .collect();
        let tl = GraphTimeline {
            n,
            delta,
            frames,
            meta: None,
        };
        let horizon = 8 - delta;
        let fast = match check_joint_connectivity(&tl, horizon) {
            Ok(c) => c,
            Err(e) => return report(8, "network conformance", false, e.to_string()),
        };
        let brute = brute_force_connectivity(&tl, horizon);
        if fast != brute {
            return report(
                8,
                "network conformance",
                false,
                format!("seed {seed}: {fast:?} vs brute {brute:?}"),
            );
        }
    }
    report(
        8,
        "network conformance",
        true,
        "1000 frames well-formed; 200 timelines match brute-force union-DFS".into(),
    )
}

fn brute_force_connectivity(tl: &GraphTimeline, horizon: usize) -> Connectivity {
    for start in 0..=horizon {
        let mut adj = vec![vec![false; tl.n]; tl.n];
        for f in &tl.frames[start..start + tl.delta] {
            for i in 0..tl.n {
                for j in 0..tl.n {
                    if f[i][j] == 1 {
                        adj[i][j] = true;
                    }
                }
            }
        }
        let mut seen = vec![false; tl.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..tl.n {
                if adj[u][v] && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if !seen.iter().all(|&b| b) {
            return Connectivity::FirstBadWindow(start);
        }
    }
    Connectivity::Ok
}

/// Criterion 9: soft benchmark only. A short n=m=50 distributed run is timed
/// and reported; no wall-time threshold is asserted.
pub fn criterion_9() -> CriterionReport {
    let cfg = GeneratorConfig::with_defaults(50, 50, 2, 2, 3);
    let inst = match generate(9, &cfg) {
        Ok(i) => i,
        Err(e) => return report(9, "distributed runtime (soft)", false, e.to_string()),
    };
    let tf = 3;
    let tl = match generate_timeline(9, 50, tf + 2, 2) {
        Ok(t) => t,
        Err(e) => return report(9, "distributed runtime (soft)", false, e.to_string()),
    };
    let mut dcfg = DecompositionConfig::for_instance(&inst);
    dcfg.tf = tf;
    dcfg.tol_alloc = 0.0;
    dcfg.trace_stride = tf;
    dcfg.penalty = 500.0;
    dcfg.recovery.gap_target = 0.05;
    dcfg.recovery.node_max = 4000;
    dcfg.recovery.time_max = Some(std::time::Duration::from_secs(30));
    let start = Instant::now();
    match run_distributed(&inst, &tl, &dcfg) {
        Ok(trace) => {
            let secs = start.elapsed().as_secs_f64();
            report(
                9,
                "distributed runtime (soft)",
                true,
                format!(
                    "n=m=50: {} iterations + recovery in {secs:.1}s ({:.2}s/iteration, M=500, recovery gap target 5%); recorded, not gated",
                    trace.iterations_run,
                    secs / (trace.iterations_run.max(1) as f64)
                ),
            )
        }
        Err(e) => report(9, "distributed runtime (soft)", false, e.to_string()),
    }
}

/// Run the full matrix in order.
pub fn run_all() -> Vec<CriterionReport> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ]
}
