//! Benchmark driver: runs the selected pipeline(s) on an instance, collects
//! model-size counts, objectives, and wall times, and compares centralized
//! against distributed results.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::centralized::solve_centralized;
use crate::distributed::{run as run_distributed, DecompositionConfig, StepSchedule};
use crate::error::{Error, Result};
use crate::instance::{load as load_instance, Instance, VariableLayout};
use crate::lp::{solve_lp, LpStatus, Tolerances};
use crate::milp::{BnbLimits, BnbStatus};
use crate::model::{model_counts, CouplingMode, ModelCounts};
use crate::network::load_timeline;

/// One benchmark cell: which instance, which pipelines, which knobs.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub instance: PathBuf,
    pub timeline: Option<PathBuf>,
    /// "central", "dist", or "both".
    pub mode: String,
    pub coupling: CouplingMode,
    pub time_max_s: Option<f64>,
    pub gap_target: Option<f64>,
    pub penalty: Option<f64>,
    pub t0: Option<f64>,
    pub tf: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    fn check_files(&self) -> Result<()> {
        if !self.instance.exists() {
            return Err(Error::Config(format!(
                "instance file {} does not exist",
                self.instance.display()
            )));
        }
        if let Some(tl) = &self.timeline {
            if !tl.exists() {
                return Err(Error::Config(format!(
                    "timeline file {} does not exist",
                    tl.display()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentralCell {
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub status: BnbStatus,
    pub nodes: usize,
    pub scheduled_targets: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistCell {
    pub recovered_cost: f64,
    pub rho_star_sum: f64,
    pub coupling_violation_max: f64,
    pub iterations: usize,
    pub converged_at: Option<usize>,
    pub scheduled_targets: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSummary {
    pub meta: crate::instance::FileMeta,
    pub instance: String,
    pub n: usize,
    pub m: usize,
    pub counts: ModelCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub central: Option<CentralCell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistCell>,
}

fn dist_config(inst: &Instance, spec: &ExperimentSpec) -> DecompositionConfig {
    let mut cfg = DecompositionConfig::for_instance(inst);
    if let Some(m) = spec.penalty {
        cfg.penalty = m;
    }
    if let Some(t0) = spec.t0 {
        cfg.steps = StepSchedule { t0 };
    }
    if let Some(tf) = spec.tf {
        cfg.tf = tf;
    }
    // Benchmarks only need the wall time and final state; keep traces light.
    cfg.trace_stride = cfg.tf.max(1);
    cfg
}

/// Run one benchmark cell.
pub fn bench_instance(spec: &ExperimentSpec) -> Result<BenchSummary> {
    spec.check_files()?;
    let inst = load_instance(&spec.instance)?;
    let layout = VariableLayout::new(&inst);
    let counts = model_counts(&inst, &layout);
    let seed = inst.meta.as_ref().map_or(0, |m| m.seed);
    let meta = super::file_meta(seed, &(spec.mode.clone(), spec.tf, spec.gap_target));

    let mut summary = BenchSummary {
        meta,
        instance: spec.instance.display().to_string(),
        n: inst.n,
        m: inst.m,
        counts,
        central: None,
        dist: None,
    };

    if spec.mode == "central" || spec.mode == "both" {
        let mut limits = BnbLimits::default();
        if let Some(s) = spec.time_max_s {
            limits.time_max = Some(std::time::Duration::from_secs_f64(s));
        }
        if let Some(g) = spec.gap_target {
            limits.gap_target = g;
        }
        let start = Instant::now();
        let (sched, result) = solve_centralized(&inst, spec.coupling, &limits)?;
        summary.central = Some(CentralCell {
            objective: result.objective,
            bound: result.bound,
            gap: result.gap,
            status: result.status,
            nodes: result.nodes,
            scheduled_targets: sched.acquisitions.len(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }

    if spec.mode == "dist" || spec.mode == "both" {
        let tl_path = spec
            .timeline
            .as_ref()
            .ok_or_else(|| Error::Config("distributed benchmark needs --net".into()))?;
        let tl = load_timeline(tl_path)?;
        let cfg = dist_config(&inst, spec);
        let start = Instant::now();
        let trace = run_distributed(&inst, &tl, &cfg)?;
        summary.dist = Some(DistCell {
            recovered_cost: trace.recovered_cost,
            rho_star_sum: trace.rho_star_sum(),
            coupling_violation_max: trace.max_coupling_violation(),
            iterations: trace.iterations_run,
            converged_at: trace.converged_at,
            scheduled_targets: trace.schedule.acquisitions.len(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }

    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub meta: crate::instance::FileMeta,
    /// Optimum of the relaxed assembled program (lower bound).
    pub relaxed_bound: f64,
    /// Centralized optimum under inequality coupling.
    pub centralized_objective: f64,
    pub centralized_status: BnbStatus,
    /// Total cost of the distributed recovered schedules.
    pub distributed_cost: f64,
    pub rho_star_sum: f64,
    pub coupling_violation_max: f64,
    pub gap_central_vs_bound: f64,
    pub gap_dist_vs_central: f64,
}

/// Run both pipelines on one instance (inequality coupling throughout, the
/// decomposition's native form) and report the bound sandwich.
pub fn compare(
    instance: &Path,
    timeline: &Path,
    penalty: Option<f64>,
    t0: Option<f64>,
    tf: Option<usize>,
    time_max_s: Option<f64>,
) -> Result<ComparisonReport> {
    let inst = load_instance(instance)?;
    let layout = VariableLayout::new(&inst);
    let tl = load_timeline(timeline)?;
    let seed = inst.meta.as_ref().map_or(0, |m| m.seed);

    let mut cfg = DecompositionConfig::for_instance(&inst);
    if let Some(m) = penalty {
        cfg.penalty = m;
    }
    if let Some(t0) = t0 {
        cfg.steps = StepSchedule { t0 };
    }
    if let Some(tf) = tf {
        cfg.tf = tf;
    }
    cfg.trace_stride = cfg.tf.max(1);

    let relaxed = crate::distributed::relaxed_coupled_lp(&inst, &layout, &cfg.zeta);
    let lp_sol = solve_lp(&relaxed, &Tolerances::default())?;
    if lp_sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!(
            "relaxed assembled program returned {:?}",
            lp_sol.status
        )));
    }

    let mut limits = BnbLimits::default();
    if let Some(s) = time_max_s {
        limits.time_max = Some(std::time::Duration::from_secs_f64(s));
    }
    let (_, central) = solve_centralized(&inst, CouplingMode::Inequality, &limits)?;
    let trace = run_distributed(&inst, &tl, &cfg)?;

    Ok(ComparisonReport {
        meta: super::file_meta(seed, &(cfg.penalty, cfg.steps.t0, cfg.tf)),
        relaxed_bound: lp_sol.objective,
        centralized_objective: central.objective,
        centralized_status: central.status,
        distributed_cost: trace.recovered_cost,
        rho_star_sum: trace.rho_star_sum(),
        coupling_violation_max: trace.max_coupling_violation(),
        gap_central_vs_bound: central.objective - lp_sol.objective,
        gap_dist_vs_central: trace.recovered_cost - central.objective,
    })
}
