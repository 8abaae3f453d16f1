//! End-to-end centralized pipeline: assemble the full program, solve it with
//! branch-and-bound, extract a schedule, validate it against the direct
//! checker, and emit timeline/tree report files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::check::{violations, Violation};
use crate::error::{Error, Result};
use crate::instance::{FileMeta, Instance, VariableLayout, VarRef};
use crate::milp::{solve_milp, BnbLimits, BnbResult, BnbStatus};
use crate::model::{assemble_centralized, CouplingMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    pub satellite: usize,
    pub target: usize,
    pub occurrence: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Downlink {
    pub satellite: usize,
    pub target: usize,
    pub occurrence: usize,
    pub time: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub status: BnbStatus,
    pub gap: f64,
    pub nodes: usize,
}

/// The user-facing answer: chosen acquisitions and downlinks with times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub acquisitions: Vec<Acquisition>,
    pub downlinks: Vec<Downlink>,
    pub objective: f64,
    pub solve_meta: SolveMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<FileMeta>,
}

impl Schedule {
    /// Stacked 0/1 vector of this schedule. Errors on out-of-range indices;
    /// duplicate entries accumulate and surface as coupling violations.
    pub fn to_assignment(&self, inst: &Instance, layout: &VariableLayout) -> Result<Vec<f64>> {
        let mut z = vec![0.0; layout.nvars()];
        for a in &self.acquisitions {
            if a.satellite >= inst.n || a.target >= inst.m || a.occurrence >= inst.theta[a.satellite][a.target]
            {
                return Err(Error::Input(format!(
                    "acquisition index out of range: sat {} target {} occ {}",
                    a.satellite, a.target, a.occurrence
                )));
            }
            z[layout.x_index(a.satellite, a.target, a.occurrence)] += 1.0;
        }
        for d in &self.downlinks {
            if d.satellite >= inst.n || d.target >= inst.m || d.occurrence >= inst.omega[d.satellite] {
                return Err(Error::Input(format!(
                    "downlink index out of range: sat {} target {} occ {}",
                    d.satellite, d.target, d.occurrence
                )));
            }
            z[layout.y_index(d.satellite, d.target, d.occurrence)] += 1.0;
        }
        Ok(z)
    }
}

/// Build a schedule from a 0/1 stacked assignment.
pub fn schedule_from_assignment(
    inst: &Instance,
    layout: &VariableLayout,
    z: &[f64],
    objective: f64,
    solve_meta: SolveMeta,
) -> Schedule {
    let mut acquisitions = Vec::new();
    let mut downlinks = Vec::new();
    for (idx, &v) in z.iter().enumerate() {
        if v <= 0.5 {
            continue;
        }
        match layout.var_for(idx) {
            VarRef::Acq { i, j, k } => acquisitions.push(Acquisition {
                satellite: i,
                target: j,
                occurrence: k,
                time: inst.t[i][j][k],
            }),
            VarRef::Dl { i, j, r } => downlinks.push(Downlink {
                satellite: i,
                target: j,
                occurrence: r,
                time: inst.s[i][j][r],
                duration: inst.download_duration(i, j),
            }),
        }
    }
    acquisitions.sort_by(|a, b| {
        (a.target, a.satellite, a.occurrence).cmp(&(b.target, b.satellite, b.occurrence))
    });
    downlinks.sort_by(|a, b| {
        (a.target, a.satellite, a.occurrence).cmp(&(b.target, b.satellite, b.occurrence))
    });
    Schedule {
        acquisitions,
        downlinks,
        objective,
        solve_meta,
        meta: None,
    }
}

/// Targets no satellite can acquire (equality coupling cannot hold for them).
fn unobservable_targets(inst: &Instance) -> Vec<usize> {
    (0..inst.m)
        .filter(|&j| (0..inst.n).all(|i| inst.theta[i][j] == 0))
        .collect()
}

/// Solve the centralized problem and extract a validated schedule.
pub fn solve_centralized(
    inst: &Instance,
    mode: CouplingMode,
    limits: &BnbLimits,
) -> Result<(Schedule, BnbResult)> {
    inst.validate()?;
    let layout = VariableLayout::new(inst);
    let lp = assemble_centralized(inst, &layout, mode);
    let result = solve_milp(&lp, limits)?;
    match result.status {
        BnbStatus::Infeasible => {
            if mode == CouplingMode::Equality {
                let mut targets = unobservable_targets(inst);
                if inst.omega.iter().all(|&w| w == 0) {
                    targets = (0..inst.m).collect();
                }
                if !targets.is_empty() {
                    return Err(Error::CouplingInfeasible { targets });
                }
                return Err(Error::Infeasible(
                    "equality coupling unsatisfiable against local constraints".into(),
                ));
            }
            Err(Error::Infeasible("local constraint system infeasible".into()))
        }
        BnbStatus::GapLimit if result.x.is_empty() => Err(Error::Numerical(format!(
            "limits exhausted before any feasible schedule (bound {})",
            result.bound
        ))),
        _ => {
            let meta = SolveMeta {
                status: result.status,
                gap: result.gap,
                nodes: result.nodes,
            };
            let sched = schedule_from_assignment(inst, &layout, &result.x, result.objective, meta);
            let report = validate(inst, &sched)?;
            if !report.is_empty() {
                return Err(Error::Numerical(format!(
                    "solver returned a schedule failing validation: {}",
                    report[0]
                )));
            }
            Ok((sched, result))
        }
    }
}

/// Validate a schedule against every constraint family. Coupling is checked
/// in at-most-once form, which is what a schedule means operationally.
pub fn validate(inst: &Instance, sched: &Schedule) -> Result<Vec<Violation>> {
    let layout = VariableLayout::new(inst);
    let z = sched.to_assignment(inst, &layout)?;
    Ok(violations(
        inst,
        &layout,
        &z,
        CouplingMode::Inequality,
        1e-6,
    ))
}

fn meta_line(meta: Option<&FileMeta>) -> String {
    match meta {
        Some(m) => format!(
            "# seed={} config_hash={} version={}",
            m.seed, m.config_hash, m.version
        ),
        None => format!("# seed=unknown config_hash=unknown version={}", env!("CARGO_PKG_VERSION")),
    }
}

/// Write the three report files into `out_dir`:
/// `target_timeline.csv`, `satellite_timeline.csv`, `assignment_tree.csv`.
///
/// Lines starting with `#` carry provenance and solve metadata; all indices
/// are zero-based. Column orders are stable.
pub fn report(sched: &Schedule, inst: &Instance, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    let meta = meta_line(sched.meta.as_ref().or(inst.meta.as_ref()));

    // (a) Target timeline: one event row per acquisition/downlink.
    let mut out = String::new();
    out.push_str(&meta);
    out.push('\n');
    out.push_str(&format!(
        "# objective={} status={} gap={} nodes={}\n",
        sched.objective, sched.solve_meta.status, sched.solve_meta.gap, sched.solve_meta.nodes
    ));
    out.push_str("target,event,satellite,occurrence,time,duration\n");
    for a in &sched.acquisitions {
        out.push_str(&format!(
            "{},acquisition,{},{},{},\n",
            a.target, a.satellite, a.occurrence, a.time
        ));
    }
    for d in &sched.downlinks {
        out.push_str(&format!(
            "{},downlink,{},{},{},{}\n",
            d.target, d.satellite, d.occurrence, d.time, d.duration
        ));
    }
    fs::write(dir.join("target_timeline.csv"), out)?;

    // (b) Satellite timeline: windows, prep intervals, events.
    let mut out = String::new();
    out.push_str(&meta);
    out.push('\n');
    out.push_str("satellite,kind,target,occurrence,start,duration\n");
    for i in 0..inst.n {
        for r in 0..inst.omega[i] {
            let start = (0..inst.m)
                .map(|j| inst.s[i][j][r])
                .fold(f64::INFINITY, f64::min);
            out.push_str(&format!("{i},window,,{r},{start},{}\n", inst.d[i][r]));
        }
    }
    for a in &sched.acquisitions {
        let prep = inst.p[a.satellite][a.target][a.occurrence];
        out.push_str(&format!(
            "{},prep,{},{},{},{}\n",
            a.satellite,
            a.target,
            a.occurrence,
            a.time - prep,
            prep
        ));
        out.push_str(&format!(
            "{},acquisition,{},{},{},\n",
            a.satellite, a.target, a.occurrence, a.time
        ));
    }
    for d in &sched.downlinks {
        out.push_str(&format!(
            "{},download,{},{},{},{}\n",
            d.satellite, d.target, d.occurrence, d.time, d.duration
        ));
    }
    fs::write(dir.join("satellite_timeline.csv"), out)?;

    // (c) Assignment tree: target -> satellite (acquire) and
    // satellite -> ground (downlink) edges.
    let mut out = String::new();
    out.push_str(&meta);
    out.push('\n');
    out.push_str("kind,target,satellite\n");
    for a in &sched.acquisitions {
        out.push_str(&format!("acquire,{},{}\n", a.target, a.satellite));
    }
    for d in &sched.downlinks {
        out.push_str(&format!("downlink,{},{}\n", d.target, d.satellite));
    }
    fs::write(dir.join("assignment_tree.csv"), out)?;
    Ok(())
}

/// Rebuild a schedule from a report directory (inverse of [`report`]).
pub fn read_schedule(dir: impl AsRef<Path>) -> Result<Schedule> {
    let path = dir.as_ref().join("target_timeline.csv");
    let text = fs::read_to_string(&path)?;
    let mut objective = 0.0;
    let mut status = BnbStatus::Optimal;
    let mut gap = 0.0;
    let mut nodes = 0usize;
    let mut acquisitions = Vec::new();
    let mut downlinks = Vec::new();
    let schema_err = |message: &str| Error::Schema {
        path: path.display().to_string(),
        message: message.to_string(),
    };
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            for field in rest.split_whitespace() {
                if let Some((k, v)) = field.split_once('=') {
                    match k {
                        "objective" => objective = v.parse().map_err(|_| schema_err("bad objective"))?,
                        "status" => status = v.parse().map_err(|_| schema_err("bad status"))?,
                        "gap" => gap = v.parse().map_err(|_| schema_err("bad gap"))?,
                        "nodes" => nodes = v.parse().map_err(|_| schema_err("bad nodes"))?,
                        _ => {}
                    }
                }
            }
            continue;
        }
        if line.starts_with("target,") || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(schema_err(&format!("expected 6 columns, found {}", cols.len())));
        }
        let target: usize = cols[0].parse().map_err(|_| schema_err("bad target"))?;
        let satellite: usize = cols[2].parse().map_err(|_| schema_err("bad satellite"))?;
        let occurrence: usize = cols[3].parse().map_err(|_| schema_err("bad occurrence"))?;
        let time: f64 = cols[4].parse().map_err(|_| schema_err("bad time"))?;
        match cols[1] {
            "acquisition" => acquisitions.push(Acquisition {
                satellite,
                target,
                occurrence,
                time,
            }),
            "downlink" => downlinks.push(Downlink {
                satellite,
                target,
                occurrence,
                time,
                duration: cols[5].parse().map_err(|_| schema_err("bad duration"))?,
            }),
            other => return Err(schema_err(&format!("unknown event kind `{other}`"))),
        }
    }
    Ok(Schedule {
        acquisitions,
        downlinks,
        objective,
        solve_meta: SolveMeta { status, gap, nodes },
        meta: None,
    })
}

pub fn save_schedule(sched: &Schedule, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(sched)?)?;
    Ok(())
}

pub fn load_schedule(path: impl AsRef<Path>) -> Result<Schedule> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
