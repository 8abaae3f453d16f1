//! Exact binary MILP by LP-based branch-and-bound.
//!
//! Best-first search on LP relaxations (lowest bound first, creation order on
//! ties), branching on the most fractional flagged variable with lowest-index
//! tie-break. Beyond `dfs_threshold` open nodes the queue degrades to
//! depth-first to bound memory.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::lp::{solve_lp_with_bounds, LpStatus, Tolerances};
use crate::model::LinearProgram;

/// Classification threshold for relaxation values near 0/1.
const INT_TOL: f64 = 1e-6;
/// Pruning slack protecting exact optimality.
const PRUNE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BnbStatus {
    Optimal,
    Infeasible,
    GapLimit,
}

impl std::fmt::Display for BnbStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BnbStatus::Optimal => "Optimal",
            BnbStatus::Infeasible => "Infeasible",
            BnbStatus::GapLimit => "GapLimit",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for BnbStatus {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "Optimal" => Ok(BnbStatus::Optimal),
            "Infeasible" => Ok(BnbStatus::Infeasible),
            "GapLimit" => Ok(BnbStatus::GapLimit),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// Search limits. `gap_target` is relative: the search stops once
/// `(incumbent - bound) <= gap_target * max(1, |incumbent|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BnbLimits {
    pub node_max: usize,
    pub time_max: Option<Duration>,
    pub gap_target: f64,
    /// Record per-node (parent bound, node bound) pairs and the incumbent
    /// objective sequence; for diagnostics and tests.
    pub log_nodes: bool,
    pub dfs_threshold: usize,
}

impl Default for BnbLimits {
    fn default() -> Self {
        BnbLimits {
            node_max: 1_000_000,
            time_max: None,
            gap_target: 1e-9,
            log_nodes: false,
            dfs_threshold: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub status: BnbStatus,
    /// Best integer point (empty when none was found).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Certified lower bound on the optimum.
    pub bound: f64,
    /// `|objective - bound| / max(1, |objective|)`.
    pub gap: f64,
    /// Nodes whose relaxation was solved.
    pub nodes: usize,
    pub node_log: Vec<(f64, f64)>,
    pub incumbent_log: Vec<f64>,
}

struct Node {
    bound: f64,
    /// Variable fixings along the path from the root.
    fixings: Vec<(u32, bool)>,
}

struct HeapEntry {
    bound: f64,
    seq: u64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // BinaryHeap is a max-heap; invert so the lowest bound surfaces first.
    // Ties break toward the newest node, which dives on equal bounds and
    // reaches integral incumbents quickly.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(self.seq.cmp(&other.seq))
    }
}

/// Solve a binary MILP exactly (within limits) by branch-and-bound.
pub fn solve_milp(lp: &LinearProgram, limits: &BnbLimits) -> Result<BnbResult> {
    lp.check_consistent()?;
    let tol = Tolerances::default();
    let start = Instant::now();
    let n = lp.ncols();

    let mut nodes_solved = 0usize;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut node_log = Vec::new();
    let mut incumbent_log = Vec::new();

    let mut arena: Vec<Node> = vec![Node {
        bound: f64::NEG_INFINITY,
        fixings: Vec::new(),
    }];
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        bound: f64::NEG_INFINITY,
        seq: 0,
        index: 0,
    });
    let mut dfs_stack: Vec<usize> = Vec::new();
    let mut dfs_mode = false;
    let mut next_seq = 1u64;
    let mut limit_hit = false;

    let mut lb = lp.lb.clone();
    let mut ub = lp.ub.clone();

    let incumbent_obj = |inc: &Option<(Vec<f64>, f64)>| inc.as_ref().map_or(f64::INFINITY, |i| i.1);

    let open_bound_min = |heap: &BinaryHeap<HeapEntry>, stack: &[usize], arena: &[Node]| {
        let heap_min = heap.peek().map_or(f64::INFINITY, |e| e.bound);
        let stack_min = stack
            .iter()
            .map(|&i| arena[i].bound)
            .fold(f64::INFINITY, f64::min);
        heap_min.min(stack_min)
    };

    loop {
        if nodes_solved >= limits.node_max {
            limit_hit = true;
            break;
        }
        if let Some(max) = limits.time_max {
            if start.elapsed() >= max {
                limit_hit = true;
                break;
            }
        }
        // Relative-gap early stop. Scanning the DFS stack is linear, so in
        // that mode the check runs only periodically.
        let inc = incumbent_obj(&incumbent);
        if inc.is_finite() && (!dfs_mode || nodes_solved % 256 == 0) {
            let open_min = open_bound_min(&heap, &dfs_stack, &arena);
            if open_min.is_infinite()
                || inc - open_min <= limits.gap_target * inc.abs().max(1.0)
            {
                if !(heap.is_empty() && dfs_stack.is_empty()) {
                    limit_hit = true;
                }
                break;
            }
        }

        if !dfs_mode && heap.len() > limits.dfs_threshold {
            // Degrade to depth-first; drain so the best bound pops last-first.
            let mut entries: Vec<HeapEntry> = heap.drain().collect();
            entries.sort_by(|a, b| b.bound.total_cmp(&a.bound).then(b.seq.cmp(&a.seq)));
            dfs_stack.extend(entries.into_iter().map(|e| e.index));
            dfs_mode = true;
        }

        let node_index = if dfs_mode {
            match dfs_stack.pop() {
                Some(i) => i,
                None => break,
            }
        } else {
            match heap.pop() {
                Some(e) => e.index,
                None => break,
            }
        };
        let parent_bound = arena[node_index].bound;
        if parent_bound >= incumbent_obj(&incumbent) - PRUNE_EPS {
            continue;
        }

        // Materialize node bounds.
        lb.copy_from_slice(&lp.lb);
        ub.copy_from_slice(&lp.ub);
        for &(var, one) in &arena[node_index].fixings {
            let v = if one { 1.0 } else { 0.0 };
            lb[var as usize] = v;
            ub[var as usize] = v;
        }

        let sol = solve_lp_with_bounds(lp, &lb, &ub, &tol)?;
        nodes_solved += 1;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(Error::Numerical(
                    "relaxation unbounded; binary program must have bounded cost".into(),
                ))
            }
            LpStatus::Optimal => {}
        }
        if limits.log_nodes {
            node_log.push((parent_bound, sol.objective));
        }
        if sol.objective >= incumbent_obj(&incumbent) - PRUNE_EPS {
            continue;
        }

        // Most fractional flagged variable.
        let mut branch_var: Option<usize> = None;
        let mut worst = INT_TOL;
        for j in 0..n {
            if !lp.integrality[j] {
                continue;
            }
            let frac = sol.x[j] - sol.x[j].floor();
            let dist = frac.min(1.0 - frac);
            if dist > worst {
                worst = dist;
                branch_var = Some(j);
            }
        }

        match branch_var {
            None => {
                // Integral relaxation: round and score exactly.
                let x: Vec<f64> = sol
                    .x
                    .iter()
                    .zip(&lp.integrality)
                    .map(|(&v, &flag)| if flag { v.round() } else { v })
                    .collect();
                let obj: f64 = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
                if obj < incumbent_obj(&incumbent) {
                    if limits.log_nodes {
                        incumbent_log.push(obj);
                    }
                    incumbent = Some((x, obj));
                }
            }
            Some(var) => {
                // The rounding-preferred child goes last so it surfaces first
                // on equal bounds (and on the DFS stack).
                let preferred = sol.x[var] - sol.x[var].floor() > 0.5;
                for one in [!preferred, preferred] {
                    let mut fixings = arena[node_index].fixings.clone();
                    fixings.push((var as u32, one));
                    let child = Node {
                        bound: sol.objective,
                        fixings,
                    };
                    next_seq += 1;
                    arena.push(child);
                    let index = arena.len() - 1;
                    if dfs_mode {
                        dfs_stack.push(index);
                    } else {
                        heap.push(HeapEntry {
                            bound: sol.objective,
                            seq: next_seq - 1,
                            index,
                        });
                    }
                }
            }
        }
    }

    let open_min = open_bound_min(&heap, &dfs_stack, &arena);
    let (status, x, objective, bound) = match (&incumbent, limit_hit) {
        (Some((x, obj)), false) => (BnbStatus::Optimal, x.clone(), *obj, *obj),
        (Some((x, obj)), true) => {
            let bound = open_min.min(*obj);
            // Proven-optimal only when the residual gap is negligible; a stop
            // on a user gap target or node/time limit reports GapLimit.
            let proven = *obj - bound <= 1e-9 * obj.abs().max(1.0);
            let status = if proven {
                BnbStatus::Optimal
            } else {
                BnbStatus::GapLimit
            };
            (status, x.clone(), *obj, bound)
        }
        (None, true) => (
            BnbStatus::GapLimit,
            Vec::new(),
            f64::INFINITY,
            open_min.min(f64::INFINITY),
        ),
        (None, false) => (BnbStatus::Infeasible, Vec::new(), f64::INFINITY, f64::INFINITY),
    };
    let gap = if objective.is_finite() && bound.is_finite() {
        (objective - bound).abs() / objective.abs().max(1.0)
    } else {
        f64::INFINITY
    };
    Ok(BnbResult {
        status,
        x,
        objective,
        bound,
        gap,
        nodes: nodes_solved,
        node_log,
        incumbent_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RowTag, SpRow};

    fn knapsack(c: &[f64], w: &[f64], cap: f64) -> LinearProgram {
        let n = c.len();
        let mut lp = LinearProgram::binary(n);
        lp.c = c.to_vec();
        let entries: Vec<(u32, f64)> = w
            .iter()
            .enumerate()
            .map(|(j, &v)| (j as u32, v))
            .collect();
        lp.push_ub(SpRow::new(entries), cap, RowTag::Window);
        lp
    }

    #[test]
    fn integral_relaxation_returns_at_root() {
        // Unit weights, capacity 3 over 3 items: relaxation is integral.
        let lp = knapsack(&[-1.0, -2.0, -3.0], &[1.0, 1.0, 1.0], 3.0);
        let res = solve_milp(&lp, &BnbLimits::default()).unwrap();
        assert_eq!(res.status, BnbStatus::Optimal);
        assert_eq!(res.nodes, 1);
        assert!((res.objective + 6.0).abs() < 1e-9);
    }

    #[test]
    fn fractional_knapsack_needs_branching() {
        // LP relaxation picks half of item 2.
        let lp = knapsack(&[-10.0, -6.0, -4.0], &[5.0, 4.0, 3.0], 10.0);
        let res = solve_milp(&lp, &BnbLimits::default()).unwrap();
        assert_eq!(res.status, BnbStatus::Optimal);
        // Best binary pick: items 1 and 2 (weight 9, value 16).
        assert!((res.objective + 16.0).abs() < 1e-9);
        assert!(res.nodes > 1);
        assert!(res.gap <= 1e-9);
        for (j, &v) in res.x.iter().enumerate() {
            assert!(v == 0.0 || v == 1.0, "x[{j}]={v}");
        }
    }

    #[test]
    fn infeasible_root_is_reported() {
        let mut lp = knapsack(&[-1.0], &[1.0], 2.0);
        lp.push_eq(SpRow::new(vec![(0, 1.0)]), 0.5, RowTag::Pair);
        let res = solve_milp(&lp, &BnbLimits::default()).unwrap();
        // x must equal 0.5 but is binary: branching makes both sides infeasible.
        assert_eq!(res.status, BnbStatus::Infeasible);
    }

    #[test]
    fn node_limit_yields_gap_limit_with_bound() {
        let lp = knapsack(
            &[-10.0, -6.0, -4.0, -7.0, -3.0],
            &[5.0, 4.0, 3.0, 6.0, 2.0],
            10.5,
        );
        let limits = BnbLimits {
            node_max: 1,
            ..BnbLimits::default()
        };
        let res = solve_milp(&lp, &limits).unwrap();
        assert_eq!(res.status, BnbStatus::GapLimit);
        assert!(res.bound.is_finite() || res.objective.is_infinite());
        // The certified bound never exceeds the true optimum.
        let full = solve_milp(&lp, &BnbLimits::default()).unwrap();
        assert!(res.bound <= full.objective + 1e-9);
    }

    #[test]
    fn bounds_monotone_and_incumbents_nonincreasing() {
        let lp = knapsack(
            &[-10.0, -6.0, -4.0, -7.0, -3.0, -9.0],
            &[5.0, 4.0, 3.0, 6.0, 2.0, 5.5],
            12.0,
        );
        let limits = BnbLimits {
            log_nodes: true,
            ..BnbLimits::default()
        };
        let res = solve_milp(&lp, &limits).unwrap();
        for &(parent, child) in &res.node_log {
            assert!(child >= parent - 1e-9, "child {child} below parent {parent}");
        }
        for w in res.incumbent_log.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn dfs_fallback_still_finds_the_optimum() {
        let lp = knapsack(
            &[-10.0, -6.0, -4.0, -7.0, -3.0, -9.0, -2.0],
            &[5.0, 4.0, 3.0, 6.0, 2.0, 5.5, 1.5],
            13.0,
        );
        let reference = solve_milp(&lp, &BnbLimits::default()).unwrap();
        let limits = BnbLimits {
            dfs_threshold: 2,
            ..BnbLimits::default()
        };
        let res = solve_milp(&lp, &limits).unwrap();
        assert_eq!(res.status, BnbStatus::Optimal);
        assert!((res.objective - reference.objective).abs() < 1e-9);
    }
}
