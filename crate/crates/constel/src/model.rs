//! Matrix-form translation of an instance: objective, per-agent local blocks,
//! coupling rows, and the assembled centralized program.
//!
//! Constraint families and their row tags:
//! - PREP: preparation-time separation between two acquisition events;
//! - WINDOW: downlink durations fit the window at each occurrence;
//! - MEMORY: onboard memory at each acquisition instant stays within capacity;
//! - ORDER: a target's acquisition time precedes its downlink time;
//! - PAIR: a target is downlinked iff it is acquired (per satellite);
//! - COUPLE_ACQ / COUPLE_DL: each target acquired / downlinked at most once
//!   across the fleet (the only rows that sum over satellites).

use serde::{Deserialize, Serialize};

use crate::instance::{Instance, VariableLayout};

/// Step function: 1 iff `t >= s`.
pub fn chi(t: f64, s: f64) -> u8 {
    if t >= s {
        1
    } else {
        0
    }
}

/// Provenance label carried by every constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowTag {
    Prep,
    Window,
    Memory,
    CoupleAcq,
    CoupleDl,
    Order,
    Pair,
}

impl RowTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowTag::Prep => "PREP",
            RowTag::Window => "WINDOW",
            RowTag::Memory => "MEMORY",
            RowTag::CoupleAcq => "COUPLE_ACQ",
            RowTag::CoupleDl => "COUPLE_DL",
            RowTag::Order => "ORDER",
            RowTag::Pair => "PAIR",
        }
    }
}

impl std::fmt::Display for RowTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether coupling rows are `<= 1` or `= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingMode {
    /// `= 1` per target: every target must be served (the centralized default).
    Equality,
    /// `<= 1` per target: targets may be skipped (the decomposition form).
    Inequality,
}

/// A sparse constraint row over a fixed column space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpRow {
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl SpRow {
    pub fn new(mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        SpRow {
            cols: entries.iter().map(|e| e.0).collect(),
            vals: entries.iter().map(|e| e.1).collect(),
        }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.cols
            .iter()
            .zip(&self.vals)
            .map(|(&c, &v)| v * x[c as usize])
            .sum()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Remap column indices through `map`; entries mapping to None are dropped.
    pub fn remap(&self, map: impl Fn(u32) -> Option<u32>) -> SpRow {
        let mut entries = Vec::new();
        for (&c, &v) in self.cols.iter().zip(&self.vals) {
            if let Some(nc) = map(c) {
                entries.push((nc, v));
            }
        }
        SpRow::new(entries)
    }
}

/// Row-major sparse matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseMat {
    pub ncols: usize,
    pub rows: Vec<SpRow>,
}

impl SparseMat {
    pub fn new(ncols: usize) -> Self {
        SparseMat { ncols, rows: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn push(&mut self, row: SpRow) {
        debug_assert!(row.cols.iter().all(|&c| (c as usize) < self.ncols));
        self.rows.push(row);
    }
}

/// Matrix-form linear program `min c'z` subject to
/// `a_ub z <= b_ub`, `a_eq z = b_eq`, `lb <= z <= ub`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_ub: SparseMat,
    pub b_ub: Vec<f64>,
    pub tags_ub: Vec<RowTag>,
    pub a_eq: SparseMat,
    pub b_eq: Vec<f64>,
    pub tags_eq: Vec<RowTag>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub integrality: Vec<bool>,
}

impl LinearProgram {
    /// All-binary program skeleton with the given column count.
    pub fn binary(ncols: usize) -> Self {
        LinearProgram {
            c: vec![0.0; ncols],
            a_ub: SparseMat::new(ncols),
            b_ub: Vec::new(),
            tags_ub: Vec::new(),
            a_eq: SparseMat::new(ncols),
            b_eq: Vec::new(),
            tags_eq: Vec::new(),
            lb: vec![0.0; ncols],
            ub: vec![1.0; ncols],
            integrality: vec![true; ncols],
        }
    }

    pub fn ncols(&self) -> usize {
        self.c.len()
    }

    pub fn push_ub(&mut self, row: SpRow, rhs: f64, tag: RowTag) {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self.tags_ub.push(tag);
    }

    pub fn push_eq(&mut self, row: SpRow, rhs: f64, tag: RowTag) {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self.tags_eq.push(tag);
    }

    /// Structural consistency: sizes agree, bounds ordered, data finite.
    pub fn check_consistent(&self) -> crate::error::Result<()> {
        let n = self.ncols();
        let ok = self.lb.len() == n
            && self.ub.len() == n
            && self.integrality.len() == n
            && self.a_ub.ncols == n
            && self.a_eq.ncols == n
            && self.a_ub.nrows() == self.b_ub.len()
            && self.a_ub.nrows() == self.tags_ub.len()
            && self.a_eq.nrows() == self.b_eq.len()
            && self.a_eq.nrows() == self.tags_eq.len();
        if !ok {
            return Err(crate::error::Error::Input(
                "linear program dimensions disagree".into(),
            ));
        }
        if self.lb.iter().zip(&self.ub).any(|(l, u)| l > u) {
            return Err(crate::error::Error::Input("lb exceeds ub".into()));
        }
        let finite = |v: &f64| v.is_finite();
        if !self.c.iter().all(finite)
            || !self.b_ub.iter().all(finite)
            || !self.b_eq.iter().all(finite)
            || !self.a_ub.rows.iter().all(|r| r.vals.iter().all(finite))
            || !self.a_eq.rows.iter().all(|r| r.vals.iter().all(finite))
        {
            return Err(crate::error::Error::Input("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Relax integrality: same feasible box without the binary flags.
    pub fn relaxed(&self) -> LinearProgram {
        let mut lp = self.clone();
        lp.integrality.iter_mut().for_each(|b| *b = false);
        lp
    }
}

/// Objective coefficients of the stacked vector: `alpha*t - gamma/m` on each
/// acquisition variable, `beta*s` on each downlink variable.
pub fn objective(inst: &Instance, layout: &VariableLayout) -> Vec<f64> {
    let mut c = vec![0.0; layout.nvars()];
    let reward = inst.gamma / inst.m as f64;
    for i in 0..inst.n {
        for j in 0..inst.m {
            for k in 0..inst.theta[i][j] {
                c[layout.x_index(i, j, k)] = inst.alpha * inst.t[i][j][k] - reward;
            }
            for r in 0..inst.omega[i] {
                c[layout.y_index(i, j, r)] = inst.beta * inst.s[i][j][r];
            }
        }
    }
    c
}

/// Column map for one agent's local program: local columns are the agent's
/// x block followed by its y block, in stacked order.
#[derive(Debug, Clone)]
pub struct LocalColumns {
    pub agent: usize,
    pub global: Vec<usize>,
}

impl LocalColumns {
    pub fn new(layout: &VariableLayout, agent: usize) -> Self {
        LocalColumns {
            agent,
            global: layout.agent_cols(agent),
        }
    }

    pub fn dim(&self) -> usize {
        self.global.len()
    }

    /// Local position of a stacked index, if the agent owns it.
    pub fn local_of(&self, global: usize) -> Option<usize> {
        // Two contiguous runs; binary search covers both.
        self.global.binary_search(&global).ok()
    }
}

/// Build agent i's local constraint block over its own columns only.
///
/// Rows appear in family order PREP, WINDOW, MEMORY, ORDER (inequalities)
/// then PAIR (equalities). The objective is the agent's slice of the global
/// cost vector.
pub fn build_local(inst: &Instance, layout: &VariableLayout, agent: usize) -> LinearProgram {
    let cols = LocalColumns::new(layout, agent);
    let dim = cols.dim();
    let mut lp = LinearProgram::binary(dim);
    let full_c = objective(inst, layout);
    for (local, &global) in cols.global.iter().enumerate() {
        lp.c[local] = full_c[global];
    }
    let i = agent;
    let local_x = |j: usize, k: usize| cols.local_of(layout.x_index(i, j, k)).unwrap() as u32;
    let local_y = |j: usize, r: usize| cols.local_of(layout.y_index(i, j, r)).unwrap() as u32;

    let events = inst.acquisition_events(i);

    // PREP: ordered event pairs (a later or equal, b earlier), linearized
    // p_b*x_a + p_b*x_b <= max(0, t_a - t_b) + p_b. Zero-coefficient rows
    // (p_b = 0) are dropped.
    for &(ja, ka, ta) in &events {
        for &(jb, kb, tb) in &events {
            if (ja, ka) == (jb, kb) || chi(ta, tb) == 0 {
                continue;
            }
            let prep = inst.p[i][jb][kb];
            if prep == 0.0 {
                continue;
            }
            let rhs = (ta - tb).max(0.0) + prep;
            let row = SpRow::new(vec![(local_x(ja, ka), prep), (local_x(jb, kb), prep)]);
            lp.push_ub(row, rhs, RowTag::Prep);
        }
    }

    // WINDOW: per downlink occurrence, total download duration fits.
    for r in 0..inst.omega[i] {
        let entries: Vec<(u32, f64)> = (0..inst.m)
            .map(|j| (local_y(j, r), inst.download_duration(i, j)))
            .collect();
        lp.push_ub(SpRow::new(entries), inst.d[i][r], RowTag::Window);
    }

    // MEMORY: at every acquisition instant, held data fits on board.
    for &(_, _, anchor) in &events {
        let mut entries = Vec::new();
        for j in 0..inst.m {
            for k in 0..inst.theta[i][j] {
                if chi(anchor, inst.t[i][j][k]) == 1 {
                    entries.push((local_x(j, k), inst.q[i][j]));
                }
            }
            for r in 0..inst.omega[i] {
                if chi(anchor, inst.s[i][j][r]) == 1 {
                    entries.push((local_y(j, r), -inst.q[i][j]));
                }
            }
        }
        lp.push_ub(SpRow::new(entries), inst.q_max[i], RowTag::Memory);
    }

    // ORDER: acquisition time precedes downlink time per target.
    for j in 0..inst.m {
        let mut entries: Vec<(u32, f64)> = (0..inst.theta[i][j])
            .map(|k| (local_x(j, k), inst.t[i][j][k]))
            .collect();
        entries.extend((0..inst.omega[i]).map(|r| (local_y(j, r), -inst.s[i][j][r])));
        lp.push_ub(SpRow::new(entries), 0.0, RowTag::Order);
    }

    // PAIR: downlink scheduled iff acquisition scheduled, per target.
    for j in 0..inst.m {
        let mut entries: Vec<(u32, f64)> = (0..inst.theta[i][j])
            .map(|k| (local_x(j, k), 1.0))
            .collect();
        entries.extend((0..inst.omega[i]).map(|r| (local_y(j, r), -1.0)));
        lp.push_eq(SpRow::new(entries), 0.0, RowTag::Pair);
    }

    lp
}

/// The 2m coupling rows: first m sum acquisition variables per target, last m
/// sum downlink variables per target. Right-hand side is all ones.
#[derive(Debug, Clone)]
pub struct CouplingBlock {
    /// Rows over a column space; global block spans all columns, per-agent
    /// blocks span that agent's local columns.
    pub rows: SparseMat,
    pub rhs_share: Vec<f64>,
}

impl CouplingBlock {
    pub fn tags(m: usize) -> Vec<RowTag> {
        (0..2 * m)
            .map(|row| if row < m { RowTag::CoupleAcq } else { RowTag::CoupleDl })
            .collect()
    }
}

/// Build the global coupling rows and their per-agent restrictions.
pub fn build_coupling(inst: &Instance, layout: &VariableLayout) -> (CouplingBlock, Vec<CouplingBlock>) {
    let m = inst.m;
    let mut global = SparseMat::new(layout.nvars());
    for j in 0..m {
        let entries: Vec<(u32, f64)> = (0..inst.n)
            .flat_map(|i| (0..inst.theta[i][j]).map(move |k| (i, k)))
            .map(|(i, k)| (layout.x_index(i, j, k) as u32, 1.0))
            .collect();
        global.push(SpRow::new(entries));
    }
    for j in 0..m {
        let entries: Vec<(u32, f64)> = (0..inst.n)
            .flat_map(|i| (0..inst.omega[i]).map(move |r| (i, r)))
            .map(|(i, r)| (layout.y_index(i, j, r) as u32, 1.0))
            .collect();
        global.push(SpRow::new(entries));
    }
    let ones = vec![1.0; 2 * m];
    let mut per_agent = Vec::with_capacity(inst.n);
    for i in 0..inst.n {
        let cols = LocalColumns::new(layout, i);
        let mut mat = SparseMat::new(cols.dim());
        for row in &global.rows {
            mat.push(row.remap(|c| cols.local_of(c as usize).map(|l| l as u32)));
        }
        per_agent.push(CouplingBlock {
            rows: mat,
            rhs_share: ones.clone(),
        });
    }
    (
        CouplingBlock {
            rows: global,
            rhs_share: ones,
        },
        per_agent,
    )
}

/// Assemble the full centralized program: every agent's local block, the 2m
/// coupling rows in the chosen mode, and the m per-target combined rows
/// `sum_x - sum_y = 0` taken across all satellites.
pub fn assemble_centralized(
    inst: &Instance,
    layout: &VariableLayout,
    mode: CouplingMode,
) -> LinearProgram {
    let nvars = layout.nvars();
    let mut lp = LinearProgram::binary(nvars);
    lp.c = objective(inst, layout);

    for i in 0..inst.n {
        let cols = LocalColumns::new(layout, i);
        let local = build_local(inst, layout, i);
        let lift = |row: &SpRow| {
            SpRow::new(
                row.cols
                    .iter()
                    .zip(&row.vals)
                    .map(|(&c, &v)| (cols.global[c as usize] as u32, v))
                    .collect(),
            )
        };
        for (idx, row) in local.a_ub.rows.iter().enumerate() {
            lp.push_ub(lift(row), local.b_ub[idx], local.tags_ub[idx]);
        }
        for (idx, row) in local.a_eq.rows.iter().enumerate() {
            lp.push_eq(lift(row), local.b_eq[idx], local.tags_eq[idx]);
        }
    }

    let (global, _) = build_coupling(inst, layout);
    let tags = CouplingBlock::tags(inst.m);
    for (idx, row) in global.rows.rows.iter().enumerate() {
        match mode {
            CouplingMode::Equality => lp.push_eq(row.clone(), 1.0, tags[idx]),
            CouplingMode::Inequality => lp.push_ub(row.clone(), 1.0, tags[idx]),
        }
    }

    // Combined per-target rows: acquisitions minus downlinks across the fleet.
    for j in 0..inst.m {
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for i in 0..inst.n {
            entries.extend((0..inst.theta[i][j]).map(|k| (layout.x_index(i, j, k) as u32, 1.0)));
            entries.extend((0..inst.omega[i]).map(|r| (layout.y_index(i, j, r) as u32, -1.0)));
        }
        lp.push_eq(SpRow::new(entries), 0.0, RowTag::Pair);
    }

    lp
}

/// Model-size closed forms computed from the layout, mirroring how the full
/// constraint family counts scale (all ordered preparation pairs included).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelCounts {
    pub variables: usize,
    pub constraints: usize,
    pub prep: usize,
    pub window: usize,
    pub memory: usize,
    pub order: usize,
    pub pair: usize,
    pub coupling: usize,
    pub combined: usize,
}

pub fn model_counts(inst: &Instance, layout: &VariableLayout) -> ModelCounts {
    let mut prep = 0usize;
    let mut memory = 0usize;
    let mut window = 0usize;
    for i in 0..inst.n {
        let events: usize = inst.theta[i].iter().sum();
        prep += events * events.saturating_sub(1);
        memory += events;
        window += inst.omega[i];
    }
    let order = inst.n * inst.m;
    let pair = inst.n * inst.m;
    let coupling = 2 * inst.m;
    let combined = inst.m;
    ModelCounts {
        variables: layout.nvars(),
        constraints: prep + window + memory + order + pair + coupling + combined,
        prep,
        window,
        memory,
        order,
        pair,
        coupling,
        combined,
    }
}

/// Write a plain-text listing of a program: objective, tagged rows, bounds.
pub fn dump_lp(lp: &LinearProgram, mut out: impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "minimize")?;
    for (j, &cj) in lp.c.iter().enumerate() {
        if cj != 0.0 {
            writeln!(out, "  {cj:+.12} z{j}")?;
        }
    }
    writeln!(out, "subject to")?;
    let write_row = |out: &mut dyn std::io::Write, row: &SpRow, op: &str, rhs: f64, tag: RowTag| {
        let terms: Vec<String> = row
            .cols
            .iter()
            .zip(&row.vals)
            .map(|(&c, &v)| format!("{v:+.12} z{c}"))
            .collect();
        writeln!(out, "  [{tag}] {} {op} {rhs:.12}", terms.join(" "))
    };
    for (idx, row) in lp.a_ub.rows.iter().enumerate() {
        write_row(&mut out, row, "<=", lp.b_ub[idx], lp.tags_ub[idx])?;
    }
    for (idx, row) in lp.a_eq.rows.iter().enumerate() {
        write_row(&mut out, row, "=", lp.b_eq[idx], lp.tags_eq[idx])?;
    }
    writeln!(out, "bounds")?;
    for j in 0..lp.ncols() {
        let flag = if lp.integrality[j] { " binary" } else { "" };
        writeln!(out, "  {} <= z{j} <= {}{flag}", lp.lb[j], lp.ub[j])?;
    }
    Ok(())
}
