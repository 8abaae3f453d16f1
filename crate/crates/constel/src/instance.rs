//! Problem data model, random scenario generation, and instance (de)serialization.
//!
//! An [`Instance`] owns every physical parameter of a scheduling scenario:
//! opportunity counts, acquisition/downlink times, preparation times, window
//! durations, memory figures, and objective weights. A [`VariableLayout`]
//! fixes the bijection between opportunity triples and positions in the
//! stacked decision vector `z = [X; Y]`.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step used to break exact ties between opportunity times at generation.
const TIE_STEP: f64 = 1e-6;

/// Provenance stamp embedded in generated artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileMeta {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

/// All physical parameters of a scheduling scenario.
///
/// Index conventions: `i` satellite, `j` target, `k` acquisition occurrence,
/// `r` downlink occurrence. Ragged arrays are shaped by `theta` and `omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    /// Number of satellites.
    pub n: usize,
    /// Number of targets.
    pub m: usize,
    /// `theta[i][j]`: acquisition opportunity count for satellite i, target j.
    pub theta: Vec<Vec<usize>>,
    /// `omega[i]`: downlink opportunity count for satellite i.
    pub omega: Vec<usize>,
    /// `t[i][j][k]`: acquisition time in hours, strictly increasing in k.
    pub t: Vec<Vec<Vec<f64>>>,
    /// `s[i][j][r]`: downlink availability time in hours, strictly increasing in r.
    pub s: Vec<Vec<Vec<f64>>>,
    /// `p[i][j][k]`: preparation time in hours.
    pub p: Vec<Vec<Vec<f64>>>,
    /// `d[i][r]`: downlink window duration in hours.
    pub d: Vec<Vec<f64>>,
    /// `q[i][j]`: memory needed to acquire target j on satellite i, in MB.
    pub q: Vec<Vec<f64>>,
    /// `qM[i]`: onboard memory capacity in MB.
    #[serde(rename = "qM")]
    pub q_max: Vec<f64>,
    /// Downlink data rate in MB/hour.
    #[serde(rename = "DR")]
    pub data_rate: f64,
    /// Weight on acquisition times in the objective.
    pub alpha: f64,
    /// Weight on downlink times in the objective.
    pub beta: f64,
    /// Reward weight for scheduling acquisitions.
    pub gamma: f64,
    /// Total schedule span in hours.
    pub horizon: f64,
    /// Optional provenance (seed, config hash, tool version).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<FileMeta>,
}

/// Objective weights used by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Configuration for [`generate`].
///
/// Acquisition times are drawn as `g11 * rand + g12` and downlink
/// availability times as `g21 * rand + g22`, both in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub m: usize,
    pub theta_max: usize,
    pub omega_max: usize,
    pub days: usize,
    pub g11: f64,
    pub g12: f64,
    pub g21: f64,
    pub g22: f64,
    pub weights: Weights,
}

impl GeneratorConfig {
    /// Config with acquisition draws in the first half of the horizon and
    /// downlink draws in the second half, so orderings are satisfiable.
    pub fn with_defaults(n: usize, m: usize, theta_max: usize, omega_max: usize, days: usize) -> Self {
        let horizon = 24.0 * days as f64;
        GeneratorConfig {
            n,
            m,
            theta_max,
            omega_max,
            days,
            g11: 0.40 * horizon,
            g12: 0.05 * horizon,
            g21: 0.50 * horizon,
            g22: 0.45 * horizon,
            weights: Weights {
                alpha: 1.0,
                beta: 1.0,
                gamma: default_gamma(m, horizon),
            },
        }
    }

    pub fn horizon(&self) -> f64 {
        24.0 * self.days as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        if self.omega_max == 0 {
            return Err(Error::Config("omega_max must be >= 1".into()));
        }
        if self.days == 0 {
            return Err(Error::Config("days must be >= 1".into()));
        }
        let w = &self.weights;
        if !(w.alpha > 0.0 && w.beta > 0.0 && w.gamma > 0.0) {
            return Err(Error::Config("weights must be strictly positive".into()));
        }
        let h = self.horizon();
        for (name, lo, hi) in [
            ("g11/g12", self.g12, self.g11 + self.g12),
            ("g21/g22", self.g22, self.g21 + self.g22),
        ] {
            if !(self.g11 > 0.0 && self.g21 > 0.0 && lo >= 0.0 && hi <= h) {
                return Err(Error::Config(format!(
                    "{name} must place draws inside [0, {h}] with positive span"
                )));
            }
        }
        Ok(())
    }
}

/// Reward weight large enough that scheduling any target beats skipping it.
pub fn default_gamma(m: usize, horizon: f64) -> f64 {
    3.0 * m as f64 * horizon
}

// Generator-internal parameter ranges (hours and MB). Documented in the
// instance-format notes; not part of GeneratorConfig.
const PREP_RANGE: (f64, f64) = (0.05, 0.5);
const WINDOW_RANGE: (f64, f64) = (1.0, 3.0);
const MEM_NEED_RANGE: (f64, f64) = (50.0, 250.0);
const MEM_CAP_RANGE: (f64, f64) = (400.0, 800.0);
const DATA_RATE: f64 = 1000.0;

/// Generate a random instance. Identical `(seed, cfg)` yield identical output.
pub fn generate(seed: u64, cfg: &GeneratorConfig) -> Result<Instance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<Vec<usize>> = (0..cfg.n)
        .map(|_| (0..cfg.m).map(|_| rng.random_range(0..=cfg.theta_max)).collect())
        .collect();
    let omega: Vec<usize> = (0..cfg.n).map(|_| rng.random_range(0..=cfg.omega_max)).collect();
    let inst = fill_from_counts(theta, omega, cfg, &mut rng)?;
    Ok(inst)
}

/// Fill times, memory, and weights for fixed opportunity counts.
fn fill_from_counts(
    theta: Vec<Vec<usize>>,
    omega: Vec<usize>,
    cfg: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Instance> {
    let (n, m) = (cfg.n, cfg.m);
    let uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();

    let mut t = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..m {
            let mut times: Vec<f64> = (0..theta[i][j])
                .map(|_| cfg.g11 * rng.random::<f64>() + cfg.g12)
                .collect();
            sort_and_break_ties(&mut times);
            t[i].push(times);
        }
    }
    let mut s = vec![Vec::new(); n];
    for i in 0..n {
        for _ in 0..m {
            let mut times: Vec<f64> = (0..omega[i])
                .map(|_| cfg.g21 * rng.random::<f64>() + cfg.g22)
                .collect();
            sort_and_break_ties(&mut times);
            s[i].push(times);
        }
    }
    let p: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    (0..theta[i][j])
                        .map(|_| uniform(rng, PREP_RANGE.0, PREP_RANGE.1))
                        .collect()
                })
                .collect()
        })
        .collect();
    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..omega[i])
                .map(|_| uniform(rng, WINDOW_RANGE.0, WINDOW_RANGE.1))
                .collect()
        })
        .collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| uniform(rng, MEM_NEED_RANGE.0, MEM_NEED_RANGE.1))
                .collect()
        })
        .collect();
    let q_max: Vec<f64> = (0..n)
        .map(|_| uniform(rng, MEM_CAP_RANGE.0, MEM_CAP_RANGE.1))
        .collect();

    let inst = Instance {
        n,
        m,
        theta,
        omega,
        t,
        s,
        p,
        d,
        q,
        q_max,
        data_rate: DATA_RATE,
        alpha: cfg.weights.alpha,
        beta: cfg.weights.beta,
        gamma: cfg.weights.gamma,
        horizon: cfg.horizon(),
        meta: None,
    };
    inst.validate()?;
    Ok(inst)
}

fn sort_and_break_ties(times: &mut [f64]) {
    times.sort_by(|a, b| a.total_cmp(b));
    for k in 1..times.len() {
        if times[k] <= times[k - 1] {
            times[k] = times[k - 1] + TIE_STEP;
        }
    }
}

/// The worked two-satellite, three-target scenario: Θ = [[1,2,0],[3,1,1]],
/// ω = [1,2], three-day horizon, remaining parameters from a fixed seed.
pub fn paper_example_instance() -> Instance {
    let cfg = GeneratorConfig::with_defaults(2, 3, 3, 2, 3);
    let theta = vec![vec![1, 2, 0], vec![3, 1, 1]];
    let omega = vec![1, 2];
    let mut rng = ChaCha8Rng::seed_from_u64(PAPER_EXAMPLE_SEED);
    fill_from_counts(theta, omega, &cfg, &mut rng).expect("fixed example is valid")
}

/// Seed chosen so the worked example reproduces the reference assignment
/// (satellite 1 takes targets 1 and 2; satellite 2 takes target 3).
pub const PAPER_EXAMPLE_SEED: u64 = 12;

/// Fill an instance from explicit opportunity counts and a seed; exposed for
/// scenario construction in tools and tests.
pub fn instance_from_counts(
    theta: Vec<Vec<usize>>,
    omega: Vec<usize>,
    cfg: &GeneratorConfig,
    seed: u64,
) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fill_from_counts(theta, omega, cfg, &mut rng)
}

/// A capacity-capped scenario: one downlink window per satellite, shrunk so
/// no satellite can complete even half a download within it. Per-satellite
/// coupling usage then stays strictly below a uniform 1/n share, which makes
/// these instances well-conditioned benchmarks for the decomposition loop.
pub fn tight_window_instance(seed: u64, n: usize, m: usize, theta_max: usize) -> Result<Instance> {
    let cfg = GeneratorConfig::with_defaults(n, m, theta_max, 1, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<Vec<usize>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(0..=theta_max)).collect())
        .collect();
    let omega = vec![1; n];
    let mut inst = fill_from_counts(theta, omega, &cfg, &mut rng)?;
    for i in 0..n {
        let min_q = inst.q[i].iter().cloned().fold(f64::INFINITY, f64::min);
        inst.d[i] = vec![0.4 * min_q / inst.data_rate];
    }
    inst.validate()?;
    Ok(inst)
}

impl Instance {
    /// Check every structural invariant; error on the first failure.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(Error::validation("n/m", "counts must be >= 1"));
        }
        check_shape2("theta", &self.theta, n, m)?;
        if self.omega.len() != n {
            return Err(Error::validation("omega", format!("expected length {n}")));
        }
        check_shape2("q", &self.q, n, m)?;
        if self.q_max.len() != n {
            return Err(Error::validation("qM", format!("expected length {n}")));
        }
        if self.t.len() != n || self.s.len() != n || self.p.len() != n || self.d.len() != n {
            return Err(Error::validation("t/s/p/d", format!("expected {n} outer rows")));
        }
        if !(self.data_rate > 0.0) {
            return Err(Error::validation("DR", "data rate must be > 0"));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.gamma > 0.0) {
            return Err(Error::validation("alpha/beta/gamma", "weights must be > 0"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::validation("horizon", "must be > 0"));
        }
        for i in 0..n {
            if self.t[i].len() != m || self.s[i].len() != m || self.p[i].len() != m {
                return Err(Error::validation(
                    format!("t/s/p[{i}]"),
                    format!("expected {m} targets"),
                ));
            }
            if self.d[i].len() != self.omega[i] {
                return Err(Error::validation(
                    format!("d[{i}]"),
                    format!("expected omega[{i}] = {} entries", self.omega[i]),
                ));
            }
            for j in 0..m {
                if self.t[i][j].len() != self.theta[i][j] || self.p[i][j].len() != self.theta[i][j] {
                    return Err(Error::validation(
                        format!("t/p[{i}][{j}]"),
                        format!("expected theta[{i}][{j}] = {} entries", self.theta[i][j]),
                    ));
                }
                if self.s[i][j].len() != self.omega[i] {
                    return Err(Error::validation(
                        format!("s[{i}][{j}]"),
                        format!("expected omega[{i}] = {} entries", self.omega[i]),
                    ));
                }
                check_times(&format!("t[{i}][{j}]"), &self.t[i][j], self.horizon)?;
                check_times(&format!("s[{i}][{j}]"), &self.s[i][j], self.horizon)?;
                for (k, &v) in self.p[i][j].iter().enumerate() {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::validation(format!("p[{i}][{j}][{k}]"), "must be >= 0"));
                    }
                }
                if !(self.q[i][j] > 0.0) {
                    return Err(Error::validation(format!("q[{i}][{j}]"), "must be > 0"));
                }
            }
            for (r, &v) in self.d[i].iter().enumerate() {
                if !(v > 0.0) {
                    return Err(Error::validation(format!("d[{i}][{r}]"), "must be > 0"));
                }
            }
            if !(self.q_max[i] > 0.0) {
                return Err(Error::validation(format!("qM[{i}]"), "must be > 0"));
            }
        }
        Ok(())
    }

    /// Download duration of target j from satellite i, in hours.
    pub fn download_duration(&self, i: usize, j: usize) -> f64 {
        self.q[i][j] / self.data_rate
    }

    /// Acquisition events of satellite i as `(j, k, time)` in layout order.
    pub fn acquisition_events(&self, i: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for j in 0..self.m {
            for k in 0..self.theta[i][j] {
                out.push((j, k, self.t[i][j][k]));
            }
        }
        out
    }
}

fn check_shape2<T>(field: &str, a: &[Vec<T>], n: usize, m: usize) -> Result<()> {
    if a.len() != n {
        return Err(Error::validation(field, format!("expected {n} rows")));
    }
    for (i, row) in a.iter().enumerate() {
        if row.len() != m {
            return Err(Error::validation(
                format!("{field}[{i}]"),
                format!("expected {m} columns, found {}", row.len()),
            ));
        }
    }
    Ok(())
}

fn check_times(field: &str, times: &[f64], horizon: f64) -> Result<()> {
    for (k, &v) in times.iter().enumerate() {
        if !(v.is_finite() && (0.0..=horizon).contains(&v)) {
            return Err(Error::validation(
                format!("{field}[{k}]"),
                format!("time {v} outside [0, {horizon}]"),
            ));
        }
        if k > 0 && times[k] <= times[k - 1] {
            return Err(Error::validation(
                format!("{field}[{k}]"),
                "times must be strictly increasing within an opportunity list",
            ));
        }
    }
    Ok(())
}

/// Load an instance from a JSON file and validate it.
pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let inst: Instance = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    inst.validate()?;
    Ok(inst)
}

/// Save an instance as pretty-printed JSON. Numbers round-trip exactly.
pub fn save(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(inst)?;
    fs::write(path, text)?;
    Ok(())
}

/// Reference to a single decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    /// x_{i,j}^k: acquisition of target j by satellite i at occurrence k.
    Acq { i: usize, j: usize, k: usize },
    /// y_{i,j}^r: downlink of target j by satellite i at occurrence r.
    Dl { i: usize, j: usize, r: usize },
}

/// Bijections between opportunity triples and positions in the stacked
/// decision vector `z = [X; Y]`.
///
/// X is ordered satellite-major, then target, then occurrence; Y likewise.
/// Downlink variables exist for every `(i, j, r)` with `r < omega[i]`, even
/// when `theta[i][j] = 0`.
#[derive(Debug, Clone)]
pub struct VariableLayout {
    n: usize,
    m: usize,
    x_offsets: Vec<Vec<usize>>,
    y_starts: Vec<usize>,
    omega: Vec<usize>,
    x_ranges: Vec<std::ops::Range<usize>>,
    y_ranges: Vec<std::ops::Range<usize>>,
    vars: Vec<VarRef>,
    nx: usize,
    ny: usize,
}

impl VariableLayout {
    pub fn new(inst: &Instance) -> Self {
        let (n, m) = (inst.n, inst.m);
        let mut x_offsets = vec![vec![0usize; m]; n];
        let mut x_ranges = Vec::with_capacity(n);
        let mut vars = Vec::new();
        let mut pos = 0usize;
        for i in 0..n {
            let start = pos;
            for j in 0..m {
                x_offsets[i][j] = pos;
                for k in 0..inst.theta[i][j] {
                    vars.push(VarRef::Acq { i, j, k });
                    pos += 1;
                }
            }
            x_ranges.push(start..pos);
        }
        let nx = pos;
        let mut y_starts = Vec::with_capacity(n);
        let mut y_ranges = Vec::with_capacity(n);
        for i in 0..n {
            let start = pos;
            y_starts.push(pos);
            for j in 0..m {
                for r in 0..inst.omega[i] {
                    vars.push(VarRef::Dl { i, j, r });
                    pos += 1;
                }
            }
            y_ranges.push(start..pos);
        }
        let ny = pos - nx;
        VariableLayout {
            n,
            m,
            x_offsets,
            y_starts,
            omega: inst.omega.clone(),
            x_ranges,
            y_ranges,
            vars,
            nx,
            ny,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Total number of stacked variables.
    pub fn nvars(&self) -> usize {
        self.nx + self.ny
    }

    /// Stacked index of x_{i,j}^k.
    pub fn x_index(&self, i: usize, j: usize, k: usize) -> usize {
        self.x_offsets[i][j] + k
    }

    /// Stacked index of y_{i,j}^r (offset by `nx`).
    pub fn y_index(&self, i: usize, j: usize, r: usize) -> usize {
        self.y_starts[i] + j * self.omega[i] + r
    }

    /// The variable at a stacked index.
    pub fn var_for(&self, index: usize) -> VarRef {
        self.vars[index]
    }

    /// Contiguous x-range of agent i in the stacked vector.
    pub fn agent_x_range(&self, i: usize) -> std::ops::Range<usize> {
        self.x_ranges[i].clone()
    }

    /// Contiguous y-range of agent i in the stacked vector.
    pub fn agent_y_range(&self, i: usize) -> std::ops::Range<usize> {
        self.y_ranges[i].clone()
    }

    /// Global column indices owned by agent i (x block then y block).
    pub fn agent_cols(&self, i: usize) -> Vec<usize> {
        self.x_ranges[i].clone().chain(self.y_ranges[i].clone()).collect()
    }

    /// Number of variables owned by agent i.
    pub fn agent_dim(&self, i: usize) -> usize {
        self.x_ranges[i].len() + self.y_ranges[i].len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }
}
