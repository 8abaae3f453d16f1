//! Command-line entry point: gen / net / solve / oracle / validate / report /
//! bench / compare subcommands.
//!
//! Every artifact written by a subcommand embeds provenance (seed, config
//! hash, tool version). A failing subcommand removes the partial outputs it
//! created and exits nonzero: 1 for errors, 3 when `validate` finds
//! violations.

mod bench;

pub use bench::{bench_instance, compare, BenchSummary, ComparisonReport, ExperimentSpec};

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::centralized::{
    load_schedule, read_schedule, report as write_report, save_schedule, solve_centralized,
};
use crate::distributed::{run_with_progress, DecompositionConfig, Progress, StepSchedule};
use crate::error::{Error, Result};
use crate::instance::{
    default_gamma, generate, load as load_instance, save as save_instance, FileMeta,
    GeneratorConfig, VariableLayout, Weights,
};
use crate::milp::BnbLimits;
use crate::model::{assemble_centralized, dump_lp, CouplingMode};
use crate::network::{generate_timeline, load_timeline, save_timeline};
use crate::oracle::{enumerate, DEFAULT_CAP};

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Short hex digest of a serializable configuration.
pub fn config_hash<T: serde::Serialize>(cfg: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(cfg).unwrap_or_default();
    let digest = Sha256::digest(&bytes);
    let mut out = String::new();
    for b in digest.iter().take(8) {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn file_meta<T: serde::Serialize>(seed: u64, cfg: &T) -> FileMeta {
    FileMeta {
        seed,
        config_hash: config_hash(cfg),
        version: tool_version().to_string(),
    }
}

#[derive(Parser)]
#[command(
    name = "constel",
    version,
    about = "Constellation scheduling: centralized MILP and distributed primal decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CouplingArg {
    Eq,
    Le,
}

impl From<CouplingArg> for CouplingMode {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Eq => CouplingMode::Equality,
            CouplingArg::Le => CouplingMode::Inequality,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Central,
    Dist,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance file.
    Gen(GenArgs),
    /// Generate a jointly connected communication timeline.
    Net(NetArgs),
    /// Solve an instance centrally or distributedly and write reports.
    Solve(SolveArgs),
    /// Exhaustively enumerate a tiny instance.
    Oracle(OracleArgs),
    /// Validate a schedule against its instance.
    Validate(ValidateArgs),
    /// Regenerate report files from a saved schedule.
    Report(ReportArgs),
    /// Run a benchmark cell (or the desk acceptance matrix).
    Bench(BenchArgs),
    /// Compare centralized and distributed pipelines on one instance.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long = "theta-max", default_value_t = 4)]
    theta_max: usize,
    #[arg(long = "omega-max", default_value_t = 4)]
    omega_max: usize,
    #[arg(long, default_value_t = 3)]
    days: usize,
    /// Acquisition-time draw scale (hours); defaults to 0.40 * horizon.
    #[arg(long)]
    g11: Option<f64>,
    /// Acquisition-time draw offset (hours); defaults to 0.05 * horizon.
    #[arg(long)]
    g12: Option<f64>,
    /// Downlink-time draw scale (hours); defaults to 0.50 * horizon.
    #[arg(long)]
    g21: Option<f64>,
    /// Downlink-time draw offset (hours); defaults to 0.45 * horizon.
    #[arg(long)]
    g22: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Scheduling reward; defaults to 3 * m * horizon.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NetArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 3)]
    delta: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "eq")]
    coupling: CouplingArg,
    #[arg(long)]
    out: PathBuf,
    /// Write the assembled program as plain text before solving.
    #[arg(long = "dump-lp")]
    dump_lp: Option<PathBuf>,
    #[arg(long = "node-max")]
    node_max: Option<usize>,
    /// Wall-clock budget for branch-and-bound, in seconds.
    #[arg(long = "time-max-s")]
    time_max_s: Option<f64>,
    #[arg(long = "gap-target")]
    gap_target: Option<f64>,
    /// Communication timeline (distributed mode).
    #[arg(long)]
    net: Option<PathBuf>,
    /// Coupling tightening: a scalar broadcast to all rows, or `auto`.
    #[arg(long)]
    zeta: Option<String>,
    /// Penalty constant on the feasibility slack.
    #[arg(long = "M")]
    penalty: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    tf: Option<usize>,
    #[arg(long = "tol-alloc")]
    tol_alloc: Option<f64>,
    /// Iteration trace output (JSON lines).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Record every k-th iteration in the trace.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Print per-iteration residual and multiplier extremes to stderr.
    #[arg(long, default_value_t = false)]
    progress: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "eq")]
    coupling: CouplingArg,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    /// Write the result as JSON instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// A schedule.json file or a report directory.
    #[arg(long)]
    schedule: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Run a named suite instead of a single cell (`desk` runs the
    /// acceptance matrix).
    #[arg(long)]
    suite: Option<String>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    net: Option<PathBuf>,
    /// central, dist, or both.
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long, value_enum, default_value = "eq")]
    coupling: CouplingArg,
    #[arg(long = "time-max-s")]
    time_max_s: Option<f64>,
    #[arg(long = "gap-target")]
    gap_target: Option<f64>,
    #[arg(long = "M")]
    penalty: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    tf: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    net: PathBuf,
    #[arg(long = "M")]
    penalty: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    tf: Option<usize>,
    #[arg(long = "time-max-s")]
    time_max_s: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Files and directories created by the running subcommand; removed when the
/// command fails so no partial artifacts survive.
struct OutputGuard {
    created: Vec<PathBuf>,
    armed: bool,
}

impl OutputGuard {
    fn new() -> Self {
        OutputGuard {
            created: Vec::new(),
            armed: true,
        }
    }

    fn track(&mut self, path: &Path) {
        self.created.push(path.to_path_buf());
    }

    fn disarm(&mut self) {
        self.armed = false;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.armed {
            return;
        }
        for path in self.created.iter().rev() {
            if path.is_dir() {
                let _ = fs::remove_dir_all(path);
            } else {
                let _ = fs::remove_file(path);
            }
        }
    }
}

fn limits_from(node_max: Option<usize>, time_max_s: Option<f64>, gap_target: Option<f64>) -> BnbLimits {
    let mut limits = BnbLimits::default();
    if let Some(n) = node_max {
        limits.node_max = n;
    }
    if let Some(s) = time_max_s {
        limits.time_max = Some(std::time::Duration::from_secs_f64(s));
    }
    if let Some(g) = gap_target {
        limits.gap_target = g;
    }
    limits
}

fn parse_zeta(spec: Option<&str>, inst: &crate::instance::Instance) -> Result<Vec<f64>> {
    match spec {
        None => Ok(vec![0.0; 2 * inst.m]),
        Some("auto") => Ok(crate::distributed::zeta_auto(inst)),
        Some(v) => {
            let z: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("--zeta expects a number or `auto`, got `{v}`")))?;
            Ok(vec![z; 2 * inst.m])
        }
    }
}

fn decomposition_config(
    inst: &crate::instance::Instance,
    zeta: Option<&str>,
    penalty: Option<f64>,
    t0: Option<f64>,
    tf: Option<usize>,
    tol_alloc: Option<f64>,
    stride: usize,
) -> Result<DecompositionConfig> {
    let mut cfg = DecompositionConfig::for_instance(inst);
    cfg.zeta = parse_zeta(zeta, inst)?;
    if let Some(m) = penalty {
        cfg.penalty = m;
    }
    if let Some(t0) = t0 {
        cfg.steps = StepSchedule { t0 };
    }
    if let Some(tf) = tf {
        cfg.tf = tf;
    }
    if let Some(tol) = tol_alloc {
        cfg.tol_alloc = tol;
    }
    cfg.trace_stride = stride;
    Ok(cfg)
}

fn cmd_gen(args: GenArgs) -> Result<i32> {
    let horizon = 24.0 * args.days as f64;
    let cfg = GeneratorConfig {
        n: args.n,
        m: args.m,
        theta_max: args.theta_max,
        omega_max: args.omega_max,
        days: args.days,
        g11: args.g11.unwrap_or(0.40 * horizon),
        g12: args.g12.unwrap_or(0.05 * horizon),
        g21: args.g21.unwrap_or(0.50 * horizon),
        g22: args.g22.unwrap_or(0.45 * horizon),
        weights: Weights {
            alpha: args.alpha,
            beta: args.beta,
            gamma: args.gamma.unwrap_or_else(|| default_gamma(args.m, horizon)),
        },
    };
    let mut guard = OutputGuard::new();
    guard.track(&args.out);
    let mut inst = generate(args.seed, &cfg)?;
    inst.meta = Some(file_meta(args.seed, &cfg));
    save_instance(&inst, &args.out)?;
    guard.disarm();
    let layout = VariableLayout::new(&inst);
    println!(
        "wrote {} (n={}, m={}, nx={}, ny={})",
        args.out.display(),
        inst.n,
        inst.m,
        layout.nx(),
        layout.ny()
    );
    Ok(0)
}

fn cmd_net(args: NetArgs) -> Result<i32> {
    let mut guard = OutputGuard::new();
    guard.track(&args.out);
    let mut tl = generate_timeline(args.seed, args.n, args.frames, args.delta)?;
    tl.meta = Some(file_meta(
        args.seed,
        &(args.n, args.frames, args.delta),
    ));
    save_timeline(&tl, &args.out)?;
    guard.disarm();
    println!(
        "wrote {} ({} frames, n={}, delta={})",
        args.out.display(),
        args.frames,
        args.n,
        args.delta
    );
    Ok(0)
}

fn cmd_solve(args: SolveArgs) -> Result<i32> {
    let inst = load_instance(&args.input)?;
    let seed = inst.meta.as_ref().map_or(0, |m| m.seed);
    let mut guard = OutputGuard::new();

    if let Some(path) = &args.dump_lp {
        let layout = VariableLayout::new(&inst);
        let lp = assemble_centralized(&inst, &layout, args.coupling.into());
        guard.track(path);
        let file = fs::File::create(path)?;
        dump_lp(&lp, std::io::BufWriter::new(file))?;
    }

    fs::create_dir_all(&args.out)?;
    match args.mode {
        ModeArg::Central => {
            let limits = limits_from(args.node_max, args.time_max_s, args.gap_target);
            let (mut sched, result) = solve_centralized(&inst, args.coupling.into(), &limits)?;
            sched.meta = Some(file_meta(seed, &(args.coupling as u8, limits.gap_target)));
            let sched_path = args.out.join("schedule.json");
            guard.track(&sched_path);
            save_schedule(&sched, &sched_path)?;
            for name in [
                "target_timeline.csv",
                "satellite_timeline.csv",
                "assignment_tree.csv",
            ] {
                guard.track(&args.out.join(name));
            }
            write_report(&sched, &inst, &args.out)?;
            guard.disarm();
            println!(
                "objective {} status {} gap {:.3e} nodes {}",
                sched.objective, result.status, result.gap, result.nodes
            );
        }
        ModeArg::Dist => {
            let net_path = args
                .net
                .as_ref()
                .ok_or_else(|| Error::Config("--net is required for --mode dist".into()))?;
            let tl = load_timeline(net_path)?;
            let cfg = decomposition_config(
                &inst,
                args.zeta.as_deref(),
                args.penalty,
                args.t0,
                args.tf,
                args.tol_alloc,
                args.stride,
            )?;
            let mut printer = |p: Progress| {
                eprintln!(
                    "t={} sum_residual={:.3e} max_lambda={:.6} max_rho={:.3e}",
                    p.t, p.sum_residual, p.max_lambda, p.max_rho
                );
            };
            let observer: Option<&mut dyn FnMut(Progress)> =
                if args.progress { Some(&mut printer) } else { None };
            let trace = run_with_progress(&inst, &tl, &cfg, observer)?;

            if let Some(trace_path) = &args.trace {
                guard.track(trace_path);
                let mut out = String::new();
                out.push_str(&serde_json::to_string(&serde_json::json!({
                    "meta": file_meta(seed, &cfg)
                }))?);
                out.push('\n');
                for rec in &trace.records {
                    out.push_str(&serde_json::to_string(rec)?);
                    out.push('\n');
                }
                fs::write(trace_path, out)?;
            }
            let mut sched = trace.schedule.clone();
            sched.meta = Some(file_meta(seed, &cfg));
            let sched_path = args.out.join("schedule.json");
            guard.track(&sched_path);
            save_schedule(&sched, &sched_path)?;
            for name in [
                "target_timeline.csv",
                "satellite_timeline.csv",
                "assignment_tree.csv",
            ] {
                guard.track(&args.out.join(name));
            }
            write_report(&sched, &inst, &args.out)?;
            guard.disarm();
            println!(
                "recovered cost {} rho* sum {:.3e} coupling violation {:.3e} iterations {} converged {:?}",
                trace.recovered_cost,
                trace.rho_star_sum(),
                trace.max_coupling_violation(),
                trace.iterations_run,
                trace.converged_at
            );
        }
    }
    Ok(0)
}

fn cmd_oracle(args: OracleArgs) -> Result<i32> {
    let inst = load_instance(&args.input)?;
    let res = enumerate(&inst, args.coupling.into(), args.cap)?;
    let seed = inst.meta.as_ref().map_or(0, |m| m.seed);
    let payload = serde_json::json!({
        "meta": file_meta(seed, &(args.coupling as u8, args.cap)),
        "objective": if res.is_infeasible() { None } else { Some(res.objective) },
        "feasible_count": res.feasible_count,
        "total_count": res.total_count,
        "optima": res.argmins.len(),
    });
    match &args.out {
        Some(path) => {
            let mut guard = OutputGuard::new();
            guard.track(path);
            fs::write(path, serde_json::to_string_pretty(&payload)?)?;
            guard.disarm();
        }
        None => println!("{}", serde_json::to_string_pretty(&payload)?),
    }
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<i32> {
    let inst = load_instance(&args.input)?;
    let sched = if args.schedule.is_dir() {
        read_schedule(&args.schedule)?
    } else {
        load_schedule(&args.schedule)?
    };
    let report = crate::centralized::validate(&inst, &sched)?;
    if report.is_empty() {
        println!("schedule valid: {} acquisitions, {} downlinks",
            sched.acquisitions.len(), sched.downlinks.len());
        Ok(0)
    } else {
        for v in &report {
            println!("violation: {v}");
        }
        Ok(3)
    }
}

fn cmd_report(args: ReportArgs) -> Result<i32> {
    let inst = load_instance(&args.input)?;
    let sched = load_schedule(&args.schedule)?;
    let mut guard = OutputGuard::new();
    fs::create_dir_all(&args.out)?;
    for name in [
        "target_timeline.csv",
        "satellite_timeline.csv",
        "assignment_tree.csv",
    ] {
        guard.track(&args.out.join(name));
    }
    write_report(&sched, &inst, &args.out)?;
    guard.disarm();
    println!("wrote report files into {}", args.out.display());
    Ok(0)
}

fn cmd_bench(args: BenchArgs) -> Result<i32> {
    if let Some(suite) = &args.suite {
        if suite != "desk" {
            return Err(Error::Config(format!("unknown suite `{suite}`")));
        }
        let reports = crate::suite::run_all();
        let mut all_pass = true;
        for r in &reports {
            println!("{r}");
            all_pass &= r.pass;
        }
        return Ok(if all_pass { 0 } else { 1 });
    }
    let input = args
        .input
        .clone()
        .ok_or_else(|| Error::Config("--in is required without --suite".into()))?;
    let spec = ExperimentSpec {
        instance: input,
        timeline: args.net.clone(),
        mode: args.mode.clone(),
        coupling: args.coupling.into(),
        time_max_s: args.time_max_s,
        gap_target: args.gap_target,
        penalty: args.penalty,
        t0: args.t0,
        tf: args.tf,
        out: args.out.clone(),
    };
    let summary = bench_instance(&spec)?;
    let text = serde_json::to_string_pretty(&summary)?;
    match &args.out {
        Some(path) => {
            let mut guard = OutputGuard::new();
            guard.track(path);
            fs::write(path, &text)?;
            guard.disarm();
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(0)
}

fn cmd_compare(args: CompareArgs) -> Result<i32> {
    let report = compare(
        &args.input,
        &args.net,
        args.penalty,
        args.t0,
        args.tf,
        args.time_max_s,
    )?;
    let text = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => {
            let mut guard = OutputGuard::new();
            guard.track(path);
            fs::write(path, &text)?;
            guard.disarm();
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Net(args) => cmd_net(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Report(args) => cmd_report(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

/// Parse arguments, honor `CONSTEL_THREADS`, run, and exit.
pub fn run_main() -> ! {
    if let Ok(threads) = std::env::var("CONSTEL_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
