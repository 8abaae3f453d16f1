//! Scratch: sweep penalty values and inspect decomposition dynamics.
use constel::distributed::*;
use constel::instance::{paper_example_instance, VariableLayout};
use constel::lp::{solve_lp, Tolerances};
use constel::network::generate_timeline;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let m_override: Option<f64> = args.get(1).and_then(|s| s.parse().ok());
    let tf: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let inst = paper_example_instance();
    let layout = VariableLayout::new(&inst);
    let tl = generate_timeline(11, inst.n, tf + 100, 8).unwrap();
    let mut cfg = DecompositionConfig::for_instance(&inst);
    if let Some(m) = m_override { cfg.penalty = m; }
    cfg.tf = tf;
    cfg.tol_alloc = 1e-3;
    cfg.trace_stride = 1;
    println!("M = {}", cfg.penalty);
    let trace = run(&inst, &tl, &cfg).unwrap();
    println!("iterations {}, converged {:?}", trace.iterations_run, trace.converged_at);

    let relaxed = relaxed_coupled_lp(&inst, &layout, &cfg.zeta);
    let sol = solve_lp(&relaxed, &Tolerances::default()).unwrap();
    println!("relaxed optimum {}", sol.objective);

    // Sum psi along recorded iterates: how close does the path get, and how
    // often is it feasible?
    let mut contexts: Vec<AgentContext> = (0..inst.n)
        .map(|i| AgentContext::new(&inst, &layout, i, cfg.penalty))
        .collect();
    let mut best: f64 = f64::INFINITY;
    let mut feas_count = 0usize;
    let mut last_vals: Vec<(usize, Option<f64>)> = Vec::new();
    for rec in &trace.records {
        let mut total = 0.0;
        let mut ok = true;
        for (i, ctx) in contexts.iter_mut().enumerate() {
            match psi(ctx, &rec.sigma[i]).unwrap() {
                Some(v) => total += v,
                None => { ok = false; break; }
            }
        }
        if ok {
            feas_count += 1;
            best = best.min((total - sol.objective).abs());
            last_vals.push((rec.t, Some(total)));
        } else {
            last_vals.push((rec.t, None));
        }
    }
    println!("feasible iterates {}/{}", feas_count, trace.records.len());
    println!("best |sum psi - v*| = {best:.6e}");
    for (t, v) in last_vals.iter().rev().take(8) {
        println!("  t={t} sum_psi={v:?}");
    }
    let final_min = trace.final_states.iter().flat_map(|s| s.sigma.iter()).fold(f64::INFINITY, |a, &b| a.min(b));
    println!("final min sigma {final_min:.4}");
}
