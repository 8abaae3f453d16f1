//! Scratch: time one local step and the LP internals at n=m=50 scale.
use constel::distributed::*;
use constel::instance::{generate, GeneratorConfig, VariableLayout};
use std::time::Instant;

fn main() {
    let cfg = GeneratorConfig::with_defaults(50, 50, 2, 2, 3);
    let inst = generate(9, &cfg).unwrap();
    let layout = VariableLayout::new(&inst);
    let t0 = Instant::now();
    let dcfg = DecompositionConfig::for_instance(&inst);
    let mut ctx = AgentContext::new(&inst, &layout, 0, dcfg.penalty);
    println!("context build: {:.3}s, dim {}", t0.elapsed().as_secs_f64(), ctx.dim);
    let sigma = vec![0.02; 2 * inst.m];
    for round in 0..3 {
        let t1 = Instant::now();
        let (lambda, rho, _x, cost) = local_step(&mut ctx, &sigma, round).unwrap();
        println!("local_step: {:.3}s (rho {rho:.3}, cost {cost:.1}, nnz lambda {})",
            t1.elapsed().as_secs_f64(), lambda.iter().filter(|&&l| l > 0.0).count());
    }
    let t2 = Instant::now();
    let rec = recover_integer(&ctx, &sigma, &constel::milp::BnbLimits::default()).unwrap();
    println!("recover: {:.3}s (rho* {}, cost {}, status {:?})", t2.elapsed().as_secs_f64(), rec.rho_star, rec.cost, rec.status);
    // Worst case: generous allocation makes stage 2 a plain local MILP.
    let big = vec![1.0e6; 2 * inst.m];
    let t3 = Instant::now();
    let rec = recover_integer(&ctx, &big, &constel::milp::BnbLimits::default()).unwrap();
    println!("recover big: {:.3}s (rho* {}, cost {}, status {:?})", t3.elapsed().as_secs_f64(), rec.rho_star, rec.cost, rec.status);
}
