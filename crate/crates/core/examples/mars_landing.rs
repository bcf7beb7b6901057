//! Solves the Mars landing scenario with both solvers and prints fuel and
//! audit results.
//!
//! ```text
//! cargo run --release --example mars_landing -- [tf] [penalty_rho] [max_iters]
//! ```

use exproj_core::analysis::{check_feasibility, FeasibilityTolerances};
use exproj_core::{solve_exproj, solve_lcvx, ScenarioConfig};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut cfg = ScenarioConfig::mars_landing().with_tf(args.first().copied().unwrap_or(46.96), 1.0);
    if let Some(rho) = args.get(1) {
        cfg.penalty_rho = *rho;
    }
    if let Some(iters) = args.get(2) {
        cfg.max_iters = *iters as usize;
    }
    let tol = FeasibilityTolerances::default();
    for result in [solve_exproj(&cfg), solve_lcvx(&cfg)] {
        let r = result.expect("solve");
        let audit = check_feasibility(&r.trajectory, &cfg, &tol).expect("audit");
        println!(
            "tf={:.2} {:6} {:?} iters={} fuel={:.4} kg  T in [{:.1}, {:.1}] N  |r_N|={:.2e} |v_N|={:.2e} feasible={}  {:.2}s",
            cfg.tf,
            r.solver.label(),
            r.termination,
            r.iterations,
            r.fuel,
            audit.min_thrust,
            audit.max_thrust,
            audit.terminal_position_error,
            audit.terminal_velocity_error,
            audit.feasible,
            r.solve_seconds,
        );
    }
}
