//! Plans the bundled benchmark mission and prints the pipeline summary.
//!
//! ```sh
//! cargo run --release -p rvplan-core --example plan_benchmark
//! ```

use rvplan_core::benchmark::{benchmark_mission, BenchmarkParams};
use rvplan_core::plan::{plan, SimScaffold};
use rvplan_core::sim::{evaluate, Controller, PolicyTable};

fn main() {
    let spec = benchmark_mission(&BenchmarkParams::default());
    let total_m: f64 = spec.uav_leg_lengths().iter().sum();
    println!(
        "mission: {} task points, {:.1} km route, {} road nodes",
        spec.uav_route.len(),
        total_m / 1000.0,
        spec.net.node_count()
    );

    let planned = plan(&spec).expect("benchmark mission must plan");
    let s = &planned.summary;
    println!(
        "model: {} states ({} reachable), {} transition entries, {} clamp events",
        s.states, s.reachable_states, s.transition_entries, s.clamp_events
    );
    println!(
        "lp: {} vars, {} rows, {} simplex iterations",
        s.lp_variables, s.lp_rows, s.lp_iterations
    );
    println!(
        "objective {:.1} s, risk {:.6}, flow residual {:.2e}",
        s.objective_s, s.risk_value, s.flow_residual
    );
    println!(
        "build {:.2} s, solve {:.2} s",
        s.build_seconds, s.solve_seconds
    );

    let scaffold = SimScaffold::new(&spec);
    let ctx = scaffold.context(&spec);
    let table = ctx.policy_table(&planned.policy);
    let report = evaluate(&ctx, &Controller::Cmdp(&table), "cmdp", 2000, 0);
    println!(
        "simulation: failure rate {:.4} (lp risk {:.4}), mean time {:.0} s, mean rendezvous {:.2}, fallbacks {}",
        report.failure_rate, s.risk_value, report.mean_time_s, report.mean_rendezvous, report.fallback_decisions
    );
}
