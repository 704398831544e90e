//! Temporary: full acceptance-shape validation on candidate geometry.

use rvplan_core::benchmark::{benchmark_mission, BenchmarkParams};
use rvplan_core::cmdp::build_cmdp_with_distances;
use rvplan_core::plan::{plan, SimScaffold};
use rvplan_core::sim::{evaluate, greedy_compare, pareto_sweep, Controller};

fn main() {
    let params = BenchmarkParams {
        soc_bins: 301,
        ring_rx_m: 11_200.0,
        ring_ry_m: 8_600.0,
        ..Default::default()
    };
    let spec = benchmark_mission(&params);
    let scaffold = SimScaffold::new(&spec);
    let t0 = std::time::Instant::now();
    let model = build_cmdp_with_distances(&spec, &scaffold.dist).unwrap();
    let ctx = scaffold.context(&spec);
    println!("model {} states build {:.1}s", model.state_count(), t0.elapsed().as_secs_f64());

    let t0 = std::time::Instant::now();
    let rows = pareto_sweep(&ctx, &model, &[0.01, 0.05, 0.1, 0.2, 0.5], 2000, 0);
    for r in &rows {
        println!(
            "delta {:<5} obj {:>8.1} risk {:.4} FR {:.4} time {:>8.1} rdv {:.2}",
            r.delta, r.lp_objective_s, r.lp_risk, r.failure_rate, r.mean_time_s, r.mean_rendezvous
        );
    }
    println!("pareto took {:.0}s", t0.elapsed().as_secs_f64());

    let planned = plan(&spec).unwrap();
    let table = ctx.policy_table(&planned.policy);
    for n in [500u32, 1000, 3000, 5000] {
        let rep = evaluate(&ctx, &Controller::Cmdp(&table), "cmdp", n, 0);
        let r = planned.summary.risk_value;
        let band = 3.0 * (r * (1.0 - r) / n as f64).sqrt();
        println!(
            "N={n:<5} FR {:.4} (band ±{:.4}, in {})",
            rep.failure_rate, band, (rep.failure_rate - r).abs() <= band
        );
    }

    let rows = greedy_compare(&ctx, &planned.policy, &[40.0, 50.0, 60.0, 70.0], 2000, 0);
    for r in &rows {
        println!("{:<12} success {:.4} time {:>8.1}", r.policy, r.success_rate, r.mean_time_s);
    }

    // Criterion-7 variant size.
    let perf = benchmark_mission(&BenchmarkParams { soc_bins: 101, ring_rx_m: 11_200.0, ring_ry_m: 8_600.0, ..Default::default() });
    let t0 = std::time::Instant::now();
    let p = plan(&perf).unwrap();
    println!(
        "perf variant: {} states, end-to-end {:.1}s (build {:.1} solve {:.1})",
        p.summary.states, t0.elapsed().as_secs_f64(), p.summary.build_seconds, p.summary.solve_seconds
    );
}
