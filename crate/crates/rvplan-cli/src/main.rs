//! `rvplan`: plan, evaluate and export risk-aware rendezvous policies.
//!
//! Exit codes: 0 success, 2 mission validation error, 3 infeasible
//! (mission or risk tolerance), 4 I/O error, 1 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rvplan_core::benchmark::{generate, BenchmarkParams};
use rvplan_core::cmdp::BuildError;
use rvplan_core::lp::{build_lp, export_lp_text, LpError, Policy};
use rvplan_core::mission::{MissionError, MissionSpec};
use rvplan_core::plan::{plan_at, PlanError, SimScaffold};
use rvplan_core::sim::{
    baseline_csv, evaluate, greedy_compare, pareto_csv, pareto_sweep, Controller,
};

#[derive(Parser)]
#[command(name = "rvplan", version, about = "Risk-aware UAV-UGV rendezvous planner")]
struct Cli {
    /// Worker threads for model construction and simulation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile the mission, solve the occupancy LP, write the policy.
    Plan {
        #[arg(long)]
        mission: PathBuf,
        /// Policy output path (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Override the mission's risk tolerance.
        #[arg(long)]
        delta: Option<f64>,
        /// Override the mission's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also dump the compiled model as structured text.
        #[arg(long)]
        export_model: Option<PathBuf>,
    },
    /// Evaluate a policy file with seeded Monte-Carlo rollouts.
    Simulate {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        mission: PathBuf,
        #[arg(long, default_value_t = 2000)]
        trials: u32,
        /// Master seed for the trial streams (default: mission seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Report output path (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan and evaluate across risk tolerances; write a CSV table.
    Pareto {
        #[arg(long)]
        mission: PathBuf,
        /// Risk tolerances, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.2,0.5")]
        delta: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        trials: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the planned policy against greedy thresholds; write a CSV.
    Baseline {
        #[arg(long)]
        mission: PathBuf,
        /// Greedy SOC thresholds in percent, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "40,50,60,70")]
        thresholds: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        trials: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the occupancy LP in CPLEX LP text format.
    ExportLp {
        #[arg(long)]
        mission: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a deterministic synthetic benchmark mission.
    GenBenchmark {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        uav_nodes: usize,
        /// Task-ring semi-axes, meters.
        #[arg(long, default_value_t = 10_500.0)]
        ring_rx: f64,
        #[arg(long, default_value_t = 8_000.0)]
        ring_ry: f64,
        #[arg(long, default_value_t = 301)]
        soc_bins: u16,
        #[arg(long, default_value_t = 400.0)]
        waypoint_spacing: f64,
        #[arg(long, default_value_t = 10_000)]
        energy_samples: u32,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
}

enum CliError {
    Validation(String),
    Infeasible(String),
    Io(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 4,
            CliError::Internal(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m)
            | CliError::Infeasible(m)
            | CliError::Io(m)
            | CliError::Internal(m) => m,
        }
    }
}

impl From<MissionError> for CliError {
    fn from(e: MissionError) -> Self {
        match e {
            MissionError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::Build(BuildError::InfeasibleMission) => CliError::Infeasible(e.to_string()),
            PlanError::Build(BuildError::DisconnectedPatrol) => CliError::Validation(e.to_string()),
            PlanError::Lp(LpError::Infeasible { .. }) => CliError::Infeasible(e.to_string()),
            PlanError::Lp(other) => CliError::Internal(other.to_string()),
        }
    }
}

/// Writes through a temp file in the target directory so a failed run
/// leaves no partial output behind.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Io(format!("cannot move output into place: {e}")))?;
    Ok(())
}

fn load_mission(path: &Path, seed: Option<u64>, delta: Option<f64>) -> Result<MissionSpec, CliError> {
    let mut spec = MissionSpec::load(path)?;
    if let Some(seed) = seed {
        spec.file.discretization.seed = seed;
    }
    if let Some(delta) = delta {
        spec.file.risk.delta = delta;
    }
    // Re-validate after overrides so flags obey the same invariants.
    Ok(MissionSpec::from_file(spec.file)?)
}

fn provenance_comment(spec: &MissionSpec, seed: u64) -> String {
    format!(
        "# tool_version={} mission_hash={} seed={}\n",
        env!("CARGO_PKG_VERSION"),
        spec.hash_hex(),
        seed
    )
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Plan {
            mission,
            out,
            delta,
            seed,
            export_model,
        } => {
            let spec = load_mission(&mission, seed, None)?;
            let delta = delta.unwrap_or(spec.delta());
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(CliError::Validation(format!(
                    "risk tolerance {delta} must lie in (0, 1]"
                )));
            }
            let planned = plan_at(&spec, delta)?;
            let s = &planned.summary;
            println!(
                "states {} (reachable {}), transitions {}, clamped draws {}",
                s.states, s.reachable_states, s.transition_entries, s.clamp_events
            );
            println!(
                "lp: {} variables, {} rows, {} iterations",
                s.lp_variables, s.lp_rows, s.lp_iterations
            );
            println!(
                "objective {:.1} s, risk value {:.6} (delta {}), flow residual {:.2e}",
                s.objective_s, s.risk_value, s.delta, s.flow_residual
            );
            println!(
                "build {:.2} s, solve {:.2} s",
                s.build_seconds, s.solve_seconds
            );
            if let Some(model_path) = export_model {
                write_atomic(&model_path, &planned.model.export_text())?;
                println!("model dump written to {}", model_path.display());
            }
            write_atomic(&out, &planned.policy.to_json())?;
            println!("policy written to {}", out.display());
            Ok(())
        }
        Command::Simulate {
            policy,
            mission,
            trials,
            seed,
            out,
        } => {
            let spec = load_mission(&mission, None, None)?;
            let text = std::fs::read_to_string(&policy)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", policy.display())))?;
            let policy = Policy::from_json(&text)
                .map_err(|e| CliError::Validation(format!("malformed policy file: {e}")))?;
            if policy.mission_hash != spec.hash_hex() {
                return Err(CliError::Validation(format!(
                    "policy was planned for mission {} but this mission hashes to {}",
                    policy.mission_hash,
                    spec.hash_hex()
                )));
            }
            let seed = seed.unwrap_or(spec.discretization().seed);
            let scaffold = SimScaffold::new(&spec);
            let ctx = scaffold.context(&spec);
            let table = ctx.policy_table(&policy);
            let label = format!("cmdp-{}", policy.delta);
            let report = evaluate(&ctx, &Controller::Cmdp(&table), &label, trials, seed);
            println!(
                "{} trials: failure rate {:.4} (policy risk {:.4}), mean success time {:.1} s",
                report.trials, report.failure_rate, policy.risk_value, report.mean_time_s
            );
            write_atomic(&out, &report.to_json())?;
            println!("report written to {}", out.display());
            Ok(())
        }
        Command::Pareto {
            mission,
            delta,
            trials,
            seed,
            out,
        } => {
            if delta.is_empty() || delta.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
                return Err(CliError::Validation(
                    "pareto needs risk tolerances in (0, 1]".into(),
                ));
            }
            let spec = load_mission(&mission, seed, None)?;
            let seed = spec.discretization().seed;
            let scaffold = SimScaffold::new(&spec);
            let model = rvplan_core::cmdp::build_cmdp_with_distances(&spec, &scaffold.dist)
                .map_err(|e| CliError::from(PlanError::Build(e)))?;
            let ctx = scaffold.context(&spec);
            let rows = pareto_sweep(&ctx, &model, &delta, trials, seed);
            for r in &rows {
                if r.feasible {
                    println!(
                        "delta {:<6} objective {:>9.1} s  FR {:.4}  mean time {:>9.1} s  rendezvous {:.2}",
                        r.delta, r.lp_objective_s, r.failure_rate, r.mean_time_s, r.mean_rendezvous
                    );
                } else {
                    println!("delta {:<6} infeasible", r.delta);
                }
            }
            let csv = provenance_comment(&spec, seed) + &pareto_csv(&rows);
            write_atomic(&out, &csv)?;
            println!("table written to {}", out.display());
            Ok(())
        }
        Command::Baseline {
            mission,
            thresholds,
            trials,
            seed,
            out,
        } => {
            if thresholds.is_empty() || thresholds.iter().any(|&t| !(t > 0.0 && t <= 100.0)) {
                return Err(CliError::Validation(
                    "baseline thresholds must lie in (0, 100]".into(),
                ));
            }
            let spec = load_mission(&mission, seed, None)?;
            let seed = spec.discretization().seed;
            let planned = plan_at(&spec, spec.delta())?;
            let scaffold = SimScaffold::new(&spec);
            let ctx = scaffold.context(&spec);
            let rows = greedy_compare(&ctx, &planned.policy, &thresholds, trials, seed);
            for r in &rows {
                println!(
                    "{:<12} success {:.4}  mean time {:>9.1} s  rendezvous {:.2}",
                    r.policy, r.success_rate, r.mean_time_s, r.mean_rendezvous
                );
            }
            let csv = provenance_comment(&spec, seed) + &baseline_csv(&rows);
            write_atomic(&out, &csv)?;
            println!("table written to {}", out.display());
            Ok(())
        }
        Command::ExportLp { mission, delta, out } => {
            let spec = load_mission(&mission, None, delta)?;
            let scaffold = SimScaffold::new(&spec);
            let model = rvplan_core::cmdp::build_cmdp_with_distances(&spec, &scaffold.dist)
                .map_err(|e| CliError::from(PlanError::Build(e)))?;
            let (lp, vars) = build_lp(&model, spec.delta());
            write_atomic(&out, &export_lp_text(&lp, Some(&vars)))?;
            println!(
                "LP with {} variables and {} rows written to {}",
                lp.num_vars,
                lp.eq_rows.len() + lp.le_rows.len(),
                out.display()
            );
            Ok(())
        }
        Command::GenBenchmark {
            out,
            seed,
            uav_nodes,
            ring_rx,
            ring_ry,
            soc_bins,
            waypoint_spacing,
            energy_samples,
            delta,
        } => {
            let params = BenchmarkParams {
                uav_nodes,
                ring_rx_m: ring_rx,
                ring_ry_m: ring_ry,
                soc_bins,
                waypoint_spacing_m: waypoint_spacing,
                energy_samples,
                seed,
                delta,
                ..Default::default()
            };
            let file = generate(&params);
            let spec = MissionSpec::from_file(file)?;
            write_atomic(&out, &spec.to_toml_string())?;
            println!(
                "benchmark mission ({} task points, hash {}) written to {}",
                spec.uav_route.len(),
                spec.hash_hex(),
                out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = rvplan_core::par::with_jobs(cli.jobs, || run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
