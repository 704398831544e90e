//! End-to-end planning pipeline: compile the mission, solve the occupancy
//! LP at the mission's risk tolerance, extract the randomized policy.

use std::time::Instant;

use thiserror::Error;

use crate::cmdp::{build_cmdp_with_distances, BuildError, CmdpModel};
use crate::lp::{
    extract_policy, solve_occupancy, LpError, OccupancySolution, Policy, PolicyProvenance, VarMap,
};
use crate::mission::MissionSpec;
use crate::patrol::Waypoints;
use crate::roadnet::RoadDistances;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Human-facing numbers for one planning run. Wall times live here and are
/// never written into policy or report files, which must be byte-identical
/// across runs.
#[derive(Debug, Clone)]
pub struct PlanSummary {
    pub states: usize,
    pub reachable_states: usize,
    pub transition_entries: usize,
    pub clamp_events: u64,
    pub lp_variables: usize,
    pub lp_rows: usize,
    pub lp_iterations: usize,
    pub objective_s: f64,
    pub risk_value: f64,
    pub flow_residual: f64,
    pub delta: f64,
    pub seed: u64,
    pub build_seconds: f64,
    pub solve_seconds: f64,
}

pub struct Planned {
    pub model: CmdpModel,
    pub solution: OccupancySolution,
    pub vars: VarMap,
    pub policy: Policy,
    pub summary: PlanSummary,
}

/// Runs the full pipeline at the mission's own risk tolerance.
pub fn plan(spec: &MissionSpec) -> Result<Planned, PlanError> {
    plan_at(spec, spec.delta())
}

/// Runs the full pipeline at an explicit risk tolerance.
pub fn plan_at(spec: &MissionSpec, delta: f64) -> Result<Planned, PlanError> {
    let build_start = Instant::now();
    let dist = RoadDistances::build(&spec.net);
    let model = build_cmdp_with_distances(spec, &dist)?;
    let build_seconds = build_start.elapsed().as_secs_f64();

    let solve_start = Instant::now();
    let (solution, vars) = solve_occupancy(&model, delta)?;
    let solve_seconds = solve_start.elapsed().as_secs_f64();

    let policy = extract_policy(
        &model,
        &vars,
        &solution,
        PolicyProvenance {
            mission_hash: &spec.hash_hex(),
            model_hash: &model.hash_hex(),
            delta,
            seed: spec.discretization().seed,
        },
    );
    let summary = PlanSummary {
        states: model.state_count(),
        reachable_states: model.stats.reachable_states,
        transition_entries: model.stats.transition_entries,
        clamp_events: model.stats.clamp_events,
        lp_variables: vars.num_vars(),
        lp_rows: model.state_count() - 1 + 1,
        lp_iterations: solution.iterations,
        objective_s: solution.objective_s,
        risk_value: solution.risk_value,
        flow_residual: solution.flow_residual,
        delta,
        seed: spec.discretization().seed,
        build_seconds,
        solve_seconds,
    };
    Ok(Planned {
        model,
        solution,
        vars,
        policy,
        summary,
    })
}

/// Shared simulation scaffolding (distance table + waypoint grid) for a
/// mission.
pub struct SimScaffold {
    pub dist: RoadDistances,
    pub waypoints: Waypoints,
}

impl SimScaffold {
    pub fn new(spec: &MissionSpec) -> Self {
        let dist = RoadDistances::build(&spec.net);
        let waypoints = Waypoints::build(
            &spec.net,
            &dist,
            &spec.ugv_route,
            spec.discretization().ugv_waypoint_spacing_m,
        );
        SimScaffold { dist, waypoints }
    }

    pub fn context<'a>(&'a self, spec: &'a MissionSpec) -> crate::sim::SimContext<'a> {
        crate::sim::SimContext::new(spec, &self.dist, &self.waypoints)
    }
}
