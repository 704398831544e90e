//! Seeded Monte-Carlo evaluation on the continuous dynamics: joule-level
//! charge, un-snapped ground-vehicle motion, fresh energy draws per leg.
//! Because the simulator never touches the SOC bins or the waypoint grid
//! (except to look up the policy), it independently audits the
//! discretization used by the planner.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cmdp::Action;
use crate::energy::EnergyModel;
use crate::geom::euclidean;
use crate::lp::Policy;
use crate::mission::MissionSpec;
use crate::patrol::{UgvContext, Waypoints};
use crate::rendezvous::solve_rendezvous;
use crate::roadnet::{RoadDistances, RoadPoint};
use crate::streams::{self, DOMAIN_TRIAL};

/// Shared read-only context for rollouts.
pub struct SimContext<'a> {
    pub spec: &'a MissionSpec,
    pub dist: &'a RoadDistances,
    pub waypoints: &'a Waypoints,
}

impl<'a> SimContext<'a> {
    pub fn new(spec: &'a MissionSpec, dist: &'a RoadDistances, waypoints: &'a Waypoints) -> Self {
        SimContext {
            spec,
            dist,
            waypoints,
        }
    }

    pub fn policy_table(&self, policy: &Policy) -> PolicyTable {
        PolicyTable::new(
            policy,
            self.waypoints,
            self.spec.discretization().ugv_waypoint_spacing_m,
        )
    }
}

/// Fly at best range, rendezvous whenever the charge drops below the
/// threshold; both rendezvous legs at best range too.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyPolicy {
    pub threshold_pct: f64,
}

/// Lookup table from discrete state keys to action probabilities, prepared
/// once per evaluation run.
///
/// The continuous dynamics drift off the waypoint/bin grid the model was
/// built on, so an exact key can miss. Misses resolve to the nearest
/// modeled state at the same route position (waypoint distance in grid
/// units plus SOC-bin distance, with a heavy penalty on patrol-target
/// mismatch) and are counted as fallback decisions.
pub struct PolicyTable {
    exact: HashMap<(u16, u32, u16, u16), usize>,
    /// Occupancy-backed entries per route position; the candidate set for
    /// nearest-state resolution.
    occupied_by_route_idx: HashMap<u16, Vec<usize>>,
    rows: Vec<(u16, u32, u16, u16, Vec<Action>, Vec<f64>)>,
    wp_coords: Vec<crate::geom::Point>,
    spacing_m: f64,
    pub delta: f64,
}

impl PolicyTable {
    pub fn new(policy: &Policy, waypoints: &Waypoints, spacing_m: f64) -> Self {
        let mut exact = HashMap::new();
        let mut occupied_by_route_idx: HashMap<u16, Vec<usize>> = HashMap::new();
        let mut rows = Vec::with_capacity(policy.entries.len());
        for e in &policy.entries {
            let idx = rows.len();
            if e.source == crate::lp::PolicySource::Occupancy {
                exact.insert((e.route_idx, e.ugv_waypoint, e.ugv_task, e.soc_bin), idx);
                occupied_by_route_idx.entry(e.route_idx).or_default().push(idx);
            }
            rows.push((
                e.route_idx,
                e.ugv_waypoint,
                e.ugv_task,
                e.soc_bin,
                e.actions.clone(),
                e.probs.clone(),
            ));
        }
        PolicyTable {
            exact,
            occupied_by_route_idx,
            rows,
            wp_coords: waypoints.coords.clone(),
            spacing_m: spacing_m.max(1.0),
            delta: policy.delta,
        }
    }

    /// Returns the matched row and whether the match was exact.
    ///
    /// Exact matches are taken only on states the optimizer actually
    /// occupied; everything else resolves to the nearest occupied state at
    /// the same route position (waypoint distance in grid units plus
    /// SOC-bin distance, heavy penalty on patrol-target mismatch). States
    /// with zero occupancy carry no information about the optimal policy,
    /// so drifting onto one must not be treated as a hit.
    fn lookup(&self, key: (u16, u32, u16, u16)) -> Option<(&[Action], &[f64], bool)> {
        if let Some(&idx) = self.exact.get(&key) {
            let row = &self.rows[idx];
            return Some((&row.4, &row.5, true));
        }
        let candidates = self.occupied_by_route_idx.get(&key.0)?;
        let here = self.wp_coords[key.1 as usize];
        let mut best: Option<(f64, usize)> = None;
        for &idx in candidates {
            let row = &self.rows[idx];
            let wp_d = euclidean(here, self.wp_coords[row.1 as usize]) / self.spacing_m;
            let bin_d = (key.3 as f64 - row.3 as f64).abs();
            let task_d = if key.2 == row.2 { 0.0 } else { 1e4 };
            let d = wp_d * wp_d + bin_d * bin_d + task_d;
            match best {
                Some((bd, _)) if d >= bd => {}
                _ => best = Some((d, idx)),
            }
        }
        best.map(|(_, idx)| {
            let row = &self.rows[idx];
            (&row.4[..], &row.5[..], false)
        })
    }
}

pub enum Controller<'a> {
    Cmdp(&'a PolicyTable),
    Greedy(GreedyPolicy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    OutOfCharge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialEvent {
    pub route_idx: u16,
    pub action: Action,
    pub energy_j: f64,
    pub duration_s: f64,
    pub distance_m: f64,
    /// Road node index of the meeting point, for rendezvous actions.
    pub rendezvous_node: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialTrace {
    pub trial_id: u32,
    pub outcome: Outcome,
    pub events: Vec<TrialEvent>,
    pub total_time_s: f64,
    pub total_distance_m: f64,
    pub rendezvous_count: u32,
    /// Decisions made outside the policy table (discretization drift).
    pub fallback_decisions: u32,
}

/// Aggregate statistics over a batch of trials. Travel statistics are
/// conditioned on trials that finished the route; the failure rate counts
/// all trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub tool_version: String,
    pub mission_hash: String,
    pub policy_label: String,
    pub trials: u32,
    pub seed: u64,
    pub successes: u32,
    pub failure_rate: f64,
    /// Binomial standard error of the failure rate.
    pub failure_se: f64,
    pub mean_time_s: f64,
    pub std_time_s: f64,
    pub mean_distance_m: f64,
    pub std_distance_m: f64,
    pub mean_rendezvous: f64,
    pub fallback_decisions: u64,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

struct Vehicle {
    soc_j: f64,
    ugv_place: RoadPoint,
    ugv_task: usize,
    route_idx: usize,
}

/// Simulates one mission under the controller. Deterministic in
/// (seed, trial id): each trial owns an independent RNG stream.
pub fn rollout(
    ctx: &SimContext<'_>,
    controller: &Controller<'_>,
    master_seed: u64,
    trial_id: u32,
) -> TrialTrace {
    let spec = ctx.spec;
    let v = spec.vehicles();
    let battery = spec.energy.battery;
    let last = spec.uav_route.len() - 1;
    let ugv = UgvContext::new(&spec.net, ctx.dist, &spec.ugv_route, v.v_ugv_ms);
    let mut rng = streams::stream(master_seed, DOMAIN_TRIAL, trial_id as u64, 0);

    // With per-trial weight fixing, the payload is drawn once and the
    // per-leg model collapses its weight distribution onto that draw.
    let mut energy_model: EnergyModel = spec.energy;
    if spec.energy.stochastic.weight_per_trial {
        let w = spec.energy.stochastic.sample_weight(&mut rng);
        energy_model.stochastic.weight_mean_kg = w;
        energy_model.stochastic.weight_std_kg = 0.0;
    }

    let mut state = Vehicle {
        soc_j: battery.initial_energy_j(),
        ugv_place: RoadPoint::Node(spec.ugv_start_node),
        ugv_task: spec.ugv_first_task,
        route_idx: 0,
    };
    let mut events: Vec<TrialEvent> = Vec::new();
    let mut fallback_decisions = 0u32;
    let mut outcome = Outcome::Success;

    while state.route_idx < last {
        let k = state.route_idx;
        let here = spec.uav_route[k];
        let next = spec.uav_route[k + 1];
        let leg_m = euclidean(here, next);
        let soc_bin = battery.bin_of_energy(state.soc_j);

        let action = match controller {
            Controller::Greedy(g) => {
                if state.soc_j / battery.capacity_j * 100.0 < g.threshold_pct {
                    Action::RendezvousBestRange
                } else {
                    Action::ForwardBestRange
                }
            }
            Controller::Cmdp(table) => {
                let wp = ctx.waypoints.snap(spec.net.point_of(state.ugv_place)) as u32;
                match table.lookup((k as u16, wp, state.ugv_task as u16, soc_bin)) {
                    Some((actions, probs, exact)) => {
                        if !exact {
                            fallback_decisions += 1;
                        }
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut chosen = actions[actions.len() - 1];
                        for (a, p) in actions.iter().zip(probs) {
                            acc += p;
                            if u < acc {
                                chosen = *a;
                                break;
                            }
                        }
                        chosen
                    }
                    None => {
                        // No modeled state at this route position at all;
                        // take the cheapest immediately available action.
                        fallback_decisions += 1;
                        if soc_bin == 0 {
                            Action::RendezvousBestRange
                        } else {
                            Action::ForwardBestRange
                        }
                    }
                }
            }
        };

        match action {
            Action::ForwardBestEndurance | Action::ForwardBestRange => {
                let speed = if action == Action::ForwardBestEndurance {
                    v.v_be_ms
                } else {
                    v.v_br_ms
                };
                let draw = energy_model.sample_leg_energy(leg_m, speed, &mut rng);
                let duration = leg_m / speed;
                events.push(TrialEvent {
                    route_idx: k as u16,
                    action,
                    energy_j: draw.joules,
                    duration_s: duration,
                    distance_m: leg_m,
                    rendezvous_node: None,
                });
                if draw.joules > state.soc_j {
                    outcome = Outcome::OutOfCharge;
                    break;
                }
                state.soc_j -= draw.joules;
                let (place, task) = ugv.advance(state.ugv_place, state.ugv_task, duration);
                state.ugv_place = place;
                state.ugv_task = task;
                state.route_idx += 1;
            }
            Action::RendezvousBestEndurance | Action::RendezvousBestRange => {
                let speed = if action == Action::RendezvousBestEndurance {
                    v.v_be_ms
                } else {
                    v.v_br_ms
                };
                let plan = solve_rendezvous(
                    here,
                    state.ugv_place,
                    next,
                    speed,
                    v.v_ugv_ms,
                    &spec.net,
                    ctx.dist,
                )
                .expect("road network is nonempty");
                let first = energy_model.sample_leg_energy(plan.uav_first_leg_m, speed, &mut rng);
                if first.joules > state.soc_j {
                    events.push(TrialEvent {
                        route_idx: k as u16,
                        action,
                        energy_j: first.joules,
                        duration_s: plan.delta_s,
                        distance_m: plan.uav_first_leg_m,
                        rendezvous_node: Some(spec.net.nodes()[plan.node].id),
                    });
                    outcome = Outcome::OutOfCharge;
                    break;
                }
                // Battery swap completes; the return leg flies on a full pack.
                let second = energy_model.sample_leg_energy(plan.second_leg_m, speed, &mut rng);
                let duration = plan.total_detour_s(v.recharge_s);
                events.push(TrialEvent {
                    route_idx: k as u16,
                    action,
                    energy_j: first.joules + second.joules,
                    duration_s: duration,
                    distance_m: plan.uav_first_leg_m + plan.second_leg_m,
                    rendezvous_node: Some(spec.net.nodes()[plan.node].id),
                });
                if second.joules > battery.capacity_j {
                    outcome = Outcome::OutOfCharge;
                    break;
                }
                state.soc_j = battery.capacity_j - second.joules;
                let (place, task) =
                    ugv.advance(RoadPoint::Node(plan.node), state.ugv_task, plan.second_leg_s);
                state.ugv_place = place;
                state.ugv_task = task;
                state.route_idx += 1;
            }
            Action::ToTerminal => unreachable!("route completion exits the loop"),
        }
    }

    let total_time_s = events.iter().map(|e| e.duration_s).sum();
    let total_distance_m = events.iter().map(|e| e.distance_m).sum();
    let rendezvous_count = events.iter().filter(|e| e.rendezvous_node.is_some()).count() as u32;
    TrialTrace {
        trial_id,
        outcome,
        events,
        total_time_s,
        total_distance_m,
        rendezvous_count,
        fallback_decisions,
    }
}

/// Runs `n` independent trials (ids `0..n`) and aggregates. Trials are
/// independent streams, so the result is the same for any worker count.
pub fn evaluate(
    ctx: &SimContext<'_>,
    controller: &Controller<'_>,
    label: &str,
    n: u32,
    master_seed: u64,
) -> SimReport {
    assert!(n >= 1);
    let traces = crate::par::map_indices(n as usize, |i| {
        let t = rollout(ctx, controller, master_seed, i as u32);
        (
            t.outcome,
            t.total_time_s,
            t.total_distance_m,
            t.rendezvous_count,
            t.fallback_decisions,
        )
    });

    let mut successes = 0u32;
    let mut times: Vec<f64> = Vec::new();
    let mut dists: Vec<f64> = Vec::new();
    let mut rendezvous: Vec<f64> = Vec::new();
    let mut fallbacks = 0u64;
    for &(outcome, time, dist, rv, fb) in &traces {
        fallbacks += fb as u64;
        if outcome == Outcome::Success {
            successes += 1;
            times.push(time);
            dists.push(dist);
            rendezvous.push(rv as f64);
        }
    }
    let failure_rate = 1.0 - successes as f64 / n as f64;
    SimReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        mission_hash: ctx.spec.hash_hex(),
        policy_label: label.to_string(),
        trials: n,
        seed: master_seed,
        successes,
        failure_rate,
        failure_se: (failure_rate * (1.0 - failure_rate) / n as f64).sqrt(),
        mean_time_s: mean(&times),
        std_time_s: std_dev(&times),
        mean_distance_m: mean(&dists),
        std_distance_m: std_dev(&dists),
        mean_rendezvous: mean(&rendezvous),
        fallback_decisions: fallbacks,
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// One row of a risk-tolerance sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParetoRow {
    pub delta: f64,
    pub feasible: bool,
    pub lp_objective_s: f64,
    pub lp_risk: f64,
    pub mean_time_s: f64,
    pub std_time_s: f64,
    pub failure_rate: f64,
    pub mean_distance_m: f64,
    pub mean_rendezvous: f64,
}

/// Sweeps risk tolerances over one mission: plan per tolerance, evaluate
/// each plan with `n` trials. Infeasible tolerances produce a row with NaN
/// statistics rather than aborting the sweep.
pub fn pareto_sweep(
    ctx: &SimContext<'_>,
    model: &crate::cmdp::CmdpModel,
    deltas: &[f64],
    n: u32,
    master_seed: u64,
) -> Vec<ParetoRow> {
    let mission_hash = ctx.spec.hash_hex();
    let model_hash = model.hash_hex();
    deltas
        .iter()
        .map(|&delta| {
            let solved = crate::lp::solve_occupancy(model, delta);
            match solved {
                Ok((sol, vars)) => {
                    let policy = crate::lp::extract_policy(
                        model,
                        &vars,
                        &sol,
                        crate::lp::PolicyProvenance {
                            mission_hash: &mission_hash,
                            model_hash: &model_hash,
                            delta,
                            seed: master_seed,
                        },
                    );
                    let table = ctx.policy_table(&policy);
                    let report = evaluate(
                        ctx,
                        &Controller::Cmdp(&table),
                        &format!("cmdp-{delta}"),
                        n,
                        master_seed,
                    );
                    ParetoRow {
                        delta,
                        feasible: true,
                        lp_objective_s: sol.objective_s,
                        lp_risk: sol.risk_value,
                        mean_time_s: report.mean_time_s,
                        std_time_s: report.std_time_s,
                        failure_rate: report.failure_rate,
                        mean_distance_m: report.mean_distance_m,
                        mean_rendezvous: report.mean_rendezvous,
                    }
                }
                Err(_) => ParetoRow {
                    delta,
                    feasible: false,
                    lp_objective_s: f64::NAN,
                    lp_risk: f64::NAN,
                    mean_time_s: f64::NAN,
                    std_time_s: f64::NAN,
                    failure_rate: f64::NAN,
                    mean_distance_m: f64::NAN,
                    mean_rendezvous: f64::NAN,
                },
            }
        })
        .collect()
}

pub fn pareto_csv(rows: &[ParetoRow]) -> String {
    let mut out = String::from(
        "delta,lp_objective_s,mean_time_s,std_time_s,failure_rate,mean_distance_m,mean_rendezvous,status\n",
    );
    for r in rows {
        if r.feasible {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},ok\n",
                r.delta,
                r.lp_objective_s,
                r.mean_time_s,
                r.std_time_s,
                r.failure_rate,
                r.mean_distance_m,
                r.mean_rendezvous
            ));
        } else {
            out.push_str(&format!("{},,,,,,,infeasible\n", r.delta));
        }
    }
    out
}

/// One row of the greedy-baseline comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineRow {
    pub policy: String,
    pub threshold_pct: Option<f64>,
    pub success_rate: f64,
    pub mean_time_s: f64,
    pub std_time_s: f64,
    pub mean_distance_m: f64,
    pub mean_rendezvous: f64,
}

/// Evaluates the planned policy against threshold-rule baselines on the
/// same seeds.
pub fn greedy_compare(
    ctx: &SimContext<'_>,
    policy: &Policy,
    thresholds: &[f64],
    n: u32,
    master_seed: u64,
) -> Vec<BaselineRow> {
    let table = ctx.policy_table(policy);
    let mut rows = Vec::with_capacity(thresholds.len() + 1);
    let report = evaluate(
        ctx,
        &Controller::Cmdp(&table),
        &format!("cmdp-{}", policy.delta),
        n,
        master_seed,
    );
    rows.push(BaselineRow {
        policy: format!("cmdp-{}", policy.delta),
        threshold_pct: None,
        success_rate: 1.0 - report.failure_rate,
        mean_time_s: report.mean_time_s,
        std_time_s: report.std_time_s,
        mean_distance_m: report.mean_distance_m,
        mean_rendezvous: report.mean_rendezvous,
    });
    for &threshold in thresholds {
        let greedy = GreedyPolicy {
            threshold_pct: threshold,
        };
        let report = evaluate(
            ctx,
            &Controller::Greedy(greedy),
            &format!("greedy-{threshold}"),
            n,
            master_seed,
        );
        rows.push(BaselineRow {
            policy: format!("greedy-{threshold}"),
            threshold_pct: Some(threshold),
            success_rate: 1.0 - report.failure_rate,
            mean_time_s: report.mean_time_s,
            std_time_s: report.std_time_s,
            mean_distance_m: report.mean_distance_m,
            mean_rendezvous: report.mean_rendezvous,
        });
    }
    rows
}

pub fn baseline_csv(rows: &[BaselineRow]) -> String {
    let mut out = String::from(
        "policy,threshold_pct,success_rate,mean_time_s,std_time_s,mean_distance_m,mean_rendezvous\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.policy,
            r.threshold_pct.map(|t| t.to_string()).unwrap_or_default(),
            r.success_rate,
            r.mean_time_s,
            r.std_time_s,
            r.mean_distance_m,
            r.mean_rendezvous
        ));
    }
    out
}
