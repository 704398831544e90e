//! Compilation of a mission into a finite constrained decision process.
//!
//! States track the aircraft's position along its task route, the ground
//! vehicle's discretized position and current patrol target, and the SOC
//! bin. Two special states absorb outcomes: out-of-charge (entered whenever
//! an energy draw exceeds the available charge) and the terminal state.
//!
//! The primary cost of a transition is its duration in seconds; transitions
//! into the out-of-charge or terminal states cost zero. The risk cost is one
//! exactly on transitions into out-of-charge and zero elsewhere, so its
//! expected cumulative value equals the probability of ever depleting the
//! battery.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::energy::TransitionSampler;
use crate::mission::MissionSpec;
use crate::patrol::{UgvContext, Waypoints};
use crate::rendezvous::solve_rendezvous;
use crate::roadnet::{RoadDistances, RoadPoint};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("ground-vehicle task nodes are not road-connected")]
    DisconnectedPatrol,
    #[error(
        "mission is infeasible: every policy runs out of charge with probability 1 \
         (some task leg exceeds the full-battery range under every action)"
    )]
    InfeasibleMission,
}

/// Discrete planner state. Variant and field order define a topological
/// order: every transition goes to a strictly greater state, except the
/// terminal self-loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum State {
    InTask {
        /// Index of the task point the aircraft sits at; the last index
        /// means the route is complete.
        route_idx: u16,
        /// Waypoint id of the ground vehicle.
        ugv_waypoint: u32,
        /// Index into the patrol route of the node the ground vehicle is
        /// heading to.
        ugv_task: u16,
        soc_bin: u16,
    },
    OutOfCharge,
    Terminal,
}

/// Aircraft decision at a task node, or the forced move to the terminal
/// state once the route is complete or the battery is gone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Action {
    ForwardBestEndurance,
    ForwardBestRange,
    RendezvousBestEndurance,
    RendezvousBestRange,
    ToTerminal,
}

impl Action {
    pub fn label(self) -> &'static str {
        match self {
            Action::ForwardBestEndurance => "forward_be",
            Action::ForwardBestRange => "forward_br",
            Action::RendezvousBestEndurance => "rendezvous_be",
            Action::RendezvousBestRange => "rendezvous_br",
            Action::ToTerminal => "to_terminal",
        }
    }
}

/// One available action in one state: its duration, the sparse successor
/// distribution (sorted by target index), and the chosen rendezvous node
/// when applicable.
#[derive(Debug, Clone)]
pub struct ActionData {
    pub action: Action,
    pub duration_s: f64,
    pub transitions: Vec<(u32, f64)>,
    pub rendezvous_node: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildStats {
    pub reachable_states: usize,
    pub transition_entries: usize,
    pub distinct_legs_priced: usize,
    pub clamp_events: u64,
}

#[derive(Debug, Clone)]
pub struct CmdpModel {
    /// Sorted ascending; the index of a state in this list is its id.
    pub states: Vec<State>,
    /// Per state, in action order.
    pub state_actions: Vec<Vec<ActionData>>,
    pub initial: u32,
    pub out_of_charge: u32,
    pub terminal: u32,
    pub stats: BuildStats,
}

impl CmdpModel {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, s: &State) -> Option<u32> {
        self.states.binary_search(s).ok().map(|i| i as u32)
    }

    /// Probability that `(state, slot)` transitions into out-of-charge: the
    /// expected risk cost of the pair.
    pub fn risk_coeff(&self, state: usize, slot: usize) -> f64 {
        if state as u32 == self.out_of_charge {
            return 0.0;
        }
        self.state_actions[state][slot]
            .transitions
            .iter()
            .filter(|&&(t, _)| t == self.out_of_charge)
            .map(|&(_, p)| p)
            .sum()
    }

    /// Expected primary cost of `(state, slot)`: the duration weighted by
    /// the probability of not depleting (failure branches cost zero).
    pub fn expected_cost(&self, state: usize, slot: usize) -> f64 {
        let a = &self.state_actions[state][slot];
        a.duration_s * (1.0 - self.risk_coeff(state, slot))
    }

    /// Exact expected cumulative (time, risk) of a stationary randomized
    /// policy from the initial state, by backward induction over the
    /// topological state order. `probs[s]` must align with the state's
    /// action list.
    pub fn evaluate_policy(&self, probs: &[Vec<f64>]) -> (f64, f64) {
        let n = self.state_count();
        let mut time = vec![0.0f64; n];
        let mut risk = vec![0.0f64; n];
        for s in (0..n).rev() {
            if s as u32 == self.terminal {
                continue;
            }
            let mut t_acc = 0.0;
            let mut r_acc = 0.0;
            for (slot, a) in self.state_actions[s].iter().enumerate() {
                let p_a = probs[s][slot];
                if p_a == 0.0 {
                    continue;
                }
                let mut t = 0.0;
                let mut r = 0.0;
                for &(target, p) in &a.transitions {
                    let ti = target as usize;
                    debug_assert!(ti > s || target == self.terminal);
                    if target == self.out_of_charge {
                        r += p; // risk cost on the edge, no time cost
                    } else {
                        t += p * a.duration_s;
                    }
                    t += p * time[ti];
                    r += p * risk[ti];
                }
                t_acc += p_a * t;
                r_acc += p_a * r;
            }
            time[s] = t_acc;
            risk[s] = r_acc;
        }
        (time[self.initial as usize], risk[self.initial as usize])
    }

    /// Minimum achievable depletion probability over all policies.
    pub fn min_risk(&self) -> f64 {
        self.min_risk_with_policy().0
    }

    /// Minimum achievable depletion probability and a deterministic policy
    /// (one action slot per state) attaining it. Ties go to the lowest
    /// slot.
    pub fn min_risk_with_policy(&self) -> (f64, Vec<usize>) {
        let n = self.state_count();
        let mut risk = vec![0.0f64; n];
        let mut chosen = vec![0usize; n];
        for s in (0..n).rev() {
            if s as u32 == self.terminal {
                continue;
            }
            let mut best = f64::INFINITY;
            for (slot, a) in self.state_actions[s].iter().enumerate() {
                let mut r = 0.0;
                for &(target, p) in &a.transitions {
                    if target == self.out_of_charge {
                        r += p;
                    }
                    r += p * risk[target as usize];
                }
                if r < best {
                    best = r;
                    chosen[s] = slot;
                }
            }
            risk[s] = if best.is_finite() { best } else { 0.0 };
        }
        (risk[self.initial as usize], chosen)
    }

    /// States reachable from the initial state by forward search; the
    /// model's own reachability report.
    pub fn reachable_from_initial(&self) -> usize {
        let mut seen = vec![false; self.state_count()];
        let mut stack = vec![self.initial as usize];
        seen[self.initial as usize] = true;
        let mut count = 0;
        while let Some(s) = stack.pop() {
            count += 1;
            for a in &self.state_actions[s] {
                for &(t, _) in &a.transitions {
                    if !seen[t as usize] {
                        seen[t as usize] = true;
                        stack.push(t as usize);
                    }
                }
            }
        }
        count
    }

    /// Structured text dump of the whole model, suitable for debugging and
    /// for feeding external solvers. One `state` line per state, one
    /// `action` line per pair, one indented arrow line per transition.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cmdp-model v1");
        let _ = writeln!(
            out,
            "states {} initial {} out_of_charge {} terminal {}",
            self.state_count(),
            self.initial,
            self.out_of_charge,
            self.terminal
        );
        for (i, s) in self.states.iter().enumerate() {
            match s {
                State::InTask {
                    route_idx,
                    ugv_waypoint,
                    ugv_task,
                    soc_bin,
                } => {
                    let _ = writeln!(
                        out,
                        "state {i} intask route={route_idx} ugv={ugv_waypoint} task={ugv_task} soc={soc_bin}"
                    );
                }
                State::OutOfCharge => {
                    let _ = writeln!(out, "state {i} out_of_charge");
                }
                State::Terminal => {
                    let _ = writeln!(out, "state {i} terminal");
                }
            }
            for (slot, a) in self.state_actions[i].iter().enumerate() {
                let _ = writeln!(
                    out,
                    "action {i} {slot} {} duration={} cost={} risk={}",
                    a.label_with_node(),
                    a.duration_s,
                    self.expected_cost(i, slot),
                    self.risk_coeff(i, slot)
                );
                for &(t, p) in &a.transitions {
                    let _ = writeln!(out, "  -> {t} {p}");
                }
            }
        }
        out
    }

    /// Content hash of the exported model, stamped into derived artifacts.
    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.export_text().as_bytes());
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks transition-kernel invariants: rows sum to one, targets exist,
    /// the special states behave, and the order is topological.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, actions) in self.state_actions.iter().enumerate() {
            if actions.is_empty() {
                return Err(format!("state {i} has no actions"));
            }
            for a in actions {
                let total: f64 = a.transitions.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(format!("state {i} action {} row sums to {total}", a.label()));
                }
                for &(t, p) in &a.transitions {
                    if t as usize >= self.state_count() {
                        return Err(format!("state {i} targets missing state {t}"));
                    }
                    if p < 0.0 {
                        return Err(format!("negative probability at state {i}"));
                    }
                    if t as usize <= i && t != self.terminal {
                        return Err(format!("non-topological edge {i} -> {t}"));
                    }
                }
            }
        }
        let term = &self.state_actions[self.terminal as usize];
        if term.len() != 1 || term[0].transitions != vec![(self.terminal, 1.0)] {
            return Err("terminal state must self-loop with probability 1".into());
        }
        let ob = &self.state_actions[self.out_of_charge as usize];
        if ob.len() != 1 || ob[0].transitions != vec![(self.terminal, 1.0)] {
            return Err("out-of-charge must move to terminal with probability 1".into());
        }
        Ok(())
    }
}

impl ActionData {
    fn label(&self) -> &'static str {
        self.action.label()
    }

    fn label_with_node(&self) -> String {
        match self.rendezvous_node {
            Some(n) => format!("{}@{}", self.action.label(), n),
            None => self.action.label().to_string(),
        }
    }
}

/// Successor data computed for one frontier state, before indexing.
struct Expanded {
    source: State,
    actions: Vec<(Action, f64, Vec<(State, f64)>, Option<usize>)>,
}

/// Everything the expansion step needs, shared read-only across workers.
struct BuildCtx<'a> {
    spec: &'a MissionSpec,
    dist: &'a RoadDistances,
    waypoints: &'a Waypoints,
    ugv: UgvContext<'a>,
    sampler: &'a TransitionSampler,
    last_idx: u16,
}

impl BuildCtx<'_> {
    /// Canonical route-complete state: position details no longer matter.
    fn complete_state(&self) -> State {
        State::InTask {
            route_idx: self.last_idx,
            ugv_waypoint: 0,
            ugv_task: 0,
            soc_bin: 0,
        }
    }

    fn expand(&self, s: State) -> Expanded {
        let State::InTask {
            route_idx,
            ugv_waypoint,
            ugv_task,
            soc_bin,
        } = s
        else {
            unreachable!("only in-task states are expanded");
        };
        if route_idx == self.last_idx {
            return Expanded {
                source: s,
                actions: vec![(Action::ToTerminal, 0.0, vec![(State::Terminal, 1.0)], None)],
            };
        }

        let k = route_idx as usize;
        let here = self.spec.uav_route[k];
        let next = self.spec.uav_route[k + 1];
        let leg_m = crate::geom::euclidean(here, next);
        let v = self.spec.vehicles();
        let ugv_place = self.waypoints.places[ugv_waypoint as usize];

        let mut actions = Vec::with_capacity(4);
        // An empty battery rules out forward flight; only a rendezvous (with
        // a zero-length first leg) can still save the mission.
        if soc_bin > 0 {
            for (action, speed) in [
                (Action::ForwardBestEndurance, v.v_be_ms),
                (Action::ForwardBestRange, v.v_br_ms),
            ] {
                let duration = leg_m / speed;
                let soc = self.sampler.distribution(leg_m, speed, soc_bin);
                let (end_place, end_task) = self.ugv.advance(ugv_place, ugv_task as usize, duration);
                let end_wp = self.waypoints.snap(self.spec.net.point_of(end_place)) as u32;
                let mut successors = Vec::with_capacity(soc.masses.len() + 1);
                for &(bin, mass) in &soc.masses {
                    successors.push((self.arrival_state(k + 1, end_wp, end_task, bin), mass));
                }
                if soc.failure > 0.0 {
                    successors.push((State::OutOfCharge, soc.failure));
                }
                actions.push((action, duration, merge_states(successors), None));
            }
        }

        for (action, speed) in [
            (Action::RendezvousBestEndurance, v.v_be_ms),
            (Action::RendezvousBestRange, v.v_br_ms),
        ] {
            let Ok(plan) = solve_rendezvous(
                here,
                ugv_place,
                next,
                speed,
                v.v_ugv_ms,
                &self.spec.net,
                self.dist,
            ) else {
                continue;
            };
            let first = self
                .sampler
                .distribution(plan.uav_first_leg_m, speed, soc_bin);
            let second = self.sampler.distribution(
                plan.second_leg_m,
                speed,
                self.spec.energy.battery.top_bin(),
            );
            let survive = 1.0 - first.failure;
            let fail_total = first.failure + survive * second.failure;
            // The ground vehicle sits at the rendezvous node through the
            // recharge, then resumes its patrol during the return flight.
            let (end_place, end_task) = self.ugv.advance(
                RoadPoint::Node(plan.node),
                ugv_task as usize,
                plan.second_leg_s,
            );
            let end_wp = self.waypoints.snap(self.spec.net.point_of(end_place)) as u32;
            let mut successors = Vec::with_capacity(second.masses.len() + 1);
            if survive > 0.0 {
                for &(bin, mass) in &second.masses {
                    successors.push((
                        self.arrival_state(k + 1, end_wp, end_task, bin),
                        survive * mass,
                    ));
                }
            }
            if fail_total > 0.0 {
                successors.push((State::OutOfCharge, fail_total));
            }
            actions.push((
                action,
                plan.total_detour_s(v.recharge_s),
                merge_states(successors),
                Some(plan.node),
            ));
        }

        Expanded { source: s, actions }
    }

    fn arrival_state(&self, route_idx: usize, ugv_waypoint: u32, ugv_task: usize, bin: u16) -> State {
        if route_idx as u16 == self.last_idx {
            self.complete_state()
        } else {
            State::InTask {
                route_idx: route_idx as u16,
                ugv_waypoint,
                ugv_task: ugv_task as u16,
                soc_bin: bin,
            }
        }
    }
}

/// Collapses duplicate successor states (e.g. all completion bins mapping to
/// the canonical complete state).
fn merge_states(mut successors: Vec<(State, f64)>) -> Vec<(State, f64)> {
    successors.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(State, f64)> = Vec::with_capacity(successors.len());
    for (s, p) in successors {
        match merged.last_mut() {
            Some(last) if last.0 == s => last.1 += p,
            _ => merged.push((s, p)),
        }
    }
    merged
}

/// Compiles the mission into the decision process by frontier expansion
/// from the initial state. Expansion is pure per state and runs in
/// parallel; indices are assigned afterwards in sorted state order, so the
/// result does not depend on scheduling.
pub fn build_cmdp(spec: &MissionSpec) -> Result<CmdpModel, BuildError> {
    let dist = RoadDistances::build(&spec.net);
    build_cmdp_with_distances(spec, &dist)
}

/// Same as [`build_cmdp`] for callers that already hold the distance table.
pub fn build_cmdp_with_distances(
    spec: &MissionSpec,
    dist: &RoadDistances,
) -> Result<CmdpModel, BuildError> {
    let d = spec.discretization();
    let waypoints = Waypoints::build(&spec.net, dist, &spec.ugv_route, d.ugv_waypoint_spacing_m);
    let ugv = UgvContext::new(&spec.net, dist, &spec.ugv_route, spec.vehicles().v_ugv_ms);
    if !ugv.connected() {
        return Err(BuildError::DisconnectedPatrol);
    }
    let sampler = TransitionSampler::new(spec.energy, d.energy_samples, d.seed);
    let ctx = BuildCtx {
        spec,
        dist,
        waypoints: &waypoints,
        ugv,
        sampler: &sampler,
        last_idx: (spec.uav_route.len() - 1) as u16,
    };

    let initial = State::InTask {
        route_idx: 0,
        ugv_waypoint: spec.ugv_start_node as u32,
        ugv_task: spec.ugv_first_task as u16,
        soc_bin: spec.energy.battery.initial_bin(),
    };

    let mut discovered: HashSet<State> = HashSet::new();
    discovered.insert(initial);
    discovered.insert(State::OutOfCharge);
    discovered.insert(State::Terminal);
    let mut expanded: HashMap<State, Expanded> = HashMap::new();
    let mut frontier = vec![initial];

    while !frontier.is_empty() {
        let batch = crate::par::map_slice(&frontier, |&s| ctx.expand(s));
        frontier = Vec::new();
        for exp in batch {
            for (_, _, successors, _) in &exp.actions {
                for &(s, _) in successors {
                    if discovered.insert(s) {
                        if matches!(s, State::InTask { .. }) {
                            frontier.push(s);
                        }
                    }
                }
            }
            expanded.insert(exp.source, exp);
        }
    }

    let mut states: Vec<State> = discovered.into_iter().collect();
    states.sort_unstable();
    let index: HashMap<State, u32> = states
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i as u32))
        .collect();

    let mut state_actions = Vec::with_capacity(states.len());
    let mut transition_entries = 0usize;
    for s in &states {
        let actions = match s {
            State::Terminal => vec![ActionData {
                action: Action::ToTerminal,
                duration_s: 0.0,
                transitions: vec![(index[&State::Terminal], 1.0)],
                rendezvous_node: None,
            }],
            State::OutOfCharge => vec![ActionData {
                action: Action::ToTerminal,
                duration_s: 0.0,
                transitions: vec![(index[&State::Terminal], 1.0)],
                rendezvous_node: None,
            }],
            State::InTask { .. } => {
                let exp = &expanded[s];
                exp.actions
                    .iter()
                    .map(|(action, duration, successors, node)| {
                        let mut transitions: Vec<(u32, f64)> = successors
                            .iter()
                            .map(|&(t, p)| (index[&t], p))
                            .collect();
                        transitions.sort_by_key(|&(t, _)| t);
                        ActionData {
                            action: *action,
                            duration_s: *duration,
                            transitions,
                            rendezvous_node: *node,
                        }
                    })
                    .collect()
            }
        };
        transition_entries += actions.iter().map(|a| a.transitions.len()).sum::<usize>();
        state_actions.push(actions);
    }

    let model = CmdpModel {
        initial: index[&initial],
        out_of_charge: index[&State::OutOfCharge],
        terminal: index[&State::Terminal],
        states,
        state_actions,
        stats: BuildStats {
            reachable_states: 0,
            transition_entries,
            distinct_legs_priced: 0,
            clamp_events: sampler.clamp_events(),
        },
    };
    let mut model = model;
    model.stats.reachable_states = model.reachable_from_initial();
    debug_assert!(model.check_invariants().is_ok());

    if model.min_risk() >= 1.0 - 1e-12 {
        return Err(BuildError::InfeasibleMission);
    }
    Ok(model)
}

pub mod synthetic {
    //! Seeded synthetic models used by cross-oracle tests and benches:
    //! layered transient processes with forward-only transitions.

    use super::*;
    use rand::Rng;

    /// A random transient model with `n` decision layers and two actions
    /// per layer. Transitions jump 1..3 layers ahead; a tunable share of
    /// each row leaks into out-of-charge.
    pub fn random_transient_model(seed: u64, n: usize, risk_scale: f64) -> CmdpModel {
        let mut rng = crate::streams::stream(seed, 1717, n as u64, 0);
        let mut states: Vec<State> = (0..n)
            .map(|i| State::InTask {
                route_idx: i as u16,
                ugv_waypoint: 0,
                ugv_task: 0,
                soc_bin: 0,
            })
            .collect();
        states.push(State::OutOfCharge);
        states.push(State::Terminal);
        let ob = n as u32;
        let term = n as u32 + 1;

        let mut state_actions = Vec::with_capacity(n + 2);
        for i in 0..n {
            if i == n - 1 {
                state_actions.push(vec![ActionData {
                    action: Action::ToTerminal,
                    duration_s: 0.0,
                    transitions: vec![(term, 1.0)],
                    rendezvous_node: None,
                }]);
                continue;
            }
            let mut actions = Vec::new();
            for action in [Action::ForwardBestEndurance, Action::ForwardBestRange] {
                let fail: f64 = rng.random_range(0.0..risk_scale);
                let targets = 1 + rng.random_range(0..2usize);
                let mut weights: Vec<f64> = (0..targets).map(|_| rng.random_range(0.1..1.0)).collect();
                let wsum: f64 = weights.iter().sum();
                for w in &mut weights {
                    *w *= (1.0 - fail) / wsum;
                }
                let mut transitions: Vec<(u32, f64)> = weights
                    .iter()
                    .enumerate()
                    .map(|(j, &w)| {
                        let jump = 1 + (j + rng.random_range(0..2usize)) % 3;
                        (((i + jump).min(n - 1)) as u32, w)
                    })
                    .collect();
                if fail > 0.0 {
                    transitions.push((ob, fail));
                }
                transitions.sort_by_key(|&(t, _)| t);
                // Merge duplicate targets.
                let mut merged: Vec<(u32, f64)> = Vec::new();
                for (t, p) in transitions {
                    match merged.last_mut() {
                        Some(last) if last.0 == t => last.1 += p,
                        _ => merged.push((t, p)),
                    }
                }
                actions.push(ActionData {
                    action,
                    duration_s: rng.random_range(1.0..100.0),
                    transitions: merged,
                    rendezvous_node: None,
                });
            }
            state_actions.push(actions);
        }
        state_actions.push(vec![ActionData {
            action: Action::ToTerminal,
            duration_s: 0.0,
            transitions: vec![(term, 1.0)],
            rendezvous_node: None,
        }]);
        state_actions.push(vec![ActionData {
            action: Action::ToTerminal,
            duration_s: 0.0,
            transitions: vec![(term, 1.0)],
            rendezvous_node: None,
        }]);

        let mut model = CmdpModel {
            states,
            state_actions,
            initial: 0,
            out_of_charge: ob,
            terminal: term,
            stats: BuildStats::default(),
        };
        model.stats.reachable_states = model.reachable_from_initial();
        model.check_invariants().expect("synthetic model is well formed");
        model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{BatterySpec, StochasticParams};
    use crate::mission::{
        EnergySection, MissionFile, RiskSection, RoadSection, UavSection, UgvSection,
    };

    /// Tiny two-point mission with deterministic energy: a 1400 m leg flown
    /// from a full 240 kJ battery.
    fn degenerate_mission() -> MissionSpec {
        let file = MissionFile {
            schema: 1,
            vehicles: Default::default(),
            battery: BatterySpec::default(),
            energy: EnergySection::default(),
            stochastic: StochasticParams::degenerate(2.3),
            discretization: crate::mission::Discretization {
                ugv_waypoint_spacing_m: 500.0,
                energy_samples: 64,
                seed: 0,
            },
            risk: RiskSection { delta: 0.1 },
            road: RoadSection {
                nodes: vec![(0, 0.0, 0.0), (1, 700.0, 0.0)],
                edges: vec![(0, 1, 700.0)],
            },
            uav: UavSection {
                route: vec![(0.0, 100.0), (1400.0, 100.0)],
            },
            ugv: UgvSection {
                route: vec![0, 1],
                start_node: None,
            },
        };
        MissionSpec::from_file(file).unwrap()
    }

    #[test]
    fn degenerate_mission_has_single_decision_state() {
        let spec = degenerate_mission();
        let model = build_cmdp(&spec).unwrap();
        model.check_invariants().unwrap();

        // Decision states: exactly the initial one (the rest are the
        // collapsed complete state and the two specials).
        let decision_states: Vec<usize> = (0..model.state_count())
            .filter(|&i| model.state_actions[i].len() > 1)
            .collect();
        assert_eq!(decision_states, vec![model.initial as usize]);

        let actions = &model.state_actions[model.initial as usize];
        assert_eq!(actions.len(), 4);
        // Forward actions: deterministic transition, cost = leg time.
        let v = spec.vehicles();
        for (slot, speed) in [(0, v.v_be_ms), (1, v.v_br_ms)] {
            assert_eq!(actions[slot].transitions.len(), 1);
            assert_eq!(actions[slot].transitions[0].1, 1.0);
            assert!((actions[slot].duration_s - 1400.0 / speed).abs() < 1e-12);
            assert_eq!(model.risk_coeff(model.initial as usize, slot), 0.0);
        }
    }

    #[test]
    fn rows_sum_to_one_on_stochastic_mission() {
        let mut spec = degenerate_mission();
        spec.file.stochastic = StochasticParams::default();
        spec.energy.stochastic = StochasticParams::default();
        let model = build_cmdp(&spec).unwrap();
        for (i, actions) in model.state_actions.iter().enumerate() {
            for a in actions {
                let total: f64 = a.transitions.iter().map(|&(_, p)| p).sum();
                assert!((total - 1.0).abs() <= 1e-9, "state {i} {}", a.label());
            }
        }
    }

    #[test]
    fn reachable_count_matches_independent_bfs() {
        let mut spec = degenerate_mission();
        spec.file.stochastic = StochasticParams::default();
        spec.energy.stochastic = StochasticParams::default();
        let model = build_cmdp(&spec).unwrap();

        // Independent breadth-first enumeration over the transition lists.
        let mut seen = HashSet::new();
        let mut queue = std::collections::VecDeque::new();
        seen.insert(model.initial);
        queue.push_back(model.initial);
        while let Some(s) = queue.pop_front() {
            for a in &model.state_actions[s as usize] {
                for &(t, _) in &a.transitions {
                    if seen.insert(t) {
                        queue.push_back(t);
                    }
                }
            }
        }
        assert_eq!(seen.len(), model.stats.reachable_states);
        // Closure: at most the out-of-charge state (always carried) can be
        // absent from the reachable set.
        assert!(model.state_count() - seen.len() <= 1);
        for i in 0..model.state_count() {
            if !seen.contains(&(i as u32)) {
                assert_eq!(model.states[i], State::OutOfCharge);
            }
        }
    }

    #[test]
    fn ugv_fields_deterministic_per_action() {
        let mut spec = degenerate_mission();
        spec.file.stochastic = StochasticParams::default();
        spec.energy.stochastic = StochasticParams::default();
        let model = build_cmdp(&spec).unwrap();
        for (i, actions) in model.state_actions.iter().enumerate() {
            for a in actions {
                let mut ugv_fields: Option<(u32, u16)> = None;
                for &(t, _) in &a.transitions {
                    if let State::InTask {
                        route_idx,
                        ugv_waypoint,
                        ugv_task,
                        ..
                    } = model.states[t as usize]
                    {
                        if route_idx == (spec.uav_route.len() - 1) as u16 {
                            continue; // collapsed complete state
                        }
                        match ugv_fields {
                            None => ugv_fields = Some((ugv_waypoint, ugv_task)),
                            Some(f) => assert_eq!(
                                f,
                                (ugv_waypoint, ugv_task),
                                "state {i} action {} splits ugv fields",
                                a.label()
                            ),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn risk_cost_supported_only_on_depletion_edges() {
        let mut spec = degenerate_mission();
        // Stretch the leg to the edge of full-battery range so failure mass
        // appears without making the mission hopeless.
        spec.uav_route[1] = crate::geom::Point::new(21_000.0, 100.0);
        spec.file.stochastic = StochasticParams::default();
        spec.energy.stochastic = StochasticParams::default();
        let model = build_cmdp(&spec).unwrap();
        let mut total_risk = 0.0;
        for i in 0..model.state_count() {
            for slot in 0..model.state_actions[i].len() {
                total_risk += model.risk_coeff(i, slot);
            }
        }
        assert!(total_risk > 0.0);
        // And out-of-charge itself carries none.
        assert_eq!(model.risk_coeff(model.out_of_charge as usize, 0), 0.0);
    }

    #[test]
    fn empty_bin_exposes_only_rendezvous() {
        let mut spec = degenerate_mission();
        spec.file.stochastic = StochasticParams::default();
        spec.energy.stochastic = StochasticParams::default();
        let model = build_cmdp(&spec).unwrap();
        for (i, s) in model.states.iter().enumerate() {
            if let State::InTask {
                route_idx, soc_bin, ..
            } = s
            {
                if *soc_bin == 0 && *route_idx < (spec.uav_route.len() - 1) as u16 {
                    for a in &model.state_actions[i] {
                        assert!(matches!(
                            a.action,
                            Action::RendezvousBestEndurance | Action::RendezvousBestRange
                        ));
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_failure_in_soc() {
        let mut spec = degenerate_mission();
        spec.file.stochastic = StochasticParams::default();
        spec.energy.stochastic = StochasticParams::default();
        // A longer leg produces a spread of arrival bins at level 1.
        spec.uav_route[1] = crate::geom::Point::new(8000.0, 100.0);
        spec.uav_route.push(crate::geom::Point::new(16000.0, 100.0));
        spec.file.uav.route.push((16000.0, 100.0));
        let model = build_cmdp(&spec).unwrap();

        // Group decision states by everything except the SOC bin.
        let mut groups: HashMap<(u16, u32, u16, usize), Vec<(u16, f64)>> = HashMap::new();
        for (i, s) in model.states.iter().enumerate() {
            if let State::InTask {
                route_idx,
                ugv_waypoint,
                ugv_task,
                soc_bin,
            } = *s
            {
                for (slot, _) in model.state_actions[i].iter().enumerate() {
                    groups
                        .entry((route_idx, ugv_waypoint, ugv_task, slot))
                        .or_default()
                        .push((soc_bin, model.risk_coeff(i, slot)));
                }
            }
        }
        let mut checked = 0;
        for rows in groups.values_mut() {
            if rows.len() < 2 {
                continue;
            }
            rows.sort_by_key(|&(bin, _)| bin);
            for w in rows.windows(2) {
                assert!(w[1].1 <= w[0].1 + 1e-12, "failure mass grew with SOC");
                checked += 1;
            }
        }
        assert!(checked > 0, "test mission produced no comparable pairs");
    }

    #[test]
    fn infeasible_when_leg_exceeds_range() {
        let mut spec = degenerate_mission();
        // 100 km leg with the road network stuck near the start: no action
        // can ever deliver the aircraft.
        spec.uav_route[1] = crate::geom::Point::new(100_000.0, 100.0);
        assert!(matches!(
            build_cmdp(&spec),
            Err(BuildError::InfeasibleMission)
        ));
    }

    #[test]
    fn policy_evaluation_on_handmade_models() {
        // Single decision state, forward failure mass 0.2.
        let states = vec![
            State::InTask {
                route_idx: 0,
                ugv_waypoint: 0,
                ugv_task: 0,
                soc_bin: 0,
            },
            State::InTask {
                route_idx: 1,
                ugv_waypoint: 0,
                ugv_task: 0,
                soc_bin: 0,
            },
            State::OutOfCharge,
            State::Terminal,
        ];
        let state_actions = vec![
            vec![ActionData {
                action: Action::ForwardBestRange,
                duration_s: 50.0,
                transitions: vec![(1, 0.8), (2, 0.2)],
                rendezvous_node: None,
            }],
            vec![ActionData {
                action: Action::ToTerminal,
                duration_s: 0.0,
                transitions: vec![(3, 1.0)],
                rendezvous_node: None,
            }],
            vec![ActionData {
                action: Action::ToTerminal,
                duration_s: 0.0,
                transitions: vec![(3, 1.0)],
                rendezvous_node: None,
            }],
            vec![ActionData {
                action: Action::ToTerminal,
                duration_s: 0.0,
                transitions: vec![(3, 1.0)],
                rendezvous_node: None,
            }],
        ];
        let model = CmdpModel {
            states,
            state_actions,
            initial: 0,
            out_of_charge: 2,
            terminal: 3,
            stats: BuildStats::default(),
        };
        model.check_invariants().unwrap();
        let probs = vec![vec![1.0], vec![1.0], vec![1.0], vec![1.0]];
        let (time, risk) = model.evaluate_policy(&probs);
        assert!((risk - 0.2).abs() < 1e-12);
        // Only the surviving branch accrues the 50 s.
        assert!((time - 40.0).abs() < 1e-12);
        assert!((model.min_risk() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_failure_policy_has_zero_risk() {
        let spec = degenerate_mission();
        let model = build_cmdp(&spec).unwrap();
        let probs: Vec<Vec<f64>> = model
            .state_actions
            .iter()
            .map(|actions| {
                let mut p = vec![0.0; actions.len()];
                p[0] = 1.0;
                p
            })
            .collect();
        let (_, risk) = model.evaluate_policy(&probs);
        assert_eq!(risk, 0.0);
    }

    #[test]
    fn risk_matches_monte_carlo_on_random_model() {
        use rand::Rng;
        let model = synthetic::random_transient_model(5, 10, 0.3);
        // Random but fixed policy.
        let mut rng = crate::streams::stream(99, 1234, 0, 0);
        let probs: Vec<Vec<f64>> = model
            .state_actions
            .iter()
            .map(|actions| {
                let raw: Vec<f64> = actions.iter().map(|_| rng.random_range(0.1..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / sum).collect()
            })
            .collect();
        let (_, exact_risk) = model.evaluate_policy(&probs);

        // Monte-Carlo rollouts on the discrete kernel.
        let trials = 100_000u32;
        let mut failures = 0u32;
        for t in 0..trials {
            let mut rng = crate::streams::stream(7, 4321, t as u64, 0);
            let mut s = model.initial;
            loop {
                if s == model.terminal {
                    break;
                }
                if s == model.out_of_charge {
                    failures += 1;
                    break;
                }
                let slot = {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut chosen = probs[s as usize].len() - 1;
                    for (i, &p) in probs[s as usize].iter().enumerate() {
                        acc += p;
                        if u < acc {
                            chosen = i;
                            break;
                        }
                    }
                    chosen
                };
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let row = &model.state_actions[s as usize][slot].transitions;
                let mut next = row.last().unwrap().0;
                for &(target, p) in row {
                    acc += p;
                    if u < acc {
                        next = target;
                        break;
                    }
                }
                s = next;
            }
        }
        let fr = failures as f64 / trials as f64;
        let sigma = (exact_risk * (1.0 - exact_risk) / trials as f64).sqrt();
        assert!(
            (fr - exact_risk).abs() <= 3.0 * sigma,
            "MC {fr} vs exact {exact_risk} (3 sigma = {})",
            3.0 * sigma
        );
    }
}
