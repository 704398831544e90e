//! Occupancy-measure linear program over the compiled decision process,
//! policy extraction from its solution, and a value-iteration oracle for
//! the unconstrained case.
//!
//! One variable per (state, action) pair over non-terminal states. The
//! objective is expected total time; one flow-conservation equality per
//! non-terminal state ties occupancies to the transition kernel, with the
//! initial state carrying the unit source; a single inequality caps the
//! expected cumulative risk cost at the tolerance.

pub mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmdp::{Action, CmdpModel, State};

pub use simplex::{LpSolution, SolveStatus, SparseLp, SparseRow};

#[derive(Debug, Error)]
pub enum LpError {
    #[error(
        "risk tolerance {delta} is infeasible for this mission; the minimum \
         achievable risk is about {min_feasible_risk:.6}"
    )]
    Infeasible { delta: f64, min_feasible_risk: f64 },
    #[error("LP is unbounded; the model is not transient (internal error)")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("numerical failure in the simplex basis factorization")]
    Numerical,
    #[error("value iteration failed to converge; the model is not transient")]
    NonConvergence,
}

/// Map between LP variables and (state, action-slot) pairs.
#[derive(Debug, Clone)]
pub struct VarMap {
    /// Variable index of `(state, slot)`, laid out state-major in state
    /// order; terminal has no variables.
    offsets: Vec<usize>,
    pairs: Vec<(u32, u16)>,
}

impl VarMap {
    pub fn new(model: &CmdpModel) -> Self {
        let mut offsets = Vec::with_capacity(model.state_count() + 1);
        let mut pairs = Vec::new();
        let mut next = 0usize;
        for (i, actions) in model.state_actions.iter().enumerate() {
            offsets.push(next);
            if i as u32 != model.terminal {
                for slot in 0..actions.len() {
                    pairs.push((i as u32, slot as u16));
                }
                next += actions.len();
            }
        }
        offsets.push(next);
        VarMap { offsets, pairs }
    }

    pub fn num_vars(&self) -> usize {
        self.pairs.len()
    }

    pub fn var_of(&self, state: usize, slot: usize) -> Option<usize> {
        let base = self.offsets[state];
        let width = self.offsets[state + 1] - base;
        (slot < width).then_some(base + slot)
    }

    pub fn pair_of(&self, var: usize) -> (u32, u16) {
        self.pairs[var]
    }

    /// Occupancy values of one state's actions.
    pub fn state_slice<'a>(&self, state: usize, y: &'a [f64]) -> &'a [f64] {
        &y[self.offsets[state]..self.offsets[state + 1]]
    }
}

/// Builds the occupancy LP at risk tolerance `delta`.
pub fn build_lp(model: &CmdpModel, delta: f64) -> (SparseLp, VarMap) {
    assert!((0.0..=1.0).contains(&delta), "delta must lie in [0, 1]");
    let vars = VarMap::new(model);
    let n = vars.num_vars();

    let mut objective = vec![0.0f64; n];
    for v in 0..n {
        let (s, a) = vars.pair_of(v);
        objective[v] = model.expected_cost(s as usize, a as usize);
    }

    // Inflow lists per target state, merged from every transition.
    let mut inflow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.state_count()];
    for v in 0..n {
        let (s, a) = vars.pair_of(v);
        for &(target, p) in &model.state_actions[s as usize][a as usize].transitions {
            if target != model.terminal {
                inflow[target as usize].push((v, p));
            }
        }
    }

    let mut eq_rows = Vec::with_capacity(model.state_count() - 1);
    for state in 0..model.state_count() {
        if state as u32 == model.terminal {
            continue;
        }
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for slot in 0..model.state_actions[state].len() {
            entries.push((vars.var_of(state, slot).expect("non-terminal"), 1.0));
        }
        for &(v, p) in &inflow[state] {
            // A variable of this same state cannot reappear: the process has
            // no self-transitions outside the terminal state.
            entries.push((v, -p));
        }
        let rhs = if state as u32 == model.initial { 1.0 } else { 0.0 };
        eq_rows.push(SparseRow::new(entries, rhs));
    }

    let mut risk_entries: Vec<(usize, f64)> = Vec::new();
    for v in 0..n {
        let (s, a) = vars.pair_of(v);
        let coeff = model.risk_coeff(s as usize, a as usize);
        if coeff > 0.0 {
            risk_entries.push((v, coeff));
        }
    }
    let le_rows = vec![SparseRow::new(risk_entries, delta)];

    (
        SparseLp {
            num_vars: n,
            objective,
            eq_rows,
            le_rows,
        },
        vars,
    )
}

/// A solved occupancy measure with its audit numbers.
#[derive(Debug, Clone)]
pub struct OccupancySolution {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    /// Expected mission time, seconds.
    pub objective_s: f64,
    /// Expected cumulative risk cost of the measure.
    pub risk_value: f64,
    /// Worst flow-conservation violation across states.
    pub flow_residual: f64,
    pub iterations: usize,
}

/// Solves the occupancy LP for the model at tolerance `delta`.
///
/// Infeasibility is surfaced together with the minimum achievable risk
/// (from the auxiliary LP minimizing the risk cost), so a too-strict
/// tolerance becomes an actionable diagnostic instead of a bare failure.
pub fn solve_occupancy(model: &CmdpModel, delta: f64) -> Result<(OccupancySolution, VarMap), LpError> {
    let (lp, vars) = build_lp(model, delta);

    // Crash with the minimum-risk deterministic policy: its occupancy
    // vector is a feasible basic point whenever the LP is feasible at all,
    // so phase one is skipped entirely. The risk slack fills the final
    // basis position.
    let (min_risk, crash_slots) = model.min_risk_with_policy();
    if min_risk > delta + 1e-9 {
        return Err(LpError::Infeasible {
            delta,
            min_feasible_risk: min_risk,
        });
    }
    let mut basis = Vec::with_capacity(lp.eq_rows.len() + 1);
    for state in 0..model.state_count() {
        if state as u32 == model.terminal {
            continue;
        }
        basis.push(
            vars.var_of(state, crash_slots[state])
                .expect("non-terminal states have variables"),
        );
    }
    basis.push(lp.num_vars); // the risk row's slack

    let sol = simplex::solve_with_basis(&lp, &basis);
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(LpError::Infeasible {
                delta,
                min_feasible_risk: min_feasible_risk(model),
            });
        }
        SolveStatus::Unbounded => return Err(LpError::Unbounded),
        SolveStatus::IterationLimit => return Err(LpError::IterationLimit),
        SolveStatus::Numerical => return Err(LpError::Numerical),
    }

    let risk_value = risk_of_measure(model, &vars, &sol.x);
    let flow_residual = flow_residual(&lp, &sol.x);
    Ok((
        OccupancySolution {
            status: sol.status,
            y: sol.x,
            objective_s: sol.objective,
            risk_value,
            flow_residual,
            iterations: sol.iterations,
        },
        vars,
    ))
}

/// Expected cumulative risk cost of an occupancy measure.
pub fn risk_of_measure(model: &CmdpModel, vars: &VarMap, y: &[f64]) -> f64 {
    (0..vars.num_vars())
        .map(|v| {
            let (s, a) = vars.pair_of(v);
            y[v] * model.risk_coeff(s as usize, a as usize)
        })
        .sum()
}

/// Worst violation of the flow-conservation equalities.
pub fn flow_residual(lp: &SparseLp, y: &[f64]) -> f64 {
    lp.eq_rows
        .iter()
        .map(|row| {
            let lhs: f64 = row.entries.iter().map(|&(c, v)| v * y[c]).sum();
            (lhs - row.rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Minimum achievable risk, via the auxiliary LP that minimizes the risk
/// cost with the same flow constraints and no risk bound.
pub fn min_feasible_risk(model: &CmdpModel) -> f64 {
    let (mut lp, vars) = build_lp(model, 1.0);
    lp.le_rows.clear();
    for v in 0..vars.num_vars() {
        let (s, a) = vars.pair_of(v);
        lp.objective[v] = model.risk_coeff(s as usize, a as usize);
    }
    let sol = simplex::solve(&lp);
    match sol.status {
        SolveStatus::Optimal => sol.objective.max(0.0),
        // The flow system of a transient model is always feasible; fall back
        // to the dynamic-programming bound if the solve degrades.
        _ => model.min_risk(),
    }
}

/// How a state's action probabilities were determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicySource {
    /// Normalized occupancies.
    Occupancy,
    /// State unreachable under the optimal measure; deterministic fallback
    /// to the cheapest immediate action.
    Fallback,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyEntry {
    /// Mirrors the model's state encoding.
    pub route_idx: u16,
    pub ugv_waypoint: u32,
    pub ugv_task: u16,
    pub soc_bin: u16,
    pub actions: Vec<Action>,
    pub probs: Vec<f64>,
    pub source: PolicySource,
}

/// The stationary randomized policy with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Policy {
    pub tool_version: String,
    pub mission_hash: String,
    pub model_hash: String,
    pub delta: f64,
    pub seed: u64,
    pub lp_objective_s: f64,
    pub risk_value: f64,
    /// One entry per in-task model state, in model order.
    pub entries: Vec<PolicyEntry>,
}

impl Policy {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Aligns the policy with a model: per-state probability rows. States
    /// the policy does not know get `None`.
    pub fn probs_for(&self, model: &CmdpModel) -> Vec<Option<Vec<f64>>> {
        use std::collections::HashMap;
        let by_key: HashMap<(u16, u32, u16, u16), &PolicyEntry> = self
            .entries
            .iter()
            .map(|e| ((e.route_idx, e.ugv_waypoint, e.ugv_task, e.soc_bin), e))
            .collect();
        model
            .states
            .iter()
            .map(|s| match s {
                State::InTask {
                    route_idx,
                    ugv_waypoint,
                    ugv_task,
                    soc_bin,
                } => by_key
                    .get(&(*route_idx, *ugv_waypoint, *ugv_task, *soc_bin))
                    .map(|e| e.probs.clone()),
                _ => Some(vec![1.0]),
            })
            .collect()
    }

    /// Number of states where the policy genuinely randomizes.
    pub fn randomized_states(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.probs.iter().filter(|&&p| p > 1e-9).count() > 1)
            .count()
    }
}

/// Occupancy below which a state counts as unreachable under the measure.
pub const OCCUPANCY_FLOOR: f64 = 1e-12;

/// Normalizes occupancies into action probabilities. Zero-occupancy states
/// fall back to the action with the smallest expected immediate cost (ties
/// to the lowest action index), keeping runs reproducible.
pub fn extract_policy(
    model: &CmdpModel,
    vars: &VarMap,
    sol: &OccupancySolution,
    provenance: PolicyProvenance<'_>,
) -> Policy {
    let mut entries = Vec::new();
    for (i, s) in model.states.iter().enumerate() {
        let State::InTask {
            route_idx,
            ugv_waypoint,
            ugv_task,
            soc_bin,
        } = *s
        else {
            continue;
        };
        let y = vars.state_slice(i, &sol.y);
        let total: f64 = y.iter().sum();
        let n_actions = model.state_actions[i].len();
        let (probs, source) = if total > OCCUPANCY_FLOOR {
            (y.iter().map(|&v| (v / total).max(0.0)).collect(), PolicySource::Occupancy)
        } else {
            let mut best = 0usize;
            let mut best_cost = f64::INFINITY;
            for slot in 0..n_actions {
                let cost = model.expected_cost(i, slot);
                if cost < best_cost {
                    best_cost = cost;
                    best = slot;
                }
            }
            let mut probs = vec![0.0; n_actions];
            probs[best] = 1.0;
            (probs, PolicySource::Fallback)
        };
        entries.push(PolicyEntry {
            route_idx,
            ugv_waypoint,
            ugv_task,
            soc_bin,
            actions: model.state_actions[i].iter().map(|a| a.action).collect(),
            probs,
            source,
        });
    }
    Policy {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        mission_hash: provenance.mission_hash.to_string(),
        model_hash: provenance.model_hash.to_string(),
        delta: provenance.delta,
        seed: provenance.seed,
        lp_objective_s: sol.objective_s,
        risk_value: sol.risk_value,
        entries,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PolicyProvenance<'a> {
    pub mission_hash: &'a str,
    pub model_hash: &'a str,
    pub delta: f64,
    pub seed: u64,
}

/// Bellman-optimal expected time-to-terminal and the greedy deterministic
/// policy, the cross-oracle for the unconstrained LP.
pub fn value_iteration_unconstrained(
    model: &CmdpModel,
) -> Result<(Vec<f64>, Vec<usize>), LpError> {
    let n = model.state_count();
    let mut values = vec![0.0f64; n];
    let mut chosen = vec![0usize; n];
    let max_sweeps = 10_000;
    for _ in 0..max_sweeps {
        let mut delta: f64 = 0.0;
        for s in (0..n).rev() {
            if s as u32 == model.terminal {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_slot = 0usize;
            for (slot, a) in model.state_actions[s].iter().enumerate() {
                let mut q = model.expected_cost(s, slot);
                for &(target, p) in &a.transitions {
                    if target != model.terminal {
                        q += p * values[target as usize];
                    }
                }
                if q < best - 1e-15 {
                    best = q;
                    best_slot = slot;
                }
            }
            delta = delta.max((best - values[s]).abs());
            values[s] = best;
            chosen[s] = best_slot;
        }
        if delta < 1e-9 {
            return Ok((values, chosen));
        }
    }
    Err(LpError::NonConvergence)
}

/// Writes the LP in the widely read CPLEX text format so results can be
/// cross-checked against external solvers.
pub fn export_lp_text(lp: &SparseLp, vars: Option<&VarMap>) -> String {
    use std::fmt::Write as _;
    let name = |v: usize| match vars {
        Some(map) => {
            let (s, a) = map.pair_of(v);
            format!("y_s{s}_a{a}")
        }
        None => format!("x{v}"),
    };
    let mut out = String::new();
    out.push_str("\\ occupancy-measure LP export\nMinimize\n obj:");
    let mut line = String::new();
    let mut first = true;
    for (v, &c) in lp.objective.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let term = if first {
            format!(" {c} {}", name(v))
        } else if c >= 0.0 {
            format!(" + {c} {}", name(v))
        } else {
            format!(" - {} {}", -c, name(v))
        };
        first = false;
        line.push_str(&term);
        if line.len() > 200 {
            let _ = writeln!(out, "{line}");
            line.clear();
        }
    }
    if first {
        line.push_str(" 0 x_zero");
    }
    let _ = writeln!(out, "{line}");
    out.push_str("Subject To\n");
    let write_row = |out: &mut String, label: String, row: &SparseRow, op: &str| {
        let mut line = format!(" {label}:");
        if row.entries.is_empty() {
            line.push_str(" 0 x_zero");
        }
        for (i, &(col, val)) in row.entries.iter().enumerate() {
            let term = if i == 0 {
                format!(" {val} {}", name(col))
            } else if val >= 0.0 {
                format!(" + {val} {}", name(col))
            } else {
                format!(" - {} {}", -val, name(col))
            };
            line.push_str(&term);
            if line.len() > 200 {
                let _ = writeln!(out, "{line}");
                line.clear();
            }
        }
        let _ = writeln!(out, "{line} {op} {}", row.rhs);
    };
    for (i, row) in lp.eq_rows.iter().enumerate() {
        write_row(&mut out, format!("flow_{i}"), row, "=");
    }
    for (i, row) in lp.le_rows.iter().enumerate() {
        write_row(&mut out, format!("risk_{i}"), row, "<=");
    }
    out.push_str("Bounds\n");
    for v in 0..lp.num_vars {
        let _ = writeln!(out, " 0 <= {}", name(v));
    }
    if lp.objective.iter().all(|&c| c == 0.0) || lp.eq_rows.iter().any(|r| r.entries.is_empty()) {
        out.push_str(" x_zero = 0\n");
    }
    out.push_str("End\n");
    out
}
