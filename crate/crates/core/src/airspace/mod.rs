//! Aircraft MDPs and interval-based congestion coupling built from flight
//! plans on a waypoint graph.
//!
//! A state is a `(waypoint, flight level)` pair; levels run from 0 to 450 in
//! steps of 50. From `(w, f)` an aircraft must move to a neighbor
//! `(w', f')` with `w'` adjacent to `w` and `|f' - f| <= 50`. Action
//! `a_{w',f'}` reaches its target with probability `β`; the remaining mass is
//! spread uniformly over the other neighbors. Stage costs penalize distance
//! from the planned location, level deviation and tardiness past the planned
//! landing time.

mod scenario;
mod synthetic;

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::congestion::{CouplingMap, GameInstance};
use crate::error::{Error, Result};
use crate::mdp::{HorizonMdp, Kernel};
use crate::tensor::{Shape, StageTensor};

pub use scenario::{parse_flight_plans, parse_scenario, scenario_diagnostics, Scenario};
pub use synthetic::{center_waypoint, synthetic_crossing};

pub const LEVEL_STEP: u32 = 50;
pub const MAX_LEVEL: u32 = 450;
pub const NUM_LEVELS: usize = (MAX_LEVEL / LEVEL_STEP) as usize + 1;

/// Cost carried by masked action slots and the sink state.
pub const MASKED_COST: f64 = 1e9;

/// Undirected waypoint graph without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct AirspaceGraph {
    waypoints: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
}

impl AirspaceGraph {
    pub fn new(waypoints: Vec<String>, edges: &[(String, String)]) -> Result<Self> {
        let mut index = HashMap::with_capacity(waypoints.len());
        for (i, w) in waypoints.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidModel(format!("duplicate waypoint `{w}`")));
            }
        }
        let mut adjacency = vec![Vec::new(); waypoints.len()];
        for (a, b) in edges {
            let lookup = |w: &String| {
                index
                    .get(w)
                    .copied()
                    .ok_or_else(|| Error::InvalidModel(format!("edge references unknown waypoint `{w}`")))
            };
            let (ia, ib) = (lookup(a)?, lookup(b)?);
            if ia == ib {
                return Err(Error::InvalidModel(format!("self-loop at waypoint `{a}`")));
            }
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        Ok(Self {
            waypoints,
            index,
            adjacency,
        })
    }

    pub fn num_waypoints(&self) -> usize {
        self.waypoints.len()
    }

    pub fn name(&self, w: usize) -> &str {
        &self.waypoints[w]
    }

    pub fn waypoints(&self) -> &[String] {
        &self.waypoints
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Sorted neighbors of `w`.
    pub fn neighbors(&self, w: usize) -> &[usize] {
        &self.adjacency[w]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Each undirected edge once, as `(low, high)` indices in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, nbrs) in self.adjacency.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Hop distances from `source`; `None` for unreachable waypoints.
    pub fn hops_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.waypoints.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(w) = queue.pop_front() {
            let d = dist[w].unwrap_or(0);
            for &v in &self.adjacency[w] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

pub fn valid_level(level: u32) -> bool {
    level <= MAX_LEVEL && level.is_multiple_of(LEVEL_STEP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub timestamp: i64,
    pub waypoint: usize,
    pub level: u32,
}

/// A validated flight plan; waypoints are indices into the scenario graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightPlan {
    pub flight_id: String,
    pub plan: Vec<PlanEntry>,
    pub landing_time: i64,
}

impl FlightPlan {
    /// Checks every plan invariant against `graph`, reporting each breach.
    pub fn violations(&self, graph: &AirspaceGraph) -> Vec<Error> {
        let fail = |message: String| Error::Validation {
            flight: self.flight_id.clone(),
            message,
        };
        let mut out = Vec::new();
        if self.plan.is_empty() {
            out.push(fail("plan is empty".into()));
            return out;
        }
        for (i, e) in self.plan.iter().enumerate() {
            if e.waypoint >= graph.num_waypoints() {
                out.push(fail(format!("entry {i}: unknown waypoint index {}", e.waypoint)));
            }
            if !valid_level(e.level) {
                out.push(fail(format!("entry {i}: invalid flight level {}", e.level)));
            }
        }
        for (i, pair) in self.plan.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            if b.timestamp <= a.timestamp {
                out.push(fail(format!(
                    "entry {}: timestamp {} not after {}",
                    i + 1,
                    b.timestamp,
                    a.timestamp
                )));
            }
            if a.waypoint < graph.num_waypoints()
                && b.waypoint < graph.num_waypoints()
                && !graph.adjacent(a.waypoint, b.waypoint)
            {
                out.push(fail(format!(
                    "entry {}: waypoint `{}` is not adjacent to `{}`",
                    i + 1,
                    graph.name(b.waypoint),
                    graph.name(a.waypoint)
                )));
            }
            if a.level.abs_diff(b.level) > LEVEL_STEP {
                out.push(fail(format!(
                    "entry {}: level jump {} -> {} exceeds {LEVEL_STEP}",
                    i + 1,
                    a.level,
                    b.level
                )));
            }
        }
        let last = self.plan[self.plan.len() - 1];
        if self.landing_time < last.timestamp {
            out.push(fail(format!(
                "landing time {} precedes last plan timestamp {}",
                self.landing_time, last.timestamp
            )));
        }
        out
    }

    /// `(w_T, f_T)`: the last planned waypoint and level.
    pub fn landing_state(&self) -> (usize, u32) {
        let last = self.plan[self.plan.len() - 1];
        (last.waypoint, last.level)
    }

    /// Planned `(waypoint, level)` at a stage timestamp; the landing state for
    /// timestamps outside the plan.
    pub fn planned_at(&self, timestamp: i64) -> (usize, u32) {
        self.plan
            .iter()
            .find(|e| e.timestamp == timestamp)
            .map(|e| (e.waypoint, e.level))
            .unwrap_or_else(|| self.landing_state())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Spacing of the post-landing stages, seconds.
    pub dt_int: i64,
    /// Number of post-landing stages `B`.
    pub extra_stages: usize,
    pub beta: f64,
    pub alpha_f: f64,
    /// Tardiness cost per second past the planned landing time.
    pub c_tardy: f64,
    /// Congestion interval length, seconds.
    pub dt_cong: i64,
    pub risk_weight: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            dt_int: 300,
            extra_stages: 3,
            beta: 0.95,
            alpha_f: 10.0,
            c_tardy: 2.0,
            dt_cong: 19,
            risk_weight: 10.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.dt_int <= 0 {
            return bad(format!("dt_int must be positive, got {}", self.dt_int));
        }
        if self.dt_cong <= 0 {
            return bad(format!("dt_cong must be positive, got {}", self.dt_cong));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        for (name, v) in [
            ("alpha_f", self.alpha_f),
            ("c_tardy", self.c_tardy),
            ("risk_weight", self.risk_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

/// Bijection between state indices and `(waypoint, level)` pairs, plus each
/// state's admissible targets in canonical order (waypoint index, then level).
///
/// State `w * NUM_LEVELS + f / 50` is `(w, f)`; the last state is the sink
/// that masked action slots lead to.
#[derive(Debug, Clone, PartialEq)]
pub struct AirspaceStateIndex {
    num_waypoints: usize,
    targets: Vec<Vec<usize>>,
    num_actions: usize,
}

impl AirspaceStateIndex {
    pub fn new(graph: &AirspaceGraph) -> Self {
        let num_waypoints = graph.num_waypoints();
        let mut targets = Vec::with_capacity(num_waypoints * NUM_LEVELS);
        for w in 0..num_waypoints {
            for li in 0..NUM_LEVELS {
                let mut t = Vec::new();
                for &w2 in graph.neighbors(w) {
                    for l2 in li.saturating_sub(1)..=(li + 1).min(NUM_LEVELS - 1) {
                        t.push(w2 * NUM_LEVELS + l2);
                    }
                }
                targets.push(t);
            }
        }
        let num_actions = targets.iter().map(Vec::len).max().unwrap_or(0).max(1);
        Self {
            num_waypoints,
            targets,
            num_actions,
        }
    }

    /// Flyable states plus the sink.
    pub fn num_states(&self) -> usize {
        self.num_waypoints * NUM_LEVELS + 1
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn sink(&self) -> usize {
        self.num_waypoints * NUM_LEVELS
    }

    pub fn state(&self, waypoint: usize, level: u32) -> usize {
        debug_assert!(valid_level(level));
        waypoint * NUM_LEVELS + (level / LEVEL_STEP) as usize
    }

    /// `None` for the sink.
    pub fn location(&self, state: usize) -> Option<(usize, u32)> {
        (state < self.sink()).then(|| {
            (
                state / NUM_LEVELS,
                (state % NUM_LEVELS) as u32 * LEVEL_STEP,
            )
        })
    }

    /// Target states of the admissible actions at `state`; slot `a` of the MDP
    /// is admissible iff `a < targets(state).len()`.
    pub fn targets(&self, state: usize) -> &[usize] {
        if state == self.sink() {
            &[]
        } else {
            &self.targets[state]
        }
    }

    /// Action slot leading to `target` from `state`, if admissible.
    pub fn action_to(&self, state: usize, target: usize) -> Option<usize> {
        self.targets(state).iter().position(|&t| t == target)
    }
}

/// `T^i ∪ {t_L + b·Δt_int | 0 <= b <= B}`, sorted and deduplicated.
pub fn build_horizon(plan: &FlightPlan, params: &ModelParams) -> Vec<i64> {
    let mut out: Vec<i64> = plan.plan.iter().map(|e| e.timestamp).collect();
    out.extend((0..=params.extra_stages as i64).map(|b| plan.landing_time + b * params.dt_int));
    out.sort_unstable();
    out.dedup();
    out
}

/// Shared pieces for building many aircraft MDPs on one graph.
#[derive(Debug, Clone)]
pub struct AirspaceModel {
    graph: AirspaceGraph,
    index: AirspaceStateIndex,
    params: ModelParams,
    kernel: Arc<Kernel>,
    hops: Vec<Vec<Option<usize>>>,
}

impl AirspaceModel {
    pub fn new(graph: AirspaceGraph, params: ModelParams) -> Result<Self> {
        params.validate()?;
        let index = AirspaceStateIndex::new(&graph);
        let kernel = Arc::new(flight_kernel(&index, params.beta)?);
        let hops = (0..graph.num_waypoints()).map(|w| graph.hops_from(w)).collect();
        Ok(Self {
            graph,
            index,
            params,
            kernel,
            hops,
        })
    }

    pub fn graph(&self) -> &AirspaceGraph {
        &self.graph
    }

    pub fn index(&self) -> &AirspaceStateIndex {
        &self.index
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Edge count between two waypoints.
    pub fn hops(&self, a: usize, b: usize) -> Option<usize> {
        self.hops[a][b]
    }

    /// Builds one aircraft's MDP and returns it with its stage timestamps.
    pub fn aircraft_mdp(&self, plan: &FlightPlan) -> Result<(HorizonMdp, Vec<i64>)> {
        if let Some(e) = plan.violations(&self.graph).into_iter().next() {
            return Err(e);
        }
        let first = plan.plan[0];
        let (land_w, land_f) = plan.landing_state();
        for e in &plan.plan {
            if self.hops(first.waypoint, e.waypoint).is_none() {
                return Err(Error::Validation {
                    flight: plan.flight_id.clone(),
                    message: format!(
                        "waypoint `{}` unreachable from `{}`",
                        self.graph.name(e.waypoint),
                        self.graph.name(first.waypoint)
                    ),
                });
            }
        }

        let stamps = build_horizon(plan, &self.params);
        let idx = &self.index;
        let shape = Shape::new(stamps.len(), idx.num_states(), idx.num_actions());
        let landing_state = idx.state(land_w, land_f);
        let unreachable_hops = self.graph.num_waypoints();
        let p = &self.params;

        let mut costs = StageTensor::filled(shape, MASKED_COST);
        for (t, &ts) in stamps.iter().enumerate() {
            let (plan_w, plan_f) = plan.planned_at(ts);
            for s in 0..idx.sink() {
                let (w, f) = idx.location(s).expect("flyable state");
                let tardy = if s == landing_state || ts <= plan.landing_time {
                    0.0
                } else {
                    p.c_tardy * (ts - plan.landing_time) as f64
                };
                let hops = self.hops(plan_w, w).unwrap_or(unreachable_hops) as f64;
                let c = hops + p.alpha_f * f.abs_diff(plan_f) as f64 + tardy;
                let n = idx.targets(s).len();
                costs.row_mut(t, s)[..n].iter_mut().for_each(|v| *v = c);
            }
        }

        // Once the last plan entry is reached the landing state absorbs.
        let landing_stage = stamps
            .iter()
            .position(|&ts| ts == plan.plan[plan.plan.len() - 1].timestamp)
            .expect("plan timestamps are stages");
        let n_land = idx.targets(landing_state).len();
        let landed_rows = (0..idx.num_actions())
            .map(|a| {
                if a < n_land {
                    vec![(landing_state, 1.0)]
                } else {
                    vec![(idx.sink(), 1.0)]
                }
            })
            .collect();
        let landed = Arc::new(self.kernel.with_state_rows(landing_state, landed_rows)?);
        let kernels = (0..stamps.len() - 1)
            .map(|t| {
                if t >= landing_stage {
                    landed.clone()
                } else {
                    self.kernel.clone()
                }
            })
            .collect();

        let mut initial = vec![0.0; idx.num_states()];
        initial[idx.state(first.waypoint, first.level)] = 1.0;
        Ok((HorizonMdp::new(kernels, costs, initial)?, stamps))
    }
}

/// Stationary β-diversion dynamics. Masked slots and the sink lead to the sink.
fn flight_kernel(index: &AirspaceStateIndex, beta: f64) -> Result<Kernel> {
    let (n_s, n_a, sink) = (index.num_states(), index.num_actions(), index.sink());
    let mut rows = Vec::with_capacity(n_s * n_a);
    for s in 0..n_s {
        let targets = index.targets(s);
        for a in 0..n_a {
            rows.push(match targets.get(a) {
                Some(&target) => diversion_row(targets, target, beta),
                None => vec![(sink, 1.0)],
            });
        }
    }
    Kernel::from_rows(n_s, n_a, rows)
}

/// `β` on `target`, `1 - β` split uniformly over the other neighbors.
fn diversion_row(neighbors: &[usize], target: usize, beta: f64) -> Vec<(usize, f64)> {
    if neighbors.len() == 1 {
        return vec![(target, 1.0)];
    }
    let spill = (1.0 - beta) / (neighbors.len() - 1) as f64;
    neighbors
        .iter()
        .map(|&n| (n, if n == target { beta } else { spill }))
        .collect()
}

/// Convenience wrapper over [`AirspaceModel::aircraft_mdp`].
pub fn build_aircraft_mdp(
    plan: &FlightPlan,
    graph: &AirspaceGraph,
    params: &ModelParams,
) -> Result<(HorizonMdp, AirspaceStateIndex)> {
    let model = AirspaceModel::new(graph.clone(), params.clone())?;
    let (mdp, _) = model.aircraft_mdp(plan)?;
    Ok((mdp, model.index))
}

/// Interval coupling together with the start time of each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCoupling {
    pub map: CouplingMap,
    pub interval_starts: Vec<i64>,
}

/// Buckets stage timestamps into `[t_0 + m·Δt_cong, t_0 + (m+1)·Δt_cong)`,
/// `t_0` being the earliest timestamp of any flight; cell
/// `(slot, state)` is `slot * num_states + state`. Only intervals that
/// contain at least one stage get a slot. The sink (last state) is left
/// uncoupled.
pub fn build_coupling(horizons: &[Vec<i64>], params: &ModelParams, num_states: usize) -> IntervalCoupling {
    let origin = horizons.iter().flatten().copied().min().unwrap_or(0);
    let interval = |ts: i64| (ts - origin).div_euclid(params.dt_cong);
    let mut intervals: Vec<i64> = horizons.iter().flatten().map(|&ts| interval(ts)).collect();
    intervals.sort_unstable();
    intervals.dedup();
    let slot_of: HashMap<i64, usize> = intervals.iter().enumerate().map(|(k, &m)| (m, k)).collect();

    let shapes: Vec<(usize, usize)> = horizons.iter().map(|h| (h.len(), num_states)).collect();
    let cell_of = horizons
        .iter()
        .map(|h| {
            h.iter()
                .flat_map(|&ts| {
                    let slot = slot_of[&interval(ts)];
                    // the last state is the sink, which nobody shares
                    (0..num_states).map(move |s| (s + 1 < num_states).then_some(slot * num_states + s))
                })
                .collect()
        })
        .collect();
    let slot_of_cell = (0..intervals.len() * num_states).map(|c| c / num_states).collect();
    let map = CouplingMap::new(&shapes, cell_of, slot_of_cell).expect("coupling built consistently");
    IntervalCoupling {
        map,
        interval_starts: intervals.iter().map(|m| origin + m * params.dt_cong).collect(),
    }
}

/// A scenario instantiated as a game.
#[derive(Debug, Clone)]
pub struct AirspaceGame {
    pub game: GameInstance,
    pub model: AirspaceModel,
    pub flight_ids: Vec<String>,
    pub horizons: Vec<Vec<i64>>,
    pub interval_starts: Vec<i64>,
}

impl AirspaceGame {
    /// Builds every aircraft MDP and the interval coupling. Only the
    /// state-level risk is enabled unless `use_action_risk` is set.
    pub fn build(
        graph: &AirspaceGraph,
        plans: &[FlightPlan],
        params: &ModelParams,
        use_action_risk: bool,
    ) -> Result<Self> {
        use rayon::prelude::*;
        let model = AirspaceModel::new(graph.clone(), params.clone())?;
        let built = plans
            .par_iter()
            .map(|p| model.aircraft_mdp(p))
            .collect::<Result<Vec<_>>>()?;
        let (players, horizons): (Vec<_>, Vec<_>) = built.into_iter().unzip();
        let coupling = build_coupling(&horizons, params, model.index.num_states());
        let game = GameInstance::new(players, params.risk_weight, coupling.map, true, use_action_risk)?;
        Ok(Self {
            game,
            model,
            flight_ids: plans.iter().map(|p| p.flight_id.clone()).collect(),
            horizons,
            interval_starts: coupling.interval_starts,
        })
    }
}
