//! The game layer: collision risks, congestion-augmented costs, the game
//! potential and Nash certificates.
//!
//! Players interact only through congestion cells. A [`CouplingMap`] sends
//! each `(player, stage, state)` to at most one cell; the occupancy of player
//! `j` at cell `c` is the flow mass of all its `(stage, state)` pairs mapped
//! to `c`. With the identity coupling every `(t, s)` is its own cell.
//!
//! For player `i` the state-level risk is `D[i,c] = 1 - Π_{j≠i} (1 - occ_j(c))`
//! and the action-level risk `G[i,c,a]` is the same product over action
//! occupancies. The congestion cost `ℓ^i = C^i + k (D + G)` does not depend
//! on `x^i`, and it is exactly the gradient of [`potential`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{backward_induction, flow_cost, FlowField, HorizonMdp, FLOW_TOL};
use crate::solver::best_response_oracle;
use crate::tensor::CostTensor;

/// Default support and Q-gap threshold for [`nash_certificate`].
pub const DEFAULT_NASH_EPS: f64 = 1e-3;

/// Assignment of `(player, stage, state)` triples to congestion cells.
///
/// Cells are grouped into time slots (`slot_of_cell`), which is what the risk
/// reports aggregate over: stage `t` for the identity coupling, a congestion
/// interval for airspace scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMap {
    num_cells: usize,
    slot_of_cell: Vec<usize>,
    num_slots: usize,
    /// Per player: `(stages, states)` and the flattened `t * states + s` map.
    players: Vec<PlayerCells>,
}

#[derive(Debug, Clone, PartialEq)]
struct PlayerCells {
    stages: usize,
    states: usize,
    cell_of: Vec<Option<usize>>,
}

impl CouplingMap {
    /// `cell_of[i]` is indexed `t * shapes[i].1 + s` where `shapes[i]` is the
    /// player's `(stages, states)`.
    pub fn new(
        shapes: &[(usize, usize)],
        cell_of: Vec<Vec<Option<usize>>>,
        slot_of_cell: Vec<usize>,
    ) -> Result<Self> {
        if shapes.len() != cell_of.len() {
            return Err(Error::Dimension(format!(
                "{} player shapes but {} cell maps",
                shapes.len(),
                cell_of.len()
            )));
        }
        let num_cells = slot_of_cell.len();
        let num_slots = slot_of_cell.iter().map(|&k| k + 1).max().unwrap_or(0);
        let mut players = Vec::with_capacity(shapes.len());
        for (i, (&(stages, states), map)) in shapes.iter().zip(cell_of).enumerate() {
            if map.len() != stages * states {
                return Err(Error::Dimension(format!(
                    "player {i}: cell map has {} entries for {stages} stages x {states} states",
                    map.len()
                )));
            }
            if let Some(c) = map.iter().flatten().find(|&&c| c >= num_cells) {
                return Err(Error::InvalidModel(format!(
                    "player {i}: cell {c} out of range ({num_cells} cells)"
                )));
            }
            players.push(PlayerCells {
                stages,
                states,
                cell_of: map,
            });
        }
        Ok(Self {
            num_cells,
            slot_of_cell,
            num_slots,
            players,
        })
    }

    /// Cell `t * states + s` for every player; slot `t`.
    pub fn identity(num_players: usize, stages: usize, states: usize) -> Self {
        let map: Vec<Option<usize>> = (0..stages * states).map(Some).collect();
        Self {
            num_cells: stages * states,
            slot_of_cell: (0..stages * states).map(|c| c / states).collect(),
            num_slots: stages,
            players: (0..num_players)
                .map(|_| PlayerCells {
                    stages,
                    states,
                    cell_of: map.clone(),
                })
                .collect(),
        }
    }

    #[inline]
    pub fn cell_of(&self, player: usize, t: usize, s: usize) -> Option<usize> {
        let p = &self.players[player];
        p.cell_of[t * p.states + s]
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn slot_of_cell(&self, cell: usize) -> usize {
        self.slot_of_cell[cell]
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }
}

#[derive(Debug, Clone)]
pub struct GameInstance {
    players: Vec<HorizonMdp>,
    risk_weight: f64,
    coupling: CouplingMap,
    use_state_risk: bool,
    use_action_risk: bool,
}

impl GameInstance {
    pub fn new(
        players: Vec<HorizonMdp>,
        risk_weight: f64,
        coupling: CouplingMap,
        use_state_risk: bool,
        use_action_risk: bool,
    ) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::InvalidModel("a game needs at least one player".into()));
        }
        if !(risk_weight >= 0.0 && risk_weight.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "risk weight must be finite and non-negative, got {risk_weight}"
            )));
        }
        if coupling.num_players() != players.len() {
            return Err(Error::Dimension(format!(
                "coupling covers {} players, game has {}",
                coupling.num_players(),
                players.len()
            )));
        }
        let actions = players[0].num_actions();
        for (i, (mdp, cells)) in players.iter().zip(&coupling.players).enumerate() {
            if mdp.num_actions() != actions {
                return Err(Error::Dimension(format!(
                    "player {i} has {} actions, player 0 has {actions}",
                    mdp.num_actions()
                )));
            }
            if (cells.stages, cells.states) != (mdp.horizon() + 1, mdp.num_states()) {
                return Err(Error::Dimension(format!(
                    "player {i}: coupling is {}x{}, mdp is {}x{}",
                    cells.stages,
                    cells.states,
                    mdp.horizon() + 1,
                    mdp.num_states()
                )));
            }
        }
        Ok(Self {
            players,
            risk_weight,
            coupling,
            use_state_risk,
            use_action_risk,
        })
    }

    /// All players share one state space and horizon; identity coupling with
    /// both risk terms enabled.
    pub fn homogeneous(players: Vec<HorizonMdp>, risk_weight: f64) -> Result<Self> {
        let first = players
            .first()
            .ok_or_else(|| Error::InvalidModel("a game needs at least one player".into()))?;
        let coupling =
            CouplingMap::identity(players.len(), first.horizon() + 1, first.num_states());
        Self::new(players, risk_weight, coupling, true, true)
    }

    pub fn players(&self) -> &[HorizonMdp] {
        &self.players
    }

    pub fn player(&self, i: usize) -> &HorizonMdp {
        &self.players[i]
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn num_actions(&self) -> usize {
        self.players[0].num_actions()
    }

    pub fn risk_weight(&self) -> f64 {
        self.risk_weight
    }

    pub fn coupling(&self) -> &CouplingMap {
        &self.coupling
    }

    pub fn use_state_risk(&self) -> bool {
        self.use_state_risk
    }

    pub fn use_action_risk(&self) -> bool {
        self.use_action_risk
    }

    pub fn with_risk_weight(mut self, risk_weight: f64) -> Result<Self> {
        if !(risk_weight >= 0.0 && risk_weight.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "risk weight must be finite and non-negative, got {risk_weight}"
            )));
        }
        self.risk_weight = risk_weight;
        Ok(self)
    }

    /// Number of active product terms; the linear coefficient of the potential.
    fn active_terms(&self) -> f64 {
        (self.use_state_risk as u8 + self.use_action_risk as u8) as f64
    }

    fn check_flows(&self, x: &[FlowField]) -> Result<()> {
        if x.len() != self.players.len() {
            return Err(Error::Dimension(format!(
                "{} flows for {} players",
                x.len(),
                self.players.len()
            )));
        }
        for (i, (xi, mdp)) in x.iter().zip(&self.players).enumerate() {
            if xi.shape() != mdp.shape() {
                return Err(Error::Dimension(format!(
                    "player {i}: flow shape {:?}, mdp shape {:?}",
                    xi.shape(),
                    mdp.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Per-player cell occupancies, validated and clamped to `[0, 1]`.
#[derive(Debug, Clone)]
pub(crate) struct Occupancy {
    players: usize,
    cells: usize,
    actions: usize,
    state: Vec<f64>,
    action: Option<Vec<f64>>,
}

impl Occupancy {
    pub(crate) fn compute(game: &GameInstance, x: &[FlowField], with_actions: bool) -> Result<Self> {
        game.check_flows(x)?;
        let (n, cells, actions) = (game.num_players(), game.coupling.num_cells(), game.num_actions());
        let mut state = vec![0.0; n * cells];
        let mut action = with_actions.then(|| vec![0.0; n * cells * actions]);
        for (i, xi) in x.iter().enumerate() {
            let shape = xi.shape();
            for t in 0..shape.stages {
                for s in 0..shape.states {
                    let Some(c) = game.coupling.cell_of(i, t, s) else {
                        continue;
                    };
                    let row = xi.values().row(t, s);
                    state[i * cells + c] += row.iter().sum::<f64>();
                    if let Some(act) = action.as_mut() {
                        let base = (i * cells + c) * actions;
                        for (slot, v) in act[base..base + actions].iter_mut().zip(row) {
                            *slot += v;
                        }
                    }
                }
            }
        }
        clamp_occupancy(&mut state, cells)?;
        if let Some(act) = action.as_mut() {
            clamp_occupancy(act, cells * actions)?;
        }
        Ok(Self {
            players: n,
            cells,
            actions,
            state,
            action,
        })
    }

    #[inline]
    pub(crate) fn state(&self, player: usize, cell: usize) -> f64 {
        self.state[player * self.cells + cell]
    }

    #[inline]
    fn action(&self, player: usize, cell: usize, a: usize) -> f64 {
        self.action.as_ref().expect("action occupancy computed")
            [(player * self.cells + cell) * self.actions + a]
    }
}

fn clamp_occupancy(values: &mut [f64], per_player: usize) -> Result<()> {
    for (idx, v) in values.iter_mut().enumerate() {
        if !(*v >= -FLOW_TOL && *v <= 1.0 + FLOW_TOL) {
            return Err(Error::Infeasible {
                player: idx / per_player,
                cell: idx % per_player,
                value: *v,
            });
        }
        *v = v.clamp(0.0, 1.0);
    }
    Ok(())
}

/// Fills `out[i] = Π_{j≠i} factors[j]` with prefix/suffix products, so zero
/// factors need no division.
fn exclusive_products(factors: &[f64], out: &mut [f64]) {
    let mut prefix = 1.0;
    for (o, f) in out.iter_mut().zip(factors) {
        *o = prefix;
        prefix *= f;
    }
    let mut suffix = 1.0;
    for (o, f) in out.iter_mut().zip(factors).rev() {
        *o *= suffix;
        suffix *= f;
    }
}

/// Collision-risk tensors. `D` is indexed `(player, cell)`, `G` is indexed
/// `(player, cell, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionField {
    num_players: usize,
    num_cells: usize,
    num_actions: usize,
    state_risk: Vec<f64>,
    action_risk: Vec<f64>,
}

impl CongestionField {
    fn from_occupancy(occ: &Occupancy, with_state: bool, with_actions: bool) -> Self {
        let (n, cells, actions) = (occ.players, occ.cells, occ.actions);
        let mut state_risk = Vec::new();
        let mut action_risk = Vec::new();
        let mut factors = vec![0.0; n];
        let mut excl = vec![0.0; n];
        if with_state {
            state_risk = vec![0.0; n * cells];
            for c in 0..cells {
                for (i, f) in factors.iter_mut().enumerate() {
                    *f = 1.0 - occ.state(i, c);
                }
                exclusive_products(&factors, &mut excl);
                for (i, e) in excl.iter().enumerate() {
                    state_risk[i * cells + c] = 1.0 - e;
                }
            }
        }
        if with_actions {
            action_risk = vec![0.0; n * cells * actions];
            for c in 0..cells {
                for a in 0..actions {
                    for (i, f) in factors.iter_mut().enumerate() {
                        *f = 1.0 - occ.action(i, c, a);
                    }
                    exclusive_products(&factors, &mut excl);
                    for (i, e) in excl.iter().enumerate() {
                        action_risk[(i * cells + c) * actions + a] = 1.0 - e;
                    }
                }
            }
        }
        Self {
            num_players: n,
            num_cells: cells,
            num_actions: actions,
            state_risk,
            action_risk,
        }
    }

    /// `D[i, c]`.
    #[inline]
    pub fn state_risk(&self, player: usize, cell: usize) -> f64 {
        self.state_risk[player * self.num_cells + cell]
    }

    /// `G[i, c, a]`.
    #[inline]
    pub fn action_risk(&self, player: usize, cell: usize, action: usize) -> f64 {
        self.action_risk[(player * self.num_cells + cell) * self.num_actions + action]
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
}

/// Both risk tensors, regardless of the game's flags.
pub fn collision_risks(game: &GameInstance, x: &[FlowField]) -> Result<CongestionField> {
    let occ = Occupancy::compute(game, x, true)?;
    Ok(CongestionField::from_occupancy(&occ, true, true))
}

/// `ℓ^i[t,s,a] = C^i[t,s,a] + k (D[i,c] + G[i,c,a])` with `c = cell_of(i,t,s)`
/// and each term gated by the game's flags. Uncoupled triples keep `C^i`.
pub fn congestion_costs(game: &GameInstance, x: &[FlowField]) -> Result<Vec<CostTensor>> {
    let (with_d, with_g) = (game.use_state_risk, game.use_action_risk);
    let occ = Occupancy::compute(game, x, with_g)?;
    let field = CongestionField::from_occupancy(&occ, with_d, with_g);
    Ok(costs_from_field(game, &field))
}

fn costs_from_field(game: &GameInstance, field: &CongestionField) -> Vec<CostTensor> {
    let k = game.risk_weight;
    let (with_d, with_g) = (game.use_state_risk, game.use_action_risk);
    game.players
        .par_iter()
        .enumerate()
        .map(|(i, mdp)| {
            let mut ell = mdp.base_costs().clone();
            if k == 0.0 || !(with_d || with_g) {
                return ell;
            }
            let shape = ell.shape();
            for t in 0..shape.stages {
                for s in 0..shape.states {
                    let Some(c) = game.coupling.cell_of(i, t, s) else {
                        continue;
                    };
                    let d = if with_d { field.state_risk(i, c) } else { 0.0 };
                    for (a, v) in ell.row_mut(t, s).iter_mut().enumerate() {
                        let g = if with_g { field.action_risk(i, c, a) } else { 0.0 };
                        *v += k * (d + g);
                    }
                }
            }
            ell
        })
        .collect()
}

/// The game potential
///
/// ```text
/// F(x) = Σ_i <x^i, C^i> + k Σ_c ( m Σ_i occ_i(c)
///                                + [D] Π_i (1 - occ_i(c))
///                                + [G] Σ_a Π_i (1 - occ_i(c, a)) )
/// ```
///
/// where `m` counts the enabled risk terms. With both terms on and identity
/// coupling, `m = 2` and every `(t, s)` is a cell.
pub fn potential(game: &GameInstance, x: &[FlowField]) -> Result<f64> {
    let (with_d, with_g) = (game.use_state_risk, game.use_action_risk);
    let occ = Occupancy::compute(game, x, with_g)?;
    let mut base = 0.0;
    for (xi, mdp) in x.iter().zip(&game.players) {
        base += flow_cost(xi, mdp.base_costs())?;
    }
    if !(with_d || with_g) {
        return Ok(base);
    }
    let m = game.active_terms();
    let mut congestion = 0.0;
    for c in 0..occ.cells {
        let mut total = 0.0;
        let mut prod = 1.0;
        for i in 0..occ.players {
            let o = occ.state(i, c);
            total += o;
            prod *= 1.0 - o;
        }
        congestion += m * total;
        if with_d {
            congestion += prod;
        }
        if with_g {
            for a in 0..occ.actions {
                congestion += (0..occ.players)
                    .map(|i| 1.0 - occ.action(i, c, a))
                    .product::<f64>();
            }
        }
    }
    Ok(base + game.risk_weight * congestion)
}

/// `∂F/∂x^i[t,s,a]`, which is exactly the congestion cost `ℓ^i(x)`.
pub fn potential_gradient(game: &GameInstance, x: &[FlowField]) -> Result<Vec<CostTensor>> {
    congestion_costs(game, x)
}

/// Largest cost reduction any single player can obtain by deviating while
/// the others stay put.
pub fn exploitability(game: &GameInstance, x: &[FlowField]) -> Result<f64> {
    let ell = congestion_costs(game, x)?;
    let gaps = (0..game.num_players())
        .into_par_iter()
        .map(|i| {
            let br = best_response_oracle(game, i, &ell[i])?;
            Ok(flow_cost(&x[i], &ell[i])? - flow_cost(&br, &ell[i])?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// A state-action carrying more than `eps` mass whose Q-value exceeds the
/// stage-state minimum by more than `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashViolation {
    pub player: usize,
    pub stage: usize,
    pub state: usize,
    pub action: usize,
    pub mass: f64,
    pub q_gap: f64,
}

/// Support check: an empty result certifies an `eps`-Nash equilibrium.
pub fn nash_certificate(game: &GameInstance, x: &[FlowField], eps: f64) -> Result<Vec<NashViolation>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidModel(format!("eps must be positive, got {eps}")));
    }
    let ell = congestion_costs(game, x)?;
    let per_player = (0..game.num_players())
        .into_par_iter()
        .map(|i| {
            let q = backward_induction(&game.players[i], &ell[i])?;
            let shape = x[i].shape();
            let mut out = Vec::new();
            for t in 0..shape.stages {
                for s in 0..shape.states {
                    let best = q.min_at(t, s);
                    for (a, &mass) in x[i].values().row(t, s).iter().enumerate() {
                        let q_gap = q.get(t, s, a) - best;
                        if mass > eps && q_gap > eps {
                            out.push(NashViolation {
                                player: i,
                                stage: t,
                                state: s,
                                action: a,
                                mass,
                                q_gap,
                            });
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_player.into_iter().flatten().collect())
}

/// Probability-weighted state-level risk `occ_i(c) · D[i,c]`, indexed
/// `(player, cell)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    num_players: usize,
    num_cells: usize,
    values: Vec<f64>,
}

impl RiskTable {
    #[inline]
    pub fn get(&self, player: usize, cell: usize) -> f64 {
        self.values[player * self.num_cells + cell]
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    /// Sum over the cells of each slot: the probability that the player meets
    /// another player during that slot.
    pub fn by_slot(&self, coupling: &CouplingMap, player: usize) -> Vec<f64> {
        let mut out = vec![0.0; coupling.num_slots()];
        for c in 0..self.num_cells {
            out[coupling.slot_of_cell(c)] += self.get(player, c);
        }
        out
    }

    /// Largest per-slot risk of `player`.
    pub fn max_for(&self, coupling: &CouplingMap, player: usize) -> f64 {
        self.by_slot(coupling, player).into_iter().fold(0.0, f64::max)
    }

    /// `Σ_{i,c} occ_i(c) D[i,c]`.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn per_player_risk(game: &GameInstance, x: &[FlowField]) -> Result<RiskTable> {
    let occ = Occupancy::compute(game, x, false)?;
    let field = CongestionField::from_occupancy(&occ, true, false);
    let values = (0..occ.players)
        .flat_map(|i| (0..occ.cells).map(move |c| (i, c)))
        .map(|(i, c)| occ.state(i, c) * field.state_risk(i, c))
        .collect();
    Ok(RiskTable {
        num_players: occ.players,
        num_cells: occ.cells,
        values,
    })
}

/// The potential restricted to the segment `x + γ (y - x)`, `γ ∈ [0, 1]`.
///
/// Linear parts are folded into two scalars and only cells touched by `x` or
/// `y` are kept, so one evaluation costs `O(players × touched cells)`.
#[derive(Debug, Clone)]
pub struct PotentialSegment {
    players: usize,
    risk_weight: f64,
    linear_at_zero: f64,
    linear_slope: f64,
    constant: f64,
    /// Occupancy start and direction per touched product term, `players` each.
    start: Vec<f64>,
    direction: Vec<f64>,
}

impl PotentialSegment {
    pub fn new(game: &GameInstance, x: &[FlowField], y: &[FlowField]) -> Result<Self> {
        let (with_d, with_g) = (game.use_state_risk, game.use_action_risk);
        let ox = Occupancy::compute(game, x, with_g)?;
        let oy = Occupancy::compute(game, y, with_g)?;
        let n = game.num_players();
        let k = game.risk_weight;
        let m = game.active_terms();

        let mut linear_at_zero = 0.0;
        let mut linear_slope = 0.0;
        for ((xi, yi), mdp) in x.iter().zip(y).zip(&game.players) {
            let cx = flow_cost(xi, mdp.base_costs())?;
            let cy = flow_cost(yi, mdp.base_costs())?;
            linear_at_zero += cx;
            linear_slope += cy - cx;
        }
        let mut start = Vec::new();
        let mut direction = Vec::new();
        let mut constant = 0.0;
        if with_d || with_g {
            let mut push_term = |fx: &dyn Fn(usize) -> f64, fy: &dyn Fn(usize) -> f64| {
                let touched = (0..n).any(|i| fx(i) != 0.0 || fy(i) != 0.0);
                if touched {
                    for i in 0..n {
                        start.push(fx(i));
                        direction.push(fy(i) - fx(i));
                    }
                } else {
                    constant += k;
                }
            };
            for c in 0..ox.cells {
                let (sx, sy): (f64, f64) = (0..n)
                    .map(|i| (ox.state(i, c), oy.state(i, c)))
                    .fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
                linear_at_zero += k * m * sx;
                linear_slope += k * m * (sy - sx);
                if with_d {
                    push_term(&|i| ox.state(i, c), &|i| oy.state(i, c));
                }
                if with_g {
                    for a in 0..ox.actions {
                        push_term(&|i| ox.action(i, c, a), &|i| oy.action(i, c, a));
                    }
                }
            }
        }
        Ok(Self {
            players: n,
            risk_weight: k,
            linear_at_zero,
            linear_slope,
            constant,
            start,
            direction,
        })
    }

    pub fn eval(&self, gamma: f64) -> f64 {
        let products: f64 = self
            .start
            .chunks_exact(self.players)
            .zip(self.direction.chunks_exact(self.players))
            .map(|(o, d)| {
                o.iter()
                    .zip(d)
                    .map(|(o, d)| 1.0 - (o + gamma * d))
                    .product::<f64>()
            })
            .sum();
        self.linear_at_zero
            + gamma * self.linear_slope
            + self.constant
            + self.risk_weight * products
    }
}
