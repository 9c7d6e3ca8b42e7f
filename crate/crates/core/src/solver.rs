//! Frank-Wolfe over the product of the players' occupation-measure polytopes.
//!
//! Each iteration freezes the gradient `ℓ(x_k)`, lets every player best
//! respond to it (a vertex of its polytope, found by backward induction),
//! and moves all players toward their vertices by the same step. The
//! Frank-Wolfe gap `Σ_i <ℓ^i(x_k), x^i_k - y^i_k>` is non-negative and
//! vanishes exactly at first-order stationary points, which are the Nash
//! equilibria of the game. The potential is non-convex, so a converged run
//! certifies stationarity only, never global optimality.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::congestion::{
    congestion_costs, nash_certificate, per_player_risk, potential, GameInstance, NashViolation,
    PotentialSegment, DEFAULT_NASH_EPS,
};
use crate::error::{Error, Result};
use crate::mdp::{backward_induction, flow_cost, greedy_policy, policy_flow, validate_flow, FlowField};
use crate::tensor::CostTensor;

const ARMIJO_CONTRACTION: f64 = 0.5;
const ARMIJO_SUFFICIENT_DECREASE: f64 = 1e-4;
const ARMIJO_MIN_STEP: f64 = 1e-12;
const EXACT_SAMPLES: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `γ_k = 2 / (k + 2)`.
    #[default]
    Harmonic,
    /// Backtracking from `γ = 1` on the potential.
    Armijo,
    /// Dense sampling of the potential along the segment, then golden-section
    /// refinement around the best sample.
    #[serde(rename = "exact1d")]
    Exact1d,
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepRule::Harmonic => "harmonic",
            StepRule::Armijo => "armijo",
            StepRule::Exact1d => "exact1d",
        })
    }
}

impl FromStr for StepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(StepRule::Harmonic),
            "armijo" => Ok(StepRule::Armijo),
            "exact1d" | "exact_1d" => Ok(StepRule::Exact1d),
            other => Err(Error::InvalidModel(format!("unknown step rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub gap_tol: f64,
    pub step_rule: StepRule,
    pub record_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            gap_tol: 1e-4,
            step_rule: StepRule::Harmonic,
            record_every: 1,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidModel("max_iters must be at least 1".into()));
        }
        if !(self.gap_tol > 0.0) {
            return Err(Error::InvalidModel(format!(
                "gap_tol must be positive, got {}",
                self.gap_tol
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidModel("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Metrics of one recorded iterate `x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    /// `k`; the initial point is iterate 0.
    pub iteration: usize,
    pub potential: f64,
    pub fw_gap: f64,
    /// `Σ_{i,c} k · occ_i(c) · D[i,c]`.
    pub congestion_cost: f64,
    pub max_risk: f64,
    pub player_max_risk: Vec<f64>,
    pub player_base_cost: Vec<f64>,
    /// Step taken from this iterate; absent on the last one.
    pub step_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub step_rule: StepRule,
    pub gap_tol: f64,
    /// Number of gradient/oracle evaluations, i.e. iterates examined.
    pub iterations_run: usize,
    pub converged: bool,
    pub final_gap: f64,
    pub iterates: Vec<IterateRecord>,
    pub final_flows: Vec<FlowField>,
    pub certificate_eps: f64,
    pub final_certificate: Vec<NashViolation>,
}

impl SolveReport {
    pub fn first(&self) -> Option<&IterateRecord> {
        self.iterates.first()
    }

    pub fn last(&self) -> Option<&IterateRecord> {
        self.iterates.last()
    }

    pub fn record_at(&self, iteration: usize) -> Option<&IterateRecord> {
        self.iterates.iter().find(|r| r.iteration == iteration)
    }
}

/// The vertex of player `i`'s polytope minimizing `<ell_i, z>`.
pub fn best_response_oracle(game: &GameInstance, i: usize, ell_i: &CostTensor) -> Result<FlowField> {
    let mdp = game.player(i);
    let q = backward_induction(mdp, ell_i)?;
    policy_flow(mdp, &greedy_policy(&q))
}

/// Every player's best response to its base costs alone.
pub fn initial_point(game: &GameInstance) -> Result<Vec<FlowField>> {
    (0..game.num_players())
        .into_par_iter()
        .map(|i| best_response_oracle(game, i, game.player(i).base_costs()))
        .collect()
}

pub fn frank_wolfe(game: &GameInstance, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let mut x = initial_point(game)?;
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut iterations_run = 0;
    let mut final_gap = f64::NAN;

    for k in 0..opts.max_iters {
        let ell = congestion_costs(game, &x)?;
        let y = (0..game.num_players())
            .into_par_iter()
            .map(|i| best_response_oracle(game, i, &ell[i]))
            .collect::<Result<Vec<_>>>()?;
        let mut gap = 0.0;
        for ((xi, yi), li) in x.iter().zip(&y).zip(&ell) {
            gap += flow_cost(xi, li)? - flow_cost(yi, li)?;
        }
        iterations_run = k + 1;
        final_gap = gap;
        converged = gap < opts.gap_tol;
        let last = converged || k + 1 == opts.max_iters;

        let step = if last {
            None
        } else {
            Some(step_size(game, opts.step_rule, k, &x, &y, gap)?)
        };
        if k % opts.record_every == 0 || last {
            check_feasible(game, &x, k)?;
            iterates.push(record(game, &x, k, gap, step)?);
        }
        let Some(gamma) = step else { break };
        for (xi, yi) in x.iter_mut().zip(&y) {
            xi.0.move_toward(&yi.0, gamma)?;
        }
    }

    let certificate_eps = opts.gap_tol.max(DEFAULT_NASH_EPS);
    let final_certificate = nash_certificate(game, &x, certificate_eps)?;
    Ok(SolveReport {
        step_rule: opts.step_rule,
        gap_tol: opts.gap_tol,
        iterations_run,
        converged,
        final_gap,
        iterates,
        final_flows: x,
        certificate_eps,
        final_certificate,
    })
}

fn check_feasible(game: &GameInstance, x: &[FlowField], k: usize) -> Result<()> {
    for (i, (mdp, xi)) in game.players().iter().zip(x).enumerate() {
        let violations = validate_flow(mdp, xi)?;
        if let Some(v) = violations.first() {
            return Err(Error::Internal(format!(
                "iterate {k}: player {i} flow infeasible ({v}; {} violations)",
                violations.len()
            )));
        }
    }
    Ok(())
}

fn record(
    game: &GameInstance,
    x: &[FlowField],
    k: usize,
    gap: f64,
    step: Option<f64>,
) -> Result<IterateRecord> {
    let risk = per_player_risk(game, x)?;
    let player_max_risk: Vec<f64> = (0..game.num_players())
        .map(|i| risk.max_for(game.coupling(), i))
        .collect();
    let player_base_cost = x
        .iter()
        .zip(game.players())
        .map(|(xi, mdp)| flow_cost(xi, mdp.base_costs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(IterateRecord {
        iteration: k,
        potential: potential(game, x)?,
        fw_gap: gap,
        congestion_cost: game.risk_weight() * risk.total(),
        max_risk: player_max_risk.iter().copied().fold(0.0, f64::max),
        player_max_risk,
        player_base_cost,
        step_size: step,
    })
}

fn step_size(
    game: &GameInstance,
    rule: StepRule,
    k: usize,
    x: &[FlowField],
    y: &[FlowField],
    gap: f64,
) -> Result<f64> {
    match rule {
        StepRule::Harmonic => Ok(2.0 / (k as f64 + 2.0)),
        StepRule::Armijo => {
            let seg = PotentialSegment::new(game, x, y)?;
            Ok(armijo(&seg, gap))
        }
        StepRule::Exact1d => {
            let seg = PotentialSegment::new(game, x, y)?;
            Ok(exact_line_search(&seg))
        }
    }
}

/// Directional derivative along `y - x` is `-gap`.
fn armijo(seg: &PotentialSegment, gap: f64) -> f64 {
    let f0 = seg.eval(0.0);
    let mut gamma = 1.0;
    while gamma >= ARMIJO_MIN_STEP {
        if seg.eval(gamma) <= f0 - ARMIJO_SUFFICIENT_DECREASE * gamma * gap {
            return gamma;
        }
        gamma *= ARMIJO_CONTRACTION;
    }
    0.0
}

fn exact_line_search(seg: &PotentialSegment) -> f64 {
    let last = (EXACT_SAMPLES - 1) as f64;
    let mut best_j = 0;
    let mut best_f = seg.eval(0.0);
    for j in 1..EXACT_SAMPLES {
        let f = seg.eval(j as f64 / last);
        if f < best_f {
            best_j = j;
            best_f = f;
        }
    }
    let lo = best_j.saturating_sub(1) as f64 / last;
    let hi = (best_j + 1).min(EXACT_SAMPLES - 1) as f64 / last;
    let (gamma, f) = golden_section(|g| seg.eval(g), lo, hi, 60);
    if f < best_f {
        gamma
    } else {
        best_j as f64 / last
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::congestion::CouplingMap;
    use crate::mdp::{HorizonMdp, Kernel};
    use crate::tensor::{Shape, StageTensor};

    /// Start state 0, action a moves to state 1 + a; route 1 costs `cost_b`.
    fn two_route(cost_a: f64, cost_b: f64) -> HorizonMdp {
        let shape = Shape::new(2, 3, 2);
        let rows = (0..3)
            .flat_map(|s| {
                (0..2).map(move |a| if s == 0 { vec![(1 + a, 1.0)] } else { vec![(s, 1.0)] })
            })
            .collect();
        let k = Kernel::from_rows(3, 2, rows).unwrap();
        let c = StageTensor::from_fn(shape, |t, s, _| match (t, s) {
            (1, 1) => cost_a,
            (1, 2) => cost_b,
            _ => 0.0,
        });
        HorizonMdp::new(vec![Arc::new(k)], c, vec![1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn oracle_picks_cheap_route() {
        let game = GameInstance::homogeneous(vec![two_route(2.0, 1.0)], 0.0).unwrap();
        let y = best_response_oracle(&game, 0, game.player(0).base_costs()).unwrap();
        assert_eq!(y.state_marginal(1), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn uniform_costs_tie_break_to_action_zero() {
        let game = GameInstance::homogeneous(vec![two_route(1.0, 1.0)], 0.0).unwrap();
        let y = best_response_oracle(&game, 0, &StageTensor::zeros(game.player(0).shape())).unwrap();
        for t in 0..2 {
            for s in 0..3 {
                assert_eq!(y.get(t, s, 1), 0.0);
            }
        }
    }

    #[test]
    fn initial_point_ignores_risk_weight() {
        let players = vec![two_route(1.0, 1.0), two_route(1.0, 1.0)];
        let a = GameInstance::homogeneous(players.clone(), 0.0).unwrap();
        let b = GameInstance::homogeneous(players, 25.0).unwrap();
        assert_eq!(initial_point(&a).unwrap(), initial_point(&b).unwrap());
    }

    #[test]
    fn decoupled_game_converges_immediately() {
        let players = vec![two_route(1.0, 3.0), two_route(2.0, 1.0)];
        let game = GameInstance::homogeneous(players, 0.0).unwrap();
        for rule in [StepRule::Harmonic, StepRule::Armijo, StepRule::Exact1d] {
            let opts = SolverOptions {
                step_rule: rule,
                ..Default::default()
            };
            let rep = frank_wolfe(&game, &opts).unwrap();
            assert!(rep.converged);
            assert_eq!(rep.iterations_run, 1);
            assert_eq!(rep.final_gap, 0.0);
            assert!(rep.final_certificate.is_empty());
        }
    }

    #[test]
    fn crossing_pair_splits() {
        let players = vec![two_route(1.0, 1.0), two_route(1.0, 1.0)];
        // state risk only: the symmetric line search lands on the split in one step
        let coupling = CouplingMap::identity(2, 2, 3);
        let game = GameInstance::new(players, 10.0, coupling, true, false).unwrap();
        let opts = SolverOptions {
            gap_tol: 1e-6,
            step_rule: StepRule::Exact1d,
            ..Default::default()
        };
        let rep = frank_wolfe(&game, &opts).unwrap();
        assert!(rep.converged);
        for x in &rep.final_flows {
            let m = x.state_marginal(1);
            assert!((m[1] - 0.5).abs() < 1e-3 && (m[2] - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn options_validation() {
        assert!(SolverOptions { max_iters: 0, ..Default::default() }.validate().is_err());
        assert!(SolverOptions { gap_tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverOptions { record_every: 0, ..Default::default() }.validate().is_err());
        assert_eq!("exact1d".parse::<StepRule>().unwrap(), StepRule::Exact1d);
        assert!("newton".parse::<StepRule>().is_err());
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (g, _) = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, 80);
        assert!((g - 0.3).abs() < 1e-9);
    }
}
