//! Independent reference computations for the integration tests. Everything
//! here is written from the model definitions with plain loops over dense
//! arrays and uses the library only for data access.
#![allow(dead_code, clippy::needless_range_loop)]

use mdp_congestion::congestion::{CouplingMap, GameInstance};
use mdp_congestion::mdp::{FlowField, HorizonMdp};
use mdp_congestion::{Shape, StageTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random probability vector; with `sparse`, roughly a third of the entries
/// are zeroed (at least one stays positive).
pub fn simplex(rng: &mut impl Rng, n: usize, sparse: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if sparse && rng.gen_bool(0.33) {
                0.0
            } else {
                rng.gen_range(0.05..1.0)
            }
        })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Random MDP with `horizon + 1` stages, costs in `[0, 5)`.
pub fn random_mdp(rng: &mut impl Rng, states: usize, actions: usize, horizon: usize, sparse: bool) -> HorizonMdp {
    let (s, a) = (states, actions);
    let mut dense = vec![0.0; horizon * s * s * a];
    for t in 0..horizon {
        for from in 0..s {
            for act in 0..a {
                let p = simplex(rng, s, sparse);
                for (next, v) in p.into_iter().enumerate() {
                    dense[((t * s + next) * s + from) * a + act] = v;
                }
            }
        }
    }
    let shape = Shape::new(horizon + 1, s, a);
    let costs = StageTensor::from_fn(shape, |_, _, _| rng.gen_range(0.0..5.0));
    let init = simplex(rng, s, sparse);
    HorizonMdp::from_dense(&dense, costs, init).unwrap()
}

pub fn random_costs(rng: &mut impl Rng, shape: Shape) -> StageTensor {
    StageTensor::from_fn(shape, |_, _, _| rng.gen_range(-2.0..5.0))
}

/// Occupation measure of a (possibly randomized) Markov policy, by forward
/// propagation: `policy(t, s)` gives the action distribution.
pub fn forward_flow(mdp: &HorizonMdp, mut policy: impl FnMut(usize, usize) -> Vec<f64>) -> FlowField {
    let shape = mdp.shape();
    let (s_n, a_n) = (shape.states, shape.actions);
    let mut x = StageTensor::zeros(shape);
    let mut mass = mdp.initial_dist().to_vec();
    for t in 0..shape.stages {
        for s in 0..s_n {
            let pi = policy(t, s);
            for a in 0..a_n {
                x.set(t, s, a, mass[s] * pi[a]);
            }
        }
        if t + 1 < shape.stages {
            let mut next = vec![0.0; s_n];
            for (sp, slot) in next.iter_mut().enumerate() {
                for s in 0..s_n {
                    for a in 0..a_n {
                        *slot += mdp.transition(t, sp, s, a) * x.get(t, s, a);
                    }
                }
            }
            mass = next;
        }
    }
    FlowField(x)
}

/// Flow of a random fully mixed policy (every action probability >= 0.05/A).
pub fn random_interior_flow(rng: &mut impl Rng, mdp: &HorizonMdp) -> FlowField {
    let a = mdp.num_actions();
    forward_flow(mdp, |_, _| simplex(rng, a, false))
}

fn dot(x: &StageTensor, c: &StageTensor) -> f64 {
    x.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum()
}

/// Minimum of `<costs, flow(pi)>` over every deterministic Markov policy,
/// enumerated exhaustively.
pub fn brute_force_min_cost(mdp: &HorizonMdp, costs: &StageTensor) -> f64 {
    let shape = mdp.shape();
    let slots = shape.stages * shape.states;
    let a = shape.actions;
    let count = a.pow(slots as u32);
    let mut best = f64::INFINITY;
    let mut digits = vec![0usize; slots];
    for code in 0..count {
        let mut c = code;
        for d in digits.iter_mut() {
            *d = c % a;
            c /= a;
        }
        let x = forward_flow(mdp, |t, s| {
            let mut pi = vec![0.0; a];
            pi[digits[t * shape.states + s]] = 1.0;
            pi
        });
        best = best.min(dot(&x.0, costs));
    }
    best
}

/// Q-value by enumerating every deterministic continuation from stage t+1.
pub fn brute_force_q(mdp: &HorizonMdp, costs: &StageTensor, t: usize, s: usize, a: usize) -> f64 {
    let shape = mdp.shape();
    let mut value = costs.get(t, s, a);
    if t + 1 < shape.stages {
        for sp in 0..shape.states {
            let p = mdp.transition(t, sp, s, a);
            if p > 0.0 {
                let best = (0..shape.actions)
                    .map(|ap| brute_force_q(mdp, costs, t + 1, sp, ap))
                    .fold(f64::INFINITY, f64::min);
                value += p * best;
            }
        }
    }
    value
}

/// Per-player state occupancy by cell: `occ[i][c]`.
pub fn naive_state_occupancy(game: &GameInstance, x: &[FlowField]) -> Vec<Vec<f64>> {
    let cp = game.coupling();
    let mut occ = vec![vec![0.0; cp.num_cells()]; game.num_players()];
    for (i, xi) in x.iter().enumerate() {
        let sh = xi.shape();
        for t in 0..sh.stages {
            for s in 0..sh.states {
                if let Some(c) = cp.cell_of(i, t, s) {
                    for a in 0..sh.actions {
                        occ[i][c] += xi.get(t, s, a);
                    }
                }
            }
        }
    }
    occ
}

/// `occ[i][c][a]`.
pub fn naive_action_occupancy(game: &GameInstance, x: &[FlowField]) -> Vec<Vec<Vec<f64>>> {
    let cp = game.coupling();
    let a_n = game.num_actions();
    let mut occ = vec![vec![vec![0.0; a_n]; cp.num_cells()]; game.num_players()];
    for (i, xi) in x.iter().enumerate() {
        let sh = xi.shape();
        for t in 0..sh.stages {
            for s in 0..sh.states {
                if let Some(c) = cp.cell_of(i, t, s) {
                    for a in 0..a_n {
                        occ[i][c][a] += xi.get(t, s, a);
                    }
                }
            }
        }
    }
    occ
}

/// `D[i][c] = 1 - prod_{j != i} (1 - occ_j(c))`.
pub fn naive_state_risk(game: &GameInstance, x: &[FlowField]) -> Vec<Vec<f64>> {
    let occ = naive_state_occupancy(game, x);
    let n = occ.len();
    (0..n)
        .map(|i| {
            (0..game.coupling().num_cells())
                .map(|c| {
                    let mut keep = 1.0;
                    for (j, o) in occ.iter().enumerate() {
                        if j != i {
                            keep *= 1.0 - o[c];
                        }
                    }
                    1.0 - keep
                })
                .collect()
        })
        .collect()
}

/// `G[i][c][a]`.
pub fn naive_action_risk(game: &GameInstance, x: &[FlowField]) -> Vec<Vec<Vec<f64>>> {
    let occ = naive_action_occupancy(game, x);
    let n = occ.len();
    let a_n = game.num_actions();
    (0..n)
        .map(|i| {
            (0..game.coupling().num_cells())
                .map(|c| {
                    (0..a_n)
                        .map(|a| {
                            let mut keep = 1.0;
                            for (j, o) in occ.iter().enumerate() {
                                if j != i {
                                    keep *= 1.0 - o[c][a];
                                }
                            }
                            1.0 - keep
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// The potential written out term by term:
/// `sum_i <x_i, C_i> + k sum_c ( m sum_i occ_i(c) + [D] prod_i (1 - occ_i(c))
///  + [G] sum_a prod_i (1 - occ_i(c, a)) )`, `m` = number of enabled terms.
pub fn naive_potential(game: &GameInstance, x: &[FlowField]) -> f64 {
    let mut f = 0.0;
    for (i, xi) in x.iter().enumerate() {
        f += dot(&xi.0, game.player(i).base_costs());
    }
    let (use_d, use_g) = (game.use_state_risk(), game.use_action_risk());
    let m = use_d as u8 as f64 + use_g as u8 as f64;
    let occ = naive_state_occupancy(game, x);
    let occ_a = naive_action_occupancy(game, x);
    let k = game.risk_weight();
    for c in 0..game.coupling().num_cells() {
        let mut term = 0.0;
        for o in &occ {
            term += m * o[c];
        }
        if use_d {
            term += occ.iter().map(|o| 1.0 - o[c]).product::<f64>();
        }
        if use_g {
            for a in 0..game.num_actions() {
                term += occ_a.iter().map(|o| 1.0 - o[c][a]).product::<f64>();
            }
        }
        f += k * term;
    }
    f
}

/// Random coupling over heterogeneous horizons. Each player's stages go to
/// distinct time slots, so a player's occupancy of one cell never exceeds one
/// stage's worth of mass; within a stage states may merge into one cell and
/// some states are left uncoupled. Needs at least two states per player.
pub fn random_coupling(rng: &mut impl Rng, shapes: &[(usize, usize)]) -> CouplingMap {
    let max_stages = shapes.iter().map(|s| s.0).max().unwrap();
    let slots = max_stages + 1;
    let width = 2;
    let cell_of = shapes
        .iter()
        .map(|&(stages, states)| {
            let mut slot_pool: Vec<usize> = (0..slots).collect();
            // random injective stage -> slot, monotone to mimic time
            while slot_pool.len() > stages {
                let drop = rng.gen_range(0..slot_pool.len());
                slot_pool.remove(drop);
            }
            let mut map = vec![None; stages * states];
            for t in 0..stages {
                // state 0 stays uncoupled so a merged cell never holds a whole stage
                for s in 1..states {
                    if rng.gen_bool(0.85) {
                        map[t * states + s] = Some(slot_pool[t] * width + rng.gen_range(0..width));
                    }
                }
            }
            map
        })
        .collect();
    let slot_of_cell = (0..slots * width).map(|c| c / width).collect();
    CouplingMap::new(shapes, cell_of, slot_of_cell).unwrap()
}

/// Draws one `(state, action)` index from a stage's joint distribution.
fn draw(rng: &mut impl Rng, cumulative: &[f64]) -> usize {
    let u: f64 = rng.gen::<f64>() * cumulative[cumulative.len() - 1];
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

/// Monte-Carlo estimate of the collision-risk tensors under independent
/// player placements, identity coupling only. Returns `(D_hat, G_hat)` as
/// hit frequencies over `samples` joint draws.
pub fn monte_carlo_risks(
    rng: &mut impl Rng,
    x: &[FlowField],
    samples: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let shape = x[0].shape();
    let (stages, s_n, a_n) = (shape.stages, shape.states, shape.actions);
    let n = x.len();
    let cells = stages * s_n;
    // per player, per stage cumulative mass over s * A + a
    let cum: Vec<Vec<Vec<f64>>> = x
        .iter()
        .map(|xi| {
            (0..stages)
                .map(|t| {
                    let mut acc = 0.0;
                    (0..s_n * a_n)
                        .map(|k| {
                            acc += xi.get(t, k / a_n, k % a_n);
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut d_hits = vec![vec![0u64; cells]; n];
    let mut g_hits = vec![vec![vec![0u64; a_n]; cells]; n];
    let mut placed = vec![vec![0usize; stages]; n];
    let mut count_s = vec![0u32; cells];
    let mut count_a = vec![0u32; cells * a_n];
    for _ in 0..samples {
        count_s.iter_mut().for_each(|v| *v = 0);
        count_a.iter_mut().for_each(|v| *v = 0);
        for (j, p) in placed.iter_mut().enumerate() {
            for t in 0..stages {
                let k = draw(rng, &cum[j][t]);
                p[t] = k;
                let c = t * s_n + k / a_n;
                count_s[c] += 1;
                count_a[c * a_n + k % a_n] += 1;
            }
        }
        for i in 0..n {
            // remove player i's own placements before asking "anyone else here"
            let mine_s: Vec<usize> = (0..stages).map(|t| t * s_n + placed[i][t] / a_n).collect();
            for c in 0..cells {
                let own = mine_s.iter().filter(|&&m| m == c).count() as u32;
                if count_s[c] > own {
                    d_hits[i][c] += 1;
                }
                for a in 0..a_n {
                    let own_a = (0..stages)
                        .filter(|&t| t * s_n + placed[i][t] / a_n == c && placed[i][t] % a_n == a)
                        .count() as u32;
                    if count_a[c * a_n + a] > own_a {
                        g_hits[i][c][a] += 1;
                    }
                }
            }
        }
    }
    let f = samples as f64;
    (
        d_hits.iter().map(|r| r.iter().map(|&h| h as f64 / f).collect()).collect(),
        g_hits
            .iter()
            .map(|r| r.iter().map(|v| v.iter().map(|&h| h as f64 / f).collect()).collect())
            .collect(),
    )
}

/// The symmetric two-route crossing: one decision at stage 0 (route 0 or 1),
/// then both routes pass through their own state at stage 1.
pub fn two_route(cost_a: f64, cost_b: f64) -> HorizonMdp {
    let (s, a) = (3, 2);
    let mut dense = vec![0.0; s * s * a];
    for from in 0..s {
        for act in 0..a {
            let next = if from == 0 { 1 + act } else { from };
            dense[(next * s + from) * a + act] = 1.0;
        }
    }
    let costs = StageTensor::from_fn(Shape::new(2, s, a), |t, st, _| match (t, st) {
        (1, 1) => cost_a,
        (1, 2) => cost_b,
        _ => 0.0,
    });
    HorizonMdp::from_dense(&dense, costs, vec![1.0, 0.0, 0.0]).unwrap()
}

/// Flow of the two-route player sending `p` to route 1; stage-1 actions are
/// split evenly so that `[G]` terms are symmetric as well.
pub fn two_route_flow(p: f64) -> FlowField {
    let mut x = StageTensor::zeros(Shape::new(2, 3, 2));
    x.set(0, 0, 0, 1.0 - p);
    x.set(0, 0, 1, p);
    for (s, m) in [(1, 1.0 - p), (2, p)] {
        x.set(1, s, 0, m / 2.0);
        x.set(1, s, 1, m / 2.0);
    }
    FlowField(x)
}

/// Grid search of the crossing game's potential over route splits
/// `(p1, p2)` at the given resolution; returns `(min potential, p1, p2)`.
/// With `symmetric`, only `p1 == p2` is searched.
pub fn crossing_grid_search(game: &GameInstance, resolution: f64, symmetric: bool) -> (f64, f64, f64) {
    let steps = (1.0 / resolution).round() as usize;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=steps {
        for j in 0..=steps {
            if symmetric && i != j {
                continue;
            }
            let (p1, p2) = (i as f64 * resolution, j as f64 * resolution);
            let f = naive_potential(game, &[two_route_flow(p1), two_route_flow(p2)]);
            if f < best.0 {
                best = (f, p1, p2);
            }
        }
    }
    best
}

/// Conservation residual check written from the polytope definition.
pub fn max_polytope_residual(mdp: &HorizonMdp, x: &FlowField) -> f64 {
    let sh = mdp.shape();
    // scatter each stage's mass along the kernel rows (sparse for large models)
    let mut inflow = vec![vec![0.0; sh.states]; sh.stages];
    for t in 1..sh.stages {
        let kernel = mdp.kernel(t - 1);
        for s in 0..sh.states {
            for a in 0..sh.actions {
                let m = x.get(t - 1, s, a);
                if m != 0.0 {
                    for (sp, p) in kernel.row(s, a) {
                        inflow[t][sp] += p * m;
                    }
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for s in 0..sh.states {
        let out: f64 = (0..sh.actions).map(|a| x.get(0, s, a)).sum();
        worst = worst.max((out - mdp.initial_dist()[s]).abs());
    }
    for t in 1..sh.stages {
        for sp in 0..sh.states {
            let out: f64 = (0..sh.actions).map(|a| x.get(t, sp, a)).sum();
            worst = worst.max((out - inflow[t][sp]).abs());
        }
    }
    for v in x.values().as_slice() {
        worst = worst.max(-v);
    }
    worst
}
