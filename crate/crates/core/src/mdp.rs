//! Finite-horizon MDP primitives.
//!
//! A player's MDP has stages `0..=T`, states `0..S` and actions `0..A`. Every
//! action is admissible in every state; models with ragged action sets mask
//! the missing slots with prohibitive costs (see [`crate::airspace`]).
//!
//! Transition probabilities are addressed as `(t, next, from, action)`, i.e.
//! `transition(t, s', s, a)` is the probability of arriving in `s'` at stage
//! `t + 1` after playing `a` in `s` at stage `t`. They are stored as one
//! sparse [`Kernel`] per stage, so stationary dynamics can share a kernel.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{CostTensor, Shape, StageTensor};

/// Row-sum tolerance for transition kernels and initial distributions.
pub const PROBABILITY_TOL: f64 = 1e-9;
/// Absolute residual tolerance for occupation-measure constraints.
pub const FLOW_TOL: f64 = 1e-8;

/// Sparse `(next, probability)` rows of one state, one per action.
type StateRows = Vec<Vec<(usize, f64)>>;

/// One stage's transition kernel in compressed rows, one row per `(from, action)`.
///
/// The rows live behind an `Arc`, so variants that differ in a few states
/// (see [`Kernel::with_state_rows`]) share storage with their base kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    states: usize,
    actions: usize,
    rows: Arc<CsrRows>,
    overrides: Vec<(usize, StateRows)>,
}

#[derive(Debug, PartialEq)]
struct CsrRows {
    offsets: Vec<usize>,
    next: Vec<usize>,
    prob: Vec<f64>,
}

fn check_row(states: usize, label: &str, row: &[(usize, f64)]) -> Result<()> {
    let mut total = 0.0;
    for &(s_next, p) in row {
        if s_next >= states {
            return Err(Error::InvalidModel(format!(
                "{label}: next state {s_next} out of range"
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidModel(format!(
                "{label}: probability {p} outside [0, 1]"
            )));
        }
        total += p;
    }
    if (total - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::InvalidModel(format!("{label}: row sums to {total}")));
    }
    Ok(())
}

impl Kernel {
    /// Builds a kernel from rows indexed `from * actions + action`. Each row
    /// lists `(next_state, probability)` pairs; zero probabilities are dropped
    /// and repeated targets are kept as separate entries.
    pub fn from_rows(states: usize, actions: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != states * actions {
            return Err(Error::Dimension(format!(
                "kernel needs {} rows, got {}",
                states * actions,
                rows.len()
            )));
        }
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut next = Vec::new();
        let mut prob = Vec::new();
        offsets.push(0);
        for (row_idx, row) in rows.into_iter().enumerate() {
            let (from, a) = (row_idx / actions, row_idx % actions);
            check_row(states, &format!("transition row (state {from}, action {a})"), &row)?;
            for (s_next, p) in row {
                if p > 0.0 {
                    next.push(s_next);
                    prob.push(p);
                }
            }
            offsets.push(next.len());
        }
        Ok(Self {
            states,
            actions,
            rows: Arc::new(CsrRows { offsets, next, prob }),
            overrides: Vec::new(),
        })
    }

    /// A copy of this kernel whose rows for state `from` are replaced by
    /// `rows` (one per action).
    pub fn with_state_rows(&self, from: usize, rows: StateRows) -> Result<Self> {
        if from >= self.states || rows.len() != self.actions {
            return Err(Error::Dimension(format!(
                "override for state {from} needs {} rows, got {}",
                self.actions,
                rows.len()
            )));
        }
        for (a, row) in rows.iter().enumerate() {
            check_row(self.states, &format!("override (state {from}, action {a})"), row)?;
        }
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().filter(|&(_, p)| p > 0.0).collect())
            .collect();
        let mut out = self.clone();
        out.overrides.retain(|(s, _)| *s != from);
        out.overrides.push((from, rows));
        Ok(out)
    }

    /// Extracts stage `t` from a dense `(t, next, from, action)` tensor.
    fn from_dense_stage(
        states: usize,
        actions: usize,
        t: usize,
        dense: &[f64],
    ) -> Result<Self> {
        let idx = |next: usize, from: usize, a: usize| ((t * states + next) * states + from) * actions + a;
        let rows = (0..states * actions)
            .map(|row| {
                let (from, a) = (row / actions, row % actions);
                (0..states)
                    .map(|next| (next, dense[idx(next, from, a)]))
                    .collect()
            })
            .collect();
        Self::from_rows(states, actions, rows)
    }

    /// `(next_state, probability)` pairs reachable from `(from, action)`.
    #[inline]
    pub fn row(&self, from: usize, action: usize) -> KernelRow<'_> {
        if !self.overrides.is_empty() {
            if let Some((_, rows)) = self.overrides.iter().find(|(s, _)| *s == from) {
                return KernelRow::Override(rows[action].iter());
            }
        }
        let r = from * self.actions + action;
        let span = self.rows.offsets[r]..self.rows.offsets[r + 1];
        KernelRow::Base(
            self.rows.next[span.clone()]
                .iter()
                .zip(self.rows.prob[span].iter()),
        )
    }

    pub fn probability(&self, next: usize, from: usize, action: usize) -> f64 {
        self.row(from, action)
            .filter(|&(s, _)| s == next)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }
}

pub enum KernelRow<'a> {
    Base(std::iter::Zip<std::slice::Iter<'a, usize>, std::slice::Iter<'a, f64>>),
    Override(std::slice::Iter<'a, (usize, f64)>),
}

impl Iterator for KernelRow<'_> {
    type Item = (usize, f64);

    #[inline]
    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            KernelRow::Base(it) => it.next().map(|(&s, &p)| (s, p)),
            KernelRow::Override(it) => it.next().copied(),
        }
    }
}

/// One player's finite-horizon MDP.
#[derive(Debug, Clone)]
pub struct HorizonMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    kernels: Vec<Arc<Kernel>>,
    base_costs: CostTensor,
    initial_dist: Vec<f64>,
}

impl HorizonMdp {
    /// `kernels[t]` drives the move from stage `t` to `t + 1`, so exactly
    /// `horizon` kernels are needed.
    pub fn new(
        kernels: Vec<Arc<Kernel>>,
        base_costs: CostTensor,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let shape = base_costs.shape();
        if shape.stages == 0 || shape.states == 0 || shape.actions == 0 {
            return Err(Error::Dimension(format!("degenerate cost shape {shape:?}")));
        }
        let horizon = shape.stages - 1;
        if kernels.len() != horizon {
            return Err(Error::Dimension(format!(
                "horizon {horizon} needs {horizon} kernels, got {}",
                kernels.len()
            )));
        }
        for (t, k) in kernels.iter().enumerate() {
            if k.states != shape.states || k.actions != shape.actions {
                return Err(Error::Dimension(format!(
                    "kernel {t} is {}x{}, costs are {}x{}",
                    k.states, k.actions, shape.states, shape.actions
                )));
            }
        }
        if initial_dist.len() != shape.states {
            return Err(Error::Dimension(format!(
                "initial distribution has {} entries for {} states",
                initial_dist.len(),
                shape.states
            )));
        }
        if initial_dist.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidModel(
                "initial distribution has a negative entry".into(),
            ));
        }
        let total: f64 = initial_dist.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::InvalidModel(format!(
                "initial distribution sums to {total}"
            )));
        }
        if base_costs.as_slice().iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("base costs must be finite".into()));
        }
        Ok(Self {
            num_states: shape.states,
            num_actions: shape.actions,
            horizon,
            kernels,
            base_costs,
            initial_dist,
        })
    }

    /// Builds an MDP from a dense transition tensor laid out as
    /// `((t * S + next) * S + from) * A + action`.
    pub fn from_dense(
        transitions: &[f64],
        base_costs: CostTensor,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let shape = base_costs.shape();
        let (s, a) = (shape.states, shape.actions);
        let horizon = shape.stages.saturating_sub(1);
        if transitions.len() != horizon * s * s * a {
            return Err(Error::Dimension(format!(
                "dense transitions need {} entries, got {}",
                horizon * s * s * a,
                transitions.len()
            )));
        }
        let kernels = (0..horizon)
            .map(|t| Kernel::from_dense_stage(s, a, t, transitions).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kernels, base_costs, initial_dist)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `T`; there are `T + 1` decision stages.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn shape(&self) -> Shape {
        self.base_costs.shape()
    }

    pub fn kernel(&self, t: usize) -> &Kernel {
        &self.kernels[t]
    }

    pub fn transition(&self, t: usize, next: usize, from: usize, action: usize) -> f64 {
        self.kernels[t].probability(next, from, action)
    }

    pub fn base_costs(&self) -> &CostTensor {
        &self.base_costs
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    fn check_shape(&self, what: &str, shape: Shape) -> Result<()> {
        if shape != self.shape() {
            return Err(Error::Dimension(format!(
                "{what} has shape {shape:?}, mdp expects {:?}",
                self.shape()
            )));
        }
        Ok(())
    }
}

/// A state-action occupation measure `x[t, s, a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowField(pub StageTensor);

impl FlowField {
    pub fn shape(&self) -> Shape {
        self.0.shape()
    }

    pub fn values(&self) -> &StageTensor {
        &self.0
    }

    pub fn get(&self, t: usize, s: usize, a: usize) -> f64 {
        self.0.get(t, s, a)
    }

    /// Probability of being in each state at stage `t`.
    pub fn state_marginal(&self, t: usize) -> Vec<f64> {
        self.0.state_marginal(t)
    }
}

/// Optimal cost-to-go `Q[t, s, a]` of taking `a` at `(t, s)` and acting
/// optimally afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct QValues(pub StageTensor);

impl QValues {
    pub fn values(&self) -> &StageTensor {
        &self.0
    }

    pub fn get(&self, t: usize, s: usize, a: usize) -> f64 {
        self.0.get(t, s, a)
    }

    pub fn min_at(&self, t: usize, s: usize) -> f64 {
        self.0.row(t, s).iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A deterministic Markov policy, one action per `(t, s)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    stages: usize,
    states: usize,
    actions: usize,
    action_of: Vec<usize>,
}

impl Policy {
    pub fn new(stages: usize, states: usize, actions: usize, action_of: Vec<usize>) -> Result<Self> {
        if action_of.len() != stages * states {
            return Err(Error::Dimension(format!(
                "policy needs {} entries, got {}",
                stages * states,
                action_of.len()
            )));
        }
        if let Some(bad) = action_of.iter().find(|&&a| a >= actions) {
            return Err(Error::InvalidModel(format!("action {bad} out of range")));
        }
        Ok(Self {
            stages,
            states,
            actions,
            action_of,
        })
    }

    /// Plays `action` everywhere.
    pub fn constant(shape: Shape, action: usize) -> Result<Self> {
        Self::new(
            shape.stages,
            shape.states,
            shape.actions,
            vec![action; shape.stages * shape.states],
        )
    }

    #[inline]
    pub fn action(&self, t: usize, s: usize) -> usize {
        self.action_of[t * self.states + s]
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.stages, self.states, self.actions)
    }
}

/// Exact finite-horizon Q-value recursion under `costs` (no discounting).
pub fn backward_induction(mdp: &HorizonMdp, costs: &CostTensor) -> Result<QValues> {
    mdp.check_shape("cost tensor", costs.shape())?;
    if costs.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidModel("costs must be finite".into()));
    }
    let shape = mdp.shape();
    let (n_s, n_a) = (shape.states, shape.actions);
    let mut q = costs.clone();
    let mut value_next = vec![0.0; n_s];
    for t in (0..mdp.horizon).rev() {
        for (s, v) in value_next.iter_mut().enumerate() {
            *v = q.row(t + 1, s).iter().copied().fold(f64::INFINITY, f64::min);
        }
        let kernel = mdp.kernel(t);
        for s in 0..n_s {
            let row = q.row_mut(t, s);
            for (a, q_sa) in row.iter_mut().enumerate().take(n_a) {
                let expected: f64 = kernel.row(s, a).map(|(s2, p)| p * value_next[s2]).sum();
                *q_sa += expected;
            }
        }
    }
    Ok(QValues(q))
}

/// Greedy policy; ties go to the lowest action index.
pub fn greedy_policy(q: &QValues) -> Policy {
    let shape = q.0.shape();
    let mut action_of = Vec::with_capacity(shape.stages * shape.states);
    for t in 0..shape.stages {
        for s in 0..shape.states {
            let row = q.0.row(t, s);
            let mut best = 0;
            for (a, &v) in row.iter().enumerate().skip(1) {
                if v < row[best] {
                    best = a;
                }
            }
            action_of.push(best);
        }
    }
    Policy {
        stages: shape.stages,
        states: shape.states,
        actions: shape.actions,
        action_of,
    }
}

/// Forward-propagates the initial distribution under `policy`; the result is
/// a vertex of the player's occupation-measure polytope.
pub fn policy_flow(mdp: &HorizonMdp, policy: &Policy) -> Result<FlowField> {
    mdp.check_shape("policy", policy.shape())?;
    let shape = mdp.shape();
    let mut x = StageTensor::zeros(shape);
    let mut mu = mdp.initial_dist.clone();
    let mut mu_next = vec![0.0; shape.states];
    for t in 0..shape.stages {
        for (s, &m) in mu.iter().enumerate() {
            x.set(t, s, policy.action(t, s), m);
        }
        if t == mdp.horizon {
            break;
        }
        mu_next.iter_mut().for_each(|v| *v = 0.0);
        let kernel = mdp.kernel(t);
        for (s, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (s2, p) in kernel.row(s, policy.action(t, s)) {
                mu_next[s2] += m * p;
            }
        }
        std::mem::swap(&mut mu, &mut mu_next);
    }
    Ok(FlowField(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    NonNegativity,
    InitialMarginal,
    Conservation,
    StageMass,
}

/// A violated occupation-measure constraint.
///
/// `state`/`action` are `None` when the constraint does not refer to one
/// (stage-mass violations have neither). Conservation violations are reported
/// at the arrival stage `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowViolation {
    pub kind: ConstraintKind,
    pub stage: usize,
    pub state: Option<usize>,
    pub action: Option<usize>,
    pub residual: f64,
}

impl fmt::Display for FlowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at stage {}", self.kind, self.stage)?;
        if let Some(s) = self.state {
            write!(f, ", state {s}")?;
        }
        if let Some(a) = self.action {
            write!(f, ", action {a}")?;
        }
        write!(f, " (residual {:.3e})", self.residual)
    }
}

/// Lists every occupation-measure constraint that `x` violates by more than
/// [`FLOW_TOL`].
pub fn validate_flow(mdp: &HorizonMdp, x: &FlowField) -> Result<Vec<FlowViolation>> {
    mdp.check_shape("flow", x.shape())?;
    let shape = mdp.shape();
    let mut out = Vec::new();
    for t in 0..shape.stages {
        for s in 0..shape.states {
            for (a, &v) in x.0.row(t, s).iter().enumerate() {
                if !(v >= -FLOW_TOL) {
                    out.push(FlowViolation {
                        kind: ConstraintKind::NonNegativity,
                        stage: t,
                        state: Some(s),
                        action: Some(a),
                        residual: v,
                    });
                }
            }
        }
    }
    for (s, (m, p0)) in x.state_marginal(0).iter().zip(&mdp.initial_dist).enumerate() {
        let r = m - p0;
        if !(r.abs() <= FLOW_TOL) {
            out.push(FlowViolation {
                kind: ConstraintKind::InitialMarginal,
                stage: 0,
                state: Some(s),
                action: None,
                residual: r,
            });
        }
    }
    let mut inflow = vec![0.0; shape.states];
    for t in 0..mdp.horizon {
        inflow.iter_mut().for_each(|v| *v = 0.0);
        let kernel = mdp.kernel(t);
        for s in 0..shape.states {
            for (a, &v) in x.0.row(t, s).iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                for (s2, p) in kernel.row(s, a) {
                    inflow[s2] += p * v;
                }
            }
        }
        for (s2, m) in x.state_marginal(t + 1).into_iter().enumerate() {
            let r = m - inflow[s2];
            if !(r.abs() <= FLOW_TOL) {
                out.push(FlowViolation {
                    kind: ConstraintKind::Conservation,
                    stage: t + 1,
                    state: Some(s2),
                    action: None,
                    residual: r,
                });
            }
        }
    }
    for t in 0..shape.stages {
        let r = x.state_marginal(t).iter().sum::<f64>() - 1.0;
        if !(r.abs() <= FLOW_TOL) {
            out.push(FlowViolation {
                kind: ConstraintKind::StageMass,
                stage: t,
                state: None,
                action: None,
                residual: r,
            });
        }
    }
    Ok(out)
}

/// `Σ x[t,s,a] · costs[t,s,a]`.
pub fn flow_cost(x: &FlowField, costs: &CostTensor) -> Result<f64> {
    x.0.dot(costs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn self_loop(horizon: usize, cost: f64) -> HorizonMdp {
        let shape = Shape::new(horizon + 1, 1, 1);
        HorizonMdp::from_dense(
            &vec![1.0; horizon],
            StageTensor::filled(shape, cost),
            vec![1.0],
        )
        .unwrap()
    }

    /// s0 -> s1 -> s2 -> s2 with one action.
    fn chain() -> HorizonMdp {
        let shape = Shape::new(4, 3, 1);
        let k = Arc::new(
            Kernel::from_rows(3, 1, vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![(2, 1.0)]]).unwrap(),
        );
        HorizonMdp::new(vec![k; 3], StageTensor::zeros(shape), vec![1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn horizon_zero_returns_costs() {
        let shape = Shape::new(1, 2, 3);
        let c = StageTensor::from_fn(shape, |_, s, a| (s * 3 + a) as f64 - 1.5);
        let mdp = HorizonMdp::new(vec![], c.clone(), vec![0.5, 0.5]).unwrap();
        assert_eq!(backward_induction(&mdp, &c).unwrap().0, c);
    }

    #[test]
    fn telescoping_self_loop() {
        let mdp = self_loop(2, 1.0);
        let q = backward_induction(&mdp, mdp.base_costs()).unwrap();
        assert_eq!(q.get(0, 0, 0), 3.0);
        assert_eq!(q.get(1, 0, 0), 2.0);
        assert_eq!(q.get(2, 0, 0), 1.0);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let mdp = self_loop(2, 1.0);
        let bad = StageTensor::zeros(Shape::new(2, 1, 1));
        assert!(matches!(
            backward_induction(&mdp, &bad),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            validate_flow(&mdp, &FlowField(bad)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn argmin_and_tie_break() {
        let shape = Shape::new(1, 2, 3);
        let q = QValues(
            StageTensor::from_vec(shape, vec![3.0, 1.0, 2.0, 1.0, 1.0, 2.0]).unwrap(),
        );
        let pi = greedy_policy(&q);
        assert_eq!(pi.action(0, 0), 1);
        assert_eq!(pi.action(0, 1), 0);
    }

    #[test]
    fn chain_moves_unit_mass() {
        let mdp = chain();
        let pi = Policy::constant(mdp.shape(), 0).unwrap();
        let x = policy_flow(&mdp, &pi).unwrap();
        assert_eq!(x.state_marginal(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(x.state_marginal(1), vec![0.0, 1.0, 0.0]);
        assert_eq!(x.state_marginal(2), vec![0.0, 0.0, 1.0]);
        assert!(validate_flow(&mdp, &x).unwrap().is_empty());
    }

    #[test]
    fn beta_diversion_marginals() {
        let shape = Shape::new(2, 3, 2);
        let k = Kernel::from_rows(
            3,
            2,
            vec![
                vec![(1, 0.95), (2, 0.05)],
                vec![(2, 0.95), (1, 0.05)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
            ],
        )
        .unwrap();
        let mdp = HorizonMdp::new(
            vec![Arc::new(k)],
            StageTensor::zeros(shape),
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let x = policy_flow(&mdp, &Policy::constant(shape, 0).unwrap()).unwrap();
        let m = x.state_marginal(1);
        assert!((m[1] - 0.95).abs() < 1e-15);
        assert!((m[2] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn perturbed_entry_flags_conservation_at_that_stage_state() {
        let mdp = chain();
        let mut x = policy_flow(&mdp, &Policy::constant(mdp.shape(), 0).unwrap()).unwrap();
        let v = x.get(2, 2, 0);
        x.0.set(2, 2, 0, v + 0.01);
        let viol = validate_flow(&mdp, &x).unwrap();
        assert!(viol.iter().any(|v| v.kind == ConstraintKind::Conservation
            && v.stage == 2
            && v.state == Some(2)
            && (v.residual - 0.01).abs() < 1e-12));
    }

    #[test]
    fn negative_entry_flagged() {
        let mdp = chain();
        let mut x = policy_flow(&mdp, &Policy::constant(mdp.shape(), 0).unwrap()).unwrap();
        x.0.set(1, 0, 0, -1e-3);
        let viol = validate_flow(&mdp, &x).unwrap();
        assert!(viol.iter().any(|v| v.kind == ConstraintKind::NonNegativity
            && v.stage == 1
            && v.state == Some(0)
            && v.action == Some(0)));
    }

    #[test]
    fn flow_cost_basics() {
        let mdp = chain();
        let x = policy_flow(&mdp, &Policy::constant(mdp.shape(), 0).unwrap()).unwrap();
        assert_eq!(flow_cost(&x, &StageTensor::zeros(mdp.shape())).unwrap(), 0.0);
        let c = StageTensor::filled(mdp.shape(), 2.5);
        assert_eq!(flow_cost(&x, &c).unwrap(), 2.5 * 4.0);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(Kernel::from_rows(2, 1, vec![vec![(0, 0.5)], vec![(1, 1.0)]]).is_err());
        assert!(Kernel::from_rows(2, 1, vec![vec![(2, 1.0)], vec![(1, 1.0)]]).is_err());
        assert!(Kernel::from_rows(1, 1, vec![vec![(0, 1.5), (0, -0.5)]]).is_err());
        let shape = Shape::new(1, 2, 1);
        assert!(HorizonMdp::new(vec![], StageTensor::zeros(shape), vec![0.6, 0.6]).is_err());
        assert!(HorizonMdp::new(vec![], StageTensor::zeros(shape), vec![1.5, -0.5]).is_err());
        assert!(
            HorizonMdp::new(vec![], StageTensor::filled(shape, f64::NAN), vec![1.0, 0.0]).is_err()
        );
    }
}
