//! Nash equilibria of finite-horizon MDP congestion games with collision-risk
//! costs.
//!
//! Each player solves its own finite-horizon MDP, but its stage costs are
//! raised by the probability that some other player occupies the same
//! congestion cell. The game admits a multilinear potential whose gradient is
//! exactly every player's congestion cost, so first-order stationary points of
//! the potential over the product of occupation-measure polytopes are Nash
//! equilibria. [`solver::frank_wolfe`] finds such points, using backward
//! induction as the linear-minimization oracle.
//!
//! Modules:
//! - [`mdp`]: occupation measures, backward induction, policy flows.
//! - [`congestion`]: collision risks, congestion costs, the potential, Nash certificates.
//! - [`solver`]: Frank-Wolfe with harmonic, Armijo and exact line-search steps.
//! - [`airspace`]: aircraft MDPs and interval coupling built from flight plans.
//! - [`cli`]: the `mdpcg` command-line front end and its report files.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airspace;
pub mod cli;
pub mod congestion;
pub mod error;
pub mod mdp;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{CostTensor, Shape, StageTensor};
