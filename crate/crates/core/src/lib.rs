//! Distributionally robust off-policy evaluation and policy optimization for
//! average-reward tabular Markov decision processes.
//!
//! The toolkit estimates the long-run average reward of an evaluation policy
//! from a single correlated trajectory generated by a behavioral policy. The
//! central statistical object is the stationary state-action-next-state
//! distribution ξ, estimated by counting transitions (with a ghost transition
//! closing the trajectory into a cycle). Robust estimates are obtained by
//! minimizing the average reward over all kernels inside a weighted
//! relative-entropy ball around the empirical kernel; the minimization is a
//! non-convex problem solved by projected Langevin dynamics, and policies are
//! optimized against that critic by projected gradient ascent.
//!
//! Module map:
//!
//! - [`mdp`]: tabular MDPs, induced state-action chains, stationary
//!   distributions, gains and bias functions.
//! - [`empirical`]: trajectory simulation, empirical estimators and the
//!   maps between doublet and state-action-next-state distributions.
//! - [`divergence`]: conditional relative entropies and the finite-sample
//!   large-deviations bound.
//! - [`ope`]: plug-in and robust off-policy value estimators.
//! - [`robust_eval`]: the uncertainty set, its projection and the Langevin
//!   critic.
//! - [`robust_opt`]: the actor-critic policy optimizer.
//! - [`bench`]: benchmark MDPs, experiment runners and config handling used
//!   by the `drmdp` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod divergence;
pub mod empirical;
mod error;
mod graph;
pub mod mdp;
pub mod ope;
pub mod rng;
pub mod robust_eval;
pub mod robust_opt;

pub use error::{Error, Result};

/// Absolute tolerance used when validating that probability tables sum to one.
pub const PROB_TOL: f64 = 1e-12;

/// Entries at or below this threshold are treated as outside the support of a
/// floating-point distribution.
pub const SUPPORT_EPS: f64 = 1e-15;
