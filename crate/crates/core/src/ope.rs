//! Off-policy value estimators built on the state-action-next-state distribution.
//!
//! The average reward of an evaluation policy π depends on the data only
//! through the kernel encoded in ξ. The plug-in (direct) estimator evaluates
//! π on the empirical kernel. The robust estimator instead reports the worst
//! average reward over all kernels within relative-entropy budget ρ of the
//! empirical one, which trades a small downward bias for an exponentially
//! small probability of overestimating the true value.

use crate::empirical::{kernel_from_sans, sans_membership, Membership, SansDistribution};
use crate::error::{precondition, shape};
use crate::mdp::{average_reward, stationary_sans, Kernel, Policy, Reward};
use crate::robust_eval::{build_uncertainty_set, kl_constraint_value, langevin_critic, KernelParam, LangevinConfig};
use crate::Result;

/// Default critic tolerance δ.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
/// Default weight of the uniform distribution in the smoothing fallback.
pub const DEFAULT_SMOOTHING_WEIGHT: f64 = 1e-6;

fn check_shapes(policy: &Policy, xi: &SansDistribution) -> Result<()> {
    if policy.num_states() != xi.num_states() || policy.num_actions() != xi.num_actions() {
        return Err(shape("policy and distribution shapes differ"));
    }
    Ok(())
}

fn check_positive(policy: &Policy) -> Result<()> {
    if policy.min_prob() <= 0.0 {
        return Err(precondition("evaluation policy must be strictly positive"));
    }
    Ok(())
}

/// Distribution shift `f_π(ξ₀)`: the stationary distribution of the kernel
/// encoded in ξ₀ when actions are drawn from π.
pub fn shift_distribution(policy: &Policy, xi0: &SansDistribution) -> Result<SansDistribution> {
    check_shapes(policy, xi0)?;
    check_positive(policy)?;
    xi0.ensure_xi0()?;
    let kernel = kernel_from_sans(xi0).into_kernel()?;
    stationary_sans(policy, &kernel)
}

/// `V(ξ) = Σ r(s,a) ξ(s,a,s')`.
pub fn value_of_sans(xi: &SansDistribution, reward: &Reward) -> Result<f64> {
    if reward.num_states() != xi.num_states() || reward.num_actions() != xi.num_actions() {
        return Err(shape("reward and distribution shapes differ"));
    }
    Ok(xi.state_action_marginal().iter().zip(reward.as_slice()).map(|(m, r)| m * r).sum())
}

/// Plug-in estimate `V(f_π(ξ̂))`, or `None` when ξ̂ lacks a strongly
/// connected support (the estimator is undefined there) or the inputs do
/// not fit together.
pub fn plug_in_estimate(policy: &Policy, xi_hat: &SansDistribution, reward: &Reward) -> Option<f64> {
    if sans_membership(xi_hat) != Membership::InXi0 {
        return None;
    }
    let shifted = shift_distribution(policy, xi_hat).ok()?;
    value_of_sans(&shifted, reward).ok()
}

/// Mixes ξ with the uniform distribution at `weight`. Any mixture of two
/// balanced distributions is balanced, and the uniform component makes the
/// support complete, so the result always has a strongly connected support.
/// Returns the input unchanged (and `false`) when it already qualifies.
pub fn smooth_into_xi0(xi: &SansDistribution, weight: f64) -> Result<(SansDistribution, bool)> {
    if !(weight > 0.0 && weight <= 1.0) {
        return Err(precondition("smoothing weight must lie in (0, 1]"));
    }
    match sans_membership(xi) {
        Membership::InXi0 => Ok((xi.clone(), false)),
        Membership::NotInXi => Err(precondition("cannot smooth an unbalanced distribution")),
        Membership::InXiOnly => {
            let uniform = SansDistribution::uniform(xi.num_states(), xi.num_actions());
            Ok((xi.mix(&uniform, weight)?, true))
        }
    }
}

/// Inputs of a robust evaluation.
#[derive(Debug, Clone)]
pub struct EvaluationRequest {
    pub policy: Policy,
    pub empirical: SansDistribution,
    pub radius: f64,
    pub reward: Reward,
}

/// Solver settings of a robust evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustConfig {
    pub critic: LangevinConfig,
    /// Tolerance δ used to judge whether the critic has settled.
    pub tolerance: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self { critic: LangevinConfig::default(), tolerance: DEFAULT_TOLERANCE }
    }
}

/// Diagnostics attached to a robust value.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustDiagnostics {
    /// Value at the center kernel, i.e. the plug-in estimate.
    pub center_value: f64,
    /// Budget used by the worst kernel.
    pub constraint_value: f64,
    /// False when the second half of the critic run still improved the
    /// best value by more than the tolerance.
    pub converged: bool,
    pub critic_iterations: usize,
}

/// A robust value with the kernel attaining it.
#[derive(Debug, Clone)]
pub struct RobustValue {
    pub value: f64,
    pub worst_kernel: Kernel,
    pub diagnostics: RobustDiagnostics,
}

/// Worst-case average reward of π over the uncertainty set of radius ρ
/// around ξ', computed with the Langevin critic.
pub fn robust_value(req: &EvaluationRequest, cfg: &RobustConfig) -> Result<RobustValue> {
    robust_value_from(req, cfg, None)
}

/// [`robust_value`] with the critic started from `init` (projected onto the
/// uncertainty set) instead of the center kernel. Useful when sweeping radii
/// in increasing order, where each worst kernel stays feasible for the next.
pub fn robust_value_from(req: &EvaluationRequest, cfg: &RobustConfig, init: Option<&Kernel>) -> Result<RobustValue> {
    check_shapes(&req.policy, &req.empirical)?;
    check_positive(&req.policy)?;
    if !(req.radius > 0.0) {
        return Err(precondition("robust evaluation needs a positive radius"));
    }
    let set = build_uncertainty_set(&req.empirical, req.radius)?;
    let center_value = average_reward(&req.policy, set.center(), &req.reward)?;
    let init = init.map(KernelParam::from_kernel);
    let res = langevin_critic(&req.policy, &set, &req.reward, &cfg.critic, init.as_ref())?;
    let constraint_value = kl_constraint_value(&set, &res.best_kernel);
    Ok(RobustValue {
        value: res.best_value,
        diagnostics: RobustDiagnostics {
            center_value,
            constraint_value,
            converged: res.best_value_first_half - res.best_value <= cfg.tolerance,
            critic_iterations: cfg.critic.iterations,
        },
        worst_kernel: res.best_kernel,
    })
}

/// Shrinking radius schedule `ρ_T = c / T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSchedule {
    pub scale: f64,
}

impl Default for RadiusSchedule {
    fn default() -> Self {
        Self { scale: 4.5 }
    }
}

impl RadiusSchedule {
    pub fn radius(&self, len: u64) -> f64 {
        self.scale / len as f64
    }
}

/// `ρ_T = 4.5 / T`.
pub fn consistency_schedule(len: u64) -> f64 {
    RadiusSchedule::default().radius(len)
}
