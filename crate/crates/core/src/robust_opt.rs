//! The actor: projected policy-gradient ascent against the Langevin critic.
//!
//! At every iteration the critic finds a (near) worst-case kernel for the
//! current policy, the actor takes a gradient step on the average reward
//! under that kernel, and the result is projected back onto the exploratory
//! policies `Π_ε = {π : π(a|s) ≥ ε}`. The critic is warm-started from the
//! previous worst kernel. The best iterate by critic value is returned.

use std::io::Write;

use serde::Serialize;

use crate::empirical::SansDistribution;
use crate::error::{precondition, shape};
use crate::mdp::{evaluate, Kernel, Policy, Reward};
use crate::rng::STREAM_CRITIC;
use crate::robust_eval::{build_uncertainty_set, langevin_critic, KernelParam, LangevinConfig};
use crate::{Error, Result};

/// `∂V/∂π(a|s) = μ_S(s) h(s,a)`, laid out as `s * A + a`.
pub fn policy_gradient(policy: &Policy, kernel: &Kernel, reward: &Reward) -> Result<Vec<f64>> {
    let eval = evaluate(policy, kernel, reward)?;
    let mu_s = eval.state_marginal();
    let na = policy.num_actions();
    Ok(eval.bias.h.iter().enumerate().map(|(x, h)| mu_s[x / na] * h).collect())
}

/// Euclidean projection of `v` onto `{p ≥ 0, Σ p = mass}` (sort-based).
fn project_simplex(v: &[f64], mass: f64) -> Vec<f64> {
    if mass <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - mass) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projects every row of a raw `S × A` table onto `{p ≥ ε, Σ p = 1}`.
pub fn project_policy(raw: &[f64], num_states: usize, num_actions: usize, eps: f64) -> Result<Policy> {
    if raw.len() != num_states * num_actions {
        return Err(shape("raw policy table has the wrong size"));
    }
    if eps < 0.0 || eps * num_actions as f64 > 1.0 + 1e-12 {
        return Err(precondition("exploration floor must satisfy 0 ≤ ε·A ≤ 1"));
    }
    let mass = (1.0 - eps * num_actions as f64).max(0.0);
    let mut probs = Vec::with_capacity(raw.len());
    for row in raw.chunks(num_actions) {
        // Rows already in Π_ε are returned bit for bit.
        if row.iter().all(|&v| v >= eps) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12 {
            probs.extend_from_slice(row);
            continue;
        }
        let shifted: Vec<f64> = row.iter().map(|v| v - eps).collect();
        let mut p: Vec<f64> = project_simplex(&shifted, mass).iter().map(|v| v + eps).collect();
        // Put any round-off on the largest entry so the row sums to one.
        let residual = 1.0 - p.iter().sum::<f64>();
        let top = (0..p.len()).max_by(|&i, &j| p[i].total_cmp(&p[j])).unwrap_or(0);
        p[top] += residual;
        probs.extend(p);
    }
    Policy::new(num_states, num_actions, probs)
}

/// `π_ε(a|s) = ε/A + (1 - ε) π(a|s)`.
pub fn epsilon_greedy(policy: &Policy, eps: f64) -> Result<Policy> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(precondition("ε must lie in [0, 1]"));
    }
    let na = policy.num_actions() as f64;
    let probs = policy.as_slice().iter().map(|p| eps / na + (1.0 - eps) * p).collect();
    Policy::new(policy.num_states(), policy.num_actions(), probs)
}

/// Step size and critic tolerance `η = (1/L) sqrt(2S/K)`, `δ = (L/2) sqrt(2S/K)`.
pub fn step_schedule(iterations: usize, num_states: usize, lipschitz: f64) -> Result<(f64, f64)> {
    if iterations == 0 || !(lipschitz > 0.0) {
        return Err(precondition("step schedule needs K ≥ 1 and L > 0"));
    }
    let root = (2.0 * num_states as f64 / iterations as f64).sqrt();
    Ok((root / lipschitz, 0.5 * lipschitz * root))
}

/// Hyperparameters of the actor-critic loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorConfig {
    /// Number of actor steps K.
    pub iterations: usize,
    pub step_size: f64,
    /// Critic tolerance δ.
    pub tolerance: f64,
    /// Exploration floor ε.
    pub epsilon: f64,
    /// Critic settings; the stream is replaced per iteration.
    pub critic: LangevinConfig,
    /// Iteration multiplier for the final re-evaluation of the returned policy.
    pub reevaluation_factor: usize,
}

impl ActorConfig {
    /// Config with the step size and tolerance of [`step_schedule`] using
    /// `L = max |r|`, and a warm-started critic of 2,000 iterations.
    pub fn scheduled(iterations: usize, epsilon: f64, reward: &Reward, seed: u64) -> Result<Self> {
        let lipschitz = reward.max_abs().max(1e-12);
        let (step_size, tolerance) = step_schedule(iterations.max(1), reward.num_states(), lipschitz)?;
        Ok(Self {
            iterations,
            step_size,
            tolerance,
            epsilon,
            critic: LangevinConfig::new(2_000, 0.01, 50.0, seed),
            reevaluation_factor: 2,
        })
    }

    fn validate(&self, num_actions: usize) -> Result<()> {
        if !(self.epsilon > 0.0) || self.epsilon * num_actions as f64 > 1.0 + 1e-12 {
            return Err(precondition("exploration floor must satisfy ε > 0 and ε·A ≤ 1"));
        }
        if !(self.step_size >= 0.0) || !(self.tolerance > 0.0) {
            return Err(precondition("step size must be nonnegative and tolerance positive"));
        }
        Ok(())
    }
}

/// One actor iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorRecord {
    pub k: usize,
    pub policy: Policy,
    /// Critic value of the policy.
    pub value: f64,
    /// Euclidean norm of the policy gradient under the critic's kernel.
    pub grad_norm: f64,
}

/// Outcome of an actor-critic run.
#[derive(Debug, Clone)]
pub struct ActorResult {
    pub policy: Policy,
    /// Robust value of the returned policy after re-evaluation.
    pub value: f64,
    pub best_iteration: usize,
    pub worst_kernel: Kernel,
    pub trace: Vec<ActorRecord>,
}

/// A failed run, with the iterates completed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("actor-critic failed after {} iterations: {error}", trace.len())]
pub struct ActorFailure {
    pub error: Error,
    pub trace: Vec<ActorRecord>,
}

impl From<ActorFailure> for Error {
    fn from(f: ActorFailure) -> Self {
        f.error
    }
}

/// Robust policy optimization over `Π_ε` against the uncertainty set of
/// radius ρ around ξ'.
pub fn actor_critic(
    xi_p: &SansDistribution,
    radius: f64,
    reward: &Reward,
    cfg: &ActorConfig,
) -> std::result::Result<ActorResult, ActorFailure> {
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    run_actor(xi_p, radius, reward, cfg, &mut trace).map_err(|error| ActorFailure { error, trace })
}

fn run_actor(
    xi_p: &SansDistribution,
    radius: f64,
    reward: &Reward,
    cfg: &ActorConfig,
    trace: &mut Vec<ActorRecord>,
) -> Result<ActorResult> {
    let (ns, na) = (xi_p.num_states(), xi_p.num_actions());
    if reward.num_states() != ns || reward.num_actions() != na {
        return Err(shape("reward and distribution shapes differ"));
    }
    cfg.validate(na)?;
    let set = build_uncertainty_set(xi_p, radius)?;
    let mut policy = Policy::uniform(ns, na);
    let mut warm: Option<KernelParam> = None;
    let mut best: Option<(usize, f64, KernelParam)> = None;
    for k in 0..=cfg.iterations {
        let critic_cfg = cfg.critic.clone().with_stream(STREAM_CRITIC + k as u64).with_trace(false);
        let critic = langevin_critic(&policy, &set, reward, &critic_cfg, warm.as_ref())?;
        let grad = policy_gradient(&policy, &critic.best_kernel, reward)?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        trace.push(ActorRecord { k, policy: policy.clone(), value: critic.best_value, grad_norm });
        if best.as_ref().is_none_or(|b| critic.best_value > b.1) {
            best = Some((k, critic.best_value, critic.best.clone()));
        }
        warm = Some(critic.best);
        if k < cfg.iterations {
            let raw: Vec<f64> = policy.as_slice().iter().zip(&grad).map(|(p, g)| p + cfg.step_size * g).collect();
            policy = project_policy(&raw, ns, na, cfg.epsilon)?;
        }
    }
    let (best_k, best_value, best_param) = best.expect("at least one iterate");
    let best_policy = trace[best_k].policy.clone();
    let reeval_cfg = LangevinConfig {
        iterations: cfg.critic.iterations * cfg.reevaluation_factor.max(1),
        stream: STREAM_CRITIC + cfg.iterations as u64 + 1,
        record_trace: false,
        ..cfg.critic.clone()
    };
    let reeval = langevin_critic(&best_policy, &set, reward, &reeval_cfg, Some(&best_param))?;
    let (value, worst_kernel) = if reeval.best_value <= best_value {
        (reeval.best_value, reeval.best_kernel)
    } else {
        (best_value, best_param.to_kernel()?)
    };
    Ok(ActorResult { policy: best_policy, value, best_iteration: best_k, worst_kernel, trace: std::mem::take(trace) })
}

/// Writes an actor trace as CSV with columns `k,value,grad_norm`.
pub fn write_actor_trace_csv<W: Write>(trace: &[ActorRecord], writer: W) -> Result<()> {
    let mut writer = writer;
    writeln!(writer, "# schema=1")?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "value", "grad_norm"])?;
    for r in trace {
        w.write_record([r.k.to_string(), r.value.to_string(), r.grad_norm.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PolicyJson {
    num_states: usize,
    num_actions: usize,
    policy: Vec<Vec<f64>>,
}

/// Writes a policy as a JSON table `policy[s][a]`.
pub fn write_policy_json<W: Write>(policy: &Policy, writer: W) -> Result<()> {
    let doc =
        PolicyJson { num_states: policy.num_states(), num_actions: policy.num_actions(), policy: policy.to_nested() };
    serde_json::to_writer_pretty(writer, &doc)?;
    Ok(())
}
