//! Offline policy optimization experiment: the robust actor-critic policy
//! against the plug-in policy, both judged by their true average reward.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ActorSettings, ResolvedConfig};
use super::evaluation::run_center;
use crate::empirical::{kernel_from_sans, SansDistribution};
use crate::error::numeric;
use crate::mdp::{average_reward, Kernel, Policy, Reward};
use crate::rng::{derive_seed, stream_rng};
use crate::robust_eval::LangevinConfig;
use crate::robust_opt::{actor_critic, epsilon_greedy, ActorConfig};
use crate::Result;

pub const ROBUST: &str = "robust";
pub const PLUG_IN: &str = "plug_in";
const TIE_TOL: f64 = 1e-9;
const MAX_POLICY_ITERATIONS: usize = 1_000;
const BOOTSTRAP_RESAMPLES: usize = 1_000;

/// Winning frequency of one competitor at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptResultRow {
    #[serde(rename = "T")]
    pub len: usize,
    pub estimator: String,
    pub win_freq: f64,
}

/// Outcome of one competitor in one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptRunRow {
    #[serde(rename = "T")]
    pub len: usize,
    pub seed: u64,
    pub estimator: String,
    pub radius: f64,
    /// True average reward of the policy, empty when the estimator failed.
    pub true_value: Option<f64>,
    /// Credit for this run: 1 for a sole winner, shared on ties.
    pub win_share: f64,
    pub failed: bool,
    pub smoothed: bool,
}

/// Greedy policy of discounted policy iteration on `kernel`; ties go to the
/// lowest action index.
pub fn discounted_policy_iteration(kernel: &Kernel, reward: &Reward, discount: f64) -> Result<Policy> {
    let (ns, na) = (kernel.num_states(), kernel.num_actions());
    let mut actions = vec![0usize; ns];
    for _ in 0..MAX_POLICY_ITERATIONS {
        let mut m = DMatrix::<f64>::identity(ns, ns);
        let mut r = DVector::<f64>::zeros(ns);
        for s in 0..ns {
            let a = actions[s];
            r[s] = reward.get(s, a);
            for (t, p) in kernel.row(s, a).iter().enumerate() {
                m[(s, t)] -= discount * p;
            }
        }
        let v = m.lu().solve(&r).ok_or_else(|| numeric("singular policy evaluation system"))?;
        let q = |s: usize, a: usize| -> f64 {
            reward.get(s, a) + discount * kernel.row(s, a).iter().enumerate().map(|(t, p)| p * v[t]).sum::<f64>()
        };
        let mut stable = true;
        for s in 0..ns {
            let current = q(s, actions[s]);
            let (best, value) = (0..na).map(|a| (a, q(s, a))).fold((actions[s], current), |acc, (a, val)| {
                if val > acc.1 + TIE_TOL * (1.0 + acc.1.abs()) {
                    (a, val)
                } else {
                    acc
                }
            });
            if best != actions[s] && value > current {
                actions[s] = best;
                stable = false;
            }
        }
        if stable {
            let mut probs = vec![0.0; ns * na];
            for (s, &a) in actions.iter().enumerate() {
                probs[s * na + a] = 1.0;
            }
            return Policy::new(ns, na, probs);
        }
    }
    Err(numeric("policy iteration did not stabilize"))
}

/// The plug-in competitor: discounted policy iteration on the kernel
/// estimated from ξ, mixed into `Π_ε` so both competitors share the same
/// exploration floor.
pub fn plug_in_policy(xi: &SansDistribution, reward: &Reward, settings: &ActorSettings) -> Result<Policy> {
    let kernel = kernel_from_sans(xi).into_kernel()?;
    let greedy = discounted_policy_iteration(&kernel, reward, settings.discount)?;
    epsilon_greedy(&greedy, settings.epsilon * xi.num_actions() as f64)
}

/// Actor-critic settings for one run.
pub fn actor_config(settings: &ActorSettings, reward: &Reward, seed: u64) -> Result<ActorConfig> {
    let mut cfg = ActorConfig::scheduled(settings.iterations, settings.epsilon, reward, seed)?;
    if let Some(step) = settings.step_size {
        cfg.step_size = step;
    }
    if let Some(tol) = settings.tolerance {
        cfg.tolerance = tol;
    }
    cfg.critic = LangevinConfig::new(
        settings.critic_iterations,
        settings.critic_step_size,
        settings.critic_beta.unwrap_or(f64::INFINITY),
        seed,
    );
    cfg.reevaluation_factor = settings.reevaluation_factor;
    Ok(cfg)
}

fn run_one(cfg: &ResolvedConfig, len: usize, seed: u64) -> Result<Vec<OptRunRow>> {
    let (center, smoothed) = run_center(cfg, len, seed)?;
    let reward = &cfg.mdp.reward;
    let radius = cfg.radii.radii(len)[0];
    let truth = |p: &Policy| average_reward(p, &cfg.mdp.kernel, reward).ok();
    let mut names = cfg.actor.competitors.clone();
    names.sort();
    names.dedup();
    let mut values = Vec::with_capacity(names.len());
    for name in &names {
        let value = if name == PLUG_IN {
            plug_in_policy(&center, reward, &cfg.actor).ok().and_then(|p| truth(&p))
        } else {
            let actor_cfg = actor_config(&cfg.actor, reward, derive_seed(seed, &[len as u64]))?;
            actor_critic(&center, radius, reward, &actor_cfg).ok().and_then(|r| truth(&r.policy))
        };
        values.push(value);
    }
    let best = values.iter().flatten().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let is_winner = |v: &Option<f64>| match v {
        Some(v) => best - v <= TIE_TOL * (1.0 + best.abs()),
        None => best == f64::NEG_INFINITY,
    };
    let winners = values.iter().filter(|v| is_winner(v)).count() as f64;
    Ok(names
        .into_iter()
        .zip(values)
        .map(|(estimator, v)| OptRunRow {
            len,
            seed,
            estimator,
            radius,
            true_value: v,
            win_share: if is_winner(&v) { 1.0 / winners } else { 0.0 },
            failed: v.is_none(),
            smoothed,
        })
        .collect())
}

/// Runs every (T, seed) pair in parallel; rows sorted by (T, seed, estimator).
pub fn run_opt_runs(cfg: &ResolvedConfig) -> Result<Vec<OptRunRow>> {
    let jobs: Vec<(usize, u64)> = cfg.horizons.iter().flat_map(|&t| cfg.seeds.iter().map(move |&s| (t, s))).collect();
    let per_run: Vec<Vec<OptRunRow>> = jobs.par_iter().map(|&(t, s)| run_one(cfg, t, s)).collect::<Result<_>>()?;
    let mut rows: Vec<OptRunRow> = per_run.into_iter().flatten().collect();
    rows.sort_by(|a, b| (a.len, a.seed, &a.estimator).cmp(&(b.len, b.seed, &b.estimator)));
    Ok(rows)
}

/// Per-T winning frequencies, sorted by (T, estimator).
pub fn winning_frequencies(runs: &[OptRunRow]) -> Vec<OptResultRow> {
    let mut keys: Vec<(usize, &str)> = runs.iter().map(|r| (r.len, r.estimator.as_str())).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|(len, name)| {
            let group: Vec<&OptRunRow> = runs.iter().filter(|r| r.len == len && r.estimator == name).collect();
            let share: f64 = group.iter().map(|r| r.win_share).sum();
            OptResultRow { len, estimator: name.to_owned(), win_freq: share / group.len() as f64 }
        })
        .collect()
}

/// Per-T report of the robust-versus-plug-in comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptSummaryRow {
    #[serde(rename = "T")]
    pub len: usize,
    pub radius: f64,
    pub robust_win_freq: f64,
    pub plug_in_win_freq: f64,
    pub robust_mean_value: f64,
    pub plug_in_mean_value: f64,
    pub failures: usize,
    /// Fraction of bootstrap resamples of the seeds in which the robust
    /// policy collects at least as many wins as the plug-in policy; empty
    /// unless both competitors ran.
    pub bootstrap_robust_at_least_plug_in: Option<f64>,
}

/// Summarizes runs per sample size, with a seeded bootstrap over seeds.
pub fn summarize_opt(runs: &[OptRunRow], bootstrap_seed: u64) -> Vec<OptSummaryRow> {
    let freqs = winning_frequencies(runs);
    let mut lens: Vec<usize> = runs.iter().map(|r| r.len).collect();
    lens.sort_unstable();
    lens.dedup();
    lens.into_iter()
        .map(|len| {
            let pick = |name: &str| -> Vec<&OptRunRow> {
                runs.iter().filter(|r| r.len == len && r.estimator == name).collect()
            };
            let (robust, plug_in) = (pick(ROBUST), pick(PLUG_IN));
            let freq =
                |name: &str| freqs.iter().find(|f| f.len == len && f.estimator == name).map_or(0.0, |f| f.win_freq);
            let mean = |rows: &[&OptRunRow]| {
                let vals: Vec<f64> = rows.iter().filter_map(|r| r.true_value).collect();
                vals.iter().sum::<f64>() / vals.len().max(1) as f64
            };
            let margins: Vec<f64> = robust.iter().zip(&plug_in).map(|(r, p)| r.win_share - p.win_share).collect();
            let mut rng = stream_rng(derive_seed(bootstrap_seed, &[len as u64]), 0);
            let n = margins.len();
            let bootstrap = (n > 0).then(|| {
                let hits = (0..BOOTSTRAP_RESAMPLES)
                    .filter(|_| (0..n).map(|_| margins[rng.random_range(0..n)]).sum::<f64>() >= -1e-12)
                    .count();
                hits as f64 / BOOTSTRAP_RESAMPLES as f64
            });
            OptSummaryRow {
                len,
                radius: runs.iter().find(|r| r.len == len).map_or(0.0, |r| r.radius),
                robust_win_freq: freq(ROBUST),
                plug_in_win_freq: freq(PLUG_IN),
                robust_mean_value: mean(&robust),
                plug_in_mean_value: mean(&plug_in),
                failures: runs.iter().filter(|r| r.len == len && r.failed).count(),
                bootstrap_robust_at_least_plug_in: bootstrap,
            }
        })
        .collect()
}
