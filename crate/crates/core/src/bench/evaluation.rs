//! Off-policy evaluation experiment: robust and plug-in estimates of the
//! evaluation policy's average reward from single behavioral trajectories.

use rayon::prelude::*;
use serde::Serialize;

use super::config::ResolvedConfig;
use crate::empirical::{empirical_sans, simulate_trajectory, SansDistribution};
use crate::mdp::{average_reward, Kernel};
use crate::ope::{plug_in_estimate, robust_value_from, smooth_into_xi0, EvaluationRequest, RobustConfig};
use crate::rng::derive_seed;
use crate::Result;

pub const ROBUST: &str = "robust";
pub const PLUG_IN: &str = "plug_in";

/// One estimate of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpeResultRow {
    pub estimator: String,
    #[serde(rename = "T")]
    pub len: usize,
    /// Radius for the robust estimator, 0 for the plug-in.
    pub hyper: f64,
    pub seed: u64,
    pub estimate: f64,
    pub true_value: f64,
    /// Whether the estimate exceeds the true value.
    pub disappointed: bool,
    /// Whether the empirical distribution was smoothed before estimation.
    pub smoothed: bool,
}

/// Disappointment frequency and mean estimate of one estimator setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpeSummaryRow {
    pub estimator: String,
    #[serde(rename = "T")]
    pub len: usize,
    pub hyper: f64,
    pub beta_hat: f64,
    pub mean_estimate: f64,
    pub runs: usize,
}

/// Aggregate output of an OPE experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpeSummary {
    pub true_value: f64,
    pub tolerance: f64,
    pub settings: Vec<OpeSummaryRow>,
    /// Runs in which the empirical distribution had to be smoothed.
    pub smoothed_runs: usize,
    pub total_runs: usize,
    /// Robust estimates exceeding the plug-in estimate of the same run by more than δ.
    pub dominance_violations: usize,
}

/// Exact average reward of the evaluation policy on the true kernel.
pub fn true_value(cfg: &ResolvedConfig) -> Result<f64> {
    average_reward(&cfg.evaluation, &cfg.mdp.kernel, &cfg.mdp.reward)
}

/// Empirical distribution of a run, smoothed when its support is not
/// strongly connected, with a flag recording whether smoothing happened.
pub fn run_center(cfg: &ResolvedConfig, len: usize, seed: u64) -> Result<(SansDistribution, bool)> {
    let traj = simulate_trajectory(&cfg.mdp, &cfg.behavioral, len, derive_seed(seed, &[len as u64]))?;
    let xi_hat = empirical_sans(&traj);
    let weight = cfg.smoothing.weight(len, cfg.mdp.num_states(), cfg.mdp.num_actions());
    smooth_into_xi0(&xi_hat, weight)
}

fn run_one(cfg: &ResolvedConfig, len: usize, seed: u64, truth: f64) -> Result<Vec<OpeResultRow>> {
    let (center, smoothed) = run_center(cfg, len, seed)?;
    let row = |estimator: &str, hyper: f64, estimate: f64| OpeResultRow {
        estimator: estimator.to_owned(),
        len,
        hyper,
        seed,
        estimate,
        true_value: truth,
        disappointed: truth < estimate,
        smoothed,
    };
    let reward = &cfg.mdp.reward;
    let mut rows = Vec::new();
    let plug_in = plug_in_estimate(&cfg.evaluation, &center, reward)
        .ok_or_else(|| crate::Error::Numeric("plug-in estimate undefined after smoothing".into()))?;
    rows.push(row(PLUG_IN, 0.0, plug_in));
    let mut radii = cfg.radii.radii(len);
    radii.sort_by(f64::total_cmp);
    let robust_cfg =
        RobustConfig { critic: cfg.critic.langevin(derive_seed(seed, &[len as u64])), tolerance: cfg.critic.tolerance };
    let mut warm: Option<Kernel> = None;
    for radius in radii {
        let req = EvaluationRequest {
            policy: cfg.evaluation.clone(),
            empirical: center.clone(),
            radius,
            reward: reward.clone(),
        };
        let res = robust_value_from(&req, &robust_cfg, warm.as_ref().filter(|_| cfg.critic.warm_start))?;
        rows.push(row(ROBUST, radius, res.value));
        warm = Some(res.worst_kernel);
    }
    Ok(rows)
}

/// Runs every (T, seed) pair in parallel and returns the rows sorted by
/// (T, seed, estimator, hyper).
pub fn run_ope_experiment(cfg: &ResolvedConfig) -> Result<Vec<OpeResultRow>> {
    let truth = true_value(cfg)?;
    let jobs: Vec<(usize, u64)> = cfg.horizons.iter().flat_map(|&t| cfg.seeds.iter().map(move |&s| (t, s))).collect();
    let per_run: Vec<Vec<OpeResultRow>> =
        jobs.par_iter().map(|&(t, s)| run_one(cfg, t, s, truth)).collect::<Result<_>>()?;
    let mut rows: Vec<OpeResultRow> = per_run.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.len, a.seed, &a.estimator).cmp(&(b.len, b.seed, &b.estimator)).then(a.hyper.total_cmp(&b.hyper))
    });
    Ok(rows)
}

/// Aggregates rows into per-setting disappointment frequencies.
pub fn summarize_ope(rows: &[OpeResultRow], true_value: f64, tolerance: f64) -> OpeSummary {
    let mut keys: Vec<(usize, String, f64)> = rows.iter().map(|r| (r.len, r.estimator.clone(), r.hyper)).collect();
    keys.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)).then(a.2.total_cmp(&b.2)));
    keys.dedup();
    let settings = keys
        .into_iter()
        .map(|(len, estimator, hyper)| {
            let group: Vec<&OpeResultRow> =
                rows.iter().filter(|r| r.len == len && r.estimator == estimator && r.hyper == hyper).collect();
            let n = group.len();
            OpeSummaryRow {
                beta_hat: group.iter().filter(|r| r.disappointed).count() as f64 / n as f64,
                mean_estimate: group.iter().map(|r| r.estimate).sum::<f64>() / n as f64,
                runs: n,
                estimator,
                len,
                hyper,
            }
        })
        .collect();
    let plug_ins: Vec<&OpeResultRow> = rows.iter().filter(|r| r.estimator == PLUG_IN).collect();
    let dominance_violations = rows
        .iter()
        .filter(|r| r.estimator == ROBUST)
        .filter(|r| {
            plug_ins
                .iter()
                .find(|p| p.len == r.len && p.seed == r.seed)
                .is_some_and(|p| r.estimate > p.estimate + tolerance)
        })
        .count();
    OpeSummary {
        true_value,
        tolerance,
        settings,
        smoothed_runs: plug_ins.iter().filter(|r| r.smoothed).count(),
        total_runs: plug_ins.len(),
        dominance_violations,
    }
}
