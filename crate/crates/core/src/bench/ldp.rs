//! Monte-Carlo check of the large-deviations rate of the empirical
//! state-action-next-state distribution on a two-state, single-action chain.
//!
//! For an event D the log-probability `(1/T) ln P(ξ̂_T ∈ D)` should settle
//! between `-inf_{int D} I` and `-inf_D I`, where `I(ξ) = d_mdp(ξ, ξ₀)`.
//! The infima are found by exhaustive search over the balanced two-state
//! distributions `ξ = (a, b, b, 1 - a - 2b)`.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{EventSpec, LdpSettings};
use crate::divergence::d_mdp;
use crate::empirical::{empirical_sans, simulate_trajectory, SansDistribution};
use crate::error::precondition;
use crate::mdp::{stationary_sans, Policy, Reward, TabularMdp};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
const Z_TWO_SIDED: f64 = 1.959_963_984_540_054;
/// One-sided 95% normal quantile.
const Z_ONE_SIDED: f64 = 1.644_853_626_951_472_7;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z_TWO_SIDED * Z_TWO_SIDED;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_TWO_SIDED / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One-sided 95% Wilson upper bound when no hits were observed.
pub fn wilson_upper_zero(trials: u64) -> f64 {
    let k = Z_ONE_SIDED * Z_ONE_SIDED / trials as f64;
    k / (1.0 + k)
}

/// Rate estimates for one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpResultRow {
    #[serde(rename = "T")]
    pub len: usize,
    pub hits: u64,
    pub trials: u64,
    /// `(1/T) ln(hits/trials)`, empty when there were no hits.
    pub rate_est: Option<f64>,
    /// Empty when there were no hits (only the upper bound is reported).
    pub ci_lo: Option<f64>,
    pub ci_hi: f64,
    /// `-inf_{int D} I`.
    pub rate_lb: f64,
    /// `-inf_D I`.
    pub rate_ub: f64,
}

impl LdpResultRow {
    /// Whether the estimate lies within `tol` of `[rate_lb, rate_ub]`. With no
    /// hits, whether the upper confidence bound is consistent with it.
    pub fn in_bracket(&self, tol: f64) -> bool {
        match self.rate_est {
            Some(r) => r >= self.rate_lb - tol && r <= self.rate_ub + tol,
            None => self.ci_hi >= self.rate_lb - tol,
        }
    }
}

/// Grid infima of the rate function over the event and its interior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateInfima {
    pub closure: f64,
    pub interior: f64,
}

fn check_two_state(xi0: &SansDistribution) -> Result<()> {
    if xi0.num_states() != 2 || xi0.num_actions() != 1 {
        return Err(precondition("grid search supports two-state single-action chains only"));
    }
    Ok(())
}

/// Exhaustive search of `d_mdp(ξ, ξ₀)` over balanced two-state
/// distributions on a grid of resolution `step`.
pub fn rate_infima(xi0: &SansDistribution, event: &EventSpec, step: f64) -> Result<RateInfima> {
    check_two_state(xi0)?;
    if event.dim() != 4 {
        return Err(Error::Config("event must have 4 coordinates for a two-state chain".into()));
    }
    let n = (1.0 / step).round() as usize;
    let mut inf = RateInfima { closure: f64::INFINITY, interior: f64::INFINITY };
    for i in 0..=n {
        for j in 0..=(n - i) / 2 {
            let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
            let c = (1.0 - a - 2.0 * b).max(0.0);
            let coords = [a, b, b, c];
            let (closed, open) = (event.contains(&coords), event.interior_contains(&coords));
            if !closed && !open {
                continue;
            }
            let xi = SansDistribution::new(2, 1, coords.to_vec())?;
            let rate = d_mdp(&xi, xi0)?.value();
            if closed {
                inf.closure = inf.closure.min(rate);
            }
            if open {
                inf.interior = inf.interior.min(rate);
            }
        }
    }
    Ok(inf)
}

/// Single-action MDP of the configured chain, started uniformly.
pub fn chain_mdp(settings: &LdpSettings) -> Result<TabularMdp> {
    let kernel = settings.kernel()?;
    let ns = kernel.num_states();
    TabularMdp::new(kernel, Reward::constant(ns, 1, 0.0), vec![1.0 / ns as f64; ns])
}

/// Counts the trajectories of length `len` whose empirical distribution
/// falls in the event.
pub fn count_hits(mdp: &TabularMdp, event: &EventSpec, len: usize, seeds: &[u64]) -> Result<u64> {
    let policy = Policy::uniform(mdp.num_states(), 1);
    let hits = seeds
        .par_iter()
        .map(|&s| {
            let traj = simulate_trajectory(mdp, &policy, len, derive_seed(s, &[len as u64]))?;
            Ok(u64::from(event.contains(empirical_sans(&traj).as_slice())))
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(hits.iter().sum())
}

/// Runs the check for every sample size; rows sorted by T.
pub fn run_ldp_check(settings: &LdpSettings, horizons: &[usize], seeds: &[u64]) -> Result<Vec<LdpResultRow>> {
    let mdp = chain_mdp(settings)?;
    let xi0 = stationary_sans(&Policy::uniform(mdp.num_states(), 1), &mdp.kernel)?;
    let inf = rate_infima(&xi0, &settings.event, settings.grid_step)?;
    let trials = seeds.len() as u64;
    let mut lens = horizons.to_vec();
    lens.sort_unstable();
    lens.dedup();
    lens.into_iter()
        .map(|len| {
            let hits = count_hits(&mdp, &settings.event, len, seeds)?;
            let t = len as f64;
            let (rate_est, ci_lo, ci_hi) = if hits == 0 {
                (None, None, wilson_upper_zero(trials).ln() / t)
            } else {
                let (lo, hi) = wilson_interval(hits, trials);
                (Some((hits as f64 / trials as f64).ln() / t), Some(lo.ln() / t), hi.ln() / t)
            };
            Ok(LdpResultRow {
                len,
                hits,
                trials,
                rate_est,
                ci_lo,
                ci_hi,
                rate_lb: -inf.interior,
                rate_ub: -inf.closure,
            })
        })
        .collect()
}
