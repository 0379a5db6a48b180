//! Conditional relative entropies and the finite-sample deviation bound.
//!
//! Both rate functions compare the conditional next-step laws of two
//! stationary distributions, weighted by the first one:
//!
//! - `d_mc(θ', θ) = Σ θ'(x,y) [ln(θ'(x,y)/θ'(x)) - ln(θ(x,y)/θ(x))]`
//! - `d_mdp(ξ', ξ) = Σ ξ'(s,a,s') [ln(ξ'(s,a,s')/μ'_S(s)) - ln(ξ(s,a,s')/μ_S(s))]`
//!
//! with the conventions `0 ln(0/t) = 0` and `t ln(t/0) = +∞`. Entries at or
//! below [`SUPPORT_EPS`](crate::SUPPORT_EPS) count as zero. All logarithms
//! are natural.

use crate::empirical::{kernel_from_sans, map_g, policy_from_sans, DoubletDistribution, SansDistribution};
use crate::error::{precondition, shape};
use crate::{Result, SUPPORT_EPS};

/// A nonnegative extended real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Infinite,
}

impl Rate {
    /// The value as `f64`, with `+∞` for [`Rate::Infinite`].
    pub fn value(self) -> f64 {
        match self {
            Rate::Finite(v) => v,
            Rate::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Rate::Finite(_))
    }
}

/// `KL(p || q)` in nats, `+∞` when `p` charges a point outside the support of `q`.
pub fn relative_entropy(p: &[f64], q: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > SUPPORT_EPS {
            if qi <= SUPPORT_EPS {
                return f64::INFINITY;
            }
            sum += pi * (pi / qi).ln();
        }
    }
    sum.max(0.0)
}

/// Sums `w (ln(w / w_norm) - ln(v / v_norm))` over aligned entries.
fn weighted_log_ratio(entries: impl Iterator<Item = (f64, f64, f64, f64)>) -> Rate {
    let mut sum = 0.0;
    for (w, w_norm, v, v_norm) in entries {
        if w <= SUPPORT_EPS {
            continue;
        }
        if v <= SUPPORT_EPS {
            return Rate::Infinite;
        }
        sum += w * ((w / w_norm).ln() - (v / v_norm).ln());
    }
    Rate::Finite(sum.max(0.0))
}

/// Conditional relative entropy of two doublet distributions.
pub fn d_mc(theta_p: &DoubletDistribution, theta: &DoubletDistribution) -> Result<Rate> {
    if theta_p.dim() != theta.dim() {
        return Err(shape("doublet distributions have different sizes"));
    }
    theta_p.ensure_balanced()?;
    theta.ensure_balanced()?;
    let n = theta.dim();
    let (rp, r) = (theta_p.row_marginal(), theta.row_marginal());
    Ok(weighted_log_ratio((0..n * n).map(|i| {
        let x = i / n;
        (theta_p.as_slice()[i], rp[x], theta.as_slice()[i], r[x])
    })))
}

fn check_same_shape(a: &SansDistribution, b: &SansDistribution) -> Result<()> {
    if a.num_states() != b.num_states() || a.num_actions() != b.num_actions() {
        return Err(shape("state-action-next-state distributions have different shapes"));
    }
    Ok(())
}

/// Conditional relative entropy of two state-action-next-state distributions.
///
/// Evaluated by the direct formula, which coincides with the
/// lower-semicontinuous extension whenever `ξ` has a strongly connected support.
pub fn d_mdp(xi_p: &SansDistribution, xi: &SansDistribution) -> Result<Rate> {
    check_same_shape(xi_p, xi)?;
    xi_p.ensure_balanced()?;
    xi.ensure_balanced()?;
    let block = xi.num_actions() * xi.num_states();
    let (mp, m) = (xi_p.state_marginal(), xi.state_marginal());
    Ok(weighted_log_ratio((0..xi.as_slice().len()).map(|i| {
        let s = i / block;
        (xi_p.as_slice()[i], mp[s], xi.as_slice()[i], m[s])
    })))
}

/// Splits `d_mdp(ξ', ξ)` into its policy and kernel parts:
/// `Σ_s μ'_S(s) KL(π'(·|s) || π(·|s))` and `Σ_{s,a} μ'(s,a) KL(Q'(·|s,a) || Q(·|s,a))`.
pub fn d_mdp_decomposed(xi_p: &SansDistribution, xi: &SansDistribution) -> Result<(f64, f64)> {
    check_same_shape(xi_p, xi)?;
    xi_p.ensure_xi0()?;
    xi.ensure_xi0()?;
    let (ns, na) = (xi.num_states(), xi.num_actions());
    let (pi_p, pi) = (policy_from_sans(xi_p), policy_from_sans(xi));
    let (q_p, q) = (kernel_from_sans(xi_p), kernel_from_sans(xi));
    let mu_s = xi_p.state_marginal();
    let mu = xi_p.state_action_marginal();
    let mut policy_term = 0.0;
    let mut kernel_term = 0.0;
    for s in 0..ns {
        let (Some(rp), Some(r)) = (pi_p.row(s), pi.row(s)) else {
            return Err(precondition("policy undefined on a state of a strongly connected distribution"));
        };
        policy_term += mu_s[s] * relative_entropy(rp, r);
        for a in 0..na {
            let (Some(rp), Some(r)) = (q_p.row(s, a), q.row(s, a)) else {
                return Err(precondition("kernel undefined on a pair of a strongly connected distribution"));
            };
            kernel_term += mu[s * na + a] * relative_entropy(rp, r);
        }
    }
    Ok((policy_term, kernel_term))
}

/// Log-probability exponent `(ln T + c̄ + d² ln(T+1)) / T - ρ` of the
/// finite-sample deviation bound.
pub fn finite_sample_bound(len: u64, d: u64, c_bar: f64, rho: f64) -> f64 {
    let t = len as f64;
    let d = d as f64;
    (t.ln() + c_bar + d * d * (t + 1.0).ln()) / t - rho
}

/// `c̄ = max ln(μ(x) μ(y) / θ(x,y))` over the support of `θ = G(ξ)`, with μ
/// the marginal of θ.
pub fn c_bar(xi: &SansDistribution) -> Result<f64> {
    xi.ensure_xi0()?;
    let theta = map_g(xi)?;
    let n = theta.dim();
    let mu = theta.row_marginal();
    let mut best = f64::NEG_INFINITY;
    for x in 0..n {
        for y in 0..n {
            let t = theta.get(x, y);
            if t > SUPPORT_EPS {
                best = best.max((mu[x] * mu[y] / t).ln());
            }
        }
    }
    Ok(best)
}
