//! Shared helpers for the integration tests: seeded random instances and
//! independent closed-form or exhaustive oracles for two-state problems.

#![allow(dead_code)]

use drmdp::mdp::{Kernel, Policy, Reward};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random point of the simplex with every entry at least `floor`.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let sum: f64 = raw.iter().sum();
    let mass = 1.0 - floor * n as f64;
    raw.iter().map(|v| floor + mass * v / sum).collect()
}

/// Random `(S, A)` with `S ≥ 2` and `S·A ≤ 30`.
pub fn random_dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let ns = rng.random_range(2..=10);
    let na = rng.random_range(1..=(30 / ns).min(5));
    (ns, na)
}

/// Random kernel whose rows may be sparse but always reach `s + 1 mod S`,
/// so every strictly positive policy induces an irreducible chain.
pub fn random_kernel(rng: &mut ChaCha8Rng, ns: usize, na: usize, sparse: bool) -> Kernel {
    let mut probs = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        for _ in 0..na {
            let mut row: Vec<f64> = (0..ns)
                .map(|t| {
                    if t == (s + 1) % ns || !sparse || rng.random::<f64>() < 0.5 {
                        0.05 + rng.random::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
            probs.extend(row);
        }
    }
    Kernel::new(ns, na, probs).expect("random kernel")
}

pub fn random_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize, floor: f64) -> Policy {
    let probs = (0..ns).flat_map(|_| random_simplex(rng, na, floor)).collect();
    Policy::new(ns, na, probs).expect("random policy")
}

pub fn random_reward(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> Reward {
    Reward::new(ns, na, (0..ns * na).map(|_| rng.random_range(-2.0..2.0)).collect()).expect("random reward")
}

/// Random unit direction tangent to the product of simplices (every block of
/// `block` coordinates sums to zero).
pub fn random_tangent(rng: &mut ChaCha8Rng, len: usize, block: usize) -> Vec<f64> {
    let mut d: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    for chunk in d.chunks_mut(block) {
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        chunk.iter_mut().for_each(|v| *v -= mean);
    }
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    d.iter().map(|v| v / norm).collect()
}

/// Dense matrix of the state-action chain, built independently of the library.
pub fn chain_rows(policy: &Policy, kernel: &Kernel) -> Vec<Vec<f64>> {
    let (ns, na) = (kernel.num_states(), kernel.num_actions());
    (0..ns * na)
        .map(|x| (0..ns * na).map(|y| policy.prob(y / na, y % na) * kernel.prob(x / na, x % na, y / na)).collect())
        .collect()
}

/// Relative difference with both sides tiny treated as agreement.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-9 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Binary relative entropy `KL(Ber(p) || Ber(q))` in nats.
pub fn binary_kl(p: f64, q: f64) -> f64 {
    let term = |x: f64, y: f64| {
        if x == 0.0 {
            0.0
        } else if y == 0.0 {
            f64::INFINITY
        } else {
            x * (x / y).ln()
        }
    };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// A two-state model described by switching probabilities
/// `switch[s·A + a] = Q(1 - s | s, a)`.
#[derive(Debug, Clone)]
pub struct TwoState {
    pub num_actions: usize,
    pub switch: Vec<f64>,
    pub reward: Vec<f64>,
}

impl TwoState {
    pub fn kernel(&self) -> Kernel {
        let na = self.num_actions;
        Kernel::from_fn(2, na, |s, a, t| {
            let w = self.switch[s * na + a];
            if t == s {
                1.0 - w
            } else {
                w
            }
        })
        .expect("two-state kernel")
    }

    pub fn reward(&self) -> Reward {
        Reward::new(2, self.num_actions, self.reward.clone()).expect("two-state reward")
    }

    /// Probability of leaving state `s` under the policy row `pi`.
    pub fn leave(&self, s: usize, pi: &[f64]) -> f64 {
        pi.iter().enumerate().map(|(a, p)| p * self.switch[s * self.num_actions + a]).sum()
    }

    /// Stationary state-action distribution `μ(s,a) = μ_S(s) π(a|s)` in closed form.
    pub fn stationary_pairs(&self, policy: &[f64]) -> Vec<f64> {
        let na = self.num_actions;
        let (p0, p1) = (self.leave(0, &policy[..na]), self.leave(1, &policy[na..]));
        let mu1 = p0 / (p0 + p1);
        let mu_s = [1.0 - mu1, mu1];
        (0..2 * na).map(|x| mu_s[x / na] * policy[x]).collect()
    }

    /// Average reward in closed form.
    pub fn gain(&self, policy: &[f64]) -> f64 {
        self.stationary_pairs(policy).iter().zip(&self.reward).map(|(m, r)| m * r).sum()
    }

    /// State rewards `r_π(s)` under a policy.
    pub fn policy_rewards(&self, policy: &[f64]) -> [f64; 2] {
        let na = self.num_actions;
        let r = |s: usize| (0..na).map(|a| policy[s * na + a] * self.reward[s * na + a]).sum();
        [r(0), r(1)]
    }
}

/// Average reward of a two-state chain with leaving probabilities `p0, p1`.
pub fn gain_from_leave(p0: f64, p1: f64, r_pi: [f64; 2]) -> f64 {
    let mu1 = p0 / (p0 + p1);
    (1.0 - mu1) * r_pi[0] + mu1 * r_pi[1]
}

/// Budget needed in one state to move its leaving probability to `p`:
/// `min Σ_a w_a KL(c_a || q_a)` subject to `Σ_a π_a q_a = p`, for A ≤ 2.
fn state_cost(weights: &[f64], center: &[f64], pi: &[f64], p: f64) -> f64 {
    match pi.len() {
        1 => weights[0] * binary_kl(center[0], p),
        2 => {
            let cost = |q0: f64| {
                let q1 = ((p - pi[0] * q0) / pi[1]).clamp(0.0, 1.0);
                weights[0] * binary_kl(center[0], q0) + weights[1] * binary_kl(center[1], q1)
            };
            let lo = ((p - pi[1]) / pi[0]).max(0.0);
            let hi = (p / pi[0]).min(1.0);
            // The objective is convex in q0, so golden-section search finds the minimum.
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (lo, hi);
            let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
            let (mut f1, mut f2) = (cost(x1), cost(x2));
            for _ in 0..120 {
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = cost(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = cost(x2);
                }
            }
            f1.min(f2).min(cost(lo)).min(cost(hi))
        }
        _ => panic!("frontier oracle supports one or two actions"),
    }
}

/// Minimal budget as a function of the leaving probability of one state,
/// tabulated on a fine grid.
#[derive(Debug, Clone)]
pub struct Frontier {
    step: f64,
    cost: Vec<f64>,
    argmin: usize,
}

impl Frontier {
    pub fn new(weights: &[f64], center: &[f64], pi: &[f64], step: f64) -> Self {
        let n = (1.0 / step).round() as usize;
        let cost: Vec<f64> = (0..=n).map(|i| state_cost(weights, center, pi, i as f64 * step)).collect();
        let argmin = (0..=n).min_by(|&i, &j| cost[i].total_cmp(&cost[j])).unwrap_or(0);
        Self { step, cost, argmin }
    }

    /// Budget at a grid point `p = i·step`.
    pub fn cost_at(&self, i: usize) -> f64 {
        self.cost[i]
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    /// Leaving probabilities reachable with `budget`, `[lo, hi]`, with the
    /// ends linearly interpolated between grid points.
    pub fn interval(&self, budget: f64) -> Option<(f64, f64)> {
        if self.cost[self.argmin] > budget {
            return None;
        }
        let crossing = |inside: usize, outside: usize| {
            let (ci, co) = (self.cost[inside], self.cost[outside]);
            let frac = if co.is_finite() { (budget - ci) / (co - ci) } else { 0.0 };
            (inside as f64 + frac * (outside as f64 - inside as f64)) * self.step
        };
        // Costs decrease up to the argmin and increase after it.
        let mut i = self.argmin;
        while i > 0 && self.cost[i - 1] <= budget {
            i -= 1;
        }
        let lo = if i == 0 { 0.0 } else { crossing(i, i - 1) };
        let mut j = self.argmin;
        while j + 1 < self.cost.len() && self.cost[j + 1] <= budget {
            j += 1;
        }
        let hi = if j + 1 == self.cost.len() { 1.0 } else { crossing(j, j + 1) };
        Some((lo, hi))
    }
}

/// Oracle for the worst-case average reward over the weighted KL ball on a
/// two-state model. Since the gain depends on the kernel only through the
/// leaving probabilities `(p0, p1)` and the budget separates by state, the
/// minimum is a search over `p0` on a grid of resolution `outer_step`, with
/// the best `p1` at an end of the interval the remaining budget allows.
#[derive(Debug, Clone)]
pub struct BallOracle {
    pub center: TwoState,
    /// `μ'(s,a)` of the center.
    pub weights: Vec<f64>,
    pub frontier_step: f64,
}

impl BallOracle {
    /// Ball around the stationary distribution of `behavioral` on `center`.
    pub fn new(center: TwoState, behavioral: &[f64]) -> Self {
        let weights = center.stationary_pairs(behavioral);
        Self { center, weights, frontier_step: 1e-4 }
    }

    pub fn frontier(&self, s: usize, pi: &[f64]) -> Frontier {
        let na = self.center.num_actions;
        let range = s * na..(s + 1) * na;
        Frontier::new(&self.weights[range.clone()], &self.center.switch[range], pi, self.frontier_step)
    }

    /// `min V` with `frontier_step`-tabulated frontiers and a `p0` grid of `outer_step`.
    pub fn robust_value_with(&self, policy: &[f64], rho: f64, f0: &Frontier, f1: &Frontier, outer_step: f64) -> f64 {
        let r_pi = self.center.policy_rewards(policy);
        let stride = (outer_step / self.frontier_step).round() as usize;
        let mut best = f64::INFINITY;
        let mut i = stride;
        while i < f0.len() - 1 {
            let c0 = f0.cost_at(i);
            if c0 <= rho {
                if let Some((lo, hi)) = f1.interval(rho - c0) {
                    let p0 = i as f64 * self.frontier_step;
                    for p1 in [lo, hi] {
                        if p0 + p1 > 0.0 {
                            best = best.min(gain_from_leave(p0, p1, r_pi));
                        }
                    }
                }
            }
            i += stride;
        }
        best
    }

    /// Worst-case average reward of `policy` (flattened `S·A`) at radius ρ,
    /// with a `p0` grid of resolution 1e-3.
    pub fn robust_value(&self, policy: &[f64], rho: f64) -> f64 {
        let na = self.center.num_actions;
        let (f0, f1) = (self.frontier(0, &policy[..na]), self.frontier(1, &policy[na..]));
        self.robust_value_with(policy, rho, &f0, &f1, 1e-3)
    }

    /// Best robust value over `{π : π(0|s) ∈ [ε, 1-ε]}` on a policy grid of
    /// resolution `policy_step` (two actions only). Returns the value and the
    /// maximizing `(π(0|0), π(0|1))`.
    pub fn best_policy(&self, rho: f64, eps: f64, policy_step: f64) -> (f64, [f64; 2]) {
        assert_eq!(self.center.num_actions, 2);
        let n = ((1.0 - 2.0 * eps) / policy_step).round() as usize;
        let grid: Vec<f64> = (0..=n).map(|i| eps + i as f64 * policy_step).collect();
        let f0: Vec<Frontier> = grid.iter().map(|&x| self.frontier(0, &[x, 1.0 - x])).collect();
        let f1: Vec<Frontier> = grid.iter().map(|&y| self.frontier(1, &[y, 1.0 - y])).collect();
        let mut best = (f64::NEG_INFINITY, [0.0; 2]);
        for (i, &x) in grid.iter().enumerate() {
            for (j, &y) in grid.iter().enumerate() {
                let v = self.robust_value_with(&[x, 1.0 - x, y, 1.0 - y], rho, &f0[i], &f1[j], 1e-3);
                if v > best.0 {
                    best = (v, [x, y]);
                }
            }
        }
        best
    }
}

/// Literal exhaustive search for single-action two-state models: every
/// pair `(Q(1|0), Q(0|1))` on a grid of resolution `step` inside the ball.
pub fn literal_grid_single_action(center: &TwoState, weights: &[f64], rho: f64, step: f64) -> f64 {
    assert_eq!(center.num_actions, 1);
    let n = (1.0 / step).round() as usize;
    let r = [center.reward[0], center.reward[1]];
    let mut best = f64::INFINITY;
    for i in 1..n {
        let p0 = i as f64 * step;
        let c0 = weights[0] * binary_kl(center.switch[0], p0);
        if c0 > rho {
            continue;
        }
        for j in 1..n {
            let p1 = j as f64 * step;
            if c0 + weights[1] * binary_kl(center.switch[1], p1) <= rho {
                best = best.min(gain_from_leave(p0, p1, r));
            }
        }
    }
    best
}

/// Example instance: single action, `P = [[0.9, 0.1], [0.5, 0.5]]`, `r = (1, 0)`.
pub fn example_single_action() -> (TwoState, Vec<f64>) {
    (TwoState { num_actions: 1, switch: vec![0.1, 0.5], reward: vec![1.0, 0.0] }, vec![1.0, 1.0])
}

/// Two-action test instance with behavioral policy `(0.7, 0.3)` in both states.
pub fn example_two_action() -> (TwoState, Vec<f64>) {
    (
        TwoState { num_actions: 2, switch: vec![0.1, 0.6, 0.3, 0.8], reward: vec![1.0, 0.5, 0.0, -0.5] },
        vec![0.7, 0.3, 0.7, 0.3],
    )
}
