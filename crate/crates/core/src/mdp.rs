//! Tabular MDPs and the exact machinery of their induced state-action chains.
//!
//! A policy π and a kernel Q induce a Markov chain on state-action pairs with
//! transition matrix `P((s,a),(s',a')) = π(a'|s') Q(s'|s,a)`. Everything the
//! estimators need (stationary distribution μ, gain V, bias h and the
//! action-next-state bias J) is computed from that chain by dense linear
//! solves, which are exact up to round-off at the sizes this crate targets.
//!
//! State-action pairs are flattened as `x = s * A + a`; kernel entries are
//! stored as `((s * A) + a) * S + s'`.

use nalgebra::{DMatrix, DVector};

use crate::empirical::SansDistribution;
use crate::error::{numeric, precondition, shape};
use crate::graph::is_strongly_connected;
use crate::{Result, PROB_TOL};

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(precondition(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(precondition(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Transition kernel `Q(s'|s,a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Kernel {
    /// Builds a kernel from a flat table laid out as `((s * A) + a) * S + s'`.
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(shape("kernel needs at least one state and one action"));
        }
        if probs.len() != num_states * num_actions * num_states {
            return Err(shape(format!(
                "kernel table has {} entries, expected {}",
                probs.len(),
                num_states * num_actions * num_states
            )));
        }
        let kernel = Self { num_states, num_actions, probs };
        for s in 0..num_states {
            for a in 0..num_actions {
                check_distribution(kernel.row(s, a), &format!("kernel row (s={s}, a={a})"))?;
            }
        }
        Ok(kernel)
    }

    /// Builds a kernel from nested rows `kernel[s][a][s']`.
    pub fn from_nested(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let num_states = rows.len();
        let num_actions = rows.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
        for (s, per_action) in rows.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(shape(format!("state {s} lists {} actions", per_action.len())));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != num_states {
                    return Err(shape(format!("kernel row (s={s}, a={a}) has {} entries", row.len())));
                }
                probs.extend_from_slice(row);
            }
        }
        Self::new(num_states, num_actions, probs)
    }

    /// Builds a kernel by evaluating `f(s, a, s')`.
    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
        for s in 0..num_states {
            for a in 0..num_actions {
                for t in 0..num_states {
                    probs.push(f(s, a, t));
                }
            }
        }
        Self::new(num_states, num_actions, probs)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Next-state distribution `Q(·|s,a)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.probs[start..start + self.num_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.probs[(s * self.num_actions + a) * self.num_states + next]
    }

    /// The flat table in `((s * A) + a) * S + s'` order.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Nested rows `kernel[s][a][s']`.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states).map(|s| (0..self.num_actions).map(|a| self.row(s, a).to_vec()).collect()).collect()
    }
}

/// Reward table `r(s,a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reward {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl Reward {
    /// Builds a reward table laid out as `s * A + a`.
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(shape(format!(
                "reward table has {} entries, expected {}",
                values.len(),
                num_states * num_actions
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(precondition("reward table has a non-finite entry"));
        }
        Ok(Self { num_states, num_actions, values })
    }

    /// Builds a reward that depends on the state only.
    pub fn from_states(state_rewards: &[f64], num_actions: usize) -> Result<Self> {
        let values = state_rewards.iter().flat_map(|&v| std::iter::repeat_n(v, num_actions)).collect();
        Self::new(state_rewards.len(), num_actions, values)
    }

    /// A constant reward.
    pub fn constant(num_states: usize, num_actions: usize, c: f64) -> Self {
        Self { num_states, num_actions, values: vec![c; num_states * num_actions] }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    /// The flat table in `s * A + a` order.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Largest absolute reward.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Stochastic policy `π(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    /// Builds a policy from a flat table laid out as `s * A + a`.
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(shape("policy needs at least one state and one action"));
        }
        if probs.len() != num_states * num_actions {
            return Err(shape(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                num_states * num_actions
            )));
        }
        let policy = Self { num_states, num_actions, probs };
        for s in 0..num_states {
            check_distribution(policy.row(s), &format!("policy row s={s}"))?;
        }
        Ok(policy)
    }

    /// The uniform policy.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self { num_states, num_actions, probs: vec![1.0 / num_actions as f64; num_states * num_actions] }
    }

    /// A state-independent policy using `row` in every state.
    pub fn state_independent(num_states: usize, row: &[f64]) -> Result<Self> {
        let probs = (0..num_states).flat_map(|_| row.iter().copied()).collect();
        Self::new(num_states, row.len(), probs)
    }

    /// Builds a policy from nested rows `policy[s][a]`.
    pub fn from_nested(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(shape("policy rows have different lengths"));
        }
        Self::new(rows.len(), num_actions, rows.concat())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Action distribution `π(·|s)`.
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    /// The flat table in `s * A + a` order.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.num_states).map(|s| self.row(s).to_vec()).collect()
    }

    /// Smallest action probability over all states.
    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True iff every action probability is at least `eps`.
    pub fn is_exploratory(&self, eps: f64) -> bool {
        self.min_prob() >= eps
    }
}

/// Ground-truth environment: kernel, reward and initial state distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub kernel: Kernel,
    pub reward: Reward,
    pub initial: Vec<f64>,
}

impl TabularMdp {
    pub fn new(kernel: Kernel, reward: Reward, initial: Vec<f64>) -> Result<Self> {
        if reward.num_states() != kernel.num_states() || reward.num_actions() != kernel.num_actions() {
            return Err(shape("reward and kernel shapes differ"));
        }
        if initial.len() != kernel.num_states() {
            return Err(shape("initial distribution length differs from the state count"));
        }
        check_distribution(&initial, "initial distribution")?;
        Ok(Self { kernel, reward, initial })
    }

    pub fn num_states(&self) -> usize {
        self.kernel.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.kernel.num_actions()
    }
}

/// Transition matrix of the state-action chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrix(pub DMatrix<f64>);

impl ChainMatrix {
    /// Wraps a square row-stochastic matrix.
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() || p.nrows() == 0 {
            return Err(shape("chain matrix must be square and nonempty"));
        }
        for i in 0..p.nrows() {
            let row: Vec<f64> = p.row(i).iter().copied().collect();
            check_distribution(&row, &format!("chain row {i}"))?;
        }
        Ok(Self(p))
    }

    /// Builds a chain matrix from rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(shape("chain matrix rows must have length n"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Differential action-value function together with the gain.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    /// `h(s,a)` in `s * A + a` order.
    pub h: Vec<f64>,
    /// Average reward V.
    pub gain: f64,
}

/// Everything computed from one solve of the induced chain.
#[derive(Debug, Clone)]
pub struct ChainEvaluation {
    num_states: usize,
    num_actions: usize,
    /// Stationary state-action distribution μ in `s * A + a` order.
    pub mu: Vec<f64>,
    pub bias: BiasTable,
}

impl ChainEvaluation {
    pub fn gain(&self) -> f64 {
        self.bias.gain
    }

    /// State marginal `μ_S(s) = Σ_a μ(s,a)`.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.mu.chunks(self.num_actions).map(|c| c.iter().sum()).collect()
    }

    /// `Σ_a π(a|s) h(s,a)` for every state.
    pub fn state_bias(&self, policy: &Policy) -> Vec<f64> {
        (0..self.num_states)
            .map(|s| {
                let h = &self.bias.h[s * self.num_actions..(s + 1) * self.num_actions];
                policy.row(s).iter().zip(h).map(|(p, v)| p * v).sum()
            })
            .collect()
    }
}

fn check_pair(policy: &Policy, kernel: &Kernel) -> Result<()> {
    if policy.num_states() != kernel.num_states() || policy.num_actions() != kernel.num_actions() {
        return Err(shape(format!(
            "policy is {}x{} but kernel is {}x{}",
            policy.num_states(),
            policy.num_actions(),
            kernel.num_states(),
            kernel.num_actions()
        )));
    }
    Ok(())
}

fn check_reward(kernel: &Kernel, reward: &Reward) -> Result<()> {
    if reward.num_states() != kernel.num_states() || reward.num_actions() != kernel.num_actions() {
        return Err(shape("reward and kernel shapes differ"));
    }
    Ok(())
}

/// Transition matrix `P((s,a),(s',a')) = π(a'|s') Q(s'|s,a)` of the
/// state-action chain.
pub fn chain_matrix(policy: &Policy, kernel: &Kernel) -> Result<ChainMatrix> {
    check_pair(policy, kernel)?;
    let (ns, na) = (kernel.num_states(), kernel.num_actions());
    let n = ns * na;
    let p = DMatrix::from_fn(n, n, |x, y| {
        let (s, a) = (x / na, x % na);
        let (t, b) = (y / na, y % na);
        policy.prob(t, b) * kernel.prob(s, a, t)
    });
    Ok(ChainMatrix(p))
}

/// True iff the support graph of `P` is strongly connected.
pub fn is_irreducible(p: &ChainMatrix) -> bool {
    let m = p.matrix();
    let adj: Vec<Vec<usize>> = (0..m.nrows()).map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] > 0.0).collect()).collect();
    is_strongly_connected(&adj)
}

/// Unique stationary distribution of an irreducible chain.
///
/// Solves `μ(P - I) = 0` with the last balance equation replaced by
/// `Σ μ = 1`.
pub fn stationary_distribution(p: &ChainMatrix) -> Result<Vec<f64>> {
    if !is_irreducible(p) {
        return Err(precondition("chain is reducible"));
    }
    stationary_unchecked(p.matrix())
}

fn stationary_unchecked(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.transpose();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let mu = a.lu().solve(&b).ok_or_else(|| numeric("singular system for the stationary distribution"))?;
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(numeric("non-finite stationary distribution"));
    }
    Ok(mu.iter().copied().collect())
}

/// Solves the Poisson equation `(I - P) h = r - V` with `μᵀh = 0` through the
/// nonsingular system `(I - P + 1μᵀ) h = r - V`.
fn poisson_solve(p: &DMatrix<f64>, mu: &[f64], r: &[f64], gain: f64) -> Result<Vec<f64>> {
    let n = p.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - p[(i, j)] + mu[j]);
    let rhs = DVector::from_iterator(n, r.iter().map(|v| v - gain));
    let h = m.lu().solve(&rhs).ok_or_else(|| numeric("singular system for the bias function"))?;
    Ok(h.iter().copied().collect())
}

/// Stationary distribution, gain and bias of the chain induced by `(π, Q)`.
pub fn evaluate(policy: &Policy, kernel: &Kernel, reward: &Reward) -> Result<ChainEvaluation> {
    check_reward(kernel, reward)?;
    let p = chain_matrix(policy, kernel)?;
    let mu = stationary_distribution(&p)?;
    let r = reward.as_slice();
    let gain = mu.iter().zip(r).map(|(m, v)| m * v).sum();
    let h = poisson_solve(p.matrix(), &mu, r, gain)?;
    Ok(ChainEvaluation {
        num_states: kernel.num_states(),
        num_actions: kernel.num_actions(),
        mu,
        bias: BiasTable { h, gain },
    })
}

/// Long-run average reward `Σ r(x) μ(x)`.
pub fn average_reward(policy: &Policy, kernel: &Kernel, reward: &Reward) -> Result<f64> {
    check_reward(kernel, reward)?;
    let mu = stationary_distribution(&chain_matrix(policy, kernel)?)?;
    Ok(mu.iter().zip(reward.as_slice()).map(|(m, v)| m * v).sum())
}

/// Bias function and gain of the chain induced by `(π, Q)`.
pub fn bias_function(policy: &Policy, kernel: &Kernel, reward: &Reward) -> Result<BiasTable> {
    Ok(evaluate(policy, kernel, reward)?.bias)
}

/// Action-next-state bias `J(s,a,s') = r(s,a) - V + Σ_a' π(a'|s') h(s',a')`,
/// laid out like a kernel table.
pub fn action_next_state_bias(policy: &Policy, kernel: &Kernel, reward: &Reward) -> Result<Vec<f64>> {
    let eval = evaluate(policy, kernel, reward)?;
    Ok(next_state_bias_from(&eval, policy, reward))
}

pub(crate) fn next_state_bias_from(eval: &ChainEvaluation, policy: &Policy, reward: &Reward) -> Vec<f64> {
    let hs = eval.state_bias(policy);
    let (ns, na) = (policy.num_states(), policy.num_actions());
    let mut j = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        for a in 0..na {
            let base = reward.get(s, a) - eval.gain();
            j.extend(hs.iter().map(|v| base + v));
        }
    }
    j
}

/// Stationary state-action-next-state distribution `ξ(s,a,s') = μ(s,a) Q(s'|s,a)`.
pub fn stationary_sans(policy: &Policy, kernel: &Kernel) -> Result<SansDistribution> {
    let mu = stationary_distribution(&chain_matrix(policy, kernel)?)?;
    let (ns, na) = (kernel.num_states(), kernel.num_actions());
    let mut probs = Vec::with_capacity(ns * na * ns);
    for (x, m) in mu.iter().enumerate() {
        probs.extend(kernel.row(x / na, x % na).iter().map(|q| m * q));
    }
    SansDistribution::new(ns, na, probs)
}
