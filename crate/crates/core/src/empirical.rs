//! Trajectories, empirical estimators and the distributions they estimate.
//!
//! A trajectory `X_1, ..., X_T` of state-action pairs is turned into
//! empirical doublet and state-action-next-state distributions by counting
//! consecutive pairs. One extra ghost transition from `X_T` back to `X_1`
//! closes the path into a cycle, which makes the inflow and outflow of every
//! state match exactly. Counts are kept as integers and divided by `T` once.

use std::io::{Read, Write};

use crate::error::{precondition, shape};
use crate::graph::is_strongly_connected;
use crate::mdp::{Kernel, Policy, TabularMdp};
use crate::rng::{sample_categorical, stream_rng, STREAM_TRAJECTORY};
use crate::{Result, PROB_TOL};

/// Tolerance for the balanced-marginal test on floating-point inputs.
pub const BALANCE_TOL: f64 = 1e-10;

fn check_probabilities(probs: &[f64], what: &str) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(precondition(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL * (probs.len() as f64).max(1.0) {
        return Err(precondition(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

/// A state-action trajectory with 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub num_states: usize,
    pub num_actions: usize,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    /// Seed used to simulate the trajectory, if it was simulated.
    pub seed: Option<u64>,
}

impl Trajectory {
    /// Builds a trajectory from index sequences, checking ranges and lengths.
    pub fn new(num_states: usize, num_actions: usize, states: Vec<usize>, actions: Vec<usize>) -> Result<Self> {
        if states.is_empty() || states.len() != actions.len() {
            return Err(shape("trajectory needs equally long, nonempty state and action sequences"));
        }
        if states.iter().any(|&s| s >= num_states) || actions.iter().any(|&a| a >= num_actions) {
            return Err(precondition("trajectory index out of range"));
        }
        Ok(Self { num_states, num_actions, states, actions, seed: None })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Flattened state-action index `s * A + a` at each step.
    pub fn pairs(&self) -> impl Iterator<Item = usize> + '_ {
        self.states.iter().zip(&self.actions).map(|(s, a)| s * self.num_actions + a)
    }

    /// Writes the trajectory as CSV with header `t,state,action` and 1-based
    /// indices, after a `# schema=1` comment line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut writer = writer;
        writeln!(writer, "# schema=1")?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "state", "action"])?;
        for (t, (s, a)) in self.states.iter().zip(&self.actions).enumerate() {
            w.write_record([(t + 1).to_string(), (s + 1).to_string(), (a + 1).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a trajectory written by [`Trajectory::write_csv`]; lines
    /// starting with `#` are skipped.
    pub fn read_csv<R: Read>(reader: R, num_states: usize, num_actions: usize) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["t", "state", "action"] {
            return Err(precondition("trajectory CSV header must be t,state,action"));
        }
        let (mut states, mut actions) = (Vec::new(), Vec::new());
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let parse = |k: usize| -> Result<usize> {
                record
                    .get(k)
                    .and_then(|v| v.trim().parse::<usize>().ok())
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| precondition(format!("bad field {k} in trajectory row {}", i + 1)))
            };
            if parse(0)? != i + 1 {
                return Err(precondition(format!("trajectory rows must be numbered 1..T (row {})", i + 1)));
            }
            states.push(parse(1)? - 1);
            actions.push(parse(2)? - 1);
        }
        Self::new(num_states, num_actions, states, actions)
    }
}

/// Simulates `T` steps: `S_1 ~ η`, `A_t ~ π(·|S_t)`, `S_{t+1} ~ Q(·|S_t,A_t)`.
pub fn simulate_trajectory(mdp: &TabularMdp, policy: &Policy, len: usize, seed: u64) -> Result<Trajectory> {
    if len == 0 {
        return Err(precondition("trajectory length must be at least 1"));
    }
    if policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions() {
        return Err(shape("policy and MDP shapes differ"));
    }
    let mut rng = stream_rng(seed, STREAM_TRAJECTORY);
    let mut states = Vec::with_capacity(len);
    let mut actions = Vec::with_capacity(len);
    let mut s = sample_categorical(&mdp.initial, &mut rng);
    for t in 0..len {
        let a = sample_categorical(policy.row(s), &mut rng);
        states.push(s);
        actions.push(a);
        if t + 1 < len {
            s = sample_categorical(mdp.kernel.row(s, a), &mut rng);
        }
    }
    Ok(Trajectory { num_states: mdp.num_states(), num_actions: mdp.num_actions(), states, actions, seed: Some(seed) })
}

/// Stationary doublet distribution θ over pairs of state-action pairs,
/// stored row-major as `x * n + y` with `n = S·A`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubletDistribution {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl DoubletDistribution {
    /// Wraps a nonnegative table summing to one. Balance is not required here.
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        let n = num_states * num_actions;
        if n == 0 || probs.len() != n * n {
            return Err(shape(format!("doublet table has {} entries, expected {}", probs.len(), n * n)));
        }
        check_probabilities(&probs, "doublet distribution")?;
        Ok(Self { num_states, num_actions, probs })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Number of state-action pairs `S·A`.
    pub fn dim(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.dim() + y]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Row marginal `Σ_y θ(x,y)`.
    pub fn row_marginal(&self) -> Vec<f64> {
        self.probs.chunks(self.dim()).map(|r| r.iter().sum()).collect()
    }

    /// Column marginal `Σ_x θ(x,y)`.
    pub fn column_marginal(&self) -> Vec<f64> {
        let n = self.dim();
        let mut col = vec![0.0; n];
        for (i, p) in self.probs.iter().enumerate() {
            col[i % n] += p;
        }
        col
    }

    /// Largest absolute difference between row and column marginals.
    pub fn balance_gap(&self) -> f64 {
        self.row_marginal().iter().zip(self.column_marginal()).fold(0.0, |m, (r, c)| m.max((r - c).abs()))
    }

    pub fn is_balanced(&self) -> bool {
        self.balance_gap() <= BALANCE_TOL
    }

    /// True iff the support graph of θ is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        let n = self.dim();
        let adj: Vec<Vec<usize>> = (0..n).map(|x| (0..n).filter(|&y| self.get(x, y) > 0.0).collect()).collect();
        is_strongly_connected(&adj)
    }

    pub(crate) fn ensure_balanced(&self) -> Result<()> {
        if self.is_balanced() {
            Ok(())
        } else {
            Err(precondition(format!("doublet marginals unbalanced (gap {:.3e})", self.balance_gap())))
        }
    }
}

/// Stationary state-action-next-state distribution ξ, stored as
/// `((s * A) + a) * S + s'`.
#[derive(Debug, Clone, PartialEq)]
pub struct SansDistribution {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

/// Classification of a state-action-next-state table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    /// Marginals are not balanced.
    NotInXi,
    /// Balanced, but the support graph is not strongly connected.
    InXiOnly,
    /// Balanced with a strongly connected support graph.
    InXi0,
}

impl SansDistribution {
    /// Wraps a nonnegative table summing to one. Balance is not required here.
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || probs.len() != num_states * num_actions * num_states {
            return Err(shape(format!(
                "state-action-next-state table has {} entries, expected {}",
                probs.len(),
                num_states * num_actions * num_states
            )));
        }
        check_probabilities(&probs, "state-action-next-state distribution")?;
        Ok(Self { num_states, num_actions, probs })
    }

    /// The uniform distribution over `S × A × S`.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let n = num_states * num_actions * num_states;
        Self { num_states, num_actions, probs: vec![1.0 / n as f64; n] }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: usize, a: usize, next: usize) -> f64 {
        self.probs[(s * self.num_actions + a) * self.num_states + next]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Mass of the `(s,a)` row, i.e. `ξ(s,a,·)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.probs[start..start + self.num_states]
    }

    /// State-action marginal `μ(s,a) = Σ_s' ξ(s,a,s')`.
    pub fn state_action_marginal(&self) -> Vec<f64> {
        self.probs.chunks(self.num_states).map(|r| r.iter().sum()).collect()
    }

    /// State marginal `μ_S(s) = Σ_{a,s'} ξ(s,a,s')`.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.probs.chunks(self.num_states * self.num_actions).map(|r| r.iter().sum()).collect()
    }

    /// Inflow `Σ_{s,a} ξ(s,a,s')` for every `s'`.
    pub fn next_state_marginal(&self) -> Vec<f64> {
        let mut inflow = vec![0.0; self.num_states];
        for (i, p) in self.probs.iter().enumerate() {
            inflow[i % self.num_states] += p;
        }
        inflow
    }

    /// Largest absolute difference between outflow and inflow of a state.
    pub fn balance_gap(&self) -> f64 {
        self.state_marginal().iter().zip(self.next_state_marginal()).fold(0.0, |m, (o, i)| m.max((o - i).abs()))
    }

    pub fn is_balanced(&self) -> bool {
        self.balance_gap() <= BALANCE_TOL
    }

    pub(crate) fn ensure_balanced(&self) -> Result<()> {
        if self.is_balanced() {
            Ok(())
        } else {
            Err(precondition(format!("state-action-next-state marginals unbalanced (gap {:.3e})", self.balance_gap())))
        }
    }

    pub(crate) fn ensure_xi0(&self) -> Result<()> {
        match sans_membership(self) {
            Membership::InXi0 => Ok(()),
            Membership::InXiOnly => Err(precondition("support graph is not strongly connected")),
            Membership::NotInXi => self.ensure_balanced(),
        }
    }

    /// Convex combination `(1 - w) ξ + w other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if other.num_states != self.num_states || other.num_actions != self.num_actions {
            return Err(shape("cannot mix distributions of different shapes"));
        }
        let probs = self.probs.iter().zip(&other.probs).map(|(p, q)| (1.0 - w) * p + w * q).collect();
        Self::new(self.num_states, self.num_actions, probs)
    }
}

/// Integer transition counts over pairs of state-action pairs, including the
/// ghost transition; laid out like [`DoubletDistribution`].
pub fn doublet_counts(traj: &Trajectory) -> Vec<u64> {
    let n = traj.num_states * traj.num_actions;
    let xs: Vec<usize> = traj.pairs().collect();
    let mut counts = vec![0u64; n * n];
    for (t, &x) in xs.iter().enumerate() {
        let y = xs[(t + 1) % xs.len()];
        counts[x * n + y] += 1;
    }
    counts
}

/// Integer state-action-next-state counts, including the ghost transition;
/// laid out like [`SansDistribution`].
pub fn sans_counts(traj: &Trajectory) -> Vec<u64> {
    let (ns, na) = (traj.num_states, traj.num_actions);
    let len = traj.len();
    let mut counts = vec![0u64; ns * na * ns];
    for t in 0..len {
        let next = traj.states[(t + 1) % len];
        counts[(traj.states[t] * na + traj.actions[t]) * ns + next] += 1;
    }
    counts
}

fn normalize_counts(counts: &[u64], total: usize) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Empirical doublet distribution with the ghost transition `X_T → X_1`.
pub fn empirical_doublet(traj: &Trajectory) -> DoubletDistribution {
    DoubletDistribution {
        num_states: traj.num_states,
        num_actions: traj.num_actions,
        probs: normalize_counts(&doublet_counts(traj), traj.len()),
    }
}

/// Empirical state-action-next-state distribution with the ghost transition.
pub fn empirical_sans(traj: &Trajectory) -> SansDistribution {
    SansDistribution {
        num_states: traj.num_states,
        num_actions: traj.num_actions,
        probs: normalize_counts(&sans_counts(traj), traj.len()),
    }
}

/// `F(θ)(s,a,s') = Σ_a' θ((s,a),(s',a'))`.
pub fn map_f(theta: &DoubletDistribution) -> Result<SansDistribution> {
    theta.ensure_balanced()?;
    let (ns, na) = (theta.num_states, theta.num_actions);
    let n = ns * na;
    let mut probs = vec![0.0; ns * na * ns];
    for x in 0..n {
        for y in 0..n {
            probs[x * ns + y / na] += theta.get(x, y);
        }
    }
    Ok(SansDistribution { num_states: ns, num_actions: na, probs })
}

/// `G(ξ)((s,a),(s',a')) = π_ξ(a'|s') ξ(s,a,s')`, where `π_ξ` is the policy
/// recovered from ξ; entries whose next state carries no mass are zero.
pub fn map_g(xi: &SansDistribution) -> Result<DoubletDistribution> {
    xi.ensure_balanced()?;
    let (ns, na) = (xi.num_states, xi.num_actions);
    let n = ns * na;
    let mu = xi.state_action_marginal();
    let mu_s = xi.state_marginal();
    let mut probs = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            let t = y / na;
            if mu_s[t] > 0.0 {
                probs[x * n + y] = mu[y] / mu_s[t] * xi.probs[x * ns + t];
            }
        }
    }
    Ok(DoubletDistribution { num_states: ns, num_actions: na, probs })
}

/// A row-stochastic table whose rows may be undefined for lack of mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialTable {
    row_len: usize,
    probs: Vec<f64>,
    defined: Vec<bool>,
}

impl PartialTable {
    /// Row `i`, or `None` when the row carries no mass.
    pub fn row(&self, i: usize) -> Option<&[f64]> {
        self.defined[i].then(|| &self.probs[i * self.row_len..(i + 1) * self.row_len])
    }

    /// Indices of undefined rows.
    pub fn undefined_rows(&self) -> Vec<usize> {
        (0..self.defined.len()).filter(|&i| !self.defined[i]).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.defined.iter().all(|&d| d)
    }

    fn require_complete(&self, what: &str) -> Result<()> {
        let missing = self.undefined_rows();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(precondition(format!("{what} undefined on rows {missing:?}")))
        }
    }
}

fn normalize_rows(values: Vec<f64>, row_len: usize) -> PartialTable {
    let mut probs = values;
    let mut defined = Vec::with_capacity(probs.len() / row_len);
    for row in probs.chunks_mut(row_len) {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|p| *p /= sum);
            defined.push(true);
        } else {
            defined.push(false);
        }
    }
    PartialTable { row_len, probs, defined }
}

/// Kernel recovered from ξ; rows are indexed by `s * A + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialKernel {
    num_states: usize,
    num_actions: usize,
    pub table: PartialTable,
}

impl PartialKernel {
    pub fn row(&self, s: usize, a: usize) -> Option<&[f64]> {
        self.table.row(s * self.num_actions + a)
    }

    /// The kernel, failing if any `(s,a)` row is undefined.
    pub fn into_kernel(self) -> Result<Kernel> {
        self.table.require_complete("kernel")?;
        Kernel::new(self.num_states, self.num_actions, self.table.probs)
    }
}

/// Policy recovered from ξ; rows are indexed by state.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialPolicy {
    num_states: usize,
    num_actions: usize,
    pub table: PartialTable,
}

impl PartialPolicy {
    pub fn row(&self, s: usize) -> Option<&[f64]> {
        self.table.row(s)
    }

    /// The policy, failing if any state is undefined.
    pub fn into_policy(self) -> Result<Policy> {
        self.table.require_complete("policy")?;
        Policy::new(self.num_states, self.num_actions, self.table.probs)
    }
}

/// `Q(s'|s,a) = ξ(s,a,s') / Σ_s̃ ξ(s,a,s̃)`; rows without mass are undefined.
pub fn kernel_from_sans(xi: &SansDistribution) -> PartialKernel {
    PartialKernel {
        num_states: xi.num_states,
        num_actions: xi.num_actions,
        table: normalize_rows(xi.probs.clone(), xi.num_states),
    }
}

/// `π(a|s) = Σ_s̃ ξ(s,a,s̃) / Σ_{ã,s̃} ξ(s,ã,s̃)`; states without mass are undefined.
pub fn policy_from_sans(xi: &SansDistribution) -> PartialPolicy {
    PartialPolicy {
        num_states: xi.num_states,
        num_actions: xi.num_actions,
        table: normalize_rows(xi.state_action_marginal(), xi.num_actions),
    }
}

/// Classifies ξ as unbalanced, balanced only, or balanced with a strongly
/// connected support graph (edges `(s,a) → (s',·)` wherever `ξ(s,a,s') > 0`).
pub fn sans_membership(xi: &SansDistribution) -> Membership {
    if !xi.is_balanced() {
        return Membership::NotInXi;
    }
    let (ns, na) = (xi.num_states, xi.num_actions);
    let adj: Vec<Vec<usize>> = (0..ns * na)
        .map(|x| {
            (0..ns).filter(|&t| xi.probs[x * ns + t] > 0.0).flat_map(|t| (0..na).map(move |b| t * na + b)).collect()
        })
        .collect();
    if is_strongly_connected(&adj) {
        Membership::InXi0
    } else {
        Membership::InXiOnly
    }
}
