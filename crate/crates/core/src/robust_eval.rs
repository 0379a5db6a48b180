//! The critic: worst-case average reward over a weighted relative-entropy
//! ball of kernels, found by projected Langevin dynamics.
//!
//! The feasible set is
//! `{Q : Σ_x μ'(x) KL(Q'(·|x) || Q(·|x)) ≤ ρ}` around the empirical kernel Q'.
//! The budget is shared across all state-action rows, so the set is not
//! rectangular and the worst case cannot be found row by row. Kernels are
//! parametrized by λ, the first `S - 1` next-state probabilities of every
//! row, with the last probability implied.
//!
//! Each Langevin step takes a gradient step on the average reward, adds
//! Gaussian noise of scale `sqrt(2η/β)` and projects back onto the feasible
//! set. The Euclidean projection is computed exactly from its optimality
//! conditions: for a multiplier ν on the budget, every row decouples into a
//! one-dimensional root-finding problem in a per-row price t, and ν itself is
//! found by a bracketed search so that the budget is met on the feasible side.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};

use crate::divergence::relative_entropy;
use crate::empirical::{kernel_from_sans, SansDistribution};
use crate::error::{numeric, precondition, shape};
use crate::mdp::{evaluate, next_state_bias_from, ChainEvaluation, Kernel, Policy, Reward};
use crate::rng::{stream_rng, STREAM_CRITIC};
use crate::{Error, Result, SUPPORT_EPS};

/// Slack allowed on the budget after projection.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Relative accuracy of the budget multiplier search.
const MULTIPLIER_TOL: f64 = 1e-10;
/// Iteration cap for every root finder inside the projection.
const MAX_ROOT_ITERS: usize = 200;
/// Floor applied on the support when an iterate induces a reducible chain.
const SUPPORT_FLOOR: f64 = 1e-12;

/// Kernels within a weighted relative-entropy budget of a center kernel.
#[derive(Debug, Clone)]
pub struct UncertaintySet {
    center: Kernel,
    weights: Vec<f64>,
    radius: f64,
}

impl UncertaintySet {
    /// Builds the set from an explicit center kernel Q', weights μ' over
    /// state-action pairs and a radius ρ > 0.
    pub fn new(center: Kernel, weights: Vec<f64>, radius: f64) -> Result<Self> {
        if weights.len() != center.num_states() * center.num_actions() {
            return Err(shape("one weight per state-action pair is required"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(precondition("weights must be nonnegative"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(precondition("radius must be positive and finite"));
        }
        Ok(Self { center, weights, radius })
    }

    pub fn center(&self) -> &Kernel {
        &self.center
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_states(&self) -> usize {
        self.center.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.center.num_actions()
    }

    /// True iff `Q'(s'|s,a) > 0`.
    pub fn in_support(&self, s: usize, a: usize, next: usize) -> bool {
        self.center.prob(s, a, next) > SUPPORT_EPS
    }

    /// True iff `g(Q) ≤ ρ + 1e-8`.
    pub fn contains(&self, kernel: &Kernel) -> bool {
        kl_constraint_value(self, kernel) <= self.radius + FEASIBILITY_TOL
    }
}

/// Uncertainty set centered at the kernel of ξ', weighted by its
/// state-action marginal.
pub fn build_uncertainty_set(xi_p: &SansDistribution, radius: f64) -> Result<UncertaintySet> {
    xi_p.ensure_xi0()?;
    let center = kernel_from_sans(xi_p).into_kernel()?;
    UncertaintySet::new(center, xi_p.state_action_marginal(), radius)
}

/// `g(Q) = Σ_x μ'(x) KL(Q'(·|x) || Q(·|x))`, `+∞` when Q vanishes on the support of Q'.
pub fn kl_constraint_value(set: &UncertaintySet, kernel: &Kernel) -> f64 {
    let (ns, na) = (set.num_states(), set.num_actions());
    let mut g = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let w = set.weights[s * na + a];
            let kl = relative_entropy(set.center.row(s, a), kernel.row(s, a));
            if kl.is_infinite() && w > 0.0 {
                return f64::INFINITY;
            }
            if w > 0.0 {
                g += w * kl;
            }
        }
    }
    g
}

/// Kernel parameter λ: the first `S - 1` next-state probabilities of every
/// `(s,a)` row, laid out as `((s * A) + a) * (S - 1) + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParam {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl KernelParam {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if num_states == 0 || values.len() != num_states * num_actions * (num_states - 1) {
            return Err(shape("kernel parameter has the wrong dimension"));
        }
        Ok(Self { num_states, num_actions, values })
    }

    /// Drops the last next-state coordinate of every row.
    pub fn from_kernel(kernel: &Kernel) -> Self {
        let (ns, na) = (kernel.num_states(), kernel.num_actions());
        let mut values = Vec::with_capacity(ns * na * (ns - 1));
        for s in 0..ns {
            for a in 0..na {
                values.extend_from_slice(&kernel.row(s, a)[..ns - 1]);
            }
        }
        Self { num_states: ns, num_actions: na, values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Reconstructs `Q^λ`, setting the last coordinate to one minus the
    /// partial sum. Round-off below 1e-12 in that coordinate is clipped.
    pub fn to_kernel(&self) -> Result<Kernel> {
        let (ns, na) = (self.num_states, self.num_actions);
        if ns == 1 {
            return Kernel::new(1, na, vec![1.0; na]);
        }
        let mut probs = Vec::with_capacity(ns * na * ns);
        for row in self.values.chunks(ns - 1) {
            if row.iter().any(|&v| v < 0.0) {
                return Err(precondition("kernel parameter has a negative coordinate"));
            }
            let last = 1.0 - row.iter().sum::<f64>();
            if last < -1e-12 {
                return Err(precondition("kernel parameter row sums to more than one"));
            }
            probs.extend_from_slice(row);
            probs.push(last.max(0.0));
        }
        Kernel::new(ns, na, probs)
    }
}

/// `λ(t)` for one coordinate together with `dλ/dt`; `c` is the coordinate's
/// share `ν μ'(x) Q'_j` of the budget penalty.
#[inline]
fn coordinate(y: f64, c: f64, t: f64) -> (f64, f64) {
    let b = y - t;
    if c > 0.0 {
        let disc = (b * b + 4.0 * c).sqrt();
        let lam = if b >= 0.0 { 0.5 * (b + disc) } else { 2.0 * c / (disc - b) };
        (lam, -lam / disc)
    } else if b > 0.0 {
        (b, -1.0)
    } else {
        (0.0, 0.0)
    }
}

/// Mass left for the last coordinate, `1 - Σ λ_j(t)`, and its derivative.
fn residual_mass(y: &[f64], c: &[f64], t: f64) -> (f64, f64) {
    let (mut q, mut dq) = (1.0, 0.0);
    for (&yj, &cj) in y.iter().zip(c) {
        let (l, dl) = coordinate(yj, cj, t);
        q -= l;
        dq -= dl;
    }
    (q, dq)
}

/// Safeguarded Newton iteration for an increasing function on `[lo, hi]`
/// with `f(lo) < 0 ≤ f(hi)`, started at `t` where `f` is already known to
/// be `first`. A Newton step is taken only if it stays in the bracket and
/// shrinks faster than bisection would; otherwise the bracket is bisected,
/// so round-off in `f` near the root cannot stall progress.
fn bracketed_newton(
    mut lo: f64,
    mut hi: f64,
    mut t: f64,
    first: (f64, f64),
    f: impl Fn(f64) -> (f64, f64),
) -> Result<f64> {
    let mut step_old = hi - lo;
    let (mut v, mut dv) = first;
    for _ in 0..MAX_ROOT_ITERS {
        if v == 0.0 {
            return Ok(t);
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(hi);
        }
        let newton = t - v / dv;
        let next = if dv > 0.0 && newton > lo && newton < hi && 2.0 * (newton - t).abs() <= step_old {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= 2.0 * f64::EPSILON * t {
            return Ok(next);
        }
        step_old = (next - t).abs();
        t = next;
        (v, dv) = f(t);
    }
    Err(numeric("row projection root finder did not converge"))
}

/// Root of an increasing `f` with `f(0) < 0`. The search starts from
/// `guess` when it is a positive number (typically the previous root),
/// otherwise from the bracket `[0, hi]`; the upper end is doubled until it
/// holds the root.
fn increasing_root(f: impl Fn(f64) -> (f64, f64), guess: f64, hi: f64) -> Result<f64> {
    let expand = |mut lo: f64, mut hi: f64| -> Result<(f64, f64)> {
        let mut n = 0;
        while f(hi).0 < 0.0 {
            lo = hi;
            hi *= 2.0;
            n += 1;
            if n > MAX_ROOT_ITERS {
                return Err(numeric("could not bracket the row price"));
            }
        }
        Ok((lo, hi))
    };
    if guess > 0.0 && guess.is_finite() {
        let first = f(guess);
        let (lo, hi) = if first.0 < 0.0 { expand(guess, 2.0 * guess)? } else { (0.0, guess) };
        return bracketed_newton(lo, hi, guess, first, &f);
    }
    let (lo, hi) = expand(0.0, hi)?;
    let mid = 0.5 * (lo + hi);
    bracketed_newton(lo, hi, mid, f(mid), &f)
}

/// Solves one row of the penalized projection: minimizes
/// `½‖λ - y‖² + ν μ'(x) KL(Q'_x || Q^λ_x)` over `λ ≥ 0, Σλ ≤ 1`.
/// Writes the full row (including the implied last coordinate) to `out`.
/// `price` carries the row's simplex multiplier between calls and seeds
/// the next root search.
fn project_row(y: &[f64], center: &[f64], nu_w: f64, price: &mut f64, c: &mut Vec<f64>, out: &mut [f64]) -> Result<()> {
    let k = y.len();
    c.clear();
    c.extend(center[..k].iter().map(|&q| if q > SUPPORT_EPS { nu_w * q } else { 0.0 }));
    let c_last = if center[k] > SUPPORT_EPS { nu_w * center[k] } else { 0.0 };
    let t = if c_last > 0.0 {
        // t q(t) = c_last, increasing wherever q(t) > 0.
        let psi = |t: f64| {
            let (q, dq) = residual_mass(y, c, t);
            (t * q - c_last, q + t * dq)
        };
        increasing_root(psi, *price, c_last.max(1.0))?
    } else if residual_mass(y, c, 0.0).0 >= 0.0 {
        0.0
    } else {
        let hi = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        increasing_root(|t| residual_mass(y, c, t), *price, hi)?
    };
    *price = t;
    let mut sum = 0.0;
    for j in 0..k {
        let l = coordinate(y[j], c[j], t).0;
        out[j] = l;
        sum += l;
    }
    if sum > 1.0 {
        // Round-off at a vertex; rescale so the box constraints hold exactly.
        out[..k].iter_mut().for_each(|v| *v /= sum);
        sum = out[..k].iter().sum::<f64>().max(1.0);
    }
    out[k] = (1.0 - sum).max(0.0);
    Ok(())
}

/// Projection workspace reused across Langevin iterations.
struct Projector<'a> {
    set: &'a UncertaintySet,
    rows: Vec<f64>,
    prices: Vec<f64>,
    last_nu: Option<f64>,
    scratch: Vec<f64>,
}

impl<'a> Projector<'a> {
    fn new(set: &'a UncertaintySet) -> Self {
        let n = set.num_states() * set.num_actions();
        Self {
            set,
            rows: vec![0.0; n * set.num_states()],
            prices: vec![f64::NAN; n],
            last_nu: None,
            scratch: Vec::new(),
        }
    }

    /// Solves all rows for multiplier ν and returns the budget used.
    fn solve(&mut self, y: &[f64], nu: f64) -> Result<f64> {
        let ns = self.set.num_states();
        let k = ns - 1;
        let mut g = 0.0;
        for (x, w) in self.set.weights.iter().enumerate() {
            let center = &self.set.center.as_slice()[x * ns..(x + 1) * ns];
            let out = &mut self.rows[x * ns..(x + 1) * ns];
            project_row(&y[x * k..(x + 1) * k], center, nu * w, &mut self.prices[x], &mut self.scratch, out)?;
            if *w > 0.0 {
                g += w * relative_entropy(center, out);
            }
        }
        Ok(g)
    }

    fn project(&mut self, y: &[f64]) -> Result<Vec<f64>> {
        let rho = self.set.radius;
        let g0 = self.solve(y, 0.0)?;
        if g0 <= rho {
            return Ok(self.param());
        }
        // Bracket ν on a log scale: g(lo) > ρ ≥ g(hi). Consecutive Langevin
        // iterates need similar multipliers, so start from the last one.
        let (mut lo, mut g_lo) = (0.0, g0);
        let factor = if self.last_nu.is_some() { 2.0 } else { 16.0 };
        let mut hi = self.last_nu.unwrap_or(1.0);
        let mut g_hi = self.solve(y, hi)?;
        let mut iters = 0;
        while g_hi > rho {
            lo = hi;
            g_lo = g_hi;
            hi *= factor;
            g_hi = self.solve(y, hi)?;
            iters += 1;
            if iters > MAX_ROOT_ITERS {
                return Err(numeric("could not bracket the budget multiplier"));
            }
        }
        if lo == 0.0 {
            loop {
                let mid = hi / factor;
                let g_mid = self.solve(y, mid)?;
                iters += 1;
                if g_mid > rho {
                    lo = mid;
                    g_lo = g_mid;
                    break;
                }
                hi = mid;
                g_hi = g_mid;
                if iters > MAX_ROOT_ITERS || hi < 1e-300 {
                    return Err(numeric("could not bracket the budget multiplier"));
                }
            }
        }
        // Illinois false position on ln g against ln ν, always keeping the
        // feasible end hi. Falls back to bisection in ln ν.
        let target = rho.ln();
        let (mut u_lo, mut u_hi) = (lo.ln(), hi.ln());
        let (mut f_lo, mut f_hi) = (g_lo.ln() - target, g_hi.ln() - target);
        let mut side = 0i8;
        while iters < MAX_ROOT_ITERS {
            iters += 1;
            if g_hi >= rho * (1.0 - MULTIPLIER_TOL) || (u_hi - u_lo) < 1e-13 {
                self.last_nu = Some(u_hi.exp());
                self.solve(y, u_hi.exp())?;
                return Ok(self.param());
            }
            let mut u = if f_lo.is_finite() && f_hi.is_finite() && f_lo > f_hi {
                u_hi - f_hi * (u_hi - u_lo) / (f_hi - f_lo)
            } else {
                0.5 * (u_lo + u_hi)
            };
            if !(u > u_lo && u < u_hi) {
                u = 0.5 * (u_lo + u_hi);
            }
            let g = self.solve(y, u.exp())?;
            let f = g.ln() - target;
            if g > rho {
                u_lo = u;
                f_lo = f;
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            } else {
                u_hi = u;
                f_hi = f;
                g_hi = g;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            }
        }
        Err(numeric(format!(
            "budget multiplier search did not converge after {MAX_ROOT_ITERS} iterations (bracket [{:.3e}, {:.3e}])",
            u_lo.exp(),
            u_hi.exp()
        )))
    }

    fn param(&self) -> Vec<f64> {
        let ns = self.set.num_states();
        self.rows.chunks(ns).flat_map(|r| r[..ns - 1].iter().copied()).collect()
    }
}

/// Euclidean projection of λ onto the feasible parameter set.
pub fn project_lambda(set: &UncertaintySet, lambda: &KernelParam) -> Result<KernelParam> {
    if lambda.num_states != set.num_states() || lambda.num_actions != set.num_actions() {
        return Err(shape("kernel parameter and uncertainty set shapes differ"));
    }
    if set.num_states() == 1 {
        return Ok(lambda.clone());
    }
    // Feasible points are returned bit for bit. Rows may overshoot one by the
    // same round-off `to_kernel` accepts.
    let k = set.num_states() - 1;
    let in_box =
        lambda.values.chunks(k).all(|row| row.iter().all(|&v| v >= 0.0) && row.iter().sum::<f64>() <= 1.0 + 1e-12);
    if in_box && kl_constraint_value(set, &lambda.to_kernel()?) <= set.radius {
        return Ok(lambda.clone());
    }
    let values = Projector::new(set).project(&lambda.values)?;
    KernelParam::new(set.num_states(), set.num_actions(), values)
}

fn gradient_from(eval: &ChainEvaluation, policy: &Policy, reward: &Reward) -> Vec<f64> {
    let (ns, na) = (policy.num_states(), policy.num_actions());
    let j = next_state_bias_from(eval, policy, reward);
    let mut grad = Vec::with_capacity(ns * na * (ns - 1));
    for x in 0..ns * na {
        let row = &j[x * ns..(x + 1) * ns];
        let last = row[ns - 1];
        grad.extend(row[..ns - 1].iter().map(|v| eval.mu[x] * (v - last)));
    }
    grad
}

/// Gradient of the average reward with respect to λ:
/// `∂V/∂λ_{x,j} = μ(x) (J(x,j) - J(x,S))`.
pub fn adversary_gradient(policy: &Policy, lambda: &KernelParam, reward: &Reward) -> Result<Vec<f64>> {
    let kernel = lambda.to_kernel()?;
    let eval = evaluate(policy, &kernel, reward)?;
    Ok(gradient_from(&eval, policy, reward))
}

/// Hyperparameters of the Langevin critic.
#[derive(Debug, Clone, PartialEq)]
pub struct LangevinConfig {
    /// Number of iterations M.
    pub iterations: usize,
    /// Step size η, in `[0, 1/2)`.
    pub step_size: f64,
    /// Gibbs parameter β > 1; `f64::INFINITY` switches the noise off.
    pub beta: f64,
    pub seed: u64,
    /// Random stream for the noise; distinct streams give independent runs.
    pub stream: u64,
    /// Whether to record the per-iteration trace.
    pub record_trace: bool,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self { iterations: 20_000, step_size: 0.01, beta: 50.0, seed: 0, stream: STREAM_CRITIC, record_trace: false }
    }
}

impl LangevinConfig {
    pub fn new(iterations: usize, step_size: f64, beta: f64, seed: u64) -> Self {
        Self { iterations, step_size, beta, seed, ..Self::default() }
    }

    pub fn with_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(precondition("critic needs at least one iteration"));
        }
        if !(0.0..0.5).contains(&self.step_size) {
            return Err(precondition("critic step size must lie in [0, 1/2)"));
        }
        if self.beta.is_nan() || self.beta <= 1.0 {
            return Err(precondition("Gibbs parameter must exceed 1"));
        }
        Ok(())
    }
}

/// One critic iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticTracePoint {
    pub m: usize,
    pub value: f64,
    pub constraint_value: f64,
}

/// Outcome of a critic run.
#[derive(Debug, Clone)]
pub struct CriticResult {
    /// Best (lowest-value) iterate.
    pub best: KernelParam,
    pub best_kernel: Kernel,
    pub best_value: f64,
    /// Best value over the first half of the run; a large gap to
    /// `best_value` suggests the run had not settled.
    pub best_value_first_half: f64,
    /// Empty unless requested in the config.
    pub trace: Vec<CriticTracePoint>,
}

/// Evaluates an iterate, flooring the support once if the chain is reducible.
fn evaluate_iterate(
    set: &UncertaintySet,
    policy: &Policy,
    reward: &Reward,
    lambda: &mut KernelParam,
) -> Result<(Kernel, ChainEvaluation)> {
    let kernel = lambda.to_kernel()?;
    match evaluate(policy, &kernel, reward) {
        Ok(eval) => Ok((kernel, eval)),
        Err(Error::Precondition(_)) => {
            let (ns, na) = (set.num_states(), set.num_actions());
            let floored = Kernel::from_fn(ns, na, |s, a, t| {
                let row = kernel.row(s, a);
                let lift: f64 =
                    (0..ns).filter(|&u| set.in_support(s, a, u)).map(|u| (SUPPORT_FLOOR - row[u]).max(0.0)).sum();
                let v = if set.in_support(s, a, t) { row[t].max(SUPPORT_FLOOR) } else { row[t] };
                v / (1.0 + lift)
            })?;
            let eval = evaluate(policy, &floored, reward)?;
            *lambda = KernelParam::from_kernel(&floored);
            Ok((floored, eval))
        }
        Err(e) => Err(e),
    }
}

/// Projected Langevin dynamics
/// `λ ← Proj(λ - η ∇V(λ) + sqrt(2η/β) w)`, started from `init` (projected)
/// or from the center kernel. Returns the best iterate encountered.
pub fn langevin_critic(
    policy: &Policy,
    set: &UncertaintySet,
    reward: &Reward,
    cfg: &LangevinConfig,
    init: Option<&KernelParam>,
) -> Result<CriticResult> {
    cfg.validate()?;
    let (ns, na) = (set.num_states(), set.num_actions());
    if policy.num_states() != ns || policy.num_actions() != na {
        return Err(shape("policy and uncertainty set shapes differ"));
    }
    let mut lambda = match init {
        Some(l) => project_lambda(set, l)?,
        None => KernelParam::from_kernel(set.center()),
    };
    let (kernel, mut eval) = evaluate_iterate(set, policy, reward, &mut lambda)?;
    let mut best = (lambda.clone(), kernel.clone(), eval.gain());
    let mut best_first_half = eval.gain();
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(CriticTracePoint { m: 0, value: eval.gain(), constraint_value: kl_constraint_value(set, &kernel) });
    }
    if ns == 1 {
        return Ok(CriticResult {
            best: best.0,
            best_kernel: best.1,
            best_value: best.2,
            best_value_first_half: best_first_half,
            trace,
        });
    }
    let mut rng = stream_rng(cfg.seed, cfg.stream);
    let noise_scale = if cfg.beta.is_infinite() { 0.0 } else { (2.0 * cfg.step_size / cfg.beta).sqrt() };
    let mut projector = Projector::new(set);
    let mut y = vec![0.0; lambda.dim()];
    for m in 1..=cfg.iterations {
        let grad = gradient_from(&eval, policy, reward);
        for ((yi, li), gi) in y.iter_mut().zip(&lambda.values).zip(&grad) {
            let w: f64 = StandardNormal.sample(&mut rng);
            *yi = li - cfg.step_size * gi + noise_scale * w;
        }
        lambda.values = projector.project(&y)?;
        let (kernel, next_eval) = evaluate_iterate(set, policy, reward, &mut lambda)?;
        eval = next_eval;
        let value = eval.gain();
        if cfg.record_trace {
            trace.push(CriticTracePoint { m, value, constraint_value: kl_constraint_value(set, &kernel) });
        }
        if value < best.2 {
            best = (lambda.clone(), kernel, value);
        }
        if m <= cfg.iterations / 2 {
            best_first_half = best.2;
        }
    }
    Ok(CriticResult {
        best: best.0,
        best_kernel: best.1,
        best_value: best.2,
        best_value_first_half: best_first_half,
        trace,
    })
}

/// Writes a critic trace as CSV with columns `m,value,constraint_value`.
pub fn write_trace_csv<W: Write>(trace: &[CriticTracePoint], writer: W) -> Result<()> {
    let mut writer = writer;
    writeln!(writer, "# schema=1")?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["m", "value", "constraint_value"])?;
    for p in trace {
        w.write_record([p.m.to_string(), p.value.to_string(), p.constraint_value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
