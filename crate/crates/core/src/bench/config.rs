//! Experiment configuration files.
//!
//! Configs are JSON documents whose sections are all optional; missing
//! sections take the defaults of the subcommand being run. Kernels are
//! nested arrays `kernel[s][a][s']` with 0-based indices. Relative file
//! paths inside a config resolve against the config's own directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::models::{build_gridworld, build_machine_replacement, geometric_policy, two_state_test_mdp, MdpFile};
use crate::mdp::{Kernel, Policy, TabularMdp};
use crate::ope::RadiusSchedule;
use crate::robust_eval::LangevinConfig;
use crate::{Error, Result};

/// Radii `0.01 - 1.111e-3 k` for `k = 0..9`.
pub fn table_radius_grid() -> Vec<f64> {
    (0..10).map(|k| 0.01 - 1.111e-3 * f64::from(k)).collect()
}

/// Which subcommand a config is resolved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Ope,
    Optimize,
    Ldp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinMdp {
    Gridworld,
    TwoState,
    MachineReplacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MdpSource {
    Builtin(BuiltinMdp),
    /// A general MDP document (see [`MdpFile`]).
    File(PathBuf),
    /// A machine-replacement kernel document.
    MachineReplacement(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Uniform,
    /// `π(a) ∝ 0.9 · 0.1^a` in every state.
    Geometric,
    /// The same action distribution in every state.
    StateIndependent(Vec<f64>),
    /// `table[s][a]`.
    Table(Vec<Vec<f64>>),
}

impl PolicySpec {
    pub fn build(&self, num_states: usize, num_actions: usize) -> Result<Policy> {
        let policy = match self {
            PolicySpec::Uniform => Policy::uniform(num_states, num_actions),
            PolicySpec::Geometric => geometric_policy(num_states, num_actions),
            PolicySpec::StateIndependent(row) => Policy::state_independent(num_states, row)?,
            PolicySpec::Table(rows) => Policy::from_nested(rows)?,
        };
        if policy.num_states() != num_states || policy.num_actions() != num_actions {
            return Err(Error::Config("policy shape does not match the MDP".into()));
        }
        Ok(policy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiusSpec {
    /// The same radii at every sample size.
    Grid(Vec<f64>),
    /// `0.01 - 1.111e-3 k`, `k = 0..9`, at every sample size.
    Table,
    /// `ρ_T = scale / T`.
    Schedule { scale: f64 },
}

impl RadiusSpec {
    pub fn radii(&self, len: usize) -> Vec<f64> {
        match self {
            RadiusSpec::Grid(r) => r.clone(),
            RadiusSpec::Table => table_radius_grid(),
            RadiusSpec::Schedule { scale } => vec![RadiusSchedule { scale: *scale }.radius(len as u64)],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            RadiusSpec::Grid(r) => !r.is_empty() && r.iter().all(|&x| x > 0.0 && x.is_finite()),
            RadiusSpec::Table => true,
            RadiusSpec::Schedule { scale } => *scale > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("radii must be a nonempty list of positive numbers".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedSpec {
    /// Seeds `0..count`.
    Count(u64),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::Count(n) => (0..*n).collect(),
            SeedSpec::List(v) => v.clone(),
        }
    }

    /// Parses `n` (seeds `0..n`) or a comma-separated list.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid seed spec `{text}`"));
        if text.contains(',') {
            let list = text.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<Vec<u64>>>()?;
            Ok(SeedSpec::List(list))
        } else {
            Ok(SeedSpec::Count(text.trim().parse().map_err(|_| bad())?))
        }
    }
}

/// Langevin critic settings used by robust evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticSettings {
    pub iterations: usize,
    pub step_size: f64,
    /// Gibbs parameter; `null` switches the noise off.
    pub beta: Option<f64>,
    /// Tolerance δ.
    pub tolerance: f64,
    /// Start each radius from the previous radius' worst kernel, sweeping
    /// radii in increasing order.
    pub warm_start: bool,
}

impl Default for CriticSettings {
    fn default() -> Self {
        let c = LangevinConfig::default();
        Self {
            iterations: c.iterations,
            step_size: c.step_size,
            beta: Some(c.beta),
            tolerance: crate::ope::DEFAULT_TOLERANCE,
            warm_start: false,
        }
    }
}

impl CriticSettings {
    /// Settings sized for the 100-pair GridWorld: large steps, near-zero
    /// noise and short warm-started runs across the radius sweep.
    pub fn gridworld() -> Self {
        Self { iterations: 150, step_size: 0.45, beta: Some(1e6), warm_start: true, ..Self::default() }
    }

    pub fn langevin(&self, seed: u64) -> LangevinConfig {
        LangevinConfig::new(self.iterations, self.step_size, self.beta.unwrap_or(f64::INFINITY), seed)
    }
}

/// How an empirical distribution without a strongly connected support is
/// mixed with the uniform distribution before robust evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Smoothing {
    /// Fixed mixing weight.
    Weight(f64),
    /// `α` pseudo-observations per state-action pair: weight `αSA / (T + αSA)`.
    PseudoCount(f64),
}

impl Default for Smoothing {
    /// One pseudo-observation per state-action pair. A vanishing weight
    /// leaves unvisited pairs with almost no stationary mass, so their
    /// kernel rows enter the budget at almost no cost and the adversary
    /// can reroute them freely.
    fn default() -> Self {
        Smoothing::PseudoCount(1.0)
    }
}

impl Smoothing {
    pub fn weight(&self, len: usize, num_states: usize, num_actions: usize) -> f64 {
        match *self {
            Smoothing::Weight(w) => w,
            Smoothing::PseudoCount(alpha) => {
                let prior = alpha * (num_states * num_actions) as f64;
                prior / (len as f64 + prior)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Smoothing::Weight(w) => w > 0.0 && w <= 1.0,
            Smoothing::PseudoCount(a) => a > 0.0 && a.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("smoothing weight must lie in (0, 1] and pseudo-counts must be positive".into()))
        }
    }
}

/// Settings of the policy-optimization experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActorSettings {
    /// Actor iterations K.
    pub iterations: usize,
    /// Exploration floor ε shared by both competitors.
    pub epsilon: f64,
    /// Actor step size; `null` uses the `O(K^{-1/2})` schedule with `L = max |r|`.
    pub step_size: Option<f64>,
    /// Critic tolerance δ; `null` uses the schedule.
    pub tolerance: Option<f64>,
    pub critic_iterations: usize,
    pub critic_step_size: f64,
    pub critic_beta: Option<f64>,
    pub reevaluation_factor: usize,
    /// Discount factor of the plug-in competitor's policy iteration.
    pub discount: f64,
    /// Competing estimators, any of `plug_in` and `robust`.
    pub competitors: Vec<String>,
}

impl Default for ActorSettings {
    fn default() -> Self {
        Self {
            iterations: 50,
            epsilon: 0.01,
            step_size: None,
            tolerance: None,
            critic_iterations: 200,
            critic_step_size: 0.01,
            critic_beta: Some(50.0),
            reevaluation_factor: 2,
            discount: 0.95,
            competitors: vec!["plug_in".into(), "robust".into()],
        }
    }
}

impl ActorSettings {
    fn validate(&self, num_actions: usize) -> Result<()> {
        if !(self.epsilon > 0.0) || self.epsilon * num_actions as f64 > 1.0 {
            return Err(Error::Config("actor epsilon must satisfy 0 < ε·A ≤ 1".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config("discount must lie in [0, 1)".into()));
        }
        let known = ["plug_in", "robust"];
        if self.competitors.is_empty() || self.competitors.iter().any(|c| !known.contains(&c.as_str())) {
            return Err(Error::Config("competitors must be a nonempty subset of plug_in, robust".into()));
        }
        if self.critic_iterations == 0 {
            return Err(Error::Config("actor critic needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// An event over the flattened `ξ(s,a,s')` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    /// `{ξ : c·ξ ≥ bound}`.
    HalfSpace { coefficients: Vec<f64>, bound: f64 },
    /// `{ξ : lower ≤ ξ ≤ upper}` coordinatewise.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl EventSpec {
    pub fn dim(&self) -> usize {
        match self {
            EventSpec::HalfSpace { coefficients, .. } => coefficients.len(),
            EventSpec::Box { lower, .. } => lower.len(),
        }
    }

    /// Membership in the closed event.
    pub fn contains(&self, xi: &[f64]) -> bool {
        match self {
            EventSpec::HalfSpace { coefficients, bound } => dot(coefficients, xi) >= *bound,
            EventSpec::Box { lower, upper } => {
                xi.iter().zip(lower.iter().zip(upper)).all(|(x, (lo, hi))| lo <= x && x <= hi)
            }
        }
    }

    /// Membership in the interior, taken relative to the ambient coordinates.
    pub fn interior_contains(&self, xi: &[f64]) -> bool {
        match self {
            // A zero normal makes the half-space all or nothing, hence open.
            EventSpec::HalfSpace { coefficients, bound } if coefficients.iter().all(|&c| c == 0.0) => *bound <= 0.0,
            EventSpec::HalfSpace { coefficients, bound } => dot(coefficients, xi) > *bound,
            EventSpec::Box { lower, upper } => {
                xi.iter().zip(lower.iter().zip(upper)).all(|(x, (lo, hi))| lo < x && x < hi)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            EventSpec::Box { lower, upper } if lower.len() != upper.len() => {
                Err(Error::Config("box bounds must have equal lengths".into()))
            }
            _ => Ok(()),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Settings of the large-deviations check on a single-action chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpSettings {
    /// Transition matrix of the chain, `chain[x][y]`.
    pub chain: Vec<Vec<f64>>,
    pub event: EventSpec,
    /// Resolution of the grid search for the rate-function infima.
    pub grid_step: f64,
    /// Allowed distance between the Monte-Carlo rate and the bracket.
    pub bracket_tolerance: f64,
}

impl Default for LdpSettings {
    fn default() -> Self {
        Self {
            chain: vec![vec![0.9, 0.1], vec![0.5, 0.5]],
            // ξ(0,0,0) ≥ 0.8, against a stationary value of 0.75.
            event: EventSpec::HalfSpace { coefficients: vec![1.0, 0.0, 0.0, 0.0], bound: 0.8 },
            grid_step: 1e-3,
            bracket_tolerance: 0.05,
        }
    }
}

impl LdpSettings {
    pub fn kernel(&self) -> Result<Kernel> {
        let nested: Vec<Vec<Vec<f64>>> = self.chain.iter().map(|row| vec![row.clone()]).collect();
        Kernel::from_nested(&nested)
    }
}

/// A configuration document. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mdp: Option<MdpSource>,
    pub behavioral: Option<PolicySpec>,
    pub evaluation: Option<PolicySpec>,
    /// Sample sizes T.
    #[serde(rename = "T")]
    pub horizons: Option<Vec<usize>>,
    pub radii: Option<RadiusSpec>,
    pub seeds: Option<SeedSpec>,
    pub critic: Option<CriticSettings>,
    pub smoothing: Option<Smoothing>,
    pub actor: Option<ActorSettings>,
    pub ldp: Option<LdpSettings>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut cfg.mdp {
            Some(MdpSource::File(p)) | Some(MdpSource::MachineReplacement(p)) => rebase(p),
            _ => {}
        }
        if let Some(p) = &mut cfg.output {
            rebase(p);
        }
        Ok(cfg)
    }

    /// Fills every missing section with the defaults of `experiment` and
    /// validates the result.
    pub fn resolve(&self, experiment: Experiment) -> Result<ResolvedConfig> {
        let default_mdp = match experiment {
            Experiment::Simulate | Experiment::Ope => MdpSource::Builtin(BuiltinMdp::Gridworld),
            Experiment::Optimize => MdpSource::Builtin(BuiltinMdp::MachineReplacement),
            Experiment::Ldp => MdpSource::Builtin(BuiltinMdp::TwoState),
        };
        let source = self.mdp.clone().unwrap_or(default_mdp);
        let mdp = load_mdp(&source)?;
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let default_behavioral = match (&source, experiment) {
            (_, Experiment::Optimize) => PolicySpec::Uniform,
            (MdpSource::Builtin(BuiltinMdp::TwoState), _) => PolicySpec::StateIndependent(vec![0.7, 0.3]),
            (MdpSource::Builtin(BuiltinMdp::Gridworld), _) => PolicySpec::Geometric,
            _ => PolicySpec::Uniform,
        };
        let behavioral = self.behavioral.clone().unwrap_or(default_behavioral).build(ns, na)?;
        let evaluation = self.evaluation.clone().unwrap_or(PolicySpec::Uniform).build(ns, na)?;
        if evaluation.min_prob() <= 0.0 {
            return Err(Error::Config("evaluation policy must be strictly positive".into()));
        }
        let horizons = self.horizons.clone().unwrap_or_else(|| match experiment {
            Experiment::Simulate => vec![1000],
            Experiment::Ope => vec![500, 1000, 2000],
            Experiment::Optimize => vec![100, 200, 300, 400],
            Experiment::Ldp => vec![400],
        });
        if horizons.is_empty() || horizons.iter().any(|&t| t < 2) {
            return Err(Error::Config("sample sizes must be a nonempty list of values ≥ 2".into()));
        }
        let radii = self.radii.clone().unwrap_or(match experiment {
            Experiment::Optimize => RadiusSpec::Schedule { scale: 4.5 },
            _ => RadiusSpec::Table,
        });
        radii.validate()?;
        let seeds = self
            .seeds
            .clone()
            .unwrap_or(match experiment {
                Experiment::Simulate => SeedSpec::Count(1),
                Experiment::Ope => SeedSpec::Count(20),
                Experiment::Optimize => SeedSpec::Count(100),
                Experiment::Ldp => SeedSpec::Count(10_000),
            })
            .seeds();
        if seeds.is_empty() {
            return Err(Error::Config("seed list must be nonempty".into()));
        }
        let critic = self.critic.clone().unwrap_or_else(|| match source {
            MdpSource::Builtin(BuiltinMdp::Gridworld) => CriticSettings::gridworld(),
            _ => CriticSettings::default(),
        });
        let beta_ok = critic.beta.is_none_or(|b| b > 1.0);
        if critic.iterations == 0 || !(0.0..0.5).contains(&critic.step_size) || !beta_ok || !(critic.tolerance > 0.0) {
            return Err(Error::Config("critic needs M ≥ 1, η ∈ [0, 1/2), β > 1 and δ > 0".into()));
        }
        let smoothing = self.smoothing.unwrap_or_default();
        smoothing.validate()?;
        let actor = self.actor.clone().unwrap_or_default();
        actor.validate(na)?;
        let ldp = self.ldp.clone().unwrap_or_default();
        ldp.event.validate()?;
        if experiment == Experiment::Ldp {
            let kernel = ldp.kernel()?;
            if ldp.event.dim() != kernel.num_states() * kernel.num_states() {
                return Err(Error::Config("event dimension must equal S·S for a single-action chain".into()));
            }
        }
        Ok(ResolvedConfig {
            source,
            mdp,
            behavioral,
            evaluation,
            horizons,
            radii,
            seeds,
            critic,
            smoothing,
            actor,
            ldp,
        })
    }
}

/// A validated config with every default filled in.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub source: MdpSource,
    pub mdp: TabularMdp,
    pub behavioral: Policy,
    pub evaluation: Policy,
    pub horizons: Vec<usize>,
    pub radii: RadiusSpec,
    pub seeds: Vec<u64>,
    pub critic: CriticSettings,
    pub smoothing: Smoothing,
    pub actor: ActorSettings,
    pub ldp: LdpSettings,
}

/// Builds the MDP named by a source.
pub fn load_mdp(source: &MdpSource) -> Result<TabularMdp> {
    match source {
        MdpSource::Builtin(BuiltinMdp::Gridworld) => Ok(build_gridworld()),
        MdpSource::Builtin(BuiltinMdp::TwoState) => Ok(two_state_test_mdp().0),
        MdpSource::Builtin(BuiltinMdp::MachineReplacement) => build_machine_replacement(None),
        MdpSource::MachineReplacement(path) => build_machine_replacement(Some(path)),
        MdpSource::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let file: MdpFile =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            file.into_mdp()
        }
    }
}
