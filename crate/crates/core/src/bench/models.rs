//! Benchmark environments and policies.

use std::path::Path;

use serde::Deserialize;

use crate::error::{precondition, shape};
use crate::mdp::{chain_matrix, is_irreducible, Kernel, Policy, Reward, TabularMdp};
use crate::{Error, Result};

/// Side length of the GridWorld.
pub const GRID_SIDE: usize = 5;
/// GridWorld actions in index order.
pub const GRID_ACTIONS: [&str; 4] = ["up", "down", "left", "right"];

/// Shipped machine-replacement kernel.
pub const DEFAULT_MACHINE_REPLACEMENT: &str = include_str!("../../data/machine_replacement.json");

/// GridWorld transition probability in tenths, so every row is built from
/// exact integers: 7 to the neighbor in the chosen direction, 1 to every other
/// neighbor and the remainder to the cell itself.
pub fn gridworld_tenths(s: usize, a: usize, next: usize) -> u32 {
    let (row, col) = (s / GRID_SIDE, s % GRID_SIDE);
    let neighbors = [
        (row > 0).then(|| s - GRID_SIDE),
        (row + 1 < GRID_SIDE).then(|| s + GRID_SIDE),
        (col > 0).then(|| s - 1),
        (col + 1 < GRID_SIDE).then(|| s + 1),
    ];
    let weight = |d: usize| if d == a { 7 } else { 1 };
    if next == s {
        let moved: u32 = (0..4).filter(|&d| neighbors[d].is_some()).map(weight).sum();
        return 10 - moved;
    }
    (0..4).find(|&d| neighbors[d] == Some(next)).map_or(0, weight)
}

/// 5×5 GridWorld: Goal in cell 1 (reward 0), Bad in cell 25 (reward -5),
/// -1.5 elsewhere; cells are numbered row by row from the top left.
pub fn build_gridworld() -> TabularMdp {
    let n = GRID_SIDE * GRID_SIDE;
    let kernel = Kernel::from_fn(n, 4, |s, a, t| f64::from(gridworld_tenths(s, a, t)) / 10.0)
        .expect("GridWorld rows are stochastic");
    let mut state_rewards = vec![-1.5; n];
    state_rewards[0] = 0.0;
    state_rewards[n - 1] = -5.0;
    let reward = Reward::from_states(&state_rewards, 4).expect("reward shape");
    TabularMdp::new(kernel, reward, vec![1.0 / n as f64; n]).expect("GridWorld is valid")
}

/// State-independent behavioral policy with `π(a) = 0.9 · 0.1^a / (1 - 0.1^A)`.
pub fn geometric_policy(num_states: usize, num_actions: usize) -> Policy {
    let norm = 1.0 - 0.1f64.powi(num_actions as i32);
    let row: Vec<f64> = (0..num_actions).map(|a| 0.9 * 0.1f64.powi(a as i32) / norm).collect();
    Policy::state_independent(num_states, &row).expect("geometric weights are normalized")
}

/// The geometric behavioral policy on the GridWorld.
pub fn build_behavioral_geometric() -> Policy {
    geometric_policy(GRID_SIDE * GRID_SIDE, 4)
}

/// Two-state, two-action test MDP with distinct kernels per action, a
/// behavioral policy `(0.7, 0.3)` and the uniform evaluation policy.
pub fn two_state_test_mdp() -> (TabularMdp, Policy, Policy) {
    let kernel = Kernel::from_nested(&[vec![vec![0.9, 0.1], vec![0.4, 0.6]], vec![vec![0.3, 0.7], vec![0.8, 0.2]]])
        .expect("stochastic rows");
    let reward = Reward::new(2, 2, vec![1.0, 0.5, 0.0, -0.5]).expect("reward shape");
    let mdp = TabularMdp::new(kernel, reward, vec![0.5, 0.5]).expect("valid MDP");
    let behavioral = Policy::state_independent(2, &[0.7, 0.3]).expect("valid policy");
    (mdp, behavioral, Policy::uniform(2, 2))
}

/// Rewards of the machine-replacement problem: 0 in conditions 1-7, -20 in
/// condition 8, -2 in R1 and -10 in R2.
pub const MACHINE_REPLACEMENT_REWARDS: [f64; 10] = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -20.0, -2.0, -10.0];

#[derive(Debug, Deserialize)]
struct MachineReplacementFile {
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    kernel: Vec<Vec<Vec<f64>>>,
}

/// Builds the machine-replacement MDP from a kernel file, or from the
/// shipped default when `path` is `None`.
pub fn build_machine_replacement(path: Option<&Path>) -> Result<TabularMdp> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)?,
        None => DEFAULT_MACHINE_REPLACEMENT.to_owned(),
    };
    machine_replacement_from_json(&text)
}

/// Parses and validates a machine-replacement kernel document.
pub fn machine_replacement_from_json(text: &str) -> Result<TabularMdp> {
    let file: MachineReplacementFile = serde_json::from_str(text)?;
    let kernel =
        Kernel::from_nested(&file.kernel).map_err(|e| Error::Config(format!("machine-replacement kernel: {e}")))?;
    if kernel.num_states() != 10 || kernel.num_actions() != 2 {
        return Err(shape("machine replacement needs 10 states and 2 actions"));
    }
    if !is_irreducible(&chain_matrix(&Policy::uniform(10, 2), &kernel)?) {
        return Err(Error::Config("machine-replacement kernel is reducible under the uniform policy".into()));
    }
    let reward = Reward::from_states(&MACHINE_REPLACEMENT_REWARDS, 2)?;
    TabularMdp::new(kernel, reward, vec![0.1; 10])
}

/// A general MDP document: `kernel[s][a][s']`, `reward[s][a]` and an
/// optional initial distribution (uniform by default). Indices are 0-based.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    #[serde(default)]
    pub description: Option<String>,
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
}

impl MdpFile {
    pub fn into_mdp(self) -> Result<TabularMdp> {
        let kernel = Kernel::from_nested(&self.kernel)?;
        let (ns, na) = (kernel.num_states(), kernel.num_actions());
        if self.reward.len() != ns || self.reward.iter().any(|r| r.len() != na) {
            return Err(shape("reward table must be num_states × num_actions"));
        }
        let reward = Reward::new(ns, na, self.reward.concat())?;
        let initial = self.initial.unwrap_or_else(|| vec![1.0 / ns as f64; ns]);
        let mdp = TabularMdp::new(kernel, reward, initial)?;
        if !is_irreducible(&chain_matrix(&Policy::uniform(ns, na), &mdp.kernel)?) {
            return Err(precondition("MDP is reducible under the uniform policy"));
        }
        Ok(mdp)
    }
}
