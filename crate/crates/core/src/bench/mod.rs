//! Experiment harness behind the `drmdp` command-line tool: benchmark
//! models, configuration, the evaluation, optimization and large-deviations
//! experiments, and their CSV/JSON outputs.

pub mod commands;
pub mod config;
pub mod evaluation;
pub mod ldp;
pub mod models;
pub mod optimization;
pub mod output;

pub use config::{Experiment, ExperimentConfig, ResolvedConfig};
pub use models::{build_behavioral_geometric, build_gridworld, build_machine_replacement, two_state_test_mdp};
