//! Subcommand drivers: run an experiment in a thread pool and write its
//! files to an output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use super::config::{MdpSource, ResolvedConfig};
use super::evaluation::{run_ope_experiment, summarize_ope, true_value, OpeSummary};
use super::ldp::{run_ldp_check, LdpResultRow};
use super::optimization::{run_opt_runs, summarize_opt, winning_frequencies, OptSummaryRow};
use super::output::{with_pool, write_csv_file, write_json_file};
use crate::empirical::simulate_trajectory;
use crate::rng::derive_seed;
use crate::Result;

pub const OPE_RESULTS: &str = "ope_results.csv";
pub const OPT_RESULTS: &str = "opt_results.csv";
pub const OPT_RUNS: &str = "opt_runs.csv";
pub const LDP_RESULTS: &str = "ldp_results.csv";
pub const SUMMARY: &str = "summary.json";

fn source_label(source: &MdpSource) -> String {
    match source {
        MdpSource::Builtin(b) => {
            serde_json::to_value(b).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
        }
        MdpSource::File(p) | MdpSource::MachineReplacement(p) => p.display().to_string(),
    }
}

/// Writes one trajectory per (T, seed) as `trajectory_T{T}_seed{seed}.csv`.
pub fn simulate(cfg: &ResolvedConfig, out: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(out)?;
    let mut names = Vec::new();
    for &len in &cfg.horizons {
        for &seed in &cfg.seeds {
            let traj = simulate_trajectory(&cfg.mdp, &cfg.behavioral, len, derive_seed(seed, &[len as u64]))?;
            let name = format!("trajectory_T{len}_seed{seed}.csv");
            traj.write_csv(BufWriter::new(File::create(out.join(&name))?))?;
            names.push(name);
        }
    }
    Ok(names)
}

#[derive(Serialize)]
struct OpeReport<'a> {
    mdp: String,
    #[serde(flatten)]
    summary: &'a OpeSummary,
}

/// Off-policy evaluation: `ope_results.csv` and `summary.json`.
pub fn ope(cfg: &ResolvedConfig, out: &Path, threads: usize) -> Result<OpeSummary> {
    std::fs::create_dir_all(out)?;
    let rows = with_pool(threads, || run_ope_experiment(cfg))??;
    let summary = summarize_ope(&rows, true_value(cfg)?, cfg.critic.tolerance);
    write_csv_file(&out.join(OPE_RESULTS), &rows)?;
    write_json_file(&out.join(SUMMARY), &OpeReport { mdp: source_label(&cfg.source), summary: &summary })?;
    Ok(summary)
}

#[derive(Serialize)]
struct OptReport<'a> {
    mdp: String,
    per_horizon: &'a [OptSummaryRow],
}

/// Policy optimization: `opt_results.csv`, `opt_runs.csv` and `summary.json`.
pub fn optimize(cfg: &ResolvedConfig, out: &Path, threads: usize) -> Result<Vec<OptSummaryRow>> {
    std::fs::create_dir_all(out)?;
    let runs = with_pool(threads, || run_opt_runs(cfg))??;
    write_csv_file(&out.join(OPT_RESULTS), &winning_frequencies(&runs))?;
    write_csv_file(&out.join(OPT_RUNS), &runs)?;
    let summary = summarize_opt(&runs, cfg.seeds[0]);
    write_json_file(&out.join(SUMMARY), &OptReport { mdp: source_label(&cfg.source), per_horizon: &summary })?;
    Ok(summary)
}

#[derive(Serialize)]
struct LdpSummaryRow {
    #[serde(rename = "T")]
    len: usize,
    in_bracket: bool,
    upper_bound_only: bool,
}

#[derive(Serialize)]
struct LdpReport {
    bracket_tolerance: f64,
    grid_step: f64,
    per_horizon: Vec<LdpSummaryRow>,
}

/// Large-deviations check: `ldp_results.csv` and `summary.json`.
pub fn ldp_check(cfg: &ResolvedConfig, out: &Path, threads: usize) -> Result<Vec<LdpResultRow>> {
    std::fs::create_dir_all(out)?;
    let rows = with_pool(threads, || run_ldp_check(&cfg.ldp, &cfg.horizons, &cfg.seeds))??;
    write_csv_file(&out.join(LDP_RESULTS), &rows)?;
    let tol = cfg.ldp.bracket_tolerance;
    let report = LdpReport {
        bracket_tolerance: tol,
        grid_step: cfg.ldp.grid_step,
        per_horizon: rows
            .iter()
            .map(|r| LdpSummaryRow {
                len: r.len,
                in_bracket: r.in_bracket(tol),
                upper_bound_only: r.rate_est.is_none(),
            })
            .collect(),
    };
    write_json_file(&out.join(SUMMARY), &report)?;
    Ok(rows)
}
