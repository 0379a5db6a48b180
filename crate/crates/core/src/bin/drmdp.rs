//! Command-line front end of the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use drmdp::bench::commands;
use drmdp::bench::config::{Experiment, ExperimentConfig, RadiusSpec, SeedSpec};
use drmdp::Result;

#[derive(Parser)]
#[command(
    name = "drmdp",
    version,
    about = "Distributionally robust evaluation and optimization for average-reward MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate behavioral trajectories and write them as CSV.
    Simulate(Common),
    /// Off-policy evaluation: robust and plug-in estimates per (T, seed, radius).
    Ope(Common),
    /// Policy optimization: robust actor-critic against the plug-in policy.
    Optimize(Common),
    /// Monte-Carlo check of the large-deviations rate bracket.
    LdpCheck(Common),
    /// Parse and validate a config file.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        /// Subcommand whose defaults complete the config.
        #[arg(long, value_enum, default_value_t = Target::Ope)]
        target: Target,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Simulate,
    Ope,
    Optimize,
    LdpCheck,
}

impl From<Target> for Experiment {
    fn from(t: Target) -> Self {
        match t {
            Target::Simulate => Experiment::Simulate,
            Target::Ope => Experiment::Ope,
            Target::Optimize => Experiment::Optimize,
            Target::LdpCheck => Experiment::Ldp,
        }
    }
}

#[derive(Args)]
struct Common {
    /// JSON config file; missing sections take the subcommand's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's `output`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of seeds `n` (seeds 0..n) or a comma-separated seed list.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Comma-separated radii used at every sample size.
    #[arg(long, value_delimiter = ',')]
    radius_grid: Option<Vec<f64>>,
    /// Comma-separated sample sizes.
    #[arg(long = "T", value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.seeds {
            cfg.seeds = Some(SeedSpec::parse(s)?);
        }
        if let Some(r) = &self.radius_grid {
            cfg.radii = Some(RadiusSpec::Grid(r.clone()));
        }
        if let Some(t) = &self.horizons {
            cfg.horizons = Some(t.clone());
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.config()?;
            let out = c.out_dir(&cfg);
            let files = commands::simulate(&cfg.resolve(Experiment::Simulate)?, &out)?;
            println!("wrote {} trajectories to {}", files.len(), out.display());
        }
        Command::Ope(c) => {
            let cfg = c.config()?;
            let out = c.out_dir(&cfg);
            let summary = commands::ope(&cfg.resolve(Experiment::Ope)?, &out, c.threads)?;
            println!("true value {:.6}", summary.true_value);
            for s in &summary.settings {
                println!(
                    "T={} {} hyper={:.6e} beta_hat={:.2} mean={:.6}",
                    s.len, s.estimator, s.hyper, s.beta_hat, s.mean_estimate
                );
            }
            println!("smoothed runs {}/{}", summary.smoothed_runs, summary.total_runs);
            println!("results in {}", out.display());
        }
        Command::Optimize(c) => {
            let cfg = c.config()?;
            let out = c.out_dir(&cfg);
            for s in commands::optimize(&cfg.resolve(Experiment::Optimize)?, &out, c.threads)? {
                println!(
                    "T={} radius={:.6e} robust_win={:.3} plug_in_win={:.3} failures={}",
                    s.len, s.radius, s.robust_win_freq, s.plug_in_win_freq, s.failures
                );
            }
            println!("results in {}", out.display());
        }
        Command::LdpCheck(c) => {
            let cfg = c.config()?;
            let out = c.out_dir(&cfg);
            let resolved = cfg.resolve(Experiment::Ldp)?;
            let tol = resolved.ldp.bracket_tolerance;
            for r in commands::ldp_check(&resolved, &out, c.threads)? {
                let est = r.rate_est.map_or("none".to_owned(), |v| format!("{v:.5}"));
                println!(
                    "T={} hits={}/{} rate={} bracket=[{:.5}, {:.5}] {}",
                    r.len,
                    r.hits,
                    r.trials,
                    est,
                    r.rate_lb,
                    r.rate_ub,
                    if r.in_bracket(tol) { "inside" } else { "outside" }
                );
            }
            println!("results in {}", out.display());
        }
        Command::ValidateConfig { config, target } => {
            let resolved = ExperimentConfig::load(&config)?.resolve(target.into())?;
            let (states, actions) = match target {
                Target::LdpCheck => (resolved.ldp.chain.len(), 1),
                _ => (resolved.mdp.num_states(), resolved.mdp.num_actions()),
            };
            println!(
                "ok: {} states, {} actions, {} sample sizes, {} seeds",
                states,
                actions,
                resolved.horizons.len(),
                resolved.seeds.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
