//! Command-line entry point for the decayed-MCMC filtering experiments.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use decfilt::config::{ExperimentConfig, Scenario};
use decfilt::report::{compare_report, format_table};
use decfilt::runner::run_experiment;
use decfilt_core::decay::DecayVariant;
use decfilt_core::diagnostics::mixing_parameter;
use decfilt_core::models::{make_random_hmm, write_model};

#[derive(Parser)]
#[command(
    name = "decfilt",
    version,
    about = "Decayed-MCMC filtering experiments: run sweeps, aggregate results, generate models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write its CSV.
    Run {
        /// Experiment config (TOML; schema documented in the README).
        config: PathBuf,
    },
    /// Aggregate result CSVs into a mean ± stderr table per sweep point.
    Report {
        /// One or more CSVs produced by `run`.
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Generate a synthetic model file with controllable determinism.
    GenModel(GenModelArgs),
    /// Run a switching-KF tracking experiment with flag overrides.
    SkfTrack(SkfTrackArgs),
}

#[derive(Args)]
struct GenModelArgs {
    /// Number of hidden states.
    #[arg(long)]
    states: usize,
    /// Number of observation symbols.
    #[arg(long)]
    obs: usize,
    /// Transition sharpness in [0, 1]: 0 = uniform rows, 1 = deterministic.
    #[arg(long)]
    tsharp: f64,
    /// Observation sharpness in [0, 1].
    #[arg(long)]
    osharp: f64,
    /// Generator seed.
    #[arg(long)]
    seed: u64,
    /// Output model file.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SkfTrackArgs {
    /// Experiment config with scenario = "skf_track".
    config: PathBuf,
    /// Override: particle-filter size (replaces sweep.particles).
    #[arg(long)]
    pf: Option<usize>,
    /// Override: decay spec `uniform | window:W | exp:BETA | poly:DELTA`.
    #[arg(long)]
    decay: Option<String>,
    /// Override: evidence limit L.
    #[arg(long)]
    limit: Option<usize>,
    /// Override: record the position tally every G sampling steps.
    #[arg(long)]
    gap: Option<u64>,
    /// Override: sampling steps per observation (replaces sweep.budgets).
    #[arg(long)]
    budget: Option<u64>,
    /// Override: replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Override: root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override: track up to this history length (replaces sweep.t).
    #[arg(long)]
    t: Option<usize>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_path(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let summary = run_experiment(&cfg)?;
            if let Some(model) = &cfg.model {
                println!(
                    "model {}: {} states, {} symbols, mixing parameter eta = {:.4}",
                    summary.model_id,
                    model.n_states(),
                    model.n_obs(),
                    mixing_parameter(model)
                );
            }
            println!(
                "{}: wrote {} rows to {}",
                cfg.scenario.name(),
                summary.rows,
                summary.output.display()
            );
        }
        Command::Report { csv } => {
            let rows = compare_report(&csv)?;
            print!("{}", format_table(&rows));
        }
        Command::GenModel(args) => {
            let model =
                make_random_hmm(args.states, args.obs, args.tsharp, args.osharp, args.seed)?;
            write_model(&args.output, &model)?;
            println!(
                "wrote {} ({} states, {} symbols, mixing parameter eta = {:.4})",
                args.output.display(),
                args.states,
                args.obs,
                mixing_parameter(&model)
            );
        }
        Command::SkfTrack(args) => {
            let mut cfg = ExperimentConfig::from_path(&args.config)
                .with_context(|| format!("loading {}", args.config.display()))?;
            if cfg.scenario != Scenario::SkfTrack {
                bail!(
                    "config {} has scenario {}; skf-track needs scenario = \"skf_track\"",
                    args.config.display(),
                    cfg.scenario.name()
                );
            }
            if let Some(n) = args.pf {
                cfg.particles = vec![n];
            }
            if let Some(spec) = &args.decay {
                let variant: DecayVariant = spec.parse()?;
                cfg.decays = vec![variant];
            }
            if let Some(limit) = args.limit {
                cfg.limit = Some(limit);
            }
            if let Some(gap) = args.gap {
                cfg.gap = gap;
            }
            if let Some(budget) = args.budget {
                cfg.budgets = vec![budget];
            }
            if let Some(reps) = args.reps {
                cfg.replications = reps;
            }
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(t) = args.t {
                cfg.t_values = vec![t];
            }
            let summary = run_experiment(&cfg)?;
            println!(
                "skf_track: wrote {} rows to {}",
                summary.rows,
                summary.output.display()
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
