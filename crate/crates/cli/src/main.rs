use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use driftlearn_cli::commands::{run_evaluate, run_fit, run_reproduce, run_simulate};
use driftlearn_cli::config::load_config;
use driftlearn_cli::CliResult;

/// Bayesian drift learning for stochastic differential equations.
#[derive(Parser)]
#[command(name = "driftlearn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory and write it as CSV
    Simulate(RunArgs),
    /// Draw posterior samples for the configured estimator
    Fit(RunArgs),
    /// Compute metrics and figure data from a fitted run
    Evaluate(RunArgs),
    /// Re-run a benchmark table or figure end to end
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Preset name or path to a JSON run configuration
    #[arg(long, value_name = "PATH")]
    config: String,
    /// Override a configuration field, e.g. --set chain.iterations=500
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Replace the simulation seed (the chain seed follows as N+1)
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (overrides the configured one)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// What to reproduce: table1..table4 or fig1..fig4
    target: String,
    /// Restrict a table to specific cells, e.g. "T=40,delta=0.05"
    /// (separate multiple cells with ';')
    #[arg(long, value_name = "SPEC")]
    cells: Option<String>,
    /// Base configuration replacing the target's bundled preset
    #[arg(long, value_name = "PATH")]
    config: Option<String>,
    /// Override a field of the base configuration
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed from which all per-cell seeds are derived
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Maximum number of cells to run concurrently
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
    /// Output directory (default: out/<target>)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => run_simulate(&load_run(&args)?),
        Command::Fit(args) => run_fit(&load_run(&args)?),
        Command::Evaluate(args) => run_evaluate(&load_run(&args)?),
        Command::Reproduce(args) => {
            if args.config.is_none() && !args.set.is_empty() {
                return Err(driftlearn_cli::CliError::Config(
                    "--set for reproduce requires --config (pass a bundled preset name to modify it)"
                        .to_string(),
                ));
            }
            let base = args
                .config
                .as_deref()
                .map(|source| load_config(source, &args.set, None, None))
                .transpose()?;
            run_reproduce(
                &args.target,
                base,
                args.cells.as_deref(),
                args.seed,
                args.jobs,
                args.out.as_deref(),
            )
        }
    }
}

fn load_run(args: &RunArgs) -> CliResult<driftlearn_cli::config::RunConfig> {
    load_config(&args.config, &args.set, args.seed, args.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("driftlearn: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
