use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradmap::cli::{cmd_bench, cmd_explore, cmd_verify, CliError, RunConfig};
use gradmap::verify::Suite;

#[derive(Parser)]
#[command(version, about = "Active occupancy-grid mapping experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one exploration episode.
    Explore(RunArgs),
    /// Run the env x start x planner benchmark matrix.
    Bench(RunArgs),
    /// Run a seeded property suite (gradcheck, smi-oracle, additivity, liegroup or all).
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set episode.budget_m=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(args: Args) -> Result<bool, CliError> {
    match args.command {
        Command::Explore(a) => {
            let (cfg, text) = RunConfig::load(a.config.as_deref(), &a.overrides)?;
            cmd_explore(&cfg, &text, &a.overrides).map(|()| true)
        }
        Command::Bench(a) => {
            let (cfg, text) = RunConfig::load(a.config.as_deref(), &a.overrides)?;
            cmd_bench(&cfg, &text, &a.overrides).map(|()| true)
        }
        Command::Verify { suite, seed } => {
            let suites = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite
                    .parse()
                    .map_err(|e: gradmap::Error| CliError::Config(e.to_string()))?]
            };
            cmd_verify(&suites, seed)
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
