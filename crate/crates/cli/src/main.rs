use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tugwar_core::config::load_config;
use tugwar_core::experiment::{self, EXIT_CONFIG};
use tugwar_core::solutions;

/// Tug-of-war games with running payoff and infinity-Laplacian checks.
#[derive(Parser)]
#[command(name = "tugwar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set game.epsilon=0.05`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Load and validate a config without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the reference solutions usable as expressions in configs.
    Catalog {
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = match load_config(&config, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            let outcome = experiment::run(&cfg);
            for w in &outcome.report.warnings {
                log::warn!("{w}");
            }
            for e in &outcome.report.errors {
                eprintln!("error: {e}");
            }
            println!("{}", outcome.report_path.display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Command::Validate { config, overrides } => match load_config(&config, &overrides) {
            Ok(cfg) => {
                println!("{}: ok ({})", config.display(), cfg.experiment);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", config.display());
                ExitCode::from(EXIT_CONFIG as u8)
            }
        },
        Command::Catalog { json } => {
            let entries = solutions::catalog();
            if json {
                println!("{}", serde_json::to_string_pretty(&entries).expect("catalog serializes"));
            } else {
                for s in &entries {
                    println!("{:<20} {}D  {:<36} {}", s.name, s.dim, s.expression, s.notes);
                }
            }
            ExitCode::SUCCESS
        }
    }
}
