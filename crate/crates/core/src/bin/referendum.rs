//! Scenario runner.
//!
//! Exit codes: 0 VALID, 2 INVALID, 3 INCONCLUSIVE, 1 configuration or I/O
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use referendum::scenario::{self, ScenarioConfig, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "referendum", version, about = "Run and verify ledger-based referenda")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and write ledger.dump, report.txt, trace.txt.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-verify a ledger dump against the parameters a config implies.
    Replay {
        dump: PathBuf,
        config: PathBuf,
        /// Must match the seed the dump was produced with.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check hash-chain integrity of a dump only.
    Verify { dump: PathBuf },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, String> {
    let mut config = ScenarioConfig::load(path).map_err(|e| e.to_string())?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn main_inner(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let config = load_config(&config, seed)?;
            let output = scenario::run(&config).map_err(|e| e.to_string())?;
            output
                .write_to(&out)
                .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            print!("{}", output.report.to_text());
            Ok(output.exit_code())
        }
        Command::Replay { dump, config, seed } => {
            let config = load_config(&config, seed)?;
            let report = scenario::replay(&read(&dump)?, &config).map_err(|e| e.to_string())?;
            print!("{}", report.to_text());
            Ok(report.exit_code())
        }
        Command::Verify { dump } => match scenario::verify_dump(&read(&dump)?) {
            Ok(checkpoint) => {
                println!("ledger_integrity = ok");
                println!("records = {}", checkpoint.len);
                println!("head = {}", checkpoint.head);
                Ok(0)
            }
            Err(violation) => {
                println!(
                    "ledger_integrity = violation(seq {}, {})",
                    violation.seq,
                    violation.kind.as_str()
                );
                Ok(2)
            }
        },
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
