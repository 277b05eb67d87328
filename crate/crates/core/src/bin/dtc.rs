use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dtc_core::cli::{cmd_plan, cmd_run, cmd_validate};

#[derive(Parser)]
#[command(name = "dtc", version, about = "Coalition digital-twin orchestration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Run a scenario and write the report and event log.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Dry-run federation for one mission against the initial state.
    Plan {
        scenario: PathBuf,
        #[arg(long)]
        mission: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let out = match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Run { scenario, seed, out, log } => cmd_run(&scenario, seed, out.as_deref(), log.as_deref()),
        Command::Plan { scenario, mission } => cmd_plan(&scenario, &mission),
    };
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
