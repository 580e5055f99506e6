//! `hpn`: verify the algebra and operators, run flows, tabulate the hierarchy
//! and reconstruct curves.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hpn_cli::commands::{self, RunArgs};
use hpn_cli::error::CliError;
use hpn_cli::json;

#[derive(Debug, Parser)]
#[command(name = "hpn", version, about = "Soliton flows of curves in quaternionic projective space")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Seed for the random presets; overrides the configured one.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<Common> for RunArgs {
    fn from(c: Common) -> Self {
        RunArgs { config: c.config, seed: c.seed, out: c.out }
    }
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Run the verification suites and print a report.
    Verify {
        /// One of algebra, operators, flows, geometry, all.
        #[arg(long, default_value = "all")]
        scope: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write verify_report.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the configured flow.
    Simulate(Common),
    /// Tabulate the hierarchy of flows and Hamiltonians.
    Hierarchy {
        #[command(flatten)]
        common: Common,
        /// Highest level `l`.
        #[arg(long, default_value_t = 2)]
        lmax: usize,
    },
    /// Reconstruct the curve of the initial state.
    Reconstruct(Common),
}

fn run(verb: Verb) -> Result<(), CliError> {
    match verb {
        Verb::Verify { scope, seed, out } => {
            let report = commands::verify(&scope, seed, out.as_deref())?;
            print!("{}", json::to_string(&report));
            let failed = report.checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::ChecksFailed { failed, total: report.checks.len() });
            }
        }
        Verb::Simulate(c) => {
            let s = commands::simulate(&commands::effective_config(&c.into())?)?;
            print!("{}", json::to_string(&s));
        }
        Verb::Hierarchy { common, lmax } => {
            let s = commands::hierarchy(&commands::effective_config(&common.into())?, lmax)?;
            print!("{}", json::to_string(&s));
        }
        Verb::Reconstruct(c) => {
            let s = commands::reconstruct(&commands::effective_config(&c.into())?)?;
            print!("{}", json::to_string(&s));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hpn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
