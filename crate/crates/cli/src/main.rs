//! Command-line entry point for the simulator: `run` executes a back-off
//! sweep and writes reproducible results, `selftest` runs the fast invariant
//! suite.

mod config;
mod run;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "qisac",
    version,
    about = "Two-qudit sensing-and-communication simulator and sweep runner"
)]
struct Cli {
    /// Shorthand for the `selftest` subcommand.
    #[arg(long)]
    selftest: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a back-off sweep (or a single point) and write CSV + manifest.
    Run(Box<config::RunArgs>),
    /// Run the fast invariant suite and report pass/fail per group.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct SelftestArgs {
    /// Flip the controlled-gate convention; the determinism group must then
    /// fail, proving the suite can catch a broken decoder.
    #[arg(long)]
    flip_cx: bool,
}

fn main() {
    let cli = Cli::parse();
    let code = match (&cli.command, cli.selftest) {
        (Some(Command::Run(args)), _) => match run::execute_args(args) {
            Ok(_) => 0,
            Err(e) => {
                eprintln!("error: {e:#}");
                1
            }
        },
        (Some(Command::Selftest(args)), _) => {
            if run::selftest(args.flip_cx) {
                0
            } else {
                1
            }
        }
        (None, true) => {
            if run::selftest(false) {
                0
            } else {
                1
            }
        }
        (None, false) => {
            eprintln!("nothing to do; try `qisac run --fast` or `qisac selftest`");
            2
        }
    };
    std::process::exit(code);
}
