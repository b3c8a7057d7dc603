//! Command-line front end for the fractional tumor-growth simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "fracgrow",
    version,
    about = "Spectral-Galerkin simulator for a relaxed fractional tumor-growth system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the JSON configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for emitted files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and emit CSV + estimate report.
    Simulate(CommonArgs),
    /// Run the configured relaxation-limit sweep.
    Sweep(CommonArgs),
    /// Evaluate the two-trajectory stability inequality.
    Stability(CommonArgs),
    /// Run the invariant suites and print pass/fail lines.
    Verify(CommonArgs),
    /// Re-derive reports from a stored trajectory.
    Report(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Stability(a) => ("stability", a),
        Command::Verify(a) => ("verify", a),
        Command::Report(a) => ("report", a),
    };

    match fracgrow::cli::run(name, &args.config, &args.out, args.seed) {
        Ok(outcome) => {
            for m in &outcome.messages {
                println!("{m}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
