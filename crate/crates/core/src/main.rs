use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use qform_tails::cli::{run_command, CommandConfig, Subcommand};
use serde_json::json;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Norms,
    Bounds,
    Simulate,
    Regression,
    Calibrate,
}

/// Orlicz-norm tail bounds for quadratic forms, with Monte Carlo checks.
#[derive(Debug, Parser)]
#[command(name = "qform-tails", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Cmd,
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sampling; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let subcommand = match args.subcommand {
        Cmd::Norms => Subcommand::Norms,
        Cmd::Bounds => Subcommand::Bounds,
        Cmd::Simulate => Subcommand::Simulate,
        Cmd::Regression => Subcommand::Regression,
        Cmd::Calibrate => Subcommand::Calibrate,
    };
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = CommandConfig {
        subcommand,
        config_path: args.config,
        out_dir: args.out,
        seed_override: args.seed,
        workers,
    };
    match run_command(&cfg) {
        Ok(out) => {
            println!("{}", out.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = json!({
                "error": e.kind(),
                "module": e.module(),
                "subcommand": subcommand.name(),
                "message": e.to_string(),
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
