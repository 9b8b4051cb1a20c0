//! `prlab <command> --config <path> [--out <dir>] [--json]`.
//!
//! Exit status: 0 on success, 2 for invalid input (configuration, usage,
//! output directory), 3 for numerical failures.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CATALOG;

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "PRLAB_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "prlab",
    version,
    about = "Numerical lab for curvature estimates of fully nonlinear elliptic equations"
)]
struct Cli {
    /// Machine-readable output (catalog or report) on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the environment and the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pucci extremal operators against sampled coefficients.
    Pucci(RunArgs),
    /// Monotone Dirichlet solve.
    Solve(RunArgs),
    /// Touching-paraboloid curvature fields.
    Theta(RunArgs),
    /// Cubic contact quantity.
    Psi(RunArgs),
    /// Tail exponent of the lower curvature.
    Tail(RunArgs),
    /// Measured ABP constant.
    Abp(RunArgs),
    /// Calderón–Zygmund covering check.
    Czcheck(RunArgs),
    /// Flatness iteration.
    Flatness(RunArgs),
    /// Empirical constants.
    Calibrate(RunArgs),
    /// Singular-set flags and covering dimension.
    Singular(RunArgs),
    /// Radial bump family.
    Counterexample(RunArgs),
}

impl Command {
    fn split(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Pucci(a) => ("pucci", a),
            Command::Solve(a) => ("solve", a),
            Command::Theta(a) => ("theta", a),
            Command::Psi(a) => ("psi", a),
            Command::Tail(a) => ("tail", a),
            Command::Abp(a) => ("abp", a),
            Command::Czcheck(a) => ("czcheck", a),
            Command::Flatness(a) => ("flatness", a),
            Command::Calibrate(a) => ("calibrate", a),
            Command::Singular(a) => ("singular", a),
            Command::Counterexample(a) => ("counterexample", a),
        }
    }
}

fn list(json: bool) {
    if json {
        let items: Vec<_> = CATALOG.iter().map(|c| serde_json::json!({ "name": c.name, "about": c.about })).collect();
        println!("{}", serde_json::to_string_pretty(&serde_json::json!({ "commands": items })).expect("catalog"));
    } else {
        println!("prlab commands:");
        for c in &CATALOG {
            println!("  {:<15} {}", c.name, c.about);
        }
        println!("\nRun `prlab <command> --config <file.json>`; see --help for options.");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(cmd) = cli.command else {
        list(cli.json);
        return ExitCode::SUCCESS;
    };
    let (name, args) = cmd.split();
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    match report::execute(name, &args.config, args.out.as_deref(), env_out.as_deref()) {
        Ok(done) => {
            if cli.json {
                println!("{}", done.report_json);
            } else {
                println!("prlab {name}: {}", done.summary);
                println!("wrote {} files to {}", done.files.len(), done.dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("prlab {name}: error: {e}");
            ExitCode::from(report::exit_code(&e))
        }
    }
}
