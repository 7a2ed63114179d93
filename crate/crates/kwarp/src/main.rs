//! `kwarp`: batch runs of the certification, soliton, gluing, lift and flow pipelines.
//!
//! Exit codes: 0 success, 2 certification or acceptance failure, 3 numeric failure, 4 bad config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kahler_warp::Error;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: 4, message: message.into() }
    }
    pub fn numeric(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BadConfig(_) => 4,
            Error::CertificationFailed(_) | Error::NotSmoothClosure { .. } | Error::NotKahler { .. } | Error::NegativeLambda { .. } => 2,
            _ => 3,
        };
        CliError { code, message: e.to_string() }
    }
}

/// What a finished run reports: `passed = false` maps to exit code 2.
pub struct Outcome {
    pub passed: bool,
    pub message: String,
    /// Set under `--json-only`: the message goes to stderr so stdout stays JSON.
    pub quiet: bool,
}

#[derive(Parser)]
#[command(name = "kwarp", version, about = "Curvature certification, solitons, gluing, cone lifts and Ricci flow for warped Kähler metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// `key = value` file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (default `kwarp-out/<command>`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write only summary.json and print it to stdout
    #[arg(long, global = true)]
    json_only: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Certify λ ≥ threshold for a profile family or a profile file
    Certify(commands::CertifyArgs),
    /// Glue an expander into h_k and close the far end
    Glue(commands::GlueArgs),
    /// Shoot an expanding soliton onto a cone angle
    Expander(commands::ExpanderArgs),
    /// Cao's steady soliton and its tip sectional curvature
    Steady(commands::SteadyArgs),
    /// Lift a closed profile to a Kähler cone and bound its Sasaki link
    Lift(commands::LiftArgs),
    /// Ricci flow of a mollified h_k with the λ monitor
    Flow(commands::FlowArgs),
    /// Check the integration-by-parts identity I = 2aJ
    Acintegral(commands::AcArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Certify(a) => commands::certify(a),
        Command::Glue(a) => commands::glue(a),
        Command::Expander(a) => commands::expander(a),
        Command::Steady(a) => commands::steady(a),
        Command::Lift(a) => commands::lift(a),
        Command::Flow(a) => commands::flow(a),
        Command::Acintegral(a) => commands::acintegral(a),
    };
    match result {
        Ok(o) => {
            if o.quiet {
                eprintln!("{}", o.message);
            } else {
                println!("{}", o.message);
            }
            if o.passed { ExitCode::SUCCESS } else { ExitCode::from(2) }
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
