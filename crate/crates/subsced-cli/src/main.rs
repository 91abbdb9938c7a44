//! `subsced`: fit heteroscedastic linear models on CSV data, certify
//! candidate weights against true variances, construct feasible weights,
//! and run the seeded simulation protocols.
//!
//! Exit codes: 0 success, 2 parse/validation error, 3 non-convergence,
//! 4 simulation produced an invalid cell.

mod commands;
mod csvio;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: String) -> Self {
        CliError { code: 2, message }
    }

    pub fn not_converged(message: String) -> Self {
        CliError { code: 3, message }
    }

    pub fn invalid_cell(message: String) -> Self {
        CliError { code: 4, message }
    }
}

impl From<subsced::Error> for CliError {
    fn from(e: subsced::Error) -> Self {
        match e {
            subsced::Error::NotConverged(_) | subsced::Error::DegenerateScale => {
                CliError::not_converged(e.to_string())
            }
            _ => CliError::validation(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "subsced",
    about = "Subscedastic weight certification and robust heteroscedastic regression",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on CSV data and print a JSON report.
    Fit(commands::fit::FitArgs),
    /// Certify candidate weights against true variances.
    Certify(commands::certify::CertifyArgs),
    /// Run a simulation specification and write result tables.
    Simulate(commands::simulate::SimulateArgs),
    /// Construct feasible weights and write them to CSV.
    DesignWeights(commands::design_weights::DesignWeightsArgs),
}

fn main() {
    if let Ok(threads) = std::env::var("SUBSCED_THREADS") {
        if let Ok(n) = threads.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit::run(args),
        Command::Certify(args) => commands::certify::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::DesignWeights(args) => commands::design_weights::run(args),
    };
    if let Err(err) = result {
        eprintln!("{}", serde_json::json!({ "error": err.message }));
        std::process::exit(err.code as i32);
    }
}
