//! `subsced certify`: membership verdict for candidate weights, optionally
//! cross-checked by the brute-force defect oracle.

use clap::Args;
use serde_json::json;
use subsced::linmodel::DiagonalWeights;
use subsced::subscedastic::{brute_force_excess, certify, Witness, DEFAULT_EXCESS_GRID};

use crate::csvio::read_weights;
use crate::CliError;

#[derive(Args)]
pub struct CertifyArgs {
    /// One-column CSV of candidate weights.
    #[arg(long)]
    candidate: String,
    /// One-column CSV of true variances.
    #[arg(long)]
    truth: String,
    /// Also run the brute-force defect oracle and report agreement.
    #[arg(long, default_value_t = false)]
    oracle: bool,
    /// Grid points per pair for the oracle.
    #[arg(long, default_value_t = DEFAULT_EXCESS_GRID)]
    grid: usize,
    #[arg(long)]
    out: Option<String>,
}

pub fn run(args: CertifyArgs) -> Result<(), CliError> {
    let candidate = DiagonalWeights::new(read_weights(&args.candidate)?)?;
    let truth = DiagonalWeights::new(read_weights(&args.truth)?)?;
    let cert = certify(&candidate, &truth)?;

    let witness = match &cert.witness {
        Some(Witness::Pair { i, j }) => json!({ "pair": [i, j] }),
        Some(Witness::Direction(u)) => json!({ "direction": u.iter().copied().collect::<Vec<f64>>() }),
        None => serde_json::Value::Null,
    };
    let mut report = json!({
        "verdict": cert.verdict,
        "margin": cert.margin,
        "witness": witness,
        "n": truth.len(),
    });
    if args.oracle {
        let (excess, direction) = brute_force_excess(&candidate, &truth, args.grid)?;
        let agrees = cert.verdict == (excess <= 1e-10);
        report["oracle"] = json!({
            "excess": excess,
            "direction": direction.iter().copied().collect::<Vec<f64>>(),
            "agrees": agrees,
        });
    }
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::validation(e.to_string()))?;
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| CliError::validation(format!("cannot write {path}: {e}")))?,
        None => println!("{text}"),
    }
    Ok(())
}
