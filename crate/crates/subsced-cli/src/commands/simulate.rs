//! `subsced simulate`: run a JSON experiment specification and write one
//! CSV per metric plus a reproducibility manifest.

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subsced::simharness::{
    run_consistency_experiment, run_coverage_experiment, run_sgv_experiment, ExperimentSpec,
    IntervalMethod, ResultTable, WeightRule,
};

use crate::CliError;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sgv,
    Coverage,
    Consistency,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub interval_methods: Vec<IntervalMethod>,
    #[serde(default)]
    pub weight_rule: Option<WeightRule>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON simulation specification.
    #[arg(long)]
    spec: String,
    /// Output directory (created if absent).
    #[arg(long)]
    out: String,
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let raw = std::fs::read(&args.spec)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", args.spec)))?;
    let spec: SimulationSpec = serde_json::from_slice(&raw)
        .map_err(|e| CliError::validation(format!("invalid spec: {e}")))?;
    spec.experiment.validate().map_err(CliError::from)?;

    let table: ResultTable = match spec.kind {
        ExperimentKind::Sgv => run_sgv_experiment(&spec.experiment)?,
        ExperimentKind::Coverage => {
            if spec.interval_methods.is_empty() {
                return Err(CliError::validation(
                    "coverage experiments need interval_methods".into(),
                ));
            }
            run_coverage_experiment(&spec.experiment, &spec.interval_methods)?
        }
        ExperimentKind::Consistency => {
            let rule = spec.weight_rule.unwrap_or(WeightRule { noise: 0.0 });
            run_consistency_experiment(&spec.experiment, &rule)?.to_table()
        }
    };

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", args.out)))?;
    let mut outputs = Vec::new();
    for metric in table.metric_names() {
        let file = format!("{metric}_{}.csv", spec.name);
        let path = format!("{}/{file}", args.out);
        std::fs::write(&path, table.to_csv(&metric))
            .map_err(|e| CliError::validation(format!("cannot write {path}: {e}")))?;
        outputs.push(file);
    }

    let manifest = serde_json::json!({
        "name": spec.name,
        "kind": spec.kind,
        "seed": spec.experiment.seed,
        "spec_sha256": hex_digest(&raw),
        "outputs": outputs,
        "dropped": table.dropped,
    });
    let manifest_path = format!("{}/manifest.json", args.out);
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::validation(e.to_string()))?
            + "\n",
    )
    .map_err(|e| CliError::validation(format!("cannot write {manifest_path}: {e}")))?;

    if table.any_invalid() {
        return Err(CliError::invalid_cell(format!(
            "one or more cells dropped more than 1% of replicates: {:?}",
            table.dropped
        )));
    }
    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
