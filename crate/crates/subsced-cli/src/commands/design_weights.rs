//! `subsced design-weights`: construct feasible weights from partial
//! knowledge and write a one-column CSV plus a JSON sidecar recording the
//! construction.

use clap::{Args, ValueEnum};
use serde_json::json;
use subsced::linmodel::Design;
use subsced::weightdesign::{
    covariate_family, covariate_weights, groupwise_weights, mixed_effects_weights,
    parametric_fls_weights, CovariateFamily, GroupSpec, MixedSpec, ParametricForm, ParametricOpts,
};

use crate::csvio::{read_labels, write_weights, DataFrame};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Groupwise,
    Covariate,
    Mixed,
    Parametric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Power,
    LogPower,
    ExpQuadratic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Form {
    LogAbsX,
    LinearX,
}

#[derive(Args)]
pub struct DesignWeightsArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Output CSV path; a `.json` sidecar is written next to it.
    #[arg(long)]
    out: String,

    /// groupwise/mixed: comma-separated group sizes in group-id order.
    #[arg(long)]
    sizes: Option<String>,
    /// groupwise/mixed: one-column CSV of per-observation group ids.
    #[arg(long)]
    groups: Option<String>,
    /// groupwise: permutation of group ids from lowest to highest
    /// variance (defaults to id order).
    #[arg(long)]
    order: Option<String>,
    /// groupwise: lower bound on consecutive variance ratios (>= 1).
    /// mixed: upper bound on theta0^2/theta1^2 (> 0).
    #[arg(long)]
    gamma: Option<f64>,

    /// covariate/parametric: CSV data file.
    #[arg(long)]
    data: Option<String>,
    /// covariate: column holding the scedastic covariate.
    #[arg(long)]
    column: Option<String>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// covariate: scedastic exponent/parameter.
    #[arg(long)]
    theta: Option<f64>,

    /// parametric: response column.
    #[arg(long)]
    response: Option<String>,
    #[arg(long, value_enum)]
    form: Option<Form>,
    /// parametric: prepend an intercept column of ones.
    #[arg(long, default_value_t = false)]
    intercept: bool,

    /// mixed: also write the shared eigenbasis to this CSV.
    #[arg(long)]
    eigvecs_out: Option<String>,
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::validation(format!("bad {what} entry '{t}'")))
        })
        .collect()
}

fn membership(args: &DesignWeightsArgs) -> Result<(Vec<usize>, usize), CliError> {
    match (&args.sizes, &args.groups) {
        (Some(sizes), None) => {
            let sizes = parse_usize_list(sizes, "--sizes")?;
            if sizes.is_empty() || sizes.iter().any(|&s| s == 0) {
                return Err(CliError::validation("group sizes must be positive".into()));
            }
            let mut who = Vec::new();
            for (g, &s) in sizes.iter().enumerate() {
                who.extend(std::iter::repeat_n(g, s));
            }
            Ok((who, sizes.len()))
        }
        (None, Some(path)) => {
            let labels = read_labels(path)?;
            let k = labels.iter().max().map(|m| m + 1).unwrap_or(0);
            Ok((labels, k))
        }
        _ => Err(CliError::validation(
            "provide exactly one of --sizes or --groups".into(),
        )),
    }
}

pub fn run(args: DesignWeightsArgs) -> Result<(), CliError> {
    let (weights, sidecar) = match args.mode {
        Mode::Groupwise => {
            let gamma = args
                .gamma
                .ok_or_else(|| CliError::validation("groupwise needs --gamma".into()))?;
            let (group_of, k) = membership(&args)?;
            let order = match &args.order {
                Some(o) => parse_usize_list(o, "--order")?,
                None => (0..k).collect(),
            };
            let spec = GroupSpec::new(group_of, order.clone(), gamma)?;
            let w = groupwise_weights(&spec)?;
            (
                w.as_slice().to_vec(),
                json!({ "mode": "groupwise", "gamma": gamma, "order": order, "groups": k }),
            )
        }
        Mode::Covariate => {
            let data = args
                .data
                .as_ref()
                .ok_or_else(|| CliError::validation("covariate needs --data".into()))?;
            let column = args
                .column
                .as_ref()
                .ok_or_else(|| CliError::validation("covariate needs --column".into()))?;
            let theta = args
                .theta
                .ok_or_else(|| CliError::validation("covariate needs --theta".into()))?;
            let family = args
                .family
                .ok_or_else(|| CliError::validation("covariate needs --family".into()))?;
            let frame = DataFrame::read(data)?;
            let col = frame
                .column(column)
                .ok_or_else(|| CliError::validation(format!("column '{column}' not found")))?;
            let fam = match family {
                Family::Power => CovariateFamily::AbsPower,
                Family::LogPower => CovariateFamily::LogPower,
                Family::ExpQuadratic => CovariateFamily::ExpQuadratic,
            };
            let v = covariate_family(fam, theta);
            let w = covariate_weights(&v, col)?;
            (
                w.as_slice().to_vec(),
                json!({ "mode": "covariate", "family": format!("{fam:?}"), "theta": theta, "column": column }),
            )
        }
        Mode::Mixed => {
            let gamma = args
                .gamma
                .ok_or_else(|| CliError::validation("mixed needs --gamma".into()))?;
            let (batch_of, k) = membership(&args)?;
            let spec = MixedSpec::new(batch_of, k, gamma)?;
            let fc = mixed_effects_weights(&spec)?;
            if let Some(path) = &args.eigvecs_out {
                let u = fc.eigvecs();
                let mut out = String::new();
                for r in 0..u.nrows() {
                    let row: Vec<String> =
                        (0..u.ncols()).map(|c| format!("{}", u[(r, c)])).collect();
                    out.push_str(&row.join(","));
                    out.push('\n');
                }
                std::fs::write(path, out)
                    .map_err(|e| CliError::validation(format!("cannot write {path}: {e}")))?;
            }
            (
                fc.eigvals().iter().copied().collect(),
                json!({
                    "mode": "mixed",
                    "gamma": gamma,
                    "batches": k,
                    "weights_are": "eigenvalues in the shared [A Q] eigenbasis, descending",
                }),
            )
        }
        Mode::Parametric => {
            let data = args
                .data
                .as_ref()
                .ok_or_else(|| CliError::validation("parametric needs --data".into()))?;
            let response = args
                .response
                .as_ref()
                .ok_or_else(|| CliError::validation("parametric needs --response".into()))?;
            let form = args
                .form
                .ok_or_else(|| CliError::validation("parametric needs --form".into()))?;
            let frame = DataFrame::read(data)?;
            let (x, y, _) = frame.design_and_response(response, args.intercept)?;
            let design = Design::new(x)?;
            let pform = match form {
                Form::LogAbsX => ParametricForm::LogAbsX,
                Form::LinearX => ParametricForm::LinearX,
            };
            let w = parametric_fls_weights(&design, &y, pform, &ParametricOpts::default())?;
            (
                w.as_slice().to_vec(),
                json!({ "mode": "parametric", "form": format!("{pform:?}"), "response": response }),
            )
        }
    };

    write_weights(&args.out, &weights)?;
    let sidecar_path = sidecar_path(&args.out);
    std::fs::write(
        &sidecar_path,
        serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::validation(e.to_string()))?
            + "\n",
    )
    .map_err(|e| CliError::validation(format!("cannot write {sidecar_path}: {e}")))?;
    Ok(())
}

fn sidecar_path(out: &str) -> String {
    match out.strip_suffix(".csv") {
        Some(stem) => format!("{stem}.json"),
        None => format!("{out}.json"),
    }
}
