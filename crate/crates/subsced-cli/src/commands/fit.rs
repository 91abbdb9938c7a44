//! `subsced fit`: coefficient estimation with a method-appropriate
//! covariance estimate and normal-theory intervals, reported as JSON.

use clap::{Args, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde_json::json;
use subsced::linmodel::{fls_fit, Design, DiagonalWeights};
use subsced::robust::{
    hc_cov, homoscedastic_cov, huber_fit, huber_sandwich_cov, t_em_fit, t_sandwich_ci, EmOptions,
    HcVariant, HuberOptions, HuberParams, TModelParams,
};

use subsced::robust::standard_normal_quantile;

use crate::csvio::{read_weights, DataFrame};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ols,
    Wls,
    Fls,
    T,
    Huber,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CovChoice {
    Hom,
    Hc0,
    Hc1,
    Hc2,
    Hc3,
}

#[derive(Args)]
pub struct FitArgs {
    /// CSV data file (header row required).
    #[arg(long)]
    data: String,
    /// Name of the response column.
    #[arg(long)]
    response: String,
    #[arg(long, value_enum)]
    method: Method,
    /// One-column CSV of weights (required for wls/fls).
    #[arg(long)]
    weights: Option<String>,
    /// Degrees of freedom for the t fit (fixed).
    #[arg(long)]
    nu: Option<f64>,
    /// Estimate the degrees of freedom instead of fixing them.
    #[arg(long, default_value_t = false)]
    adaptive_nu: bool,
    /// Huberization threshold.
    #[arg(long, default_value_t = 1.345)]
    k: f64,
    /// Interval level: two-sided 1 - alpha coverage.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Covariance estimator for the least-squares methods.
    #[arg(long, value_enum, default_value_t = CovChoice::Hc0)]
    cov: CovChoice,
    /// Prepend an intercept column of ones.
    #[arg(long, default_value_t = false)]
    intercept: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<String>,
}

pub fn run(args: FitArgs) -> Result<(), CliError> {
    if !(args.alpha > 0.0 && args.alpha <= 1.0) {
        return Err(CliError::validation("alpha must be in (0, 1]".into()));
    }
    let frame = DataFrame::read(&args.data)?;
    let (x, y, names) = frame.design_and_response(&args.response, args.intercept)?;
    let design = Design::new(x)?;
    let n = design.n();

    let weights = match (&args.weights, args.method) {
        (Some(path), Method::Wls | Method::Fls) => {
            let w = read_weights(path)?;
            if w.len() != n {
                return Err(CliError::validation(format!(
                    "weights length {} does not match {} rows",
                    w.len(),
                    n
                )));
            }
            Some(DiagonalWeights::new(w)?)
        }
        (None, Method::Wls | Method::Fls) => {
            return Err(CliError::validation(format!(
                "--method {:?} requires --weights",
                args.method
            )));
        }
        (Some(_), _) => {
            return Err(CliError::validation(
                "--weights only applies to wls/fls".into(),
            ));
        }
        (None, _) => None,
    };

    let report = match args.method {
        Method::Ols | Method::Wls | Method::Fls => {
            let w = weights.unwrap_or_else(|| DiagonalWeights::ones(n));
            least_squares_report(&args, &design, &y, &w, &names)?
        }
        Method::T => t_report(&args, &design, &y, &names)?,
        Method::Huber => huber_report(&args, &design, &y, &names)?,
    };

    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::validation(e.to_string()))?;
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| CliError::validation(format!("cannot write {path}: {e}")))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn intervals_json(
    beta: &DVector<f64>,
    cov: &DMatrix<f64>,
    alpha: f64,
) -> (serde_json::Value, f64) {
    let z = if alpha >= 1.0 { 0.0 } else { standard_normal_quantile(1.0 - alpha / 2.0) };
    let p = beta.len();
    let mut lower = Vec::with_capacity(p);
    let mut upper = Vec::with_capacity(p);
    for j in 0..p {
        let se = cov[(j, j)].max(0.0).sqrt();
        lower.push(beta[j] - z * se);
        upper.push(beta[j] + z * se);
    }
    (json!({ "alpha": alpha, "lower": lower, "upper": upper }), z)
}

fn matrix_json(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn least_squares_report(
    args: &FitArgs,
    design: &Design,
    y: &DVector<f64>,
    weights: &DiagonalWeights,
    names: &[String],
) -> Result<serde_json::Value, CliError> {
    let fit = fls_fit(design, y, weights)?;
    // covariance on the whitened regression, so HC variants remain valid
    // for weighted fits
    let n = design.n();
    let mut xw = design.x().clone();
    let mut yw = y.clone();
    for i in 0..n {
        let s = weights[i].sqrt().recip();
        for j in 0..xw.ncols() {
            xw[(i, j)] *= s;
        }
        yw[i] *= s;
    }
    let wdesign = Design::new(xw)?;
    let resid = &yw - wdesign.x() * &fit.beta;
    let (cov, cov_name) = match args.cov {
        CovChoice::Hom => (homoscedastic_cov(&wdesign, &resid)?, "hom"),
        CovChoice::Hc0 => (hc_cov(&wdesign, &resid, HcVariant::Hc0)?, "hc0"),
        CovChoice::Hc1 => (hc_cov(&wdesign, &resid, HcVariant::Hc1)?, "hc1"),
        CovChoice::Hc2 => (hc_cov(&wdesign, &resid, HcVariant::Hc2)?, "hc2"),
        CovChoice::Hc3 => (hc_cov(&wdesign, &resid, HcVariant::Hc3)?, "hc3"),
    };
    let (intervals, _) = intervals_json(&fit.beta, &cov, args.alpha);
    Ok(json!({
        "method": format!("{:?}", args.method).to_lowercase(),
        "columns": names,
        "coefficients": fit.beta.iter().copied().collect::<Vec<f64>>(),
        "covariance": { "estimator": cov_name, "matrix": matrix_json(&cov) },
        "intervals": intervals,
        "diagnostics": {
            "iterations": fit.diagnostics.iterations,
            "converged": fit.diagnostics.converged,
            "objective": fit.diagnostics.objective,
        },
        "n": design.n(),
        "p": design.p(),
    }))
}

fn t_report(
    args: &FitArgs,
    design: &Design,
    y: &DVector<f64>,
    names: &[String],
) -> Result<serde_json::Value, CliError> {
    let nu0 = args.nu.unwrap_or(7.0);
    let opts = EmOptions {
        fix_nu: if args.adaptive_nu { None } else { Some(nu0) },
        ..EmOptions::default()
    };
    let init = TModelParams::default_init(design, y, nu0)?;
    let (fit, params, _) = t_em_fit(design, y, init, &opts)?;
    if !fit.diagnostics.converged {
        return Err(CliError::not_converged(format!(
            "EM did not converge within {} iterations",
            fit.diagnostics.iterations
        )));
    }
    let ci = t_sandwich_ci(design, y, &params, args.alpha)?;
    let (intervals, _) = intervals_json(&fit.beta, &ci.cov, args.alpha);
    Ok(json!({
        "method": "t",
        "columns": names,
        "coefficients": fit.beta.iter().copied().collect::<Vec<f64>>(),
        "covariance": { "estimator": "t-sandwich", "matrix": matrix_json(&ci.cov) },
        "intervals": intervals,
        "diagnostics": {
            "iterations": fit.diagnostics.iterations,
            "converged": true,
            "objective": fit.diagnostics.objective,
            "nu": params.nu,
            "omega0": params.omega0,
            "adaptive_nu": args.adaptive_nu,
        },
        "n": design.n(),
        "p": design.p(),
    }))
}

fn huber_report(
    args: &FitArgs,
    design: &Design,
    y: &DVector<f64>,
    names: &[String],
) -> Result<serde_json::Value, CliError> {
    let params = HuberParams::new(args.k)?;
    let fit = huber_fit(design, y, params, &HuberOptions::default())?;
    let resid = y - design.x() * &fit.beta;
    let cov = huber_sandwich_cov(design, &resid, args.k)?;
    let (intervals, _) = intervals_json(&fit.beta, &cov, args.alpha);
    Ok(json!({
        "method": "huber",
        "columns": names,
        "coefficients": fit.beta.iter().copied().collect::<Vec<f64>>(),
        "covariance": { "estimator": "huber-sandwich", "matrix": matrix_json(&cov) },
        "intervals": intervals,
        "diagnostics": {
            "iterations": fit.diagnostics.iterations,
            "converged": fit.diagnostics.converged,
            "objective": fit.diagnostics.objective,
            "k": args.k,
        },
        "n": design.n(),
        "p": design.p(),
    }))
}
