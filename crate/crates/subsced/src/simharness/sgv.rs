//! Estimation-efficiency experiment: standardized generalized variance
//! (and mean squared error) per estimator and sample size.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linmodel::{fls_fit, sandwich_cov, sgv, DiagonalWeights};
use crate::robust::{huber_fit, t_asym_cov, t_em_fit, EmOptions, HuberOptions, HuberParams, TModelParams};
use crate::simharness::{
    build_problem, pairwise_sum, rng_stream, EstimatorSpec, ExperimentSpec, GeneratedProblem,
    Metric, ResultRow, ResultTable,
};
use crate::weightdesign::{parametric_fls_weights, ParametricOpts};

/// Fraction of failed replicates above which a cell is flagged invalid.
const MAX_DROP_FRACTION: f64 = 0.01;
/// Batches used for Monte Carlo standard errors.
const STDERR_BATCHES: usize = 10;

/// Run the SGV/MSE protocol: closed-form covariances for OLS, WLS and the
/// oracle t estimate, Monte Carlo over replicate coefficient matrices for
/// everything else.
pub fn run_sgv_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let want_sgv = spec.metrics.contains(&Metric::Sgv) || spec.metrics.is_empty();
    let want_mse = spec.metrics.contains(&Metric::Mse);
    let mut table = ResultTable::default();

    for (n_index, &n) in spec.n_grid.iter().enumerate() {
        let problem = build_problem(spec, n)?;
        let truth = DiagonalWeights::new(problem.variances.clone())?;

        for estimator in &spec.estimators {
            let label = estimator.label();
            if estimator.closed_form() {
                let cov = closed_form_cov(estimator, &problem, &truth)?;
                if want_sgv {
                    table.rows.push(ResultRow {
                        estimator: label.clone(),
                        n,
                        metric: "sgv".into(),
                        value: sgv(&cov, spec.p)?,
                        mc_stderr: 0.0,
                    });
                }
                if want_mse {
                    // exact: these estimators are unbiased, MSE = total variance
                    table.rows.push(ResultRow {
                        estimator: label.clone(),
                        n,
                        metric: "mse".into(),
                        value: cov.trace(),
                        mc_stderr: 0.0,
                    });
                }
                continue;
            }

            let fits: Vec<Option<DVector<f64>>> = (0..spec.replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng = rng_stream(spec.seed, spec.stream_for(n_index, r));
                    let y = problem.draw_response(&mut rng);
                    fit_estimator(estimator, &problem, &y).ok()
                })
                .collect();

            let kept: Vec<&DVector<f64>> = fits.iter().flatten().collect();
            let failures = spec.replicates - kept.len();
            let invalid = (failures as f64) > MAX_DROP_FRACTION * spec.replicates as f64;
            table.note_failures(&label, n, failures, spec.replicates, invalid);
            if kept.len() < spec.p + 2 {
                continue;
            }

            if want_sgv {
                let (value, mc_stderr) = mc_sgv(&kept, spec.p);
                table.rows.push(ResultRow { estimator: label.clone(), n, metric: "sgv".into(), value, mc_stderr });
            }
            if want_mse {
                let sq: Vec<f64> = kept
                    .iter()
                    .map(|b| (*b - &problem.beta_true).norm_squared())
                    .collect();
                let m = sq.len() as f64;
                let mean = pairwise_sum(&sq) / m;
                let var = pairwise_sum(&sq.iter().map(|v| (v - mean) * (v - mean)).collect::<Vec<_>>())
                    / (m - 1.0);
                table.rows.push(ResultRow {
                    estimator: label.clone(),
                    n,
                    metric: "mse".into(),
                    value: mean,
                    mc_stderr: (var / m).sqrt(),
                });
            }
        }
    }
    Ok(table)
}

fn closed_form_cov(
    estimator: &EstimatorSpec,
    problem: &GeneratedProblem,
    truth: &DiagonalWeights,
) -> Result<DMatrix<f64>> {
    match estimator {
        EstimatorSpec::Ols => {
            sandwich_cov(&problem.design, &DiagonalWeights::ones(problem.design.n()), truth)
        }
        EstimatorSpec::Wls => sandwich_cov(&problem.design, truth, truth),
        EstimatorSpec::TOracle => {
            let (omega0, nu) = problem.t_truth.ok_or_else(|| {
                Error::InvalidInput(
                    "t_oracle needs an inverse gamma variance model".into(),
                )
            })?;
            let params = TModelParams::new(DVector::zeros(problem.design.p()), omega0, nu)?;
            t_asym_cov(problem.design.x(), &problem.variances, &params)
        }
        EstimatorSpec::TFormula { nu, omega0 } => {
            let params = TModelParams::new(DVector::zeros(problem.design.p()), *omega0, *nu)?;
            t_asym_cov(problem.design.x(), &problem.variances, &params)
        }
        _ => unreachable!("not a closed-form estimator"),
    }
}

/// One replicate fit of a Monte Carlo estimator.
pub fn fit_estimator(
    estimator: &EstimatorSpec,
    problem: &GeneratedProblem,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    match estimator {
        EstimatorSpec::Ols => Ok(fls_fit(&problem.design, y, &DiagonalWeights::ones(problem.design.n()))?.beta),
        EstimatorSpec::Wls => {
            let truth = DiagonalWeights::new(problem.variances.clone())?;
            Ok(fls_fit(&problem.design, y, &truth)?.beta)
        }
        EstimatorSpec::TFixed { nu } => {
            let init = TModelParams::default_init(&problem.design, y, *nu)?;
            let opts = EmOptions { fix_nu: Some(*nu), ..EmOptions::default() };
            Ok(t_em_fit(&problem.design, y, init, &opts)?.0.beta)
        }
        EstimatorSpec::TAdaptive { nu_floor } => {
            let init = TModelParams::default_init(&problem.design, y, 7.0)?;
            let opts = EmOptions {
                nu_range: (*nu_floor, crate::robust::NU_RANGE.1),
                ..EmOptions::default()
            };
            Ok(t_em_fit(&problem.design, y, init, &opts)?.0.beta)
        }
        EstimatorSpec::Huber { k } => {
            Ok(huber_fit(&problem.design, y, HuberParams { k: *k }, &HuberOptions::default())?.beta)
        }
        EstimatorSpec::FlsParametric { form } => {
            let w = parametric_fls_weights(&problem.design, y, *form, &ParametricOpts::default())?;
            Ok(fls_fit(&problem.design, y, &w)?.beta)
        }
        EstimatorSpec::TOracle | EstimatorSpec::TFormula { .. } => {
            Err(Error::InvalidInput("closed-form estimators have no replicate fit".into()))
        }
    }
}

/// Monte Carlo SGV of a replicate coefficient matrix, with a batch
/// standard error.
fn mc_sgv(betas: &[&DVector<f64>], p: usize) -> (f64, f64) {
    let value = sample_sgv(betas, p);
    let b = STDERR_BATCHES.min(betas.len() / (p + 2)).max(1);
    if b < 2 {
        return (value, f64::NAN);
    }
    let chunk = betas.len() / b;
    let batch_values: Vec<f64> = (0..b)
        .map(|i| sample_sgv(&betas[i * chunk..(i + 1) * chunk], p))
        .collect();
    let mean = pairwise_sum(&batch_values) / b as f64;
    let var = batch_values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b as f64 - 1.0);
    (value, (var / b as f64).sqrt())
}

fn sample_sgv(betas: &[&DVector<f64>], p: usize) -> f64 {
    let m = betas.len() as f64;
    let mut mean = DVector::zeros(p);
    for b in betas {
        mean += *b;
    }
    mean /= m;
    let mut cov = DMatrix::zeros(p, p);
    for b in betas {
        let d = *b - &mean;
        cov.syger(1.0 / (m - 1.0), &d, &d, 1.0);
    }
    // syger fills the lower triangle
    for r in 0..p {
        for c in (r + 1)..p {
            cov[(r, c)] = cov[(c, r)];
        }
    }
    sgv(&cov, p).unwrap_or(f64::NAN)
}
