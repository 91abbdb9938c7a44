//! Huber M-estimation of regression coefficients by iteratively
//! reweighted least squares.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linmodel::{
    fls_fit, ols_fit, Design, DiagonalWeights, FitDiagnostics, Method, RegressionFit,
};

#[derive(Clone, Copy, Debug)]
pub struct HuberParams {
    /// Huberization threshold: quadratic loss inside `[-k, k]`, linear
    /// outside.
    pub k: f64,
}

impl HuberParams {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidInput(format!("k must be positive, got {k}")));
        }
        Ok(HuberParams { k })
    }
}

/// Classical 95%-normal-efficiency threshold.
impl Default for HuberParams {
    fn default() -> Self {
        HuberParams { k: 1.345 }
    }
}

#[derive(Clone, Debug)]
pub struct HuberOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for HuberOptions {
    fn default() -> Self {
        HuberOptions { tol: 1e-10, max_iter: 2000 }
    }
}

/// Huber loss `Σ rho_k(r_i)`.
pub fn huber_loss(residuals: &DVector<f64>, k: f64) -> f64 {
    residuals
        .iter()
        .map(|&r| {
            let a = r.abs();
            if a < k {
                0.5 * r * r
            } else {
                k * a - 0.5 * k * k
            }
        })
        .sum()
}

/// Minimize `Σ rho_k(y_i - x_i'beta)` by IRLS with weights
/// `min(1, k/|r_i|)`. Coefficients equal OLS exactly when every residual
/// of the optimum lies inside the quadratic zone. Errors with
/// `NotConverged` if the relative coefficient change never drops below
/// `tol`.
pub fn huber_fit(
    design: &Design,
    y: &DVector<f64>,
    params: HuberParams,
    opts: &HuberOptions,
) -> Result<RegressionFit> {
    let n = design.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response length {} vs design rows {n}",
            y.len()
        )));
    }
    let k = params.k;
    let mut beta = ols_fit(design, y)?.beta;

    for iter in 1..=opts.max_iter {
        let resid = y - design.x() * &beta;
        // IRLS weight min(1, k/|r|) enters the solve as a variance
        // max(1, |r|/k)
        let variances: Vec<f64> = resid.iter().map(|r| (r.abs() / k).max(1.0)).collect();
        let weights = DiagonalWeights::new(variances)?;
        let next = fls_fit(design, y, &weights)?.beta;

        let mut scale = 1e-12_f64;
        for j in 0..beta.len() {
            scale = scale.max(beta[j].abs());
        }
        let change = (0..beta.len())
            .map(|j| (next[j] - beta[j]).abs())
            .fold(0.0f64, f64::max)
            / scale;
        beta = next;

        if change < opts.tol {
            let resid = y - design.x() * &beta;
            return Ok(RegressionFit {
                beta,
                cov: None,
                weights_used: Some(weights),
                method: Method::Huber,
                diagnostics: FitDiagnostics {
                    iterations: iter,
                    converged: true,
                    objective: huber_loss(&resid, k),
                },
            });
        }
    }
    Err(Error::NotConverged(opts.max_iter))
}
