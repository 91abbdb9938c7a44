//! Maximum marginal likelihood for the hierarchical t-error model by EM.
//!
//! The model places an inverse gamma prior on each observation variance;
//! marginally the errors are t with scale `omega0` and `nu` degrees of
//! freedom. The E-step posterior mean of each precision is
//! `alpha_i = (nu + 1) / (r_i² + nu omega0)`, the M-step for the
//! coefficients is a weighted least squares solve with those precisions,
//! the scale update is `omega0 = n / Σ alpha_i` in closed form, and the
//! degrees of freedom are maximized numerically in one dimension. The
//! final coefficient iterate is therefore a regularized FLS estimate with
//! weights `r_i² + nu omega0`.

use nalgebra::DVector;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::linmodel::{
    fls_fit, ols_fit, Design, DiagonalWeights, FitDiagnostics, Method, RegressionFit,
};

/// Parameters of the hierarchical t model.
#[derive(Clone, Debug)]
pub struct TModelParams {
    pub beta: DVector<f64>,
    pub omega0: f64,
    pub nu: f64,
}

impl TModelParams {
    pub fn new(beta: DVector<f64>, omega0: f64, nu: f64) -> Result<Self> {
        if !(omega0 > 0.0) || !(nu > 0.0) {
            return Err(Error::InvalidInput(format!(
                "omega0 and nu must be positive, got {omega0}, {nu}"
            )));
        }
        Ok(TModelParams { beta, omega0, nu })
    }

    /// OLS coefficients, median squared residual as the scale, and the
    /// conventional fixed default for the degrees of freedom.
    pub fn default_init(design: &Design, y: &DVector<f64>, nu0: f64) -> Result<Self> {
        let ols = ols_fit(design, y)?;
        let resid = y - design.x() * &ols.beta;
        let mut sq: Vec<f64> = resid.iter().map(|r| r * r).collect();
        sq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = sq.len() / 2;
        let med = if sq.len() % 2 == 1 { sq[mid] } else { 0.5 * (sq[mid - 1] + sq[mid]) };
        TModelParams::new(ols.beta, med.max(1e-8), nu0)
    }
}

#[derive(Clone, Debug)]
pub struct EmOptions {
    /// Keep the degrees of freedom fixed at this value.
    pub fix_nu: Option<f64>,
    /// Keep the scale fixed at this value.
    pub fix_omega0: Option<f64>,
    /// Search window for the degrees of freedom. The marginal likelihood
    /// is unbounded below some data-dependent threshold when enough
    /// observations can be fit exactly, so callers working with
    /// near-degenerate variances should raise the floor (one is always
    /// safe for n > 2p).
    pub nu_range: (f64, f64),
    /// Relative parameter-change stopping rule.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { fix_nu: None, fix_omega0: None, nu_range: NU_RANGE, tol: 1e-8, max_iter: 500 }
    }
}

/// Per-iteration record of the fit.
#[derive(Clone, Debug)]
pub struct EmTrace {
    /// Marginal log-likelihood after each iteration (index 0 is the
    /// initial point). Non-decreasing up to floating noise.
    pub log_likelihood: Vec<f64>,
    pub snapshots: Vec<TModelParams>,
    pub converged: bool,
}

/// Search window for the degrees of freedom, in natural scale.
pub const NU_RANGE: (f64, f64) = (0.1, 1000.0);

/// Marginal log-likelihood of the t model at the given parameters.
pub fn marginal_log_likelihood(design: &Design, y: &DVector<f64>, params: &TModelParams) -> f64 {
    let resid = y - design.x() * &params.beta;
    let nu = params.nu;
    let w0 = params.omega0;
    let constant = ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (std::f64::consts::PI * nu * w0).ln();
    resid
        .iter()
        .map(|r| constant - 0.5 * (nu + 1.0) * (r * r / (nu * w0)).ln_1p())
        .sum()
}

/// EM fit of the t model. Returns the coefficient fit (whose weights are
/// the final E-step variances `r_i² + nu omega0`), the fitted parameters,
/// and the iteration trace. Non-convergence is reported through the
/// diagnostics flag, not an error.
pub fn t_em_fit(
    design: &Design,
    y: &DVector<f64>,
    init: TModelParams,
    opts: &EmOptions,
) -> Result<(RegressionFit, TModelParams, EmTrace)> {
    let n = design.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response length {} vs design rows {n}",
            y.len()
        )));
    }
    if n <= design.p() {
        return Err(Error::DimensionMismatch("need n > p".into()));
    }
    if init.beta.len() != design.p() {
        return Err(Error::DimensionMismatch("init.beta length".into()));
    }

    let mut beta = init.beta.clone();
    let mut nu = opts.fix_nu.unwrap_or(init.nu);
    let mut omega0 = opts.fix_omega0.unwrap_or(init.omega0);
    if !(nu > 0.0) || !(omega0 > 0.0) {
        return Err(Error::InvalidInput("nu and omega0 must be positive".into()));
    }

    let mut trace = EmTrace {
        log_likelihood: vec![marginal_log_likelihood(
            design,
            y,
            &TModelParams { beta: beta.clone(), omega0, nu },
        )],
        snapshots: vec![TModelParams { beta: beta.clone(), omega0, nu }],
        converged: false,
    };

    let mut converged = false;
    let mut iterations = 0;
    let mut ew_weights = DiagonalWeights::ones(n);

    for _ in 0..opts.max_iter {
        iterations += 1;
        let resid = y - design.x() * &beta;

        // E-step quantities at the current parameters
        let denom: Vec<f64> = resid.iter().map(|r| r * r + nu * omega0).collect();
        let alpha: Vec<f64> = denom.iter().map(|d| (nu + 1.0) / d).collect();
        let mean_alpha = alpha.iter().sum::<f64>() / n as f64;
        let mean_log = denom.iter().map(|d| (d / 2.0).ln()).sum::<f64>() / n as f64
            - digamma((nu + 1.0) / 2.0);

        // M-step: coefficients by WLS with the posterior mean precisions
        ew_weights = DiagonalWeights::new(denom.clone())?;
        let wls = fls_fit(design, y, &ew_weights)?;
        let new_beta = wls.beta;

        // M-step: scale in closed form (independent of nu and beta)
        let new_omega0 = match opts.fix_omega0 {
            Some(fixed) => fixed,
            None => 1.0 / mean_alpha,
        };
        if new_omega0 < 1e-12 {
            return Err(Error::DegenerateScale);
        }

        // M-step: degrees of freedom by bracketed 1-d maximization
        let new_nu = match opts.fix_nu {
            Some(fixed) => fixed,
            None => {
                let k1 = -mean_log - new_omega0 * mean_alpha + (new_omega0 / 2.0).ln();
                let q = |t: f64| {
                    let v = t.exp();
                    v * k1 + v * t - 2.0 * ln_gamma(v / 2.0)
                };
                golden_max(q, opts.nu_range.0.ln(), opts.nu_range.1.ln(), 1e-10).exp()
            }
        };

        let rel = |new: f64, old: f64| (new - old).abs() / old.abs().max(1e-12);
        let mut change = rel(new_omega0, omega0).max(rel(new_nu, nu));
        for j in 0..beta.len() {
            change = change.max((new_beta[j] - beta[j]).abs() / beta[j].abs().max(1e-12));
        }

        beta = new_beta;
        omega0 = new_omega0;
        nu = new_nu;

        let params = TModelParams { beta: beta.clone(), omega0, nu };
        trace.log_likelihood.push(marginal_log_likelihood(design, y, &params));
        trace.snapshots.push(params);

        if change < opts.tol {
            converged = true;
            break;
        }
    }
    trace.converged = converged;

    let params = TModelParams { beta: beta.clone(), omega0, nu };
    let objective = *trace.log_likelihood.last().unwrap();
    let fit = RegressionFit {
        beta,
        cov: None,
        weights_used: Some(ew_weights),
        method: Method::TMle,
        diagnostics: FitDiagnostics { iterations, converged, objective },
    };
    Ok((fit, params, trace))
}

/// Golden-section maximization of a unimodal function on [a, b].
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
