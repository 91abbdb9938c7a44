//! Deterministic, seedable Monte Carlo engine for the efficiency,
//! coverage and consistency experiment protocols.
//!
//! Every experiment is a pure function of its [`ExperimentSpec`]
//! (including the seed): replicate r always draws from its own counter
//! stream, results are collected by replicate index, and aggregation uses
//! pairwise summation, so the output is bit-identical for any number of
//! worker threads.

mod consistency;
mod coverage;
mod generate;
mod sgv;
mod table;

pub use consistency::{run_consistency_experiment, ConsistencyReport, ConsistencyRow, WeightRule};
pub use coverage::{run_coverage_experiment, IntervalMethod};
pub use generate::{build_problem, GeneratedProblem};
pub use sgv::{fit_estimator, run_sgv_experiment};
pub use table::{DroppedCell, ResultRow, ResultTable};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weightdesign::ParametricForm;

/// Independent generator for one replicate: a fixed cipher seed with the
/// replicate index as the stream counter. The same (seed, index) pair
/// always yields the same draw sequence, for any parallel schedule.
pub fn rng_stream(master_seed: u64, replicate_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate_index);
    rng
}

/// Pairwise summation; keeps accumulation error O(log n) ulps and is
/// independent of any work partitioning.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sgv,
    Mse,
    Coverage,
    Width,
}

impl Metric {
    pub fn label(&self) -> &'static str {
        match self {
            Metric::Sgv => "sgv",
            Metric::Mse => "mse",
            Metric::Coverage => "coverage",
            Metric::Width => "width",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DesignSource {
    /// Standard normal entries; optionally a constant `1/sqrt(n)` first
    /// column and non-intercept columns scaled to unit sample variance.
    Gaussian {
        #[serde(default)]
        intercept: bool,
        #[serde(default)]
        standardize: bool,
    },
    /// A rectangular numeric CSV whose columns are the regressors.
    Csv { path: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VarianceModel {
    /// Variances set to the 1/(n+1), ..., n/(n+1) quantiles of
    /// IG(nu/2, nu omega0 / 2).
    InvGammaQuantiles {
        nu: f64,
        #[serde(default = "default_omega0")]
        omega0: f64,
    },
    /// Independent IG(nu/2, nu omega0 / 2) draws, fixed across replicates.
    InvGammaIid {
        nu: f64,
        #[serde(default = "default_omega0")]
        omega0: f64,
    },
    /// `w_i = scale * prod_j |x_{i, col_j}|^{e_j}` from the design itself.
    PowerProduct { scale: f64, terms: Vec<PowerTerm> },
    /// Random-intercept model rotated into its known eigenbasis; the
    /// variance vector is the eigenvalue sequence. A missing `theta1_sq`
    /// draws one IG(1, 3) batch variance per batch.
    MixedEffects {
        batches: usize,
        theta0_sq: f64,
        #[serde(default)]
        theta1_sq: Option<f64>,
    },
    /// Homoscedastic control.
    Constant { value: f64 },
}

fn default_omega0() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PowerTerm {
    pub column: usize,
    pub exponent: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Ols,
    /// Oracle weighted least squares at the true variances (closed form).
    Wls,
    /// Closed-form asymptotic covariance of the t estimate at the true
    /// scale and degrees of freedom; needs an inverse-gamma variance
    /// model.
    TOracle,
    /// Closed-form asymptotic covariance of the t estimate at the given
    /// (possibly misspecified) scale and degrees of freedom.
    TFormula { nu: f64, omega0: f64 },
    /// EM fit with the degrees of freedom held fixed.
    TFixed { nu: f64 },
    /// EM fit with scale and degrees of freedom both estimated. The
    /// degrees-of-freedom search is floored (default one) so that the
    /// fitted likelihood stays bounded when many observations carry
    /// near-zero variance.
    TAdaptive {
        #[serde(default = "default_nu_floor")]
        nu_floor: f64,
    },
    Huber {
        #[serde(default = "default_huber_k")]
        k: f64,
    },
    /// Two-stage parametric FLS weights, then the weighted fit.
    FlsParametric { form: ParametricForm },
}

fn default_huber_k() -> f64 {
    1.345
}

fn default_nu_floor() -> f64 {
    1.0
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Ols => "ols".into(),
            EstimatorSpec::Wls => "wls".into(),
            EstimatorSpec::TOracle => "t_oracle".into(),
            EstimatorSpec::TFormula { nu, .. } => format!("t_formula(nu={nu})"),
            EstimatorSpec::TFixed { nu } => format!("t_fixed(nu={nu})"),
            EstimatorSpec::TAdaptive { .. } => "t_adaptive".into(),
            EstimatorSpec::Huber { k } => format!("huber(k={k})"),
            EstimatorSpec::FlsParametric { form } => match form {
                ParametricForm::LogAbsX => "fls_log_abs_x".into(),
                ParametricForm::LinearX => "fls_linear_x".into(),
            },
        }
    }

    /// Whether the SGV is available in closed form (no Monte Carlo).
    pub fn closed_form(&self) -> bool {
        matches!(
            self,
            EstimatorSpec::Ols
                | EstimatorSpec::Wls
                | EstimatorSpec::TOracle
                | EstimatorSpec::TFormula { .. }
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub n_grid: Vec<usize>,
    pub p: usize,
    pub replicates: usize,
    pub seed: u64,
    pub design_source: DesignSource,
    pub variance_model: VarianceModel,
    #[serde(default)]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub metrics: Vec<Metric>,
    /// Interval level for coverage experiments.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.05
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::InvalidInput("replicates must be >= 1".into()));
        }
        if self.n_grid.is_empty() {
            return Err(Error::InvalidInput("n_grid must be non-empty".into()));
        }
        for &n in &self.n_grid {
            if n <= self.p {
                return Err(Error::InvalidInput(format!(
                    "every n in n_grid must exceed p, got n = {n}, p = {}",
                    self.p
                )));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidInput("alpha must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Stream index for a replicate in cell `n_index`, keeping all cells
    /// and the setup stream (index 0) disjoint.
    pub fn stream_for(&self, n_index: usize, replicate: usize) -> u64 {
        1 + (n_index * self.replicates + replicate) as u64
    }
}
