//! Robust estimators for the heteroscedastic linear model: the t maximum
//! marginal likelihood fit and the Huber fit, their asymptotic covariance
//! formulas, worst-case efficiency constants, and the covariance/interval
//! estimators used for inference.

mod asymcov;
mod em;
mod hc;
mod huber;
pub mod special;

pub use asymcov::{
    huber_asym_fg, huber_sandwich_cov, t_asym_cov, t_asym_fg, t_sandwich_ci, worst_case_constant,
    TSandwich, WorstCaseKind,
};
pub use em::{
    marginal_log_likelihood, t_em_fit, EmOptions, EmTrace, TModelParams, NU_RANGE,
};
pub use hc::{hc_cov, homoscedastic_cov, leverages, HcVariant};
pub use huber::{huber_fit, huber_loss, HuberOptions, HuberParams};
pub use special::{
    centered_normal_mass, erfcx, h_fn, lemma_a2_closed, lemma_a3_closed, normal_cdf,
    standard_normal_quantile,
};
