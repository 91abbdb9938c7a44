//! Point estimation and uncertainty quantification for heteroscedastic
//! linear models, centered on certifying when fixed-weight feasible least
//! squares beats OLS (the subscedastic condition) and on the robust t and
//! Huber estimators whose behavior under heteroscedasticity that
//! condition explains.
//!
//! Modules:
//! - [`linmodel`]: core types and the least-squares estimators with their
//!   exact covariance algebra;
//! - [`subscedastic`]: the membership certifier, its brute-force oracle,
//!   and the set-structure checks;
//! - [`grm`]: scalar scedastic functions and the growth/ratio
//!   monotonicity property that guarantees membership;
//! - [`weightdesign`]: feasible weight construction from partial
//!   knowledge (group rankings, covariate families, mixed-effects
//!   eigenstructure, parametric log-residual regressions);
//! - [`robust`]: the t maximum marginal likelihood fit (EM), the Huber
//!   fit (IRLS), their asymptotic covariances, worst-case constants, and
//!   the HC0–HC3 / homoscedastic / sandwich covariance estimators;
//! - [`simharness`]: deterministic seeded Monte Carlo experiments (SGV,
//!   coverage, weight-consistency protocols).

pub mod error;
pub mod grm;
pub mod linmodel;
pub mod robust;
pub mod simharness;
pub mod subscedastic;
pub mod weightdesign;

pub use error::{Error, Result};
pub use linmodel::{Design, DiagonalWeights, FullCovariance, Method, RegressionFit};
pub use subscedastic::SubscedasticCertificate;
