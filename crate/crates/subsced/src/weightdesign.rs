//! Feasible weight construction from partial knowledge of the
//! heteroscedasticity: groupwise variance rankings, scedastic covariate
//! families, mixed-effects eigenstructure, and the two data-driven
//! parametric weight estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grm::ScedasticFunction;
use crate::linmodel::{ols_fit, Design, DiagonalWeights, FullCovariance};

/// Groupwise heteroscedastic model: each observation belongs to one of K
/// variance groups, whose ordering is known along with a lower bound
/// `gamma` on the ratio between consecutive ordered group variances.
#[derive(Clone, Debug)]
pub struct GroupSpec {
    /// Group index (0-based, in 0..K) per observation.
    pub group_of: Vec<usize>,
    /// Permutation of 0..K listing groups from lowest to highest variance.
    pub order: Vec<usize>,
    /// Lower bound on consecutive ordered variance ratios, at least 1.
    pub gamma: f64,
}

impl GroupSpec {
    pub fn new(group_of: Vec<usize>, order: Vec<usize>, gamma: f64) -> Result<Self> {
        let k = order.len();
        if !(gamma >= 1.0) {
            return Err(Error::InvalidInput(format!("gamma must be >= 1, got {gamma}")));
        }
        let mut seen = vec![false; k];
        for &g in &order {
            if g >= k || seen[g] {
                return Err(Error::BadOrdering(k));
            }
            seen[g] = true;
        }
        let mut counts = vec![0usize; k];
        for &g in &group_of {
            if g >= k {
                return Err(Error::BadOrdering(k));
            }
            counts[g] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyBatch(empty));
        }
        Ok(GroupSpec { group_of, order, gamma })
    }
}

/// Ranked group weights certified against every truth consistent with the
/// spec: the group with rank m (0-based, lowest variance first) receives
/// weight `2 gamma^m − 1`, expanded to length n by group membership.
///
/// For any pair of groups m > l and any true variances respecting the
/// order with consecutive ratios at least gamma, the candidate ratio
/// `(2 gamma^m − 1)/(2 gamma^l − 1)` stays below the membership bound
/// `2 (true ratio) − 1`, since
/// `(gamma^{m-l} − 1)(gamma^l − 1) ≥ 0`. Gamma 1 gives all-ones (OLS).
pub fn groupwise_weights(spec: &GroupSpec) -> Result<DiagonalWeights> {
    let k = spec.order.len();
    let mut group_weight = vec![0.0; k];
    for (rank, &group) in spec.order.iter().enumerate() {
        group_weight[group] = 2.0 * spec.gamma.powi(rank as i32) - 1.0;
    }
    DiagonalWeights::new(spec.group_of.iter().map(|&g| group_weight[g]).collect())
}

/// Scedastic covariate weights `w_i = v(|x_i|)` for a single covariate
/// column. The caller must pre-screen covariates that make the family
/// degenerate (zero under power laws, unit magnitude under log powers).
pub fn covariate_weights(v: &ScedasticFunction, x_col: &[f64]) -> Result<DiagonalWeights> {
    let mut out = Vec::with_capacity(x_col.len());
    for (index, &x) in x_col.iter().enumerate() {
        let value = v.eval(x.abs());
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::DegenerateCovariate { index, value: x.abs() });
        }
        out.push(value);
    }
    DiagonalWeights::new(out)
}

/// The scedastic covariate families `|x|^theta`, `(log|x|)^theta` and
/// `exp(theta |x| + theta |x|²)`, as functions of `|x|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovariateFamily {
    AbsPower,
    LogPower,
    ExpQuadratic,
}

pub fn covariate_family(family: CovariateFamily, theta: f64) -> ScedasticFunction {
    match family {
        CovariateFamily::AbsPower => {
            ScedasticFunction::new(format!("|x|^{theta}"), vec![("theta", theta)], move |a| {
                a.powf(theta)
            })
        }
        CovariateFamily::LogPower => ScedasticFunction::new(
            format!("log(|x|)^{theta}"),
            vec![("theta", theta)],
            move |a| a.ln().powf(theta),
        ),
        CovariateFamily::ExpQuadratic => ScedasticFunction::new(
            format!("exp({theta}(|x|+|x|^2))"),
            vec![("theta", theta)],
            move |a| (theta * (a + a * a)).exp(),
        ),
    }
}

/// Linear mixed effects model with random intercepts: observations fall
/// into K batches; the marginal error covariance is
/// `theta1² A A' + theta0² I` for the batch indicator matrix `A`.
#[derive(Clone, Debug)]
pub struct MixedSpec {
    /// Batch index (0-based, in 0..K) per observation.
    pub batch_of: Vec<usize>,
    /// Number of batches.
    pub n_batches: usize,
    /// Upper bound on `theta0²/theta1²`, must be positive.
    pub gamma: f64,
}

impl MixedSpec {
    pub fn new(batch_of: Vec<usize>, n_batches: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        if n_batches == 0 || batch_of.len() <= n_batches {
            return Err(Error::DimensionMismatch("need n > K >= 1".into()));
        }
        let mut counts = vec![0usize; n_batches];
        for &b in &batch_of {
            if b >= n_batches {
                return Err(Error::EmptyBatch(b));
            }
            counts[b] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyBatch(empty));
        }
        Ok(MixedSpec { batch_of, n_batches, gamma })
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_batches];
        for &b in &self.batch_of {
            counts[b] += 1;
        }
        counts
    }

    /// The shared eigenbasis `[A Q] diag(1/sqrt(n_1), ..., 1, ...)`:
    /// normalized batch indicators (batches ordered by size, descending)
    /// followed by an orthonormal basis of the null space of `A'` built
    /// from within-batch Helmert contrasts.
    pub fn eigenbasis(&self) -> DMatrix<f64> {
        let n = self.batch_of.len();
        let sizes = self.batch_sizes();
        let mut batches: Vec<usize> = (0..self.n_batches).collect();
        batches.sort_by_key(|&b| std::cmp::Reverse(sizes[b]));

        let mut u = DMatrix::zeros(n, n);
        let mut col = 0;
        for &b in &batches {
            let scale = 1.0 / (sizes[b] as f64).sqrt();
            for (i, &bi) in self.batch_of.iter().enumerate() {
                if bi == b {
                    u[(i, col)] = scale;
                }
            }
            col += 1;
        }
        for &b in &batches {
            let members: Vec<usize> = (0..n).filter(|&i| self.batch_of[i] == b).collect();
            for j in 1..members.len() {
                let norm = (j as f64 * (j + 1) as f64).sqrt();
                for &i in members.iter().take(j) {
                    u[(i, col)] = 1.0 / norm;
                }
                u[(members[j], col)] = -(j as f64) / norm;
                col += 1;
            }
        }
        debug_assert_eq!(col, n);
        u
    }

    /// Eigenvalues of the marginal covariance for concrete variance
    /// components, matching [`MixedSpec::eigenbasis`] column order.
    pub fn truth_eigenvalues(&self, theta0_sq: f64, theta1_sq: f64) -> DVector<f64> {
        let sizes = self.batch_sizes();
        let mut ordered: Vec<usize> = (0..self.n_batches).collect();
        ordered.sort_by_key(|&b| std::cmp::Reverse(sizes[b]));
        let n = self.batch_of.len();
        let mut vals = DVector::from_element(n, theta0_sq);
        for (col, &b) in ordered.iter().enumerate() {
            vals[col] = sizes[b] as f64 * theta1_sq + theta0_sq;
        }
        vals
    }

    /// The marginal covariance `theta1² A A' + theta0² I` packaged with
    /// its known eigenstructure.
    pub fn truth_covariance(&self, theta0_sq: f64, theta1_sq: f64) -> Result<FullCovariance> {
        FullCovariance::from_parts(self.eigenbasis(), self.truth_eigenvalues(theta0_sq, theta1_sq))
    }
}

/// Feasible weights for the mixed-effects model: the known eigenbasis
/// with surrogate eigenvalues `(n_k + gamma, ..., gamma, ..., gamma)`.
/// Certified against the truth whenever `theta0²/theta1² <= gamma`.
pub fn mixed_effects_weights(spec: &MixedSpec) -> Result<FullCovariance> {
    let sizes = spec.batch_sizes();
    let mut ordered: Vec<usize> = (0..spec.n_batches).collect();
    ordered.sort_by_key(|&b| std::cmp::Reverse(sizes[b]));
    let n = spec.batch_of.len();
    let mut vals = DVector::from_element(n, spec.gamma);
    for (col, &b) in ordered.iter().enumerate() {
        vals[col] = sizes[b] as f64 + spec.gamma;
    }
    FullCovariance::from_parts(spec.eigenbasis(), vals)
}

/// Which transform of the covariates the log-residual regression uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParametricForm {
    /// Regress log squared residuals on `log |x_ij|`: weights become a
    /// product of covariate power laws.
    LogAbsX,
    /// Regress log squared residuals on `x_ij` directly (the Wooldridge
    /// variant): weights become `exp(theta' x_i)`.
    LinearX,
}

#[derive(Clone, Copy, Debug)]
pub struct ParametricOpts {
    /// Floor applied to squared residuals before the log. The default is
    /// 0.01².
    pub residual_floor: f64,
    /// Floor applied to `|x|` before the log under [`ParametricForm::LogAbsX`].
    pub covariate_floor: f64,
}

impl Default for ParametricOpts {
    fn default() -> Self {
        ParametricOpts { residual_floor: 1e-4, covariate_floor: 1e-8 }
    }
}

/// Two-stage parametric FLS weights: OLS residuals, then an OLS fit of
/// `log max(floor, e_i²)` on an intercept plus the transformed covariates,
/// exponentiating the fitted values. Constant design columns are treated
/// as the intercept and not transformed. Returns weights only;
/// composition with the coefficient fit is the caller's job.
pub fn parametric_fls_weights(
    design: &Design,
    y: &DVector<f64>,
    form: ParametricForm,
    opts: &ParametricOpts,
) -> Result<DiagonalWeights> {
    let n = design.n();
    let p = design.p();
    if n <= p + 1 {
        return Err(Error::DimensionMismatch("need n > p + 1".into()));
    }
    let ols = ols_fit(design, y)?;
    let resid = y - design.x() * &ols.beta;
    let target = DVector::from_fn(n, |i, _| resid[i].powi(2).max(opts.residual_floor).ln());

    let x = design.x();
    let transformed: Vec<usize> = (0..p).filter(|&j| !column_is_constant(x, j)).collect();
    let mut z = DMatrix::zeros(n, 1 + transformed.len());
    for i in 0..n {
        z[(i, 0)] = 1.0;
    }
    for (c, &j) in transformed.iter().enumerate() {
        for i in 0..n {
            z[(i, c + 1)] = match form {
                ParametricForm::LogAbsX => x[(i, j)].abs().max(opts.covariate_floor).ln(),
                ParametricForm::LinearX => x[(i, j)],
            };
        }
    }
    let stage2 = Design::new(z)?;
    let theta = ols_fit(&stage2, &target)?.beta;
    let fitted = stage2.x() * &theta;
    DiagonalWeights::new(fitted.iter().map(|v| v.clamp(-700.0, 700.0).exp()).collect())
}

fn column_is_constant(x: &DMatrix<f64>, j: usize) -> bool {
    let first = x[(0, j)];
    let scale = x.column(j).amax().max(1.0);
    x.column(j).iter().all(|&v| (v - first).abs() <= 1e-12 * scale)
}

/// Entrywise `w_i + s`: regularization toward OLS. Preserves membership
/// whenever the input is subscedastic, and enlarges the set of truths a
/// fixed candidate is good for.
pub fn regularize_weights(w: &DiagonalWeights, s: f64) -> Result<DiagonalWeights> {
    if !(s > 0.0) {
        return Err(Error::InvalidInput(format!("s must be positive, got {s}")));
    }
    w.shifted(s)
}
