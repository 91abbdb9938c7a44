//! Core data types and the least-squares estimators with their exact
//! finite-sample covariance algebra.
//!
//! The central objects are the coefficient map
//! `b_X(W) = (X'W⁻¹X)⁻¹X'W⁻¹y` and its covariance under a true diagonal
//! error covariance `V`,
//! `H_X(W, V) = (X'W⁻¹X)⁻¹ X'W⁻¹ V W⁻¹ X (X'W⁻¹X)⁻¹`.
//! Ordinary least squares is `b_X(I)`, weighted least squares is `b_X(V)`,
//! and any other fixed weight matrix gives a feasible (FLS) estimate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reciprocal condition number below which a triangular factor is treated
/// as rank deficient.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Strictly positive diagonal of an n×n covariance or weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalWeights(Vec<f64>);

impl DiagonalWeights {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        for (index, &value) in d.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositive { index, value });
            }
        }
        Ok(DiagonalWeights(d))
    }

    pub fn ones(n: usize) -> Self {
        DiagonalWeights(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// Entrywise reciprocal. An involution up to floating round-trip.
    pub fn inverse(&self) -> Self {
        DiagonalWeights(self.0.iter().map(|w| 1.0 / w).collect())
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| s * w).collect())
    }

    pub fn shifted(&self, s: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w + s).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for DiagonalWeights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a DiagonalWeights {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Full-rank n×p regressor matrix with a cached orthonormal basis of its
/// column space.
#[derive(Clone, Debug)]
pub struct Design {
    x: DMatrix<f64>,
    u: DMatrix<f64>,
}

impl Design {
    /// Requires p ≥ 1, n > p, all entries finite and numerical rank p.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || n <= p {
            return Err(Error::DimensionMismatch(format!(
                "design must have 1 <= p < n, got n = {n}, p = {p}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("design contains non-finite entries".into()));
        }
        let qr = x.clone().qr();
        check_rcond(&qr.r())?;
        let u = qr.q();
        Ok(Design { x, u })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Cached orthonormal basis of col(X), computed once by thin QR.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// The design whose regressor matrix is the cached orthonormal basis.
    pub fn orthonormalized(&self) -> Design {
        Design { x: self.u.clone(), u: self.u.clone() }
    }
}

fn check_rcond(r: &DMatrix<f64>) -> Result<()> {
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0_f64;
    for i in 0..r.nrows().min(r.ncols()) {
        let d = r[(i, i)].abs();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let rcond = if dmax > 0.0 { dmin / dmax } else { 0.0 };
    if rcond < RCOND_THRESHOLD {
        return Err(Error::RankDeficient { rcond });
    }
    Ok(())
}

/// Which estimator produced a [`RegressionFit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Ols,
    Wls,
    Fls,
    TMle,
    Huber,
}

#[derive(Clone, Debug)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Final objective: weighted residual sum of squares for the least
    /// squares family, marginal log-likelihood for the t fit, Huber loss
    /// for the Huber fit.
    pub objective: f64,
}

/// A covariance estimate tagged with the name of the estimator that
/// produced it (the exact finite-sample `H_X` needs the unknown truth).
#[derive(Clone, Debug)]
pub struct CovEstimate {
    matrix: DMatrix<f64>,
    estimator: String,
}

impl CovEstimate {
    /// Validates symmetry (1e-10) and eigenvalues ≥ −1e-10, both relative
    /// to the matrix scale.
    pub fn new(matrix: DMatrix<f64>, estimator: impl Into<String>) -> Result<Self> {
        let scale = matrix.amax().max(1.0);
        let asym = max_asymmetry(&matrix);
        if asym > 1e-10 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let sym = symmetrize(&matrix);
        let eigvals = sym.symmetric_eigenvalues();
        let min = eigvals.min();
        if min < -1e-10 * scale {
            return Err(Error::NonPsd(min));
        }
        Ok(CovEstimate { matrix, estimator: estimator.into() })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn estimator(&self) -> &str {
        &self.estimator
    }
}

/// Result of any of the coefficient estimators in this crate.
#[derive(Clone, Debug)]
pub struct RegressionFit {
    pub beta: DVector<f64>,
    pub cov: Option<CovEstimate>,
    pub weights_used: Option<DiagonalWeights>,
    pub method: Method,
    pub diagnostics: FitDiagnostics,
}

/// Feasible least squares: `beta = (X'W⁻¹X)⁻¹X'W⁻¹y` for a fixed diagonal
/// weight matrix `W`. All-ones weights give OLS. Solved through the QR
/// factorization of `W^{-1/2}X` rather than the normal equations.
///
/// The covariance field is left unset; it requires either the unknown true
/// variances ([`sandwich_cov`]) or a data-driven estimate.
pub fn fls_fit(design: &Design, y: &DVector<f64>, weights: &DiagonalWeights) -> Result<RegressionFit> {
    let n = design.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response length {} does not match design rows {n}",
            y.len()
        )));
    }
    if weights.len() != n {
        return Err(Error::LengthMismatch(weights.len(), n));
    }

    let mut a = design.x().clone();
    let mut b = y.clone();
    for i in 0..n {
        let s = weights[i].sqrt().recip();
        for j in 0..a.ncols() {
            a[(i, j)] *= s;
        }
        b[i] *= s;
    }
    let p = a.ncols();
    let qr = a.qr();
    let r = qr.r();
    check_rcond(&r)?;
    qr.q_tr_mul(&mut b);
    let qtb = b.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient { rcond: 0.0 })?;

    let resid = y - design.x() * &beta;
    let wssr: f64 = resid
        .iter()
        .zip(weights.iter())
        .map(|(r, w)| r * r / w)
        .sum();

    let is_ols = weights.iter().all(|&w| w == 1.0);
    Ok(RegressionFit {
        beta,
        cov: None,
        weights_used: Some(weights.clone()),
        method: if is_ols { Method::Ols } else { Method::Fls },
        diagnostics: FitDiagnostics { iterations: 1, converged: true, objective: wssr },
    })
}

/// Ordinary least squares, the all-ones special case of [`fls_fit`].
pub fn ols_fit(design: &Design, y: &DVector<f64>) -> Result<RegressionFit> {
    fls_fit(design, y, &DiagonalWeights::ones(design.n()))
}

/// The exact covariance of the fixed-weight FLS estimate:
/// `H_X(W, V) = (X'W⁻¹X)⁻¹ X'W⁻¹ V W⁻¹ X (X'W⁻¹X)⁻¹`
/// where `W` are the weights used by the fit and `V` the true variances.
/// Collapses to `(X'V⁻¹X)⁻¹` when `W = V`.
pub fn sandwich_cov(
    design: &Design,
    fls_weights: &DiagonalWeights,
    true_var: &DiagonalWeights,
) -> Result<DMatrix<f64>> {
    let n = design.n();
    if fls_weights.len() != n {
        return Err(Error::LengthMismatch(fls_weights.len(), n));
    }
    if true_var.len() != n {
        return Err(Error::LengthMismatch(true_var.len(), n));
    }

    // With A = W^{-1/2}X = QR:  H = R⁻¹ Q' diag(v_i / w_i) Q R⁻ᵀ.
    let mut a = design.x().clone();
    for i in 0..n {
        let s = fls_weights[i].sqrt().recip();
        for j in 0..a.ncols() {
            a[(i, j)] *= s;
        }
    }
    let qr = a.qr();
    let rfac = qr.r();
    check_rcond(&rfac)?;
    let q = qr.q();
    let p = q.ncols();

    let mut m = DMatrix::zeros(p, p);
    for i in 0..n {
        let d = true_var[i] / fls_weights[i];
        for r in 0..p {
            let qir = q[(i, r)] * d;
            for c in r..p {
                m[(r, c)] += qir * q[(i, c)];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            m[(r, c)] = m[(c, r)];
        }
    }

    let rinv_m = rfac
        .solve_upper_triangular(&m)
        .ok_or(Error::RankDeficient { rcond: 0.0 })?;
    let h = rfac
        .solve_upper_triangular(&rinv_m.transpose())
        .ok_or(Error::RankDeficient { rcond: 0.0 })?;
    Ok(symmetrize(&h))
}

/// Determinant of a covariance matrix (the generalized variance).
pub fn generalized_variance(cov: &DMatrix<f64>) -> Result<f64> {
    let eig = psd_eigenvalues(cov)?;
    Ok(eig.iter().product())
}

/// Trace of a covariance matrix (the total variance).
pub fn total_variance(cov: &DMatrix<f64>) -> Result<f64> {
    psd_eigenvalues(cov)?;
    Ok(cov.trace())
}

/// Standardized generalized variance `det(cov)^{1/p}`, evaluated in the
/// log domain so that high-dimensional determinants neither overflow nor
/// underflow.
pub fn sgv(cov: &DMatrix<f64>, p: usize) -> Result<f64> {
    if cov.nrows() != p || cov.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "cov is {}x{}, expected {p}x{p}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let eig = psd_eigenvalues(cov)?;
    if eig.iter().any(|&v| v <= 0.0) {
        return Ok(0.0);
    }
    let mean_log = eig.iter().map(|v| v.ln()).sum::<f64>() / p as f64;
    Ok(mean_log.exp())
}

fn psd_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    if cov.nrows() != cov.ncols() {
        return Err(Error::DimensionMismatch("covariance must be square".into()));
    }
    let scale = cov.amax().max(1.0);
    let asym = max_asymmetry(cov);
    if asym > 1e-8 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = symmetrize(cov).symmetric_eigenvalues();
    let min = eig.min();
    if min < -1e-8 * scale {
        return Err(Error::NonPsd(min));
    }
    Ok(eig.iter().copied().collect())
}

/// A symmetric positive definite matrix stored together with its spectral
/// decomposition, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct FullCovariance {
    v: DMatrix<f64>,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
}

impl FullCovariance {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    /// Assemble `V = E diag(λ) E'` from an orthonormal eigenbasis and
    /// positive eigenvalues. Eigenpairs are sorted descending.
    pub fn from_parts(eigvecs: DMatrix<f64>, eigvals: DVector<f64>) -> Result<Self> {
        let n = eigvecs.nrows();
        if eigvecs.ncols() != n || eigvals.len() != n {
            return Err(Error::DimensionMismatch("eigvecs must be square n x n with n eigenvalues".into()));
        }
        let gram = eigvecs.transpose() * &eigvecs;
        let dev = (&gram - DMatrix::identity(n, n)).amax();
        if dev > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "eigenbasis not orthonormal, deviation {dev:.3e}"
            )));
        }
        let min = eigvals.min();
        if min <= 0.0 {
            return Err(Error::NotPd(min));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).unwrap());
        let sorted_vecs = DMatrix::from_fn(n, n, |r, c| eigvecs[(r, order[c])]);
        let sorted_vals = DVector::from_fn(n, |r, _| eigvals[order[r]]);
        let mut v = DMatrix::zeros(n, n);
        for k in 0..n {
            let col = sorted_vecs.column(k);
            let lam = sorted_vals[k];
            for r in 0..n {
                let s = lam * col[r];
                for c in r..n {
                    v[(r, c)] += s * col[c];
                }
            }
        }
        for r in 0..n {
            for c in 0..r {
                v[(r, c)] = v[(c, r)];
            }
        }
        Ok(FullCovariance { v, eigvecs: sorted_vecs, eigvals: sorted_vals })
    }
}

/// Spectral decomposition of a symmetric positive definite matrix,
/// eigenvalues descending.
pub fn eigendecompose(v: DMatrix<f64>) -> Result<FullCovariance> {
    let n = v.nrows();
    if v.ncols() != n {
        return Err(Error::DimensionMismatch("matrix must be square".into()));
    }
    let scale = v.amax().max(1.0);
    let asym = max_asymmetry(&v);
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = symmetrize(&v).symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        return Err(Error::NotPd(min));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigvecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let eigvals = DVector::from_fn(n, |r, _| eig.eigenvalues[order[r]]);
    Ok(FullCovariance { v, eigvecs, eigvals })
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for r in 0..m.nrows() {
        for c in (r + 1)..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)]).abs());
        }
    }
    worst
}
