//! Heteroscedasticity-consistent covariance estimators for OLS (HC0–HC3)
//! and the classical homoscedastic estimator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linmodel::{symmetrize, Design};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HcVariant {
    Hc0,
    Hc1,
    Hc2,
    Hc3,
}

impl HcVariant {
    pub fn label(&self) -> &'static str {
        match self {
            HcVariant::Hc0 => "hc0",
            HcVariant::Hc1 => "hc1",
            HcVariant::Hc2 => "hc2",
            HcVariant::Hc3 => "hc3",
        }
    }
}

/// Leverages: diagonal of `X (X'X)⁻¹ X'`, through the cached orthonormal
/// basis.
pub fn leverages(design: &Design) -> Vec<f64> {
    let u = design.u();
    (0..design.n()).map(|i| u.row(i).norm_squared()).collect()
}

/// `(X'X)⁻¹ X' diag(w_i e_i²) X (X'X)⁻¹` where the scheme weights `w_i`
/// are 1 (HC0), n/(n−p) (HC1), 1/(1−h_i) (HC2) or 1/(1−h_i)² (HC3), with
/// `h_i` the hat-matrix diagonal. Residuals must come from an OLS fit on
/// the same design.
pub fn hc_cov(
    design: &Design,
    residuals: &DVector<f64>,
    variant: HcVariant,
) -> Result<DMatrix<f64>> {
    let n = design.n();
    let p = design.p();
    if residuals.len() != n {
        return Err(Error::DimensionMismatch("residual length".into()));
    }
    let h = leverages(design);
    if matches!(variant, HcVariant::Hc2 | HcVariant::Hc3) {
        for (i, &hi) in h.iter().enumerate() {
            if hi >= 1.0 - 1e-12 {
                return Err(Error::LeverageOne { index: i, leverage: hi });
            }
        }
    }

    // with X = U R (thin QR): (X'X)⁻¹ X' D X (X'X)⁻¹ = R⁻¹ U' D U R⁻ᵀ
    let qr = design.x().clone().qr();
    let u = qr.q();
    let mut m = DMatrix::zeros(p, p);
    for i in 0..n {
        let e2 = residuals[i] * residuals[i];
        let w = match variant {
            HcVariant::Hc0 => 1.0,
            HcVariant::Hc1 => n as f64 / (n - p) as f64,
            HcVariant::Hc2 => 1.0 / (1.0 - h[i]),
            HcVariant::Hc3 => 1.0 / ((1.0 - h[i]) * (1.0 - h[i])),
        };
        let d = w * e2;
        for r in 0..p {
            let s = d * u[(i, r)];
            for c in r..p {
                m[(r, c)] += s * u[(i, c)];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            m[(r, c)] = m[(c, r)];
        }
    }
    let rinv_m = qr
        .r()
        .solve_upper_triangular(&m)
        .ok_or(Error::RankDeficient { rcond: 0.0 })?;
    let cov = qr
        .r()
        .solve_upper_triangular(&rinv_m.transpose())
        .ok_or(Error::RankDeficient { rcond: 0.0 })?;
    Ok(symmetrize(&cov))
}

/// Classical `sigma² (X'X)⁻¹` with `sigma² = Σ e_i² / (n − p)`.
pub fn homoscedastic_cov(design: &Design, residuals: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = design.n();
    let p = design.p();
    if residuals.len() != n {
        return Err(Error::DimensionMismatch("residual length".into()));
    }
    let sigma2 = residuals.iter().map(|e| e * e).sum::<f64>() / (n - p) as f64;
    let qr = design.x().clone().qr();
    let identity = DMatrix::identity(p, p);
    let rinv = qr
        .r()
        .solve_upper_triangular(&identity)
        .ok_or(Error::RankDeficient { rcond: 0.0 })?;
    Ok(symmetrize(&(&rinv * rinv.transpose() * sigma2)))
}
