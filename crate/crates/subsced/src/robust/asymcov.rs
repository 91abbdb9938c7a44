//! Asymptotic covariance machinery for the two robust estimators: the
//! effective-variance pairs (f, g), the worst-case efficiency constants,
//! the plug-in covariance for the t estimate, and its sandwich confidence
//! intervals.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linmodel::{symmetrize, Design};
use crate::robust::em::TModelParams;
use crate::robust::special::h_fn;

/// Effective variances (f, g) for the t maximum likelihood estimate under
/// independent normal errors with variance `omega`:
///
/// `g = omega / (1 - h(x))` and `f = 2 omega / ((1 + 1/x²) h(x) - 1)`
/// with `x = sqrt(nu omega0 / omega)`. The asymptotic covariance is
/// `V⁻¹BV⁻¹` for `V = Σ x_i x_i'/g(ω_i)`, `B = Σ x_i x_i'/f(ω_i)`.
///
/// For large `x` (omega far below nu·omega0) both denominators suffer
/// catastrophic cancellation and are replaced by their asymptotic series
/// in `1/x²`.
pub fn t_asym_fg(omega: f64, omega0: f64, nu: f64) -> (f64, f64) {
    assert!(omega > 0.0 && omega0 > 0.0 && nu > 0.0);
    let x2 = nu * omega0 / omega;
    if x2 >= 400.0 {
        // series: 1 - h = u(1 - 3u + 15u² - 105u³ + 945u⁴ - 10395u⁵ + 135135u⁶),
        //         (1+u)h - 1 = 2u²(1 - 6u + 45u² - 420u³ + 4725u⁴ - 62370u⁵ + 945945u⁶)
        // with u = 1/x².
        let u = 1.0 / x2;
        let s1 = 1.0
            + u * (-3.0 + u * (15.0 + u * (-105.0 + u * (945.0 + u * (-10395.0 + 135135.0 * u)))));
        let s2 = 1.0
            + u * (-6.0 + u * (45.0 + u * (-420.0 + u * (4725.0 + u * (-62370.0 + 945945.0 * u)))));
        let g = omega / (u * s1);
        let f = omega / (u * u * s2);
        (f, g)
    } else {
        let x = x2.sqrt();
        let h = h_fn(x);
        let g = omega / (1.0 - h);
        let f = 2.0 * omega / ((1.0 + 1.0 / x2) * h - 1.0);
        (f, g)
    }
}

/// Effective variances (f, g) for the Huber estimate with threshold `k`
/// under normal errors with variance `omega`:
///
/// `1/g = P(|e| <= k)` and `1/f = E[min(|e|, k)²]`, both in closed form
/// through the error function (no quadrature).
pub fn huber_asym_fg(omega: f64, k: f64) -> (f64, f64) {
    assert!(omega > 0.0 && k > 0.0);
    let a = k / omega.sqrt();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let p_inside = statrs::function::erf::erf(a * inv_sqrt2);
    let truncated_second_moment = if a < 1e-3 {
        // 2 phi(0) (a³/3 - a⁵/10 + a⁷/56 - a⁹/432): the direct difference
        // cancels to nothing at this scale
        let a2 = a * a;
        2.0 * (2.0 * std::f64::consts::PI).sqrt().recip()
            * a2
            * a
            * (1.0 / 3.0 + a2 * (-0.1 + a2 * (1.0 / 56.0 - a2 / 432.0)))
    } else {
        let phi_a = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
        p_inside - 2.0 * a * phi_a
    };
    let tail = statrs::function::erf::erfc(a * inv_sqrt2);
    let inv_f = omega * truncated_second_moment + k * k * tail;
    (1.0 / inv_f, 1.0 / p_inside)
}

/// Which estimator a worst-case constant refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorstCaseKind {
    T,
    Huber,
}

/// Worst-case variance inflation of the robust estimate over OLS when the
/// true variances are bounded: `g(w_max)² / (w_max f(w_max))` evaluated at
/// `ratio = w_max/(nu omega0)` for the t estimate and `ratio = w_max/k²`
/// for the Huber estimate. Monotone increasing in the ratio.
pub fn worst_case_constant(kind: WorstCaseKind, ratio: f64) -> f64 {
    assert!(ratio > 0.0);
    let (f, g) = match kind {
        WorstCaseKind::T => t_asym_fg(ratio, 1.0, 1.0),
        WorstCaseKind::Huber => huber_asym_fg(ratio, 1.0),
    };
    g * g / (ratio * f)
}

/// Finite-sum plug-in covariance of the t estimate at known variances:
/// `V_n⁻¹ B_n V_n⁻¹` with `V_n = Σ x_i x_i'/g(ω_i)`,
/// `B_n = Σ x_i x_i'/f(ω_i)`. Only the scale and degrees of freedom of
/// `params` are used.
pub fn t_asym_cov(
    x_rows: &DMatrix<f64>,
    omegas: &[f64],
    params: &TModelParams,
) -> Result<DMatrix<f64>> {
    let (n, p) = x_rows.shape();
    if omegas.len() != n {
        return Err(Error::LengthMismatch(omegas.len(), n));
    }
    let mut v = DMatrix::zeros(p, p);
    let mut b = DMatrix::zeros(p, p);
    for i in 0..n {
        let (f, g) = t_asym_fg(omegas[i], params.omega0, params.nu);
        accumulate_outer(&mut v, &x_rows.row(i).transpose(), 1.0 / g);
        accumulate_outer(&mut b, &x_rows.row(i).transpose(), 1.0 / f);
    }
    mirror_lower(&mut v);
    mirror_lower(&mut b);
    let v_inv = v.try_inverse().ok_or(Error::RankDeficient { rcond: 0.0 })?;
    Ok(symmetrize(&(&v_inv * b * &v_inv)))
}

fn accumulate_outer(m: &mut DMatrix<f64>, x: &DVector<f64>, w: f64) {
    let p = x.len();
    for r in 0..p {
        let s = w * x[r];
        for c in r..p {
            m[(r, c)] += s * x[c];
        }
    }
}

fn mirror_lower(m: &mut DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in 0..r {
            m[(r, c)] = m[(c, r)];
        }
    }
}

/// Sandwich confidence intervals for a converged t fit.
#[derive(Clone, Debug)]
pub struct TSandwich {
    pub cov: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub z: f64,
}

/// Empirical sandwich covariance
/// `(Σ ∇²ℓ_i)⁻¹ (Σ ∇ℓ_i ∇ℓ_i') (Σ ∇²ℓ_i)⁻¹` evaluated at the fitted
/// parameters, and the per-coefficient intervals
/// `beta_j ± z_{1-alpha/2} sqrt(cov_jj)`.
pub fn t_sandwich_ci(
    design: &Design,
    y: &DVector<f64>,
    fit: &TModelParams,
    alpha: f64,
) -> Result<TSandwich> {
    let n = design.n();
    let p = design.p();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response length {} vs design rows {n}",
            y.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must be in [0,1], got {alpha}")));
    }
    let nu = fit.nu;
    let w0 = fit.omega0;
    let mut hess = DMatrix::zeros(p, p);
    let mut outer = DMatrix::zeros(p, p);
    for i in 0..n {
        let xi = design.x().row(i).transpose();
        let r = y[i] - design.x().row(i).dot(&fit.beta.transpose());
        let denom = nu * w0 + r * r;
        let hess_w = (nu + 1.0) * (r * r - nu * w0) / (denom * denom);
        let outer_w = (nu + 1.0) * (nu + 1.0) * r * r / (denom * denom);
        accumulate_outer(&mut hess, &xi, hess_w);
        accumulate_outer(&mut outer, &xi, outer_w);
    }
    mirror_lower(&mut hess);
    mirror_lower(&mut outer);

    let eigs = hess.clone().symmetric_eigenvalues();
    let max_abs = eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_abs = eigs.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(min_abs > 1e-12 * max_abs) {
        return Err(Error::SingularHessian);
    }
    let hess_inv = hess.try_inverse().ok_or(Error::SingularHessian)?;
    let cov = symmetrize(&(&hess_inv * outer * &hess_inv));

    let z = if alpha >= 1.0 {
        0.0
    } else {
        Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
    };
    let mut lower = DVector::zeros(p);
    let mut upper = DVector::zeros(p);
    for j in 0..p {
        let se = cov[(j, j)].max(0.0).sqrt();
        lower[j] = fit.beta[j] - z * se;
        upper[j] = fit.beta[j] + z * se;
    }
    Ok(TSandwich { cov, lower, upper, z })
}

/// M-estimation sandwich covariance for a Huber fit:
/// `(Σ ψ'_k(r_i) x_i x_i')⁻¹ (Σ ψ_k(r_i)² x_i x_i') (Σ ψ'_k(r_i) x_i x_i')⁻¹`.
pub fn huber_sandwich_cov(design: &Design, residuals: &DVector<f64>, k: f64) -> Result<DMatrix<f64>> {
    let n = design.n();
    let p = design.p();
    if residuals.len() != n {
        return Err(Error::DimensionMismatch("residual length".into()));
    }
    let mut v = DMatrix::zeros(p, p);
    let mut b = DMatrix::zeros(p, p);
    for i in 0..n {
        let xi = design.x().row(i).transpose();
        let r = residuals[i];
        let psi = r.clamp(-k, k);
        accumulate_outer(&mut b, &xi, psi * psi);
        if r.abs() < k {
            accumulate_outer(&mut v, &xi, 1.0);
        }
    }
    mirror_lower(&mut v);
    mirror_lower(&mut b);
    let v_inv = v.try_inverse().ok_or(Error::SingularHessian)?;
    Ok(symmetrize(&(&v_inv * b * &v_inv)))
}
