//! Shared test support: an adaptive Gauss–Kronrod quadrature oracle
//! (independent of every closed form it checks) and random instance
//! generators for the certification suites.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use subsced::grm;
use subsced::linmodel::{Design, DiagonalWeights};

// 15-point Kronrod nodes/weights on [-1, 1] and the embedded 7-point
// Gauss weights (QUADPACK constants).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = half * XGK[j];
        let fsum = f(center - x) + f(center + x);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive bisection Gauss–Kronrod on a finite interval. The absolute
/// tolerance is allocated to subintervals in proportion to their width,
/// with a machine-precision floor so that rounding-limited pieces stop
/// splitting.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let f = &f;
    let full_width = b - a;
    let mut stack = vec![(a, b)];
    let mut total = 0.0;
    let mut work_guard = 0usize;
    while let Some((a, b)) = stack.pop() {
        work_guard += 1;
        let (value, err) = gk15(f, a, b);
        assert!(
            work_guard < 100_000,
            "quadrature failed to converge: [{a}, {b}] err {err:e} value {value:e}"
        );
        let budget = tol * ((b - a) / full_width);
        let floor = 64.0 * f64::EPSILON * value.abs() + 1e-300;
        if err <= budget.max(floor) || (b - a) < 1e-13 * full_width {
            total += value;
        } else {
            let mid = 0.5 * (a + b);
            stack.push((a, mid));
            stack.push((mid, b));
        }
    }
    total
}

/// Whole-line integral through the tanh-sinh style substitution
/// `z = sinh(2 sinh t)`, which decays double-exponentially for any
/// Gaussian-weighted integrand.
pub fn integrate_real_line(f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let transformed = move |t: f64| {
        let inner = 2.0 * t.sinh();
        let z = inner.sinh();
        let weight = 2.0 * t.cosh() * inner.cosh();
        let v = f(z);
        if v == 0.0 {
            0.0
        } else {
            v * weight
        }
    };
    integrate(transformed, -3.5, 3.5, tol)
}

/// Defect functional `k(u) = u'PVPu - (u'Pu)²(u'Vu)` with `P` the inverse
/// candidate weights: an implementation-independent membership criterion
/// (non-positive on the subscedastic set).
pub fn defect(candidate: &[f64], truth: &[f64], u: &[f64]) -> f64 {
    let phi: Vec<f64> = candidate.iter().map(|w| 1.0 / w).collect();
    let mut upvp = 0.0;
    let mut upu = 0.0;
    let mut uvu = 0.0;
    for i in 0..u.len() {
        let u2 = u[i] * u[i];
        upvp += u2 * phi[i] * phi[i] * truth[i];
        upu += u2 * phi[i];
        uvu += u2 * truth[i];
    }
    upvp - upu * upu * uvu
}

/// Log-uniform positive vector.
pub fn random_weights<R: Rng>(rng: &mut R, n: usize, log_range: f64) -> DiagonalWeights {
    DiagonalWeights::new(
        (0..n)
            .map(|_| (rng.random_range(-log_range..log_range)).exp())
            .collect(),
    )
    .unwrap()
}

/// A random certified candidate for `truth`, through a random GRM
/// transform.
pub fn random_certified<R: Rng>(rng: &mut R, truth: &DiagonalWeights) -> DiagonalWeights {
    let g = grm::random_grm_function(rng);
    grm::grm_to_subscedastic(&g, truth).unwrap()
}

/// Random full-rank design with i.i.d. standard normal entries.
pub fn random_design<R: Rng>(rng: &mut R, n: usize, p: usize) -> Design {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng));
        if let Ok(d) = Design::new(x) {
            return d;
        }
    }
}

/// Random n×p matrix with orthonormal columns.
pub fn random_orthonormal<R: Rng>(rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng));
    x.qr().q()
}

#[cfg(test)]
mod self_tests {
    use super::*;

    #[test]
    fn oracle_reproduces_gaussian_moments() {
        let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
        let m0 = integrate_real_line(|z| (-0.5 * z * z).exp(), 1e-12);
        assert!((m0 - sqrt_2pi).abs() < 1e-11, "{m0}");
        let m2 = integrate_real_line(|z| z * z * (-0.5 * z * z).exp(), 1e-12);
        assert!((m2 - sqrt_2pi).abs() < 1e-11, "{m2}");
        let finite = integrate(|z| z * z, 0.0, 1.0, 1e-13);
        assert!((finite - 1.0 / 3.0).abs() < 1e-13);
    }
}
