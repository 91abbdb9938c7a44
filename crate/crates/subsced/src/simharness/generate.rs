//! Ground-truth generation for the experiment protocols: designs, true
//! variance vectors, and response draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};
use crate::linmodel::Design;
use crate::simharness::{rng_stream, DesignSource, ExperimentSpec, PowerTerm, VarianceModel};
use crate::weightdesign::MixedSpec;

/// One cell's fixed ground truth: design, true variances, coefficients,
/// and (when the variance model is inverse gamma) the t-model truth.
#[derive(Clone, Debug)]
pub struct GeneratedProblem {
    pub design: Design,
    pub variances: Vec<f64>,
    pub beta_true: DVector<f64>,
    /// `(omega0, nu)` of the inverse gamma variance model, when one is in
    /// force.
    pub t_truth: Option<(f64, f64)>,
}

impl GeneratedProblem {
    /// Draw one response vector `y = X beta + sqrt(w) z`.
    pub fn draw_response<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let mut y = self.design.x() * &self.beta_true;
        for i in 0..y.len() {
            let z: f64 = StandardNormal.sample(rng);
            y[i] += self.variances[i].sqrt() * z;
        }
        y
    }
}

/// Build the cell for sample size `n`. Designs are nested: the full
/// design at `max(n_grid)` is generated once from the setup stream and
/// truncated, like preallocated submatrices of a fixed data set.
pub fn build_problem(spec: &ExperimentSpec, n: usize) -> Result<GeneratedProblem> {
    spec.validate()?;
    let n_max = *spec.n_grid.iter().max().unwrap();
    let mut setup = rng_stream(spec.seed, 0);

    let x_full = match &spec.design_source {
        DesignSource::Gaussian { intercept, standardize } => {
            gaussian_design(n_max, spec.p, *intercept, *standardize, &mut setup)
        }
        DesignSource::Csv { path } => read_csv_design(path, n_max, spec.p)?,
    };
    let beta_true = DVector::from_fn(spec.p, |_, _| StandardNormal.sample(&mut setup));

    // full-length variance vector, then truncate alongside the design
    let (variances_full, t_truth, rotation) = match &spec.variance_model {
        VarianceModel::InvGammaQuantiles { nu, omega0 } => {
            (inv_gamma_quantiles(n, *nu, *omega0)?, Some((*omega0, *nu)), None)
        }
        VarianceModel::InvGammaIid { nu, omega0 } => {
            let gamma = Gamma::new(nu / 2.0, 2.0 / (nu * omega0)).map_err(|e| {
                Error::InvalidInput(format!("inverse gamma parameters: {e}"))
            })?;
            let draws: Vec<f64> = (0..n_max).map(|_| 1.0 / gamma.sample(&mut setup)).collect();
            (draws, Some((*omega0, *nu)), None)
        }
        VarianceModel::PowerProduct { scale, terms } => {
            (power_product(&x_full, *scale, terms)?, None, None)
        }
        VarianceModel::MixedEffects { batches, theta0_sq, theta1_sq } => {
            let assignment: Vec<usize> =
                (0..n).map(|_| setup.random_range(0..*batches)).collect();
            let mixed = MixedSpec::new(fill_batches(assignment, *batches), *batches, 1.0)?;
            let theta_sq: Vec<f64> = match theta1_sq {
                Some(t1) => vec![*t1; *batches],
                None => {
                    // per-batch variances from IG(1, 3)
                    let g = Gamma::new(1.0, 1.0 / 3.0).unwrap();
                    (0..*batches).map(|_| 1.0 / g.sample(&mut setup)).collect()
                }
            };
            let u = mixed.eigenbasis();
            let lambda = mixed_eigenvalues(&mixed, *theta0_sq, &theta_sq);
            (lambda, None, Some(u))
        }
        VarianceModel::Constant { value } => {
            if !(*value > 0.0) {
                return Err(Error::InvalidInput("constant variance must be positive".into()));
            }
            (vec![*value; n_max], None, None)
        }
    };

    let mut x = x_full.rows(0, n).into_owned();
    if let Some(u) = &rotation {
        // work in the known eigenbasis, where the error covariance is
        // the diagonal eigenvalue sequence
        x = u.transpose() * x;
    }
    let variances = variances_full[..n].to_vec();
    Ok(GeneratedProblem { design: Design::new(x)?, variances, beta_true, t_truth })
}

fn fill_batches(mut assignment: Vec<usize>, batches: usize) -> Vec<usize> {
    // guarantee every batch is non-empty without disturbing determinism
    let mut counts = vec![0usize; batches];
    for &b in &assignment {
        counts[b] += 1;
    }
    let mut cursor = 0;
    for b in 0..batches {
        if counts[b] == 0 {
            while counts[assignment[cursor]] <= 1 {
                cursor += 1;
            }
            counts[assignment[cursor]] -= 1;
            assignment[cursor] = b;
            counts[b] = 1;
        }
    }
    assignment
}

fn mixed_eigenvalues(spec: &MixedSpec, theta0_sq: f64, theta_sq: &[f64]) -> Vec<f64> {
    let sizes = spec.batch_sizes();
    let mut ordered: Vec<usize> = (0..spec.n_batches).collect();
    ordered.sort_by_key(|&b| std::cmp::Reverse(sizes[b]));
    let n = spec.batch_of.len();
    let mut vals = vec![theta0_sq; n];
    for (col, &b) in ordered.iter().enumerate() {
        vals[col] = sizes[b] as f64 * theta_sq[b] + theta0_sq;
    }
    vals
}

/// Standard normal design; optionally a constant `1/sqrt(n)` first column
/// and unit-variance scaling of the non-intercept columns.
pub fn gaussian_design<R: Rng>(
    n: usize,
    p: usize,
    intercept: bool,
    standardize: bool,
    rng: &mut R,
) -> DMatrix<f64> {
    let mut x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng));
    let first_covariate = usize::from(intercept);
    if standardize {
        for j in first_covariate..p {
            let mean = x.column(j).sum() / n as f64;
            let var = x.column(j).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (n as f64 - 1.0);
            let s = var.sqrt();
            for i in 0..n {
                x[(i, j)] /= s;
            }
        }
    }
    if intercept {
        let c = 1.0 / (n as f64).sqrt();
        for i in 0..n {
            x[(i, 0)] = c;
        }
    }
    x
}

/// Quantiles 1/(n+1), ..., n/(n+1) of IG(nu/2, nu omega0 / 2), through
/// the matching gamma distribution of the reciprocal.
pub fn inv_gamma_quantiles(n: usize, nu: f64, omega0: f64) -> Result<Vec<f64>> {
    let gamma = statrs::distribution::Gamma::new(nu / 2.0, nu * omega0 / 2.0)
        .map_err(|e| Error::InvalidInput(format!("inverse gamma parameters: {e}")))?;
    Ok((1..=n)
        .map(|i| {
            let q = i as f64 / (n as f64 + 1.0);
            1.0 / gamma.inverse_cdf(1.0 - q)
        })
        .collect())
}

fn power_product(x: &DMatrix<f64>, scale: f64, terms: &[PowerTerm]) -> Result<Vec<f64>> {
    if !(scale > 0.0) {
        return Err(Error::InvalidInput("power product scale must be positive".into()));
    }
    let mut out = Vec::with_capacity(x.nrows());
    for i in 0..x.nrows() {
        let mut w = scale;
        for term in terms {
            if term.column >= x.ncols() {
                return Err(Error::InvalidInput(format!(
                    "power term column {} out of range",
                    term.column
                )));
            }
            w *= x[(i, term.column)].abs().powf(term.exponent);
        }
        // a covariate exactly at zero would give a degenerate variance
        out.push(w.max(1e-12));
    }
    Ok(out)
}

fn read_csv_design(path: &str, n: usize, p: usize) -> Result<DMatrix<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Csv(format!("non-numeric cell: {e}")))?);
    }
    if rows.len() < n {
        return Err(Error::Csv(format!("need {n} rows, file has {}", rows.len())));
    }
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Csv(format!("every row must have exactly {p} columns")));
    }
    Ok(DMatrix::from_fn(n, p, |r, c| rows[r][c]))
}
