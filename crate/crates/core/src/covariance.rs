//! Weight matrices for reconciliation: identity (OLS), residual variances
//! (WLS), and the shrinkage estimator that pulls the residual covariance
//! toward its diagonal (MinT-shr).
//!
//! With `W1` the one-step residual covariance and `WD = diag(W1)`, the
//! shrinkage estimator is `lambda * WD + (1 - lambda) * W1`. The intensity
//! uses the diagonal-target ("target D") estimator for correlations:
//!
//! ```text
//! xs_ki  = x_ki / sqrt(w_ii)                  (standardised residuals)
//! r_ij   = mean_k xs_ki xs_kj
//! v_ij   = sum_k (xs_ki xs_kj - r_ij)^2 / (T (T - 1))
//! lambda = sum_{i != j} v_ij / sum_{i != j} r_ij^2, clamped to [0, 1]
//! ```
//!
//! Standardising with the `1/T` variance makes `v_ij` equal to the
//! `T / (T - 1)^3` form written in terms of unit-variance (`1/(T-1)`)
//! standardisation, and `r_ij` equal to its `T / (T - 1)` rescaled mean.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMethod {
    Ols,
    Wls,
    MintShr,
}

impl CovarianceMethod {
    pub fn label(self) -> &'static str {
        match self {
            CovarianceMethod::Ols => "ols",
            CovarianceMethod::Wls => "wls",
            CovarianceMethod::MintShr => "mint_shr",
        }
    }
}

impl fmt::Display for CovarianceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CovarianceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Self::Ols),
            "wls" => Ok(Self::Wls),
            "mint-shr" | "mint_shr" | "mintshr" => Ok(Self::MintShr),
            _ => Err(Error::InvalidParameter(format!("unknown covariance method `{s}`"))),
        }
    }
}

/// Relative variance floor applied to the residual variances by default.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub method: CovarianceMethod,
    /// Variances below `variance_floor * max_j w_jj` are raised to that bound.
    pub variance_floor: f64,
    pub lambda_override: Option<f64>,
    /// Centre residual columns on their means before estimating `W1`.
    pub center: bool,
}

impl CovarianceSpec {
    pub fn new(method: CovarianceMethod) -> Self {
        Self {
            method,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            lambda_override: None,
            center: true,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_override = Some(lambda);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.variance_floor.is_nan() || self.variance_floor < 0.0 {
            return Err(Error::InvalidParameter("variance_floor must be nonnegative".into()));
        }
        if let Some(l) = self.lambda_override {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::InvalidParameter(format!("lambda {l} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// A realised weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    w: DMatrix<f64>,
    method: CovarianceMethod,
    lambda: Option<f64>,
    diag_w1: DVector<f64>,
}

impl CovarianceEstimate {
    /// Wraps an externally supplied weight matrix after checking it is
    /// square, symmetric and positive definite.
    pub fn from_matrix(w: DMatrix<f64>, method: CovarianceMethod) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square weight matrix".into(),
                actual: format!("{} x {}", w.nrows(), w.ncols()),
            });
        }
        let scale = w.amax().max(f64::MIN_POSITIVE);
        if (&w - w.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("weight matrix is not symmetric".into()));
        }
        if w.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            diag_w1: w.diagonal(),
            w,
            method,
            lambda: None,
        })
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn method(&self) -> CovarianceMethod {
        self.method
    }

    /// Shrinkage intensity actually used (MinT-shr only).
    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    /// Residual variances after flooring (for OLS, the unit diagonal).
    pub fn diag_w1(&self) -> &DVector<f64> {
        &self.diag_w1
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }
}

fn check_residuals(residuals: &DMatrix<f64>, min_rows: usize) -> Result<()> {
    if residuals.nrows() < min_rows {
        return Err(Error::TooShort {
            required: min_rows,
            actual: residuals.nrows(),
        });
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("residuals".into()));
    }
    Ok(())
}

fn centered(residuals: &DMatrix<f64>, center: bool) -> DMatrix<f64> {
    let mut x = residuals.clone();
    if center {
        for mut col in x.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
    }
    x
}

fn symmetrize(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// `W1 = E'E / T_r`, with `E` optionally centred by column.
pub fn sample_covariance_with(residuals: &DMatrix<f64>, center: bool) -> Result<DMatrix<f64>> {
    check_residuals(residuals, 2)?;
    let x = centered(residuals, center);
    let mut w1 = x.tr_mul(&x) / residuals.nrows() as f64;
    symmetrize(&mut w1);
    Ok(w1)
}

/// Column-centred `1/T_r` residual covariance.
pub fn sample_covariance(residuals: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sample_covariance_with(residuals, true)
}

/// Shrinkage intensity toward the diagonal target, clamped to `[0, 1]`.
/// A zero denominator (no sample correlation at all) gives `1`.
pub fn estimate_shrinkage_intensity_with(residuals: &DMatrix<f64>, center: bool) -> Result<f64> {
    check_residuals(residuals, 3)?;
    let t = residuals.nrows() as f64;
    let x = centered(residuals, center);
    let mut xs = x;
    for (j, mut col) in xs.column_iter_mut().enumerate() {
        let var = col.norm_squared() / t;
        if var <= 0.0 {
            return Err(Error::ZeroVariance(j));
        }
        col /= var.sqrt();
    }
    let r = xs.tr_mul(&xs) / t;
    let xs2 = xs.component_mul(&xs);
    let v = (xs2.tr_mul(&xs2) - r.component_mul(&r) * t) / (t * (t - 1.0));

    let n = r.nrows();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                num += v[(i, j)];
                den += r[(i, j)] * r[(i, j)];
            }
        }
    }
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

pub fn estimate_shrinkage_intensity(residuals: &DMatrix<f64>) -> Result<f64> {
    estimate_shrinkage_intensity_with(residuals, true)
}

fn floored_diagonal(w1: &DMatrix<f64>, floor: f64) -> DVector<f64> {
    let d = w1.diagonal();
    let max = d.max();
    let bound = if max > 0.0 { floor * max } else { floor };
    d.map(|v| v.max(bound))
}

/// Builds the reconciliation weight matrix for `spec.method` from a
/// `T_r x n` residual panel. OLS ignores the residuals (they may be empty).
pub fn make_weight_matrix(residuals: &DMatrix<f64>, spec: &CovarianceSpec) -> Result<CovarianceEstimate> {
    spec.validate()?;
    let n = residuals.ncols();
    let estimate = match spec.method {
        CovarianceMethod::Ols => CovarianceEstimate {
            w: DMatrix::identity(n, n),
            method: spec.method,
            lambda: None,
            diag_w1: DVector::from_element(n, 1.0),
        },
        CovarianceMethod::Wls => {
            let w1 = sample_covariance_with(residuals, spec.center)?;
            let d = floored_diagonal(&w1, spec.variance_floor);
            CovarianceEstimate {
                w: DMatrix::from_diagonal(&d),
                method: spec.method,
                lambda: None,
                diag_w1: d,
            }
        }
        CovarianceMethod::MintShr => {
            if residuals.nrows() * 2 < n {
                log::warn!(
                    "only {} residual rows for {} series; shrinkage estimate will be noisy",
                    residuals.nrows(),
                    n
                );
            }
            let w1 = sample_covariance_with(residuals, spec.center)?;
            let raw = w1.diagonal();
            let d = floored_diagonal(&w1, spec.variance_floor);
            let lambda = match spec.lambda_override {
                Some(l) => l,
                None => {
                    // columns whose variance was floored carry no correlation information
                    let keep: Vec<usize> = (0..n).filter(|&j| raw[j] > 0.0 && raw[j] >= d[j]).collect();
                    if keep.len() < 2 {
                        1.0
                    } else {
                        estimate_shrinkage_intensity_with(&residuals.select_columns(&keep), spec.center)?
                    }
                }
            };
            let mut w = w1 * (1.0 - lambda);
            w.set_diagonal(&d);
            CovarianceEstimate {
                w,
                method: spec.method,
                lambda: Some(lambda),
                diag_w1: d,
            }
        }
    };
    if estimate.w.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn two_point_sample() {
        let e = DMatrix::from_row_slice(2, 2, &[1., -1., -1., 1.]);
        let w1 = sample_covariance(&e).unwrap();
        assert_eq!(w1, DMatrix::from_row_slice(2, 2, &[1., -1., -1., 1.]));
        assert_eq!(sample_covariance(&DMatrix::zeros(5, 3)).unwrap(), DMatrix::zeros(3, 3));
        assert!(matches!(
            sample_covariance(&DMatrix::zeros(1, 3)),
            Err(Error::TooShort { .. })
        ));
        let mut bad = DMatrix::zeros(3, 2);
        bad[(1, 1)] = f64::INFINITY;
        assert!(matches!(sample_covariance(&bad), Err(Error::NonFinite(_))));
    }

    #[test]
    fn monte_carlo_sample_covariance() {
        #[rustfmt::skip]
        let truth = DMatrix::from_row_slice(3, 3, &[
            4.0, 2.4, 1.6,
            2.4, 4.0, 2.0,
            1.6, 2.0, 2.0,
        ]);
        let l = truth.clone().cholesky().unwrap().l();
        let z = gaussian(1000, 3, 42);
        let e = z * l.transpose();
        let w1 = sample_covariance(&e).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let rel = (w1[(i, j)] - truth[(i, j)]).abs() / truth[(i, j)].abs();
                assert!(rel <= 0.15, "({i},{j}) {} vs {}", w1[(i, j)], truth[(i, j)]);
            }
        }
    }

    #[test]
    fn ols_and_wls() {
        let ols = make_weight_matrix(&DMatrix::zeros(0, 3), &CovarianceSpec::new(CovarianceMethod::Ols)).unwrap();
        assert_eq!(ols.w(), &DMatrix::identity(3, 3));

        // column variances 4 and 9 under 1/T scaling
        let e = DMatrix::from_row_slice(2, 2, &[2., 3., -2., -3.]);
        let wls = make_weight_matrix(&e, &CovarianceSpec::new(CovarianceMethod::Wls)).unwrap();
        assert_eq!(wls.w(), &DMatrix::from_diagonal(&DVector::from_vec(vec![4., 9.])));
    }

    #[test]
    fn lambda_endpoints_collapse() {
        let e = gaussian(40, 5, 9) + DMatrix::from_fn(40, 5, |t, _| (t % 7) as f64);
        let w1 = sample_covariance(&e).unwrap();
        let wls = make_weight_matrix(&e, &CovarianceSpec::new(CovarianceMethod::Wls)).unwrap();
        let one = make_weight_matrix(&e, &CovarianceSpec::new(CovarianceMethod::MintShr).with_lambda(1.0)).unwrap();
        let zero = make_weight_matrix(&e, &CovarianceSpec::new(CovarianceMethod::MintShr).with_lambda(0.0)).unwrap();
        assert_eq!(one.w(), wls.w());
        assert_eq!(zero.w(), &w1);
        let est = make_weight_matrix(&e, &CovarianceSpec::new(CovarianceMethod::MintShr)).unwrap();
        assert_eq!(est.w().diagonal(), w1.diagonal());
        let l = est.lambda().unwrap();
        assert!((0.0..=1.0).contains(&l));
    }

    #[test]
    fn degenerate_lambda_is_one() {
        // orthogonal, zero-mean columns: every sample correlation is exactly 0
        let e = DMatrix::from_row_slice(4, 2, &[1., 1., -1., 1., 1., -1., -1., -1.]);
        assert_eq!(estimate_shrinkage_intensity(&e).unwrap(), 1.0);
    }

    #[test]
    fn perfectly_correlated_columns_resist_shrinkage() {
        let z = gaussian(10_000, 1, 5);
        let e = DMatrix::from_fn(10_000, 2, |t, j| z[(t, 0)] * (1.0 + j as f64));
        let l = estimate_shrinkage_intensity(&e).unwrap();
        assert!(l < 0.01, "lambda = {l}");
    }

    #[test]
    fn spherical_noise_shrinks_heavily() {
        let e = gaussian(30, 10, 2024);
        let l = estimate_shrinkage_intensity(&e).unwrap();
        assert!((0.8..=1.0).contains(&l), "lambda = {l}");
    }

    #[test]
    fn zero_variance_handling() {
        let mut e = gaussian(20, 3, 1);
        e.column_mut(1).fill(0.0);
        assert!(matches!(estimate_shrinkage_intensity(&e), Err(Error::ZeroVariance(1))));
        let est = make_weight_matrix(&e, &CovarianceSpec::new(CovarianceMethod::MintShr)).unwrap();
        let w1 = sample_covariance(&e).unwrap();
        assert_eq!(est.w()[(1, 1)], DEFAULT_VARIANCE_FLOOR * w1.diagonal().max());
        assert!(est.w().clone().cholesky().is_some());

        let all_zero = DMatrix::zeros(10, 3);
        let wls = make_weight_matrix(&all_zero, &CovarianceSpec::new(CovarianceMethod::Wls)).unwrap();
        assert_eq!(wls.w(), &(DMatrix::identity(3, 3) * DEFAULT_VARIANCE_FLOOR));
        let mut no_floor = CovarianceSpec::new(CovarianceMethod::Wls);
        no_floor.variance_floor = 0.0;
        assert!(matches!(
            make_weight_matrix(&all_zero, &no_floor),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn spec_validation() {
        let mut s = CovarianceSpec::new(CovarianceMethod::MintShr).with_lambda(1.5);
        assert!(s.validate().is_err());
        s.lambda_override = None;
        s.variance_floor = -1.0;
        assert!(s.validate().is_err());
        assert_eq!(
            "mint-shr".parse::<CovarianceMethod>().unwrap(),
            CovarianceMethod::MintShr
        );
    }
}
