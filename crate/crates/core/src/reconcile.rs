//! Constrained least-squares reconciliation.
//!
//! Given base forecasts `yhat`, constraints `U'y = 0` and a positive definite
//! weight matrix `W`, the reconciled vector minimises
//! `(yhat - y)' W^-1 (yhat - y)` subject to the constraints:
//!
//! ```text
//! ytilde = yhat - W U z,    (U'WU) z = U'yhat
//! ```
//!
//! The `K x K` system is solved by Cholesky. When its condition estimate is
//! above [`CONDITION_LIMIT`] the same problem is solved in square-root form:
//! with `W = LL'` and `L'U = QR`, the correction is `L Q R'^-1 U'yhat`, the
//! minimum-norm solution of the whitened constraints. Its condition number
//! is the square root of that of `U'WU`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::base_forecast::BaseForecastSet;
use crate::covariance::{CovarianceEstimate, CovarianceMethod};
use crate::error::{Error, Result};
use crate::hierarchy::LinkedSystem;

/// Maximum accepted `||U'ytilde||_inf / max(1, ||yhat||_inf)`.
pub const COHERENCE_TOL: f64 = 1e-8;

/// Condition estimate of `U'WU` above which the QR fallback is used.
pub const CONDITION_LIMIT: f64 = 1e12;

enum Solver {
    Cholesky(Cholesky<f64, Dyn>),
    SquareRoot {
        l: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    },
}

/// A factorised reconciliation operator for one system and weight matrix.
pub struct Reconciler<'a> {
    system: &'a LinkedSystem,
    /// `W U`, `n x K`.
    wu: DMatrix<f64>,
    solver: Solver,
    condition: f64,
}

impl<'a> Reconciler<'a> {
    pub fn new(system: &'a LinkedSystem, weights: &CovarianceEstimate) -> Result<Self> {
        let n = system.n();
        if weights.n() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} x {n} weight matrix"),
                actual: format!("{0} x {0}", weights.n()),
            });
        }
        let ut = system.u_full();
        let w = weights.w();
        let wu = w * ut.transpose();
        let mut a = ut * &wu;
        // U'WU is symmetric in exact arithmetic
        for i in 0..a.nrows() {
            for j in 0..i {
                let m = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = m;
                a[(j, i)] = m;
            }
        }
        let condition = condition_estimate(&a);
        let solver = if condition > CONDITION_LIMIT {
            log::warn!(
                "U'WU condition estimate {condition:e} exceeds {CONDITION_LIMIT:e}; using the QR square-root solve"
            );
            let l = w.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
            let qr = (l.transpose() * ut.transpose()).qr();
            let r = qr.r();
            if r.diagonal().iter().any(|&d| d == 0.0) {
                return Err(Error::CholeskyFailed);
            }
            Solver::SquareRoot { q: qr.q(), r, l }
        } else {
            Solver::Cholesky(a.cholesky().ok_or(Error::CholeskyFailed)?)
        };
        Ok(Self {
            system,
            wu,
            solver,
            condition,
        })
    }

    /// Ratio of extreme eigenvalues of `U'WU` (infinite if not positive).
    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn project(&self, y_hat: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.solver {
            Solver::Cholesky(chol) => {
                let z = chol.solve(&(self.system.u_full() * y_hat));
                Ok(y_hat - &self.wu * z)
            }
            Solver::SquareRoot { l, q, r } => {
                let rhs = self.system.u_full() * y_hat;
                let w = r
                    .transpose()
                    .solve_lower_triangular(&rhs)
                    .ok_or(Error::CholeskyFailed)?;
                Ok(y_hat - l * (q * w))
            }
        }
    }

    /// Reconciles one vector of base forecasts.
    pub fn apply(&self, y_hat: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.system.n();
        if y_hat.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} base forecasts"),
                actual: y_hat.len().to_string(),
            });
        }
        let y = self.project(y_hat)?;
        let violation = self.violation(y_hat, &y);
        if violation.is_nan() || violation > COHERENCE_TOL {
            return Err(Error::ConstraintViolation {
                violation,
                condition: self.condition,
            });
        }
        Ok(y)
    }

    /// `||U'y||_inf / max(1, ||yhat||_inf)`.
    pub fn violation(&self, y_hat: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (self.system.u_full() * y).amax() / y_hat.amax().max(1.0)
    }

    /// Dense `M = I - W U (U'WU)^-1 U'`.
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.system.n();
        match &self.solver {
            Solver::Cholesky(chol) => {
                let z = chol.solve(self.system.u_full());
                Ok(DMatrix::identity(n, n) - &self.wu * z)
            }
            Solver::SquareRoot { .. } => {
                let mut m = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut e = DVector::zeros(n);
                    e[j] = 1.0;
                    m.set_column(j, &self.project(&e)?);
                }
                Ok(m)
            }
        }
    }
}

fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let eig = a.clone().symmetric_eigenvalues();
    let (min, max) = (eig.min(), eig.max());
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Reconciles a single vector of base forecasts.
pub fn reconcile(y_hat: &DVector<f64>, system: &LinkedSystem, weights: &CovarianceEstimate) -> Result<DVector<f64>> {
    Reconciler::new(system, weights)?.apply(y_hat)
}

/// The projection matrix mapping base to reconciled forecasts.
pub fn projection_matrix(system: &LinkedSystem, weights: &CovarianceEstimate) -> Result<DMatrix<f64>> {
    Reconciler::new(system, weights)?.matrix()
}

/// Reconciled forecasts for every horizon of a base set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconciliationResult {
    pub series_names: Vec<String>,
    /// `H x n`, row `h - 1` holds horizon `h`.
    pub y_tilde: DMatrix<f64>,
    pub max_constraint_violation: Vec<f64>,
    pub method: CovarianceMethod,
    pub lambda: Option<f64>,
}

impl ReconciliationResult {
    /// Long-format `(series, horizon, value)` rows.
    pub fn records(&self) -> Vec<(String, usize, f64)> {
        let mut out = Vec::with_capacity(self.y_tilde.len());
        for (j, s) in self.series_names.iter().enumerate() {
            for h in 0..self.y_tilde.nrows() {
                out.push((s.clone(), h + 1, self.y_tilde[(h, j)]));
            }
        }
        out
    }
}

/// Reconciles each horizon of `base` with the same weight matrix.
pub fn reconcile_batch(
    base: &BaseForecastSet,
    system: &LinkedSystem,
    weights: &CovarianceEstimate,
) -> Result<ReconciliationResult> {
    if base.series_names() != system.ordering() {
        return Err(Error::DimensionMismatch {
            expected: "base forecasts in system order".into(),
            actual: format!("{} series", base.series_names().len()),
        });
    }
    let rec = Reconciler::new(system, weights)?;
    let fc = base.forecasts();
    let mut y_tilde = DMatrix::zeros(fc.nrows(), fc.ncols());
    let mut violations = Vec::with_capacity(fc.nrows());
    for h in 0..fc.nrows() {
        let y_hat = fc.row(h).transpose();
        let y = rec.apply(&y_hat)?;
        violations.push(rec.violation(&y_hat, &y));
        y_tilde.set_row(h, &y.transpose());
    }
    Ok(ReconciliationResult {
        series_names: base.series_names().to_vec(),
        y_tilde,
        max_constraint_violation: violations,
        method: weights.method(),
        lambda: weights.lambda(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{make_weight_matrix, CovarianceSpec};
    use crate::hierarchy::{link_hierarchies, HierarchySpec};

    fn toy() -> LinkedSystem {
        let spec = HierarchySpec::new("toy", "T", vec![("T".into(), "a".into()), ("T".into(), "b".into())]).unwrap();
        link_hierarchies(&[spec], "T").unwrap()
    }

    fn identity(n: usize) -> CovarianceEstimate {
        make_weight_matrix(&DMatrix::zeros(0, n), &CovarianceSpec::new(CovarianceMethod::Ols)).unwrap()
    }

    #[test]
    fn hand_solved_example() {
        let sys = toy();
        let y = reconcile(&DVector::from_vec(vec![4., 1., 2.]), &sys, &identity(3)).unwrap();
        let expected = [11. / 3., 4. / 3., 7. / 3.];
        for (a, b) in y.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn coherent_input_is_fixed() {
        let sys = toy();
        let w = CovarianceEstimate::from_matrix(
            DMatrix::from_row_slice(3, 3, &[2., 0.5, 0.1, 0.5, 1., 0.2, 0.1, 0.2, 3.]),
            CovarianceMethod::MintShr,
        )
        .unwrap();
        let y_hat = DVector::from_vec(vec![3., 1., 2.]);
        assert_eq!(reconcile(&y_hat, &sys, &w).unwrap(), y_hat);
    }

    #[test]
    fn hand_projection_matrix() {
        let m = projection_matrix(&toy(), &identity(3)).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(3, 3, &[
            2. / 3., 1. / 3., 1. / 3.,
            1. / 3., 2. / 3., -1. / 3.,
            1. / 3., -1. / 3., 2. / 3.,
        ]);
        assert!((m - expected).amax() < 1e-14);
    }

    #[test]
    fn ill_conditioned_weights_use_qr() {
        let e = |p: &str, c: &str| (p.to_string(), c.to_string());
        let a = HierarchySpec::new("a", "T", vec![e("T", "a1"), e("T", "a2")]).unwrap();
        let b = HierarchySpec::new("b", "T", vec![e("T", "b1"), e("T", "b2")]).unwrap();
        let sys = link_hierarchies(&[a, b], "T").unwrap();
        // the two top rows of U'WU become nearly parallel
        let w = CovarianceEstimate::from_matrix(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14, 1e-14, 1e-14, 1e-14])),
            CovarianceMethod::Wls,
        )
        .unwrap();
        let rec = Reconciler::new(&sys, &w).unwrap();
        assert!(rec.condition() > CONDITION_LIMIT);
        let y = rec.apply(&DVector::from_vec(vec![10., 1., 2., 1., 2.])).unwrap();
        for (got, want) in y.iter().zip([3., 1., 2., 1., 2.]) {
            assert!((got - want).abs() < 1e-9, "{y}");
        }
        let m = rec.matrix().unwrap();
        assert!((&m * &m - &m).amax() < 1e-8);
    }

    #[test]
    fn dimension_errors() {
        let sys = toy();
        assert!(matches!(
            Reconciler::new(&sys, &identity(4)),
            Err(Error::DimensionMismatch { .. })
        ));
        let rec = Reconciler::new(&sys, &identity(3)).unwrap();
        assert!(rec.apply(&DVector::zeros(2)).is_err());
    }
}
