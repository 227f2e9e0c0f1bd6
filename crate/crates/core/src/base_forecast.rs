//! Univariate base forecasts and their in-sample one-step residuals.
//!
//! Every series is forecast on its own. The residual panel collects the
//! one-step-ahead in-sample errors `y_t - yhat_{t|t-1}` over the common fit
//! sample and feeds the weight-matrix estimators in [`crate::covariance`].

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::TimeSeriesPanel;
use crate::period::Quarter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForecastMethod {
    Naive,
    RwDrift,
    Ar,
}

impl std::str::FromStr for ForecastMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Self::Naive),
            "rw-drift" | "rw_drift" => Ok(Self::RwDrift),
            "ar" => Ok(Self::Ar),
            _ => Err(Error::InvalidParameter(format!("unknown forecaster `{s}`"))),
        }
    }
}

/// How the AR order is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderSelection {
    /// Always fit `ar_max_order`.
    Fixed,
    /// Minimise AICc over `1..=ar_max_order`, ties to the smaller order.
    Aicc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecasterConfig {
    pub method: ForecastMethod,
    pub ar_max_order: usize,
    pub selection: OrderSelection,
}

impl Default for ForecasterConfig {
    fn default() -> Self {
        Self::naive()
    }
}

impl ForecasterConfig {
    pub fn naive() -> Self {
        Self {
            method: ForecastMethod::Naive,
            ar_max_order: 1,
            selection: OrderSelection::Fixed,
        }
    }

    pub fn rw_drift() -> Self {
        Self {
            method: ForecastMethod::RwDrift,
            ..Self::naive()
        }
    }

    pub fn ar(order: usize) -> Self {
        Self {
            method: ForecastMethod::Ar,
            ar_max_order: order,
            selection: OrderSelection::Fixed,
        }
    }

    pub fn ar_aicc(max_order: usize) -> Self {
        Self {
            method: ForecastMethod::Ar,
            ar_max_order: max_order,
            selection: OrderSelection::Aicc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ar_max_order == 0 {
            return Err(Error::InvalidParameter("ar_max_order must be at least 1".into()));
        }
        Ok(())
    }

    /// Shortest series the forecaster accepts.
    pub fn min_length(&self) -> usize {
        match (self.method, self.selection) {
            (ForecastMethod::Naive | ForecastMethod::RwDrift, _) => 3,
            (ForecastMethod::Ar, OrderSelection::Fixed) => 2 * self.ar_max_order + 2,
            (ForecastMethod::Ar, OrderSelection::Aicc) => 4,
        }
    }
}

/// Parameters of a fitted univariate model.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Naive,
    RwDrift { drift: f64 },
    Ar { intercept: f64, coefficients: Vec<f64> },
}

impl FittedModel {
    /// One-step forecast from `history` using the fitted parameters.
    pub fn one_step(&self, history: &[f64]) -> f64 {
        let last = *history.last().expect("non-empty history");
        match self {
            FittedModel::Naive => last,
            FittedModel::RwDrift { drift } => last + drift,
            FittedModel::Ar {
                intercept,
                coefficients,
            } => {
                let t = history.len();
                coefficients
                    .iter()
                    .enumerate()
                    .fold(*intercept, |acc, (lag, phi)| acc + phi * history[t - 1 - lag])
            }
        }
    }

    pub fn order(&self) -> usize {
        match self {
            FittedModel::Ar { coefficients, .. } => coefficients.len(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateForecast {
    /// Forecasts for `h = 1..=h_max`.
    pub point: Vec<f64>,
    /// In-sample one-step residuals, oldest first, ending at the last observation.
    pub residuals: Vec<f64>,
    pub model: FittedModel,
}

/// Forecasts one series `h_max` steps ahead.
pub fn forecast_univariate(series: &[f64], h_max: usize, config: &ForecasterConfig) -> Result<UnivariateForecast> {
    config.validate()?;
    if h_max == 0 {
        return Err(Error::InvalidParameter("h_max must be at least 1".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("series".into()));
    }
    let t = series.len();
    let required = config.min_length();
    if t < required {
        return Err(Error::TooShort { required, actual: t });
    }

    let model = match config.method {
        ForecastMethod::Naive => FittedModel::Naive,
        ForecastMethod::RwDrift => FittedModel::RwDrift {
            drift: (series[t - 1] - series[0]) / (t - 1) as f64,
        },
        ForecastMethod::Ar => {
            let order = match config.selection {
                OrderSelection::Fixed => config.ar_max_order,
                OrderSelection::Aicc => select_ar_order(series, config.ar_max_order),
            };
            fit_ar(series, order)
        }
    };

    let start = model.order();
    let residuals = (start..t).map(|i| series[i] - model.one_step(&series[..i])).collect();

    let mut path = series.to_vec();
    for _ in 0..h_max {
        let next = model.one_step(&path);
        path.push(next);
    }
    Ok(UnivariateForecast {
        point: path[t..].to_vec(),
        residuals,
        model,
    })
}

fn ar_design(series: &[f64], order: usize, first: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows = series.len() - first;
    let x = DMatrix::from_fn(rows, order, |r, c| series[first + r - c - 1]);
    let y = DVector::from_fn(rows, |r, _| series[first + r]);
    (x, y)
}

/// Least squares with intercept: slopes from the centred normal equations
/// (minimum-norm on rank deficiency), intercept from the means.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> (f64, DVector<f64>) {
    let means = x.row_mean();
    let y_mean = y.mean();
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let yc = y.add_scalar(-y_mean);
    let gram = xc.tr_mul(&xc);
    let rhs = xc.tr_mul(&yc);
    let eig = gram.symmetric_eigen();
    let tol = eig.eigenvalues.amax() * 1e-12 * x.ncols() as f64;
    let mut coef = DVector::zeros(x.ncols());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let v = eig.eigenvectors.column(k);
            coef += v * (v.dot(&rhs) / lambda);
        }
    }
    let intercept = y_mean - means.transpose().dot(&coef);
    (intercept, coef)
}

/// Conditional least squares AR(`order`) fit with intercept.
fn fit_ar(series: &[f64], order: usize) -> FittedModel {
    let (x, y) = ar_design(series, order, order);
    let (intercept, coef) = least_squares(&x, &y);
    FittedModel::Ar {
        intercept,
        coefficients: coef.iter().copied().collect(),
    }
}

/// AICc selection on the sample common to every candidate order.
fn select_ar_order(series: &[f64], max_order: usize) -> usize {
    let t = series.len();
    let feasible = (1..=max_order).filter(|p| t >= 2 * p + 2).max().unwrap_or(1);
    let n = (t - feasible) as f64;
    let mut best = (1, f64::INFINITY);
    for p in 1..=feasible {
        let k = (p + 2) as f64;
        if n - k - 1.0 <= 0.0 {
            continue;
        }
        let (x, y) = ar_design(series, p, feasible);
        let (intercept, coef) = least_squares(&x, &y);
        let fitted = (x * coef).add_scalar(intercept);
        // floor the variance so exact fits of flat series compare on the penalty alone
        let floor = 1e-20 * (y.norm_squared() / n).max(f64::MIN_POSITIVE);
        let sigma2 = ((&y - fitted).norm_squared() / n).max(floor);
        let aicc = n * sigma2.ln() + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0);
        if aicc < best.1 {
            best = (p, aicc);
        }
    }
    best.0
}

/// Base forecasts and one-step residuals for every series of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseForecastSet {
    series_names: Vec<String>,
    horizons: Vec<usize>,
    forecasts: DMatrix<f64>,
    residuals: DMatrix<f64>,
    residual_periods: Vec<Quarter>,
    origin: Option<Quarter>,
}

impl BaseForecastSet {
    /// `forecasts` is `H x n` for horizons `1..=H`; `residuals` is `T_r x n`
    /// and may be empty (OLS needs none), otherwise `T_r >= 2`.
    pub fn new(
        series_names: Vec<String>,
        forecasts: DMatrix<f64>,
        residuals: DMatrix<f64>,
        residual_periods: Vec<Quarter>,
        origin: Option<Quarter>,
    ) -> Result<Self> {
        let n = series_names.len();
        if forecasts.ncols() != n || forecasts.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: format!("H x {n} forecasts"),
                actual: format!("{} x {}", forecasts.nrows(), forecasts.ncols()),
            });
        }
        if residuals.nrows() > 0 && residuals.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("T_r x {n} residuals"),
                actual: format!("{} x {}", residuals.nrows(), residuals.ncols()),
            });
        }
        if residuals.nrows() == 1 {
            return Err(Error::TooShort { required: 2, actual: 1 });
        }
        if !residual_periods.is_empty() && residual_periods.len() != residuals.nrows() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} residual periods", residuals.nrows()),
                actual: residual_periods.len().to_string(),
            });
        }
        if forecasts.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("base forecasts".into()));
        }
        if residuals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("residuals".into()));
        }
        let residuals = if residuals.nrows() == 0 {
            DMatrix::zeros(0, n)
        } else {
            residuals
        };
        Ok(Self {
            horizons: (1..=forecasts.nrows()).collect(),
            series_names,
            forecasts,
            residuals,
            residual_periods,
            origin,
        })
    }

    pub fn series_names(&self) -> &[String] {
        &self.series_names
    }

    pub fn horizons(&self) -> &[usize] {
        &self.horizons
    }

    /// `H x n`, row `h - 1` holds the `h`-step forecasts.
    pub fn forecasts(&self) -> &DMatrix<f64> {
        &self.forecasts
    }

    /// `T_r x n` one-step residuals.
    pub fn residuals(&self) -> &DMatrix<f64> {
        &self.residuals
    }

    pub fn residual_periods(&self) -> &[Quarter] {
        &self.residual_periods
    }

    pub fn origin(&self) -> Option<Quarter> {
        self.origin
    }

    pub fn h_max(&self) -> usize {
        self.horizons.len()
    }

    /// Columns `columns` as a new set.
    pub fn select(&self, columns: &[usize]) -> Self {
        Self {
            series_names: columns.iter().map(|&j| self.series_names[j].clone()).collect(),
            horizons: self.horizons.clone(),
            forecasts: self.forecasts.select_columns(columns),
            residuals: self.residuals.select_columns(columns),
            residual_periods: self.residual_periods.clone(),
            origin: self.origin,
        }
    }

    /// Reorders columns to `order`, which must name exactly this set's series.
    pub fn reorder(&self, order: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = self
            .series_names
            .iter()
            .enumerate()
            .map(|(j, s)| (s.as_str(), j))
            .collect();
        let wanted: HashSet<&str> = order.iter().map(String::as_str).collect();
        if let Some(extra) = self.series_names.iter().find(|s| !wanted.contains(s.as_str())) {
            return Err(Error::ExtraSeries(extra.clone()));
        }
        let columns = order
            .iter()
            .map(|s| {
                index
                    .get(s.as_str())
                    .copied()
                    .ok_or_else(|| Error::MissingSeries(s.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select(&columns))
    }

    /// Long-format `(series, horizon, value)` rows in column-major order.
    pub fn forecast_records(&self) -> Vec<(String, usize, f64)> {
        let mut out = Vec::with_capacity(self.forecasts.len());
        for (j, s) in self.series_names.iter().enumerate() {
            for (i, &h) in self.horizons.iter().enumerate() {
                out.push((s.clone(), h, self.forecasts[(i, j)]));
            }
        }
        out
    }

    /// Long-format `(series, period, value)` residual rows.
    pub fn residual_records(&self) -> Vec<(String, Quarter, f64)> {
        let mut out = Vec::with_capacity(self.residuals.len());
        for (j, s) in self.series_names.iter().enumerate() {
            for (t, &q) in self.residual_periods.iter().enumerate() {
                out.push((s.clone(), q, self.residuals[(t, j)]));
            }
        }
        out
    }
}

/// Forecasts every panel column independently and aligns the residuals on
/// the trailing sample common to all series.
pub fn build_base_set(panel: &TimeSeriesPanel, h_max: usize, config: &ForecasterConfig) -> Result<BaseForecastSet> {
    let values = panel.values();
    let fits = (0..panel.n_series())
        .into_par_iter()
        .map(|j| {
            let column: Vec<f64> = values.column(j).iter().copied().collect();
            forecast_univariate(&column, h_max, config)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = fits.len();
    let common = fits.iter().map(|f| f.residuals.len()).min().unwrap_or(0);
    let mut forecasts = DMatrix::zeros(h_max, n);
    let mut residuals = DMatrix::zeros(common, n);
    for (j, fit) in fits.iter().enumerate() {
        forecasts.set_column(j, &DVector::from_column_slice(&fit.point));
        let tail = &fit.residuals[fit.residuals.len() - common..];
        residuals.set_column(j, &DVector::from_column_slice(tail));
    }
    let times = panel.times();
    let residual_periods = times[times.len() - common..].to_vec();
    BaseForecastSet::new(
        panel.series_names().to_vec(),
        forecasts,
        residuals,
        residual_periods,
        times.last().copied(),
    )
}

/// Assembles a base set from externally produced long-format forecasts and
/// residuals, reordered to `order`.
pub fn ingest_external(
    forecasts: &[(String, usize, f64)],
    residuals: &[(String, Quarter, f64)],
    order: &[String],
    origin: Option<Quarter>,
) -> Result<BaseForecastSet> {
    let wanted: HashSet<&str> = order.iter().map(String::as_str).collect();
    let mut by_series: HashMap<&str, BTreeMap<usize, f64>> = HashMap::new();
    for (s, h, v) in forecasts {
        if !wanted.contains(s.as_str()) {
            return Err(Error::ExtraSeries(s.clone()));
        }
        if *h == 0 || by_series.entry(s).or_default().insert(*h, *v).is_some() {
            return Err(Error::HorizonGap {
                series: s.clone(),
                horizon: *h,
            });
        }
    }
    let h_max = by_series
        .values()
        .filter_map(|m| m.keys().next_back().copied())
        .max()
        .unwrap_or(0);
    let mut fc = DMatrix::zeros(h_max, order.len());
    for (j, name) in order.iter().enumerate() {
        let series = by_series
            .get(name.as_str())
            .ok_or_else(|| Error::MissingSeries(name.clone()))?;
        for h in 1..=h_max {
            fc[(h - 1, j)] = *series.get(&h).ok_or_else(|| Error::HorizonGap {
                series: name.clone(),
                horizon: h,
            })?;
        }
    }

    let (res, periods) = if residuals.is_empty() {
        (DMatrix::zeros(0, order.len()), Vec::new())
    } else {
        let panel = TimeSeriesPanel::from_long(residuals.iter().cloned())?.reorder(order)?;
        (panel.values().clone(), panel.times().to_vec())
    };
    BaseForecastSet::new(order.to_vec(), fc, res, periods, origin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn naive_example() {
        let f = forecast_univariate(&[1., 2., 3.], 2, &ForecasterConfig::naive()).unwrap();
        assert_eq!(f.point, vec![3., 3.]);
        assert_eq!(f.residuals, vec![1., 1.]);
    }

    #[test]
    fn drift_example() {
        let f = forecast_univariate(&[1., 2., 3.], 2, &ForecasterConfig::rw_drift()).unwrap();
        assert_eq!(f.point, vec![4., 5.]);
        assert_eq!(f.residuals, vec![0., 0.]);
    }

    #[test]
    fn errors() {
        let cfg = ForecasterConfig::naive();
        assert!(matches!(
            forecast_univariate(&[1., 2.], 1, &cfg),
            Err(Error::TooShort { required: 3, .. })
        ));
        assert!(matches!(
            forecast_univariate(&[1., f64::NAN, 2.], 1, &cfg),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            forecast_univariate(&[1.; 5], 1, &ForecasterConfig::ar(2)),
            Err(Error::TooShort { required: 6, .. })
        ));
        assert!(ForecasterConfig::ar(0).validate().is_err());
    }

    fn ar1_path(phi: f64, sigma: f64, len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut y = vec![0.0];
        for _ in 1..len {
            let prev = *y.last().unwrap();
            y.push(phi * prev + noise.sample(&mut rng));
        }
        y
    }

    #[test]
    fn ar1_recovers_parameters() {
        let y = ar1_path(0.8, 1.0, 500, 7);
        let f = forecast_univariate(&y, 4, &ForecasterConfig::ar(1)).unwrap();
        let FittedModel::Ar { coefficients, .. } = &f.model else {
            panic!("expected AR model")
        };
        assert!((coefficients[0] - 0.8).abs() <= 0.1, "phi = {}", coefficients[0]);
        let var = f.residuals.iter().map(|e| e * e).sum::<f64>() / f.residuals.len() as f64;
        assert!((var - 1.0).abs() <= 0.2, "residual variance {var}");
        assert_eq!(f.residuals.len(), 499);
    }

    #[test]
    fn aicc_prefers_true_order_and_small_on_ties() {
        let y = ar1_path(0.6, 1.0, 400, 3);
        let f = forecast_univariate(&y, 1, &ForecasterConfig::ar_aicc(4)).unwrap();
        assert_eq!(f.model.order(), 1);
        let flat = forecast_univariate(&[5.0; 20], 3, &ForecasterConfig::ar_aicc(3)).unwrap();
        assert_eq!(flat.model.order(), 1);
        for p in flat.point {
            assert!((p - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn residuals_use_only_past_data() {
        let y = ar1_path(0.5, 2.0, 60, 11);
        for cfg in [
            ForecasterConfig::naive(),
            ForecasterConfig::rw_drift(),
            ForecasterConfig::ar(2),
        ] {
            let f = forecast_univariate(&y, 1, &cfg).unwrap();
            let start = y.len() - f.residuals.len();
            for (k, e) in f.residuals.iter().enumerate() {
                let t = start + k;
                let mut truncated = y[..t].to_vec();
                let step = f.model.one_step(&truncated);
                assert_eq!(*e, y[t] - step);
                // scrambling later observations cannot change this step
                truncated.extend(std::iter::repeat_n(1e6, 3));
                assert_eq!(f.model.one_step(&truncated[..t]), step);
            }
        }
        // naive has no parameters: the residual equals a fresh forecast on truncated data
        let f = forecast_univariate(&y, 1, &ForecasterConfig::naive()).unwrap();
        for t in 3..y.len() {
            let fresh = forecast_univariate(&y[..t], 1, &ForecasterConfig::naive()).unwrap();
            assert_eq!(f.residuals[t - 1], y[t] - fresh.point[0]);
        }
    }

    fn quarters(n: usize) -> Vec<Quarter> {
        let q0 = Quarter::new(2000, 1).unwrap();
        (0..n as i64).map(|i| q0.offset(i)).collect()
    }

    #[test]
    fn naive_set_on_coherent_panel() {
        // T = a + b
        let values = DMatrix::from_row_slice(4, 3, &[3., 1., 2., 5., 2., 3., 4., 2., 2., 7., 3., 4.]);
        let panel =
            TimeSeriesPanel::new(vec!["T".into(), "a".into(), "b".into()], quarters(4), values.clone()).unwrap();
        let set = build_base_set(&panel, 2, &ForecasterConfig::naive()).unwrap();
        assert_eq!(set.forecasts().row(0), values.row(3));
        assert_eq!(set.forecasts().row(1), values.row(3));
        let diffs = values.rows(1, 3) - values.rows(0, 3);
        assert_eq!(set.residuals(), &diffs);
        assert_eq!(set.residual_periods(), &quarters(4)[1..]);
        assert_eq!(set.origin(), Some(quarters(4)[3]));
    }

    #[test]
    fn constant_series_give_zero_residuals() {
        let values = DMatrix::from_fn(10, 2, |t, j| if j == 0 { 42.0 } else { t as f64 });
        let panel = TimeSeriesPanel::new(vec!["c".into(), "x".into()], quarters(10), values).unwrap();
        for cfg in [
            ForecasterConfig::naive(),
            ForecasterConfig::rw_drift(),
            ForecasterConfig::ar(1),
        ] {
            let set = build_base_set(&panel, 3, &cfg).unwrap();
            assert!(set.residuals().column(0).iter().all(|&e| e.abs() < 1e-9));
            assert!(set.forecasts().column(0).iter().all(|&f| (f - 42.0).abs() < 1e-9));
        }
    }

    #[test]
    fn residuals_aligned_on_common_tail() {
        let a = ar1_path(0.7, 1.0, 40, 1);
        let b = ar1_path(-0.3, 1.0, 40, 2);
        let values = DMatrix::from_fn(40, 2, |t, j| if j == 0 { a[t] } else { b[t] });
        let panel = TimeSeriesPanel::new(vec!["a".into(), "b".into()], quarters(40), values).unwrap();
        let set = build_base_set(&panel, 4, &ForecasterConfig::ar(3)).unwrap();
        assert_eq!(set.residuals().nrows(), 37);
        assert_eq!(set.forecasts().shape(), (4, 2));
        let single = forecast_univariate(&b, 4, &ForecasterConfig::ar(3)).unwrap();
        assert_eq!(set.residuals().column(1).as_slice(), &single.residuals[..]);
    }

    #[test]
    fn ingest_reorders_and_validates() {
        let order: Vec<String> = vec!["T".into(), "a".into(), "b".into()];
        let fc = vec![
            ("b".to_string(), 1, 2.0),
            ("a".to_string(), 1, 1.0),
            ("T".to_string(), 2, 30.0),
            ("T".to_string(), 1, 3.0),
            ("a".to_string(), 2, 10.0),
            ("b".to_string(), 2, 20.0),
        ];
        let q = quarters(2);
        let res: Vec<(String, Quarter, f64)> = order
            .iter()
            .rev()
            .flat_map(|s| {
                q.iter()
                    .map(move |&p| (s.clone(), p, s.len() as f64 + p.quarter() as f64))
            })
            .collect();
        let set = ingest_external(&fc, &res, &order, None).unwrap();
        assert_eq!(
            set.forecasts(),
            &DMatrix::from_row_slice(2, 3, &[3., 1., 2., 30., 10., 20.])
        );
        assert_eq!(set.residuals().shape(), (2, 3));

        let missing: Vec<_> = fc.iter().filter(|r| r.0 != "b").cloned().collect();
        match ingest_external(&missing, &[], &order, None) {
            Err(Error::MissingSeries(s)) => assert_eq!(s, "b"),
            other => panic!("{other:?}"),
        }
        let mut extra = fc.clone();
        extra.push(("z".into(), 1, 0.0));
        assert!(matches!(
            ingest_external(&extra, &[], &order, None),
            Err(Error::ExtraSeries(_))
        ));
        let gap: Vec<_> = fc.iter().filter(|r| !(r.0 == "a" && r.1 == 1)).cloned().collect();
        assert!(matches!(
            ingest_external(&gap, &[], &order, None),
            Err(Error::HorizonGap { horizon: 1, .. })
        ));
    }
}
