//! Coherent point forecasts for systems of linked hierarchical time series.
//!
//! The pipeline is: describe each hierarchy as an edge list
//! ([`hierarchy`]), link the hierarchies through their shared top series
//! into one constraint system, produce base forecasts and one-step residuals
//! ([`base_forecast`]), estimate a weight matrix ([`covariance`]), and
//! project the base forecasts onto the coherent subspace ([`reconcile`]).
//! [`evaluation`] runs the whole pipeline over expanding windows and reports
//! MSE skill scores against the base forecasts.

pub mod base_forecast;
pub mod covariance;
pub mod error;
pub mod evaluation;
pub mod formats;
pub mod hierarchy;
pub mod period;
pub mod reconcile;
pub mod synthetic;

pub use base_forecast::{
    build_base_set, forecast_univariate, ingest_external, BaseForecastSet, FittedModel, ForecastMethod,
    ForecasterConfig, OrderSelection, UnivariateForecast,
};
pub use covariance::{
    estimate_shrinkage_intensity, make_weight_matrix, sample_covariance, CovarianceEstimate, CovarianceMethod,
    CovarianceSpec,
};
pub use error::{Error, Result};
pub use evaluation::{
    expanding_windows, group_series, run_experiment, skill_score, EvaluationReport, ExperimentConfig, ForecastSource,
    Method, Window,
};
pub use hierarchy::{
    build_matrices, check_coherence, link_hierarchies, parse_hierarchy_spec, Hierarchy, HierarchySpec, LinkedSystem,
    TimeSeriesPanel,
};
pub use period::Quarter;
pub use reconcile::{projection_matrix, reconcile, reconcile_batch, Reconciler, ReconciliationResult};
