//! Expanding-window forecast evaluation with MSE skill scores.
//!
//! Window `k` trains on `[first_train_start, first_train_end + k]` and is
//! scored on the following `h_max` periods. Squared errors are pooled over
//! windows and over the series of each reporting group (the top series, and
//! the aggregates and bottoms of every hierarchy). Skill scores are the
//! percentage reduction in MSE relative to the unreconciled base forecasts.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_forecast::{build_base_set, ingest_external, BaseForecastSet, ForecasterConfig};
use crate::covariance::{make_weight_matrix, CovarianceMethod, CovarianceSpec, DEFAULT_VARIANCE_FLOOR};
use crate::error::{Error, Result};
use crate::formats;
use crate::hierarchy::{LinkedSystem, TimeSeriesPanel};
use crate::period::Quarter;
use crate::reconcile::reconcile_batch;

/// A forecasting method compared in the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Base,
    Ols,
    Wls,
    MintShr,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Base => "base",
            Method::Ols => "ols",
            Method::Wls => "wls",
            Method::MintShr => "mint_shr",
        }
    }

    pub fn covariance(self) -> Option<CovarianceMethod> {
        match self {
            Method::Base => None,
            Method::Ols => Some(CovarianceMethod::Ols),
            Method::Wls => Some(CovarianceMethod::Wls),
            Method::MintShr => Some(CovarianceMethod::MintShr),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "base" {
            return Ok(Method::Base);
        }
        Ok(match s.parse::<CovarianceMethod>()? {
            CovarianceMethod::Ols => Method::Ols,
            CovarianceMethod::Wls => Method::Wls,
            CovarianceMethod::MintShr => Method::MintShr,
        })
    }
}

/// Where base forecasts come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastSource {
    BuiltIn(ForecasterConfig),
    /// One subdirectory per window origin (`YYYYQn`) holding `base.csv`
    /// (`series,horizon,value`) and `residuals.csv` (`series,period,value`).
    External(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub first_train_start: Quarter,
    pub first_train_end: Quarter,
    pub h_max: usize,
    pub methods: Vec<Method>,
    pub forecaster: ForecastSource,
    /// Also reconcile each hierarchy on its own (labels `method@hierarchy`).
    pub side_only: bool,
    pub variance_floor: f64,
    pub center_residuals: bool,
}

impl ExperimentConfig {
    pub fn new(first_train_start: Quarter, first_train_end: Quarter, h_max: usize) -> Self {
        Self {
            first_train_start,
            first_train_end,
            h_max,
            methods: vec![Method::Base, Method::Ols, Method::Wls, Method::MintShr],
            forecaster: ForecastSource::BuiltIn(ForecasterConfig::naive()),
            side_only: false,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            center_residuals: true,
        }
    }

    fn min_fit_length(&self) -> usize {
        match &self.forecaster {
            ForecastSource::BuiltIn(f) => f.min_length(),
            ForecastSource::External(_) => 1,
        }
    }

    /// Methods in canonical order, always including `base`.
    pub fn effective_methods(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.push(Method::Base);
        m.sort();
        m.dedup();
        m
    }
}

/// One training/test split, as row ranges into the panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Window {
    pub index: usize,
    pub origin: Quarter,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Enumerates the expanding windows; the last one is the latest with a full
/// `h_max` test range.
pub fn expanding_windows(panel: &TimeSeriesPanel, cfg: &ExperimentConfig) -> Result<Vec<Window>> {
    if cfg.h_max == 0 {
        return Err(Error::InvalidParameter("h_max must be at least 1".into()));
    }
    let start = panel
        .position(cfg.first_train_start)
        .ok_or_else(|| Error::InsufficientData(format!("panel does not contain {}", cfg.first_train_start)))?;
    let end = panel
        .position(cfg.first_train_end)
        .ok_or_else(|| Error::InsufficientData(format!("panel does not contain {}", cfg.first_train_end)))?;
    let min_len = cfg.min_fit_length();
    if end < start || end - start + 1 < min_len {
        return Err(Error::InvalidParameter(format!(
            "first training window {}..={} is shorter than {min_len} periods",
            cfg.first_train_start, cfg.first_train_end
        )));
    }
    let t = panel.n_periods();
    if end + cfg.h_max >= t {
        return Err(Error::InsufficientData(format!(
            "need {} periods after {} for one window, panel ends at {}",
            cfg.h_max,
            cfg.first_train_end,
            panel.times().last().expect("non-empty panel"),
        )));
    }
    Ok((0..t - cfg.h_max - end)
        .map(|k| Window {
            index: k,
            origin: panel.times()[end + k],
            train: start..end + k + 1,
            test: end + k + 1..end + k + 1 + cfg.h_max,
        })
        .collect())
}

/// Computes `100 (mse_base - mse_method) / mse_base`.
pub fn skill_score(mse_base: f64, mse_method: f64) -> Result<f64> {
    if mse_base.is_nan() || mse_base <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "base MSE must be positive for a skill score, got {mse_base}"
        )));
    }
    Ok(100.0 * (mse_base - mse_method) / mse_base)
}

/// Reporting groups: the top series, then each hierarchy's aggregates and
/// bottoms. Empty groups are omitted. Groups partition the system's series.
pub fn group_series(system: &LinkedSystem) -> Vec<(String, Vec<usize>)> {
    let mut groups = vec![(system.top_name().to_string(), vec![0])];
    for (h, block) in system.hierarchies().iter().zip(system.blocks()) {
        if !block.aggregates.is_empty() {
            groups.push((format!("{}-aggregates", h.name()), block.aggregates.clone().collect()));
        }
        if !block.bottoms.is_empty() {
            groups.push((format!("{}-bottom", h.name()), block.bottoms.clone().collect()));
        }
    }
    groups
}

pub const ALL_GROUP: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub window: usize,
    pub origin: Quarter,
    pub horizon: usize,
    pub method: String,
    pub series: String,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRecord {
    pub method: String,
    pub horizon: usize,
    pub group: String,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMseRecord {
    pub method: String,
    pub horizon: usize,
    pub series: String,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub method: String,
    pub horizon: usize,
    pub group: String,
    /// `None` when the base MSE of the group is zero.
    pub skill_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub windows: Vec<Window>,
    pub methods: Vec<String>,
    pub groups: Vec<(String, Vec<usize>)>,
    pub series_names: Vec<String>,
    pub errors: Vec<ErrorRecord>,
    pub mse: Vec<MseRecord>,
    pub mse_series: Vec<SeriesMseRecord>,
    pub skill: Vec<SkillRecord>,
}

impl EvaluationReport {
    pub fn mse_of(&self, method: &str, horizon: usize, group: &str) -> Option<f64> {
        self.mse
            .iter()
            .find(|r| r.method == method && r.horizon == horizon && r.group == group)
            .map(|r| r.mse)
    }

    pub fn skill_of(&self, method: &str, horizon: usize, group: &str) -> Option<Option<f64>> {
        self.skill
            .iter()
            .find(|r| r.method == method && r.horizon == horizon && r.group == group)
            .map(|r| r.skill_pct)
    }

    /// Groups flagged because their base MSE is zero.
    pub fn undefined_skill(&self) -> Vec<&SkillRecord> {
        self.skill.iter().filter(|r| r.skill_pct.is_none()).collect()
    }
}

/// Errors of one method variant in one window: `h_max x columns.len()`.
struct Outcome {
    variant: usize,
    errors: DMatrix<f64>,
}

/// A method applied either to the full system or to one hierarchy alone.
struct Variant {
    label: String,
    method: Method,
    side: Option<usize>,
    columns: Vec<usize>,
}

fn variants(system: &LinkedSystem, cfg: &ExperimentConfig) -> Vec<Variant> {
    let all: Vec<usize> = (0..system.n()).collect();
    let methods = cfg.effective_methods();
    let mut out: Vec<Variant> = methods
        .iter()
        .map(|&m| Variant {
            label: m.label().to_string(),
            method: m,
            side: None,
            columns: all.clone(),
        })
        .collect();
    if cfg.side_only && system.hierarchies().len() > 1 {
        for (l, h) in system.hierarchies().iter().enumerate() {
            let (_, columns) = system.side(l);
            for &m in methods.iter().filter(|m| **m != Method::Base) {
                out.push(Variant {
                    label: format!("{}@{}", m.label(), h.name()),
                    method: m,
                    side: Some(l),
                    columns: columns.clone(),
                });
            }
        }
    }
    out
}

fn window_base(
    panel: &TimeSeriesPanel,
    system: &LinkedSystem,
    window: &Window,
    cfg: &ExperimentConfig,
) -> Result<BaseForecastSet> {
    let base = match &cfg.forecaster {
        ForecastSource::BuiltIn(fc) => build_base_set(&panel.slice(window.train.clone()), cfg.h_max, fc)?,
        ForecastSource::External(dir) => {
            let sub = dir.join(window.origin.to_string());
            let fc = formats::read_forecasts(&sub.join("base.csv"))?;
            let res_path = sub.join("residuals.csv");
            let res = if res_path.exists() {
                formats::read_long(&res_path)?
            } else {
                Vec::new()
            };
            ingest_external(&fc, &res, system.ordering(), Some(window.origin))?
        }
    };
    if base.h_max() < cfg.h_max {
        return Err(Error::HorizonGap {
            series: system.top_name().to_string(),
            horizon: base.h_max() + 1,
        });
    }
    Ok(base)
}

fn run_window(
    panel: &TimeSeriesPanel,
    system: &LinkedSystem,
    window: &Window,
    cfg: &ExperimentConfig,
    variants: &[Variant],
) -> Result<Vec<Outcome>> {
    let base = window_base(panel, system, window, cfg)?;
    let actual = panel.values().rows(window.test.start, cfg.h_max).into_owned();
    let forecasts_all = base.forecasts().rows(0, cfg.h_max).into_owned();

    let mut out = Vec::with_capacity(variants.len());
    for (v, variant) in variants.iter().enumerate() {
        let forecasts = match variant.method.covariance() {
            None => forecasts_all.select_columns(&variant.columns),
            Some(cov) => {
                let (sub_system, sub_base) = match variant.side {
                    None => (system.clone(), base.clone()),
                    Some(l) => (system.side(l).0, base.select(&variant.columns)),
                };
                let spec = CovarianceSpec {
                    variance_floor: cfg.variance_floor,
                    center: cfg.center_residuals,
                    ..CovarianceSpec::new(cov)
                };
                let w = make_weight_matrix(sub_base.residuals(), &spec)?;
                let rec = reconcile_batch(&sub_base, &sub_system, &w)?;
                rec.y_tilde.rows(0, cfg.h_max).into_owned()
            }
        };
        let errors = actual.select_columns(&variant.columns) - forecasts;
        out.push(Outcome { variant: v, errors });
    }
    Ok(out)
}

/// Runs the full expanding-window experiment.
pub fn run_experiment(
    panel: &TimeSeriesPanel,
    system: &LinkedSystem,
    cfg: &ExperimentConfig,
) -> Result<EvaluationReport> {
    let panel = panel.reorder(system.ordering())?;
    let windows = expanding_windows(&panel, cfg)?;
    let variants = variants(system, cfg);

    let outcomes: Vec<Vec<Outcome>> = windows
        .par_iter()
        .map(|w| {
            run_window(&panel, system, w, cfg, &variants).map_err(|e| Error::Window {
                window: w.index,
                origin: w.origin.to_string(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let names = system.ordering();
    let mut errors = Vec::new();
    for (w, per_window) in windows.iter().zip(&outcomes) {
        for o in per_window {
            let variant = &variants[o.variant];
            for h in 0..cfg.h_max {
                for (c, &j) in variant.columns.iter().enumerate() {
                    errors.push(ErrorRecord {
                        window: w.index,
                        origin: w.origin,
                        horizon: h + 1,
                        method: variant.label.clone(),
                        series: names[j].clone(),
                        error: o.errors[(h, c)],
                    });
                }
            }
        }
    }

    let mut groups = group_series(system);
    groups.push((ALL_GROUP.to_string(), (0..system.n()).collect()));

    let mut mse = Vec::new();
    let mut mse_series = Vec::new();
    for (v, variant) in variants.iter().enumerate() {
        let position = |j: usize| variant.columns.iter().position(|&c| c == j);
        for h in 0..cfg.h_max {
            for (group, members) in &groups {
                let cols: Option<Vec<usize>> = members.iter().map(|&j| position(j)).collect();
                let Some(cols) = cols else { continue };
                let mut sum = 0.0;
                for per_window in &outcomes {
                    let e = &per_window[v].errors;
                    for &c in &cols {
                        sum += e[(h, c)] * e[(h, c)];
                    }
                }
                mse.push(MseRecord {
                    method: variant.label.clone(),
                    horizon: h + 1,
                    group: group.clone(),
                    mse: sum / (cols.len() * outcomes.len()) as f64,
                });
            }
            for (c, &j) in variant.columns.iter().enumerate() {
                let sum: f64 = outcomes.iter().map(|o| o[v].errors[(h, c)].powi(2)).sum();
                mse_series.push(SeriesMseRecord {
                    method: variant.label.clone(),
                    horizon: h + 1,
                    series: names[j].clone(),
                    mse: sum / outcomes.len() as f64,
                });
            }
        }
    }

    let skill = mse
        .iter()
        .map(|r| {
            let base = mse
                .iter()
                .find(|b| b.method == Method::Base.label() && b.horizon == r.horizon && b.group == r.group)
                .expect("base evaluated on every group")
                .mse;
            SkillRecord {
                method: r.method.clone(),
                horizon: r.horizon,
                group: r.group.clone(),
                skill_pct: skill_score(base, r.mse).ok(),
            }
        })
        .collect();

    Ok(EvaluationReport {
        windows,
        methods: variants.into_iter().map(|v| v.label).collect(),
        groups,
        series_names: names.to_vec(),
        errors,
        mse,
        mse_series,
        skill,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{link_hierarchies, HierarchySpec};

    fn panel(t: usize) -> TimeSeriesPanel {
        let q0 = Quarter::new(1984, 4).unwrap();
        let times = (0..t as i64).map(|i| q0.offset(i)).collect();
        let values = DMatrix::from_fn(t, 3, |r, c| match c {
            0 => 3.0 + r as f64,
            1 => 1.0,
            _ => 2.0 + r as f64,
        });
        TimeSeriesPanel::new(vec!["T".into(), "a".into(), "b".into()], times, values).unwrap()
    }

    fn cfg(panel: &TimeSeriesPanel, train: usize, h: usize) -> ExperimentConfig {
        ExperimentConfig::new(panel.times()[0], panel.times()[train - 1], h)
    }

    #[test]
    fn window_counts() {
        let p = panel(44);
        let w = expanding_windows(&p, &cfg(&p, 40, 4)).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].train, 0..40);
        assert_eq!(w[0].test, 40..44);

        let p = panel(48);
        let w = expanding_windows(&p, &cfg(&p, 40, 4)).unwrap();
        assert_eq!(w.len(), 5);
        let lens: Vec<usize> = w.iter().map(|w| w.train.len()).collect();
        assert_eq!(lens, vec![40, 41, 42, 43, 44]);
        for pair in w.windows(2) {
            assert!(pair[1].train.end > pair[0].train.end);
            assert_eq!(pair[1].train.start, pair[0].train.start);
            assert!(pair[1].origin > pair[0].origin);
        }

        let p = panel(43);
        assert!(matches!(
            expanding_windows(&p, &cfg(&p, 40, 4)),
            Err(Error::InsufficientData(_))
        ));
        let p = panel(10);
        assert!(expanding_windows(&p, &cfg(&p, 2, 1)).is_err());
    }

    #[test]
    fn skill_examples() {
        assert_eq!(skill_score(4.0, 3.0).unwrap(), 25.0);
        assert_eq!(skill_score(4.0, 4.0).unwrap(), 0.0);
        assert_eq!(skill_score(4.0, 5.0).unwrap(), -25.0);
        assert!(skill_score(0.0, 1.0).is_err());
    }

    #[test]
    fn toy_groups() {
        let spec = HierarchySpec::new(
            "side",
            "T",
            vec![
                ("T".into(), "A".into()),
                ("A".into(), "a".into()),
                ("A".into(), "b".into()),
                ("T".into(), "c".into()),
            ],
        )
        .unwrap();
        let sys = link_hierarchies(&[spec], "T").unwrap();
        let g = group_series(&sys);
        assert_eq!(g[0], ("T".to_string(), vec![0]));
        assert_eq!(g[1], ("side-aggregates".to_string(), vec![1]));
        assert_eq!(g[2], ("side-bottom".to_string(), vec![2, 3, 4]));
    }

    #[test]
    fn base_only_gives_zero_skill() {
        let spec = HierarchySpec::new("s", "T", vec![("T".into(), "a".into()), ("T".into(), "b".into())]).unwrap();
        let sys = link_hierarchies(&[spec], "T").unwrap();
        let p = panel(20);
        let mut c = cfg(&p, 10, 2);
        c.methods = vec![Method::Base];
        let r = run_experiment(&p, &sys, &c).unwrap();
        assert_eq!(r.methods, vec!["base"]);
        assert!(r.skill.iter().all(|s| s.skill_pct == Some(0.0)));
    }

    #[test]
    fn constant_series_flag_undefined_skill() {
        let spec = HierarchySpec::new("s", "T", vec![("T".into(), "a".into()), ("T".into(), "b".into())]).unwrap();
        let sys = link_hierarchies(&[spec], "T").unwrap();
        let q0 = Quarter::new(2000, 1).unwrap();
        let values = DMatrix::from_fn(12, 3, |_, c| [3.0, 1.0, 2.0][c]);
        let p = TimeSeriesPanel::new(sys.ordering().to_vec(), (0..12).map(|i| q0.offset(i)).collect(), values).unwrap();
        let r = run_experiment(&p, &sys, &cfg(&p, 6, 2)).unwrap();
        assert!(r.mse.iter().all(|m| m.mse == 0.0));
        assert_eq!(r.undefined_skill().len(), r.skill.len());
    }

    #[test]
    fn error_sign_is_actual_minus_forecast() {
        let spec = HierarchySpec::new("s", "T", vec![("T".into(), "a".into()), ("T".into(), "b".into())]).unwrap();
        let sys = link_hierarchies(&[spec], "T").unwrap();
        let p = panel(12);
        let mut c = cfg(&p, 8, 1);
        c.methods = vec![Method::Base];
        let r = run_experiment(&p, &sys, &c).unwrap();
        // naive forecasts of a series growing by one per period miss by +1
        let e = r.errors.iter().find(|e| e.series == "T" && e.window == 0).unwrap();
        assert_eq!(e.error, 1.0);
    }
}
