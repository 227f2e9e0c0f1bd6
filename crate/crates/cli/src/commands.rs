use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use recon_core::formats::{
    read_forecasts, read_long, read_panel, write_errors, write_forecasts, write_matrix, write_mse, write_panel,
    write_series_mse, write_skill, write_violations,
};
use recon_core::hierarchy::COHERENCE_TOL_REAL;
use recon_core::reconcile::COHERENCE_TOL;
use recon_core::synthetic::simulate_panel;
use recon_core::{
    build_base_set, check_coherence, group_series, ingest_external, link_hierarchies, make_weight_matrix,
    parse_hierarchy_spec, reconcile_batch, run_experiment, CovarianceMethod, CovarianceSpec, Error, ExperimentConfig,
    ForecastMethod, ForecastSource, ForecasterConfig, LinkedSystem, Method, Quarter, TimeSeriesPanel,
};

use crate::config::FileConfig;
use crate::{EvaluateArgs, ForecasterArgs, ReconcileArgs, Shared, SimulateArgs, ValidateArgs};

/// Bad invocation: exit code 2.
#[derive(Debug)]
struct Usage(String);

/// Data failed a check: exit code 1.
#[derive(Debug)]
struct Invalid(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}
impl std::error::Error for Invalid {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn core_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::InvalidParameter(_) | Error::BadPeriod(_) => 2,
        Error::Csv { source, .. } if source.is_io_error() => 2,
        Error::Window { source, .. } => core_code(source),
        _ => 1,
    }
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if cause.is::<Invalid>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_code(e);
        }
    }
    2
}

/// Flags merged over the optional manifest.
struct Resolved {
    shared: Shared,
    file: FileConfig,
}

fn resolve(shared: Shared) -> Result<Resolved> {
    let file = match &shared.config {
        Some(p) if !p.exists() => return Err(usage(format!("config file {} does not exist", p.display()))),
        Some(p) => FileConfig::load(p).map_err(|e| usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    let shared = Shared {
        hierarchy: if shared.hierarchy.is_empty() {
            file.hierarchy.clone()
        } else {
            shared.hierarchy
        },
        top: shared.top.or_else(|| file.top.clone()),
        data: shared.data.or_else(|| file.data.clone()),
        out: shared.out.or_else(|| file.out.clone()),
        tol: shared.tol.or(file.tol),
        seed: shared.seed.or(file.seed),
        config: shared.config,
    };
    if let Some(t) = shared.tol {
        if t.is_nan() || t <= 0.0 {
            return Err(usage(format!("--tol must be positive, got {t}")));
        }
    }
    Ok(Resolved { shared, file })
}

fn existing(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

fn load_system(shared: &Shared) -> Result<LinkedSystem> {
    if shared.hierarchy.is_empty() {
        return Err(usage("at least one --hierarchy is required"));
    }
    let mut specs = Vec::new();
    for path in &shared.hierarchy {
        existing(path, "hierarchy file")?;
        let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
        specs.push(parse_hierarchy_spec(&text).with_context(|| path.display().to_string())?);
    }
    let top = shared.top.clone().unwrap_or_else(|| specs[0].top().to_string());
    Ok(link_hierarchies(&specs, &top)?)
}

fn load_panel(shared: &Shared, system: &LinkedSystem) -> Result<TimeSeriesPanel> {
    let path = shared.data.as_ref().ok_or_else(|| usage("--data is required"))?;
    existing(path, "data file")?;
    let panel = read_panel(path)?;
    panel
        .reorder(system.ordering())
        .with_context(|| path.display().to_string())
}

fn out_dir(shared: &Shared) -> Result<PathBuf> {
    let dir = shared.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn parse_quarter(s: &str, flag: &str) -> Result<Quarter> {
    Quarter::from_str(s).map_err(|e| usage(format!("{flag}: {e}")))
}

fn forecaster(args: &ForecasterArgs, file: &FileConfig) -> Result<ForecasterConfig> {
    let name = args
        .forecaster
        .clone()
        .or_else(|| file.forecaster.clone())
        .unwrap_or_else(|| "ar".into());
    let method = ForecastMethod::from_str(&name).map_err(|e| usage(e.to_string()))?;
    let cfg = match method {
        ForecastMethod::Naive => ForecasterConfig::naive(),
        ForecastMethod::RwDrift => ForecasterConfig::rw_drift(),
        ForecastMethod::Ar => match args.ar_order.or(file.ar_order) {
            Some(p) => ForecasterConfig::ar(p),
            None => ForecasterConfig::ar_aicc(args.ar_max_order.or(file.ar_max_order).unwrap_or(4)),
        },
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn horizons(args: &ForecasterArgs, file: &FileConfig) -> Result<usize> {
    let h = args.horizons.or(file.horizons).unwrap_or(4);
    if h == 0 {
        return Err(usage("--horizons must be at least 1"));
    }
    Ok(h)
}

pub fn validate(args: ValidateArgs) -> Result<()> {
    let Resolved { shared, .. } = resolve(args.shared)?;
    let system = load_system(&shared)?;
    println!("n={} K={}", system.n(), system.k());
    for (name, members) in group_series(&system) {
        println!("group {name}: {}", members.len());
    }
    if shared.data.is_none() {
        return Ok(());
    }
    let panel = load_panel(&shared, &system)?;
    let tol = shared.tol.unwrap_or(COHERENCE_TOL_REAL);
    let violations = check_coherence(&panel, &system)?;
    println!("period,max_violation");
    for (q, v) in panel.times().iter().zip(&violations) {
        println!("{q},{v:.3e}");
    }
    match panel
        .times()
        .iter()
        .zip(&violations)
        .find(|(_, &v)| v.is_nan() || v > tol)
    {
        Some((q, v)) => Err(Invalid(format!(
            "period {q}: coherence violation {v:.3e} exceeds tolerance {tol:e}"
        ))
        .into()),
        None => {
            println!("all {} periods coherent within {tol:e}", panel.n_periods());
            Ok(())
        }
    }
}

pub fn reconcile(args: ReconcileArgs) -> Result<()> {
    let Resolved { shared, file } = resolve(args.shared)?;
    let system = load_system(&shared)?;
    let method_name = args.method.or(file.method.clone()).unwrap_or_else(|| "mint-shr".into());
    let method = CovarianceMethod::from_str(&method_name).map_err(|e| usage(e.to_string()))?;
    let lambda = args.lambda.or(file.lambda);
    if lambda.is_some() && method != CovarianceMethod::MintShr {
        return Err(usage("--lambda applies to mint-shr only"));
    }

    let base = match args.base.or(file.base.clone()) {
        Some(path) => {
            existing(&path, "base forecast file")?;
            let fc = read_forecasts(&path)?;
            let res = match args.residuals.or(file.residuals.clone()) {
                Some(r) => {
                    existing(&r, "residual file")?;
                    read_long(&r)?
                }
                None => Vec::new(),
            };
            ingest_external(&fc, &res, system.ordering(), None)?
        }
        None => {
            if shared.data.is_none() {
                return Err(usage("either --base or --data is required"));
            }
            let panel = load_panel(&shared, &system)?;
            let fc = forecaster(&args.forecaster, &file)?;
            build_base_set(&panel, horizons(&args.forecaster, &file)?, &fc)?
        }
    };
    if method != CovarianceMethod::Ols && base.residuals().nrows() == 0 {
        return Err(usage(format!("{} needs residuals (--residuals)", method.label())));
    }

    let mut spec = CovarianceSpec::new(method);
    if let Some(l) = lambda {
        spec = spec.with_lambda(l);
    }
    let weights = make_weight_matrix(base.residuals(), &spec)?;
    let result = reconcile_batch(&base, &system, &weights)?;

    let out = out_dir(&shared)?;
    write_forecasts(&out.join("reconciled.csv"), &result.records())?;
    write_violations(&out.join("violations.csv"), &result.max_constraint_violation)?;
    if args.dump_w || file.dump_w.unwrap_or(false) {
        write_matrix(&out.join("w.csv"), system.ordering(), weights.w())?;
    }

    let worst = result.max_constraint_violation.iter().copied().fold(0.0, f64::max);
    print!(
        "reconciled {} series x {} horizons with {}",
        system.n(),
        base.h_max(),
        method.label()
    );
    if let Some(l) = result.lambda {
        print!(" (lambda={l:.4})");
    }
    println!(", max violation {worst:.3e}");
    let tol = shared.tol.unwrap_or(COHERENCE_TOL);
    if let Some((h, v)) = result
        .max_constraint_violation
        .iter()
        .enumerate()
        .find(|(_, &v)| v.is_nan() || v > tol)
    {
        return Err(Invalid(format!(
            "horizon {}: constraint violation {v:.3e} exceeds {tol:e}",
            h + 1
        ))
        .into());
    }
    Ok(())
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    version: &'a str,
    command: &'a str,
    seed: u64,
    hierarchies: &'a [PathBuf],
    top: &'a str,
    data: &'a Path,
    n: usize,
    k: usize,
    windows: usize,
    first_origin: Option<Quarter>,
    last_origin: Option<Quarter>,
    methods: &'a [String],
    groups: Vec<&'a str>,
    config: &'a ExperimentConfig,
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let Resolved { shared, file } = resolve(args.shared)?;
    let system = load_system(&shared)?;
    let panel = load_panel(&shared, &system)?;

    let tol = shared.tol.unwrap_or(COHERENCE_TOL_REAL);
    let violations = check_coherence(&panel, &system)?;
    if let Some((q, v)) = panel
        .times()
        .iter()
        .zip(&violations)
        .find(|(_, &v)| v.is_nan() || v > tol)
    {
        log::warn!(
            "panel is not coherent at {q} (violation {v:.3e} > {tol:e}); errors are measured against it as given"
        );
    }

    let start = args
        .first_train_start
        .or(file.first_train_start.clone())
        .ok_or_else(|| usage("--first-train-start is required"))?;
    let end = args
        .first_train_end
        .or(file.first_train_end.clone())
        .ok_or_else(|| usage("--first-train-end is required"))?;
    let mut cfg = ExperimentConfig::new(
        parse_quarter(&start, "--first-train-start")?,
        parse_quarter(&end, "--first-train-end")?,
        horizons(&args.forecaster, &file)?,
    );
    let methods = if args.methods.is_empty() {
        file.methods.clone().unwrap_or_default()
    } else {
        args.methods
    };
    if !methods.is_empty() {
        cfg.methods = methods
            .iter()
            .map(|m| Method::from_str(m.trim()).map_err(|e| usage(e.to_string())))
            .collect::<Result<_>>()?;
    }
    cfg.forecaster = match args.external_base_dir.or(file.external_base_dir.clone()) {
        Some(dir) => {
            existing(&dir, "external base directory")?;
            ForecastSource::External(dir)
        }
        None => ForecastSource::BuiltIn(forecaster(&args.forecaster, &file)?),
    };
    cfg.side_only = args.side_only || file.side_only.unwrap_or(false);
    if let Some(f) = args.variance_floor.or(file.variance_floor) {
        cfg.variance_floor = f;
    }

    let report = run_experiment(&panel, &system, &cfg)?;

    let out = out_dir(&shared)?;
    write_mse(&out.join("mse.csv"), &report.mse)?;
    write_skill(&out.join("skill.csv"), &report.skill)?;
    write_errors(&out.join("errors.csv"), &report.errors)?;
    write_series_mse(&out.join("mse_series.csv"), &report.mse_series)?;
    let meta = RunMetadata {
        version: env!("CARGO_PKG_VERSION"),
        command: "evaluate",
        seed: shared.seed.unwrap_or(0),
        hierarchies: &shared.hierarchy,
        top: system.top_name(),
        data: shared.data.as_deref().expect("checked by load_panel"),
        n: system.n(),
        k: system.k(),
        windows: report.windows.len(),
        first_origin: report.windows.first().map(|w| w.origin),
        last_origin: report.windows.last().map(|w| w.origin),
        methods: &report.methods,
        groups: report.groups.iter().map(|(g, _)| g.as_str()).collect(),
        config: &cfg,
    };
    std::fs::write(out.join("run.json"), serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", out.join("run.json").display()))?;

    for r in report.undefined_skill() {
        log::warn!(
            "skill undefined (zero base MSE) for {} h={} {}",
            r.method,
            r.horizon,
            r.group
        );
    }
    let top = system.top_name();
    println!(
        "{} windows, {} to {}",
        report.windows.len(),
        cfg.first_train_end,
        report.windows.last().map(|w| w.origin.to_string()).unwrap_or_default()
    );
    print!("{:<24}", format!("skill % ({top})"));
    for h in 1..=cfg.h_max {
        print!("{:>10}", format!("h={h}"));
    }
    println!();
    for m in &report.methods {
        print!("{m:<24}");
        for h in 1..=cfg.h_max {
            match report.skill_of(m, h, top).flatten() {
                Some(s) => print!("{s:>10.2}"),
                None => print!("{:>10}", "NA"),
            }
        }
        println!();
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let Resolved { shared, file } = resolve(args.shared)?;
    let system = load_system(&shared)?;
    let periods = args.periods.or(file.periods).unwrap_or(80);
    if periods == 0 {
        return Err(usage("--periods must be at least 1"));
    }
    let start = match args.start.or(file.start.clone()) {
        Some(s) => parse_quarter(&s, "--start")?,
        None => Quarter::new(1990, 1)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(shared.seed.unwrap_or(0));
    let panel = simulate_panel(&system, start, periods, &mut rng);
    let path = out_dir(&shared)?.join("panel.csv");
    write_panel(&path, &panel)?;
    println!(
        "wrote {} series x {} periods to {}",
        system.n(),
        periods,
        path.display()
    );
    Ok(())
}
