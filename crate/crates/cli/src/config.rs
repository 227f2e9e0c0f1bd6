//! Optional TOML run manifest. Every key mirrors a command-line flag (with
//! `_` for `-`); flags given on the command line take precedence. Relative
//! paths are resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub hierarchy: Vec<PathBuf>,
    pub top: Option<String>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,

    pub method: Option<String>,
    pub base: Option<PathBuf>,
    pub residuals: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub dump_w: Option<bool>,

    pub forecaster: Option<String>,
    pub ar_order: Option<usize>,
    pub ar_max_order: Option<usize>,
    pub horizons: Option<usize>,
    pub first_train_start: Option<String>,
    pub first_train_end: Option<String>,
    pub methods: Option<Vec<String>>,
    pub external_base_dir: Option<PathBuf>,
    pub side_only: Option<bool>,
    pub variance_floor: Option<f64>,

    pub periods: Option<usize>,
    pub start: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.hierarchy.iter_mut().for_each(fix);
        for p in [
            &mut cfg.data,
            &mut cfg.out,
            &mut cfg.base,
            &mut cfg.residuals,
            &mut cfg.external_base_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        Ok(cfg)
    }
}
