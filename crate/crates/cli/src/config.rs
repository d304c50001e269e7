//! TOML run configuration.
//!
//! ```toml
//! [experiment]
//! n_trials = 20
//! budget = "full_pool"          # or "fixed:50"
//! master_seed = 0
//! datasets = ["gcloudb", "iris"]
//! strategies = ["uniform-1", "qbc"]
//!
//! [[grid]]                      # optional extra (datasets x strategies) blocks
//! datasets = ["gcloudub"]
//! strategies = ["qbc"]
//!
//! [evaluator]
//! kind = "svm_rbf"
//!
//! [bso]
//! width = 5
//! budget = 20
//!
//! [data.iris]
//! path = "iris.csv"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use albench_core::bso::BsoOptions;
use albench_core::classifiers::{ClassifierKind, ClassifierSpec, Gamma};
use albench_core::datasets::{DatasetRegistry, DatasetSource, RegistryEntry};
use albench_core::protocol::{resolve_strategies, BudgetPolicy, ExperimentConfig, DEFAULT_BATCH_SIZES};
use albench_core::Origin;
use serde::Deserialize;

/// Environment variable naming the directory that relative dataset paths resolve against.
pub const DATA_DIR_ENV: &str = "ALBENCH_DATA_DIR";

/// A configuration problem, anchored to a line of the file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    grid: Vec<RawGrid>,
    #[serde(default)]
    evaluator: RawEvaluator,
    #[serde(default)]
    bso: RawBso,
    #[serde(default)]
    data: BTreeMap<String, RegistryEntry>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    datasets: Option<Vec<String>>,
    strategies: Option<Vec<String>>,
    batch_sizes: Option<Vec<usize>>,
    n_trials: Option<usize>,
    budget: Option<String>,
    master_seed: Option<u64>,
    eval_every: Option<usize>,
    train_fraction: Option<f64>,
    n_initial: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    datasets: Vec<String>,
    strategies: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvaluator {
    kind: Option<String>,
    c: Option<f64>,
    gamma: Option<toml::Value>,
    max_iter: Option<usize>,
    tol: Option<f64>,
    nystrom_rank: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBso {
    width: Option<usize>,
    budget: Option<usize>,
    candidate_cap: Option<usize>,
}

/// One (datasets x strategies) block; all blocks share seeds and splits.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub datasets: Vec<String>,
    pub strategies: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub path: PathBuf,
    /// Shared settings; `datasets`/`strategies` are filled per grid.
    pub base: ExperimentConfig,
    pub grids: Vec<Grid>,
    pub batch_sizes: Vec<usize>,
    pub bso: BsoOptions,
    pub registry: DatasetRegistry,
}

impl RunConfig {
    /// Distinct dataset names in first-use order.
    pub fn dataset_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for g in &self.grids {
            for d in &g.datasets {
                if !out.contains(d) {
                    out.push(d.clone());
                }
            }
        }
        out
    }

    /// The experiment for one grid.
    pub fn grid_config(&self, grid: &Grid) -> ExperimentConfig {
        let mut cfg = self.base.clone();
        cfg.datasets = grid.datasets.clone();
        cfg.strategies = resolve_strategies(&grid.strategies, &self.batch_sizes).expect("validated at load");
        cfg
    }

    /// Every grid's strategies over the union of datasets, for the manifest.
    pub fn resolved(&self) -> Vec<ExperimentConfig> {
        self.grids.iter().map(|g| self.grid_config(g)).collect()
    }

    /// Where a dataset comes from. Names ending in `.csv` that are not in the
    /// registry are read as files, with `label_col` as their label column.
    pub fn source(&self, name: &str, label_col: Option<usize>) -> albench_core::Result<DatasetSource> {
        if !self.registry.entries.contains_key(name) && name.ends_with(".csv") {
            let entry = RegistryEntry {
                path: Some(PathBuf::from(name)),
                origin: Some(Origin::Real),
                label_col,
                generator: None,
                n: None,
                seed: None,
            };
            return DatasetSource::from_entry(name, &entry, &self.registry.base_dir);
        }
        self.registry.source(name)
    }
}

/// Line (1-based) of the first `key = ...` assignment in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Reads and validates a configuration file.
pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: shown.clone(),
        line: None,
        message: format!("cannot read: {e}"),
    })?;
    let base_dir = match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    parse(&text, &shown, base_dir).map(|mut c| {
        c.path = path.to_path_buf();
        c
    })
}

/// Parses configuration text; relative dataset paths resolve against `base_dir`.
pub fn parse(text: &str, shown: &str, base_dir: PathBuf) -> Result<RunConfig, ConfigError> {
    let err = |key: Option<&str>, message: String| ConfigError {
        path: shown.to_string(),
        line: key.and_then(|k| line_of(text, k)),
        message,
    };
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        path: shown.to_string(),
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;

    let d = ExperimentConfig::default();
    let e = raw.experiment;
    let budget = match &e.budget {
        Some(b) => b
            .parse::<BudgetPolicy>()
            .map_err(|x| err(Some("budget"), x.to_string()))?,
        None => d.budget,
    };
    let mut evaluator = match &raw.evaluator.kind {
        Some(k) => ClassifierSpec::new(
            k.parse::<ClassifierKind>()
                .map_err(|x| err(Some("kind"), x.to_string()))?,
        ),
        None => d.evaluator,
    };
    if let Some(c) = raw.evaluator.c {
        evaluator.c = c;
    }
    if let Some(g) = &raw.evaluator.gamma {
        evaluator.gamma = match g {
            toml::Value::String(s) if s == "scale" => Gamma::Scale,
            toml::Value::Float(v) => Gamma::Value(*v),
            toml::Value::Integer(v) => Gamma::Value(*v as f64),
            other => {
                return Err(err(
                    Some("gamma"),
                    format!("gamma must be \"scale\" or a number, got {other}"),
                ))
            }
        };
    }
    if let Some(v) = raw.evaluator.max_iter {
        evaluator.max_iter = v;
    }
    if let Some(v) = raw.evaluator.tol {
        evaluator.tol = v;
    }
    if let Some(v) = raw.evaluator.nystrom_rank {
        evaluator.nystrom_rank = v;
    }
    let base = ExperimentConfig {
        datasets: Vec::new(),
        strategies: Vec::new(),
        n_trials: e.n_trials.unwrap_or(d.n_trials),
        budget,
        evaluator,
        master_seed: e.master_seed.unwrap_or(d.master_seed),
        eval_every: e.eval_every.unwrap_or(d.eval_every),
        train_fraction: e.train_fraction.unwrap_or(d.train_fraction),
        n_initial: e.n_initial.unwrap_or(d.n_initial),
    };
    let batch_sizes = e.batch_sizes.clone().unwrap_or_else(|| DEFAULT_BATCH_SIZES.to_vec());

    let mut grids = Vec::new();
    match (e.datasets, e.strategies) {
        (Some(datasets), Some(strategies)) => grids.push(Grid { datasets, strategies }),
        (None, None) => {}
        (Some(_), None) => {
            return Err(err(
                Some("datasets"),
                "[experiment] lists datasets but no strategies".into(),
            ))
        }
        (None, Some(_)) => {
            return Err(err(
                Some("strategies"),
                "[experiment] lists strategies but no datasets".into(),
            ))
        }
    }
    grids.extend(raw.grid.into_iter().map(|g| Grid {
        datasets: g.datasets,
        strategies: g.strategies,
    }));
    if grids.is_empty() {
        return Err(err(None, "no datasets or strategies configured".into()));
    }

    let registry = DatasetRegistry {
        entries: raw.data,
        base_dir,
    };
    let cfg = RunConfig {
        path: PathBuf::from(shown),
        base,
        grids,
        batch_sizes,
        bso: BsoOptions {
            width: raw.bso.width.unwrap_or(5),
            budget: raw.bso.budget,
            candidate_cap: raw.bso.candidate_cap,
        },
        registry,
    };
    for g in &cfg.grids {
        if g.datasets.is_empty() {
            return Err(err(Some("datasets"), "a grid has an empty dataset list".into()));
        }
        let strategies =
            resolve_strategies(&g.strategies, &cfg.batch_sizes).map_err(|x| err(Some("strategies"), x.to_string()))?;
        let mut exp = cfg.base.clone();
        exp.datasets = g.datasets.clone();
        exp.strategies = strategies;
        exp.validate().map_err(|x| {
            let msg = x.to_string();
            let key = [
                "n_trials",
                "eval_every",
                "train_fraction",
                "n_initial",
                "strategies",
                "kind",
                "c",
                "gamma",
            ]
            .into_iter()
            .find(|k| msg.contains(k));
            err(key.or(Some("strategies")), msg)
        })?;
        for name in &g.datasets {
            if !name.ends_with(".csv") {
                cfg.registry
                    .source(name)
                    .map_err(|x| err(Some("datasets"), x.to_string()))?;
            }
        }
    }
    if cfg.bso.width == 0 {
        return Err(err(Some("width"), "bso width must be at least 1".into()));
    }
    Ok(cfg)
}
