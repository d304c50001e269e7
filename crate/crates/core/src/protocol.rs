//! The repeated-trial experiment loop.
//!
//! Every (dataset, trial) pair gets one [`TrialSplit`] derived from the master
//! seed, the dataset name and the trial index only, so all strategies start
//! from the same train/test partition and the same initial labels. Trials are
//! independent work units; results are sorted before they are written, which
//! makes the output files a pure function of the configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{argmax, fit, ClassifierSpec, TrainedModel};
use crate::datasets::{make_split, Dataset, SplitSpec, TrialSplit};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{accuracy, aubc, auc, f1, BudgetCurve, MetricKind};
use crate::seed::derive_seed;
use crate::strategies::{build_strategy, select_checked, QueryContext, StrategyId};

pub const RESULTS_FILE: &str = "results.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const SPLITS_FILE: &str = "splits.csv";
pub const FAILURES_FILE: &str = "failures.csv";

/// How many queries a trial makes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetPolicy {
    /// Query until the training pool is exhausted.
    FullPool,
    Fixed(usize),
}

impl BudgetPolicy {
    /// Number of queries for a pool with `available` unlabeled points.
    pub fn resolve(self, available: usize) -> Result<usize> {
        match self {
            BudgetPolicy::FullPool => Ok(available),
            BudgetPolicy::Fixed(b) if b <= available => Ok(b),
            BudgetPolicy::Fixed(b) => Err(Error::PoolExhausted {
                requested: b,
                available,
            }),
        }
    }
}

impl fmt::Display for BudgetPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BudgetPolicy::FullPool => f.write_str("full_pool"),
            BudgetPolicy::Fixed(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for BudgetPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "full_pool" || s == "full" {
            return Ok(BudgetPolicy::FullPool);
        }
        let digits = s.strip_prefix("fixed:").unwrap_or(s);
        digits
            .parse::<usize>()
            .ok()
            .filter(|&b| b > 0)
            .map(BudgetPolicy::Fixed)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("budget must be `full_pool` or a positive integer, got `{s}`"))
            })
    }
}

impl Serialize for BudgetPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BudgetPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Dataset names, resolved by the caller.
    pub datasets: Vec<String>,
    pub strategies: Vec<StrategyId>,
    pub n_trials: usize,
    pub budget: BudgetPolicy,
    pub evaluator: ClassifierSpec,
    pub master_seed: u64,
    /// Evaluate after every `eval_every` batches (and always at the end).
    pub eval_every: usize,
    pub train_fraction: f64,
    pub n_initial: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            strategies: Vec::new(),
            n_trials: 100,
            budget: BudgetPolicy::FullPool,
            evaluator: ClassifierSpec::svm_rbf(),
            master_seed: 0,
            eval_every: 1,
            train_fraction: 0.6,
            n_initial: 20,
        }
    }
}

/// Batch sizes used for batch-mode families when none are given.
pub const DEFAULT_BATCH_SIZES: [usize; 4] = [1, 2, 5, 10];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidArgument("no strategies configured".into()));
        }
        if self.datasets.is_empty() {
            return Err(Error::InvalidArgument("no datasets configured".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidArgument("eval_every must be at least 1".into()));
        }
        for s in &self.strategies {
            s.validate()?;
        }
        let distinct: BTreeSet<String> = self.strategies.iter().map(ToString::to_string).collect();
        if distinct.len() != self.strategies.len() {
            return Err(Error::InvalidArgument("duplicate strategy ids".into()));
        }
        self.evaluator.validate()?;
        self.split_spec(0).validate()
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            trial_seed: seed,
            train_fraction: self.train_fraction,
            n_initial: self.n_initial,
        }
    }

    /// The split for `(dataset, trial)`. Independent of the strategy.
    pub fn trial_split(&self, ds: &Dataset, trial: usize) -> Result<TrialSplit> {
        let seed = derive_seed(
            self.master_seed,
            &["split".into(), ds.name.as_str().into(), trial.into()],
        );
        make_split(ds, &self.split_spec(seed))
    }
}

/// Expands strategy entries into ids. `"standard"` is the 35-method set; a
/// batch-mode family written without a batch suffix expands over
/// `batch_sizes`; anything else parses as a single id.
pub fn resolve_strategies(entries: &[String], batch_sizes: &[usize]) -> Result<Vec<StrategyId>> {
    if batch_sizes.contains(&0) {
        return Err(Error::InvalidArgument("batch sizes must be positive".into()));
    }
    let mut out: Vec<StrategyId> = Vec::new();
    let mut push = |id: StrategyId| {
        if !out.contains(&id) {
            out.push(id);
        }
    };
    for e in entries {
        let e = e.trim();
        if e == "standard" {
            StrategyId::standard_set().into_iter().for_each(&mut push);
            continue;
        }
        let id: StrategyId = e.parse()?;
        let head = e.split('[').next().unwrap_or(e);
        let has_suffix = head
            .rsplit_once('-')
            .is_some_and(|(_, b)| !b.is_empty() && b.bytes().all(|c| c.is_ascii_digit()));
        if id.family.is_batch() && !has_suffix {
            for &s in batch_sizes {
                let mut v = id.clone();
                v.batch_size = s;
                push(v);
            }
        } else {
            push(id);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub dataset: String,
    pub strategy: String,
    pub trial: usize,
    pub split_hash: String,
    /// Acc, AUC and F1 curves on a shared budget grid.
    pub curves: [BudgetCurve; 3],
    /// Queried pool points as dataset row indices, in query order.
    pub selections: Vec<usize>,
    /// Wall-clock seconds per query step.
    pub timings: Vec<f64>,
}

impl TrialResult {
    pub fn aubc(&self) -> Result<[f64; 3]> {
        Ok([aubc(&self.curves[0])?, aubc(&self.curves[1])?, aubc(&self.curves[2])?])
    }

    pub fn record(&self) -> Result<AubcRecord> {
        let [a, b, c] = self.aubc()?;
        Ok(AubcRecord {
            dataset: self.dataset.clone(),
            strategy: self.strategy.clone(),
            trial: self.trial,
            aubc_acc: a,
            aubc_auc: b,
            aubc_f1: c,
        })
    }

    pub fn curve_rows(&self) -> Vec<CurveRow> {
        (0..self.curves[0].points.len())
            .map(|i| CurveRow {
                dataset: self.dataset.clone(),
                strategy: self.strategy.clone(),
                trial: self.trial,
                num_labeled: self.curves[0].points[i].0,
                acc: self.curves[0].points[i].1,
                auc: self.curves[1].points[i].1,
                f1: self.curves[2].points[i].1,
            })
            .collect()
    }
}

/// Test metrics `[acc, auc, f1]` of a fitted model. A test fold where AUC is
/// undefined scores 0.5.
pub fn evaluate(model: &TrainedModel, x: &Matrix, y: &[usize], k_classes: usize) -> Result<[f64; 3]> {
    let proba = model.predict_proba(x)?;
    let pred: Vec<usize> = proba.iter_rows().map(argmax).collect();
    let a = accuracy(y, &pred)?;
    let u = match auc(y, &proba) {
        Ok(v) => v,
        Err(Error::UndefinedMetric(why)) => {
            log::warn!("AUC undefined on this test fold ({why}); scoring 0.5");
            0.5
        }
        Err(e) => return Err(e),
    };
    let f = f1(y, &pred, k_classes)?;
    Ok([a, u, f])
}

/// Builds the three curves from `(num_labeled, [acc, auc, f1])` points.
pub(crate) fn curves_from(points: &[(usize, [f64; 3])]) -> Result<[BudgetCurve; 3]> {
    let curve = |m: MetricKind| BudgetCurve::new(points.iter().map(|(n, v)| (*n, v[m.index()])).collect(), m);
    Ok([curve(MetricKind::Acc)?, curve(MetricKind::Auc)?, curve(MetricKind::F1)?])
}

/// One trial of one strategy on one dataset.
pub fn run_trial(
    ds: &Dataset,
    strategy: &StrategyId,
    split: &TrialSplit,
    trial: usize,
    cfg: &ExperimentConfig,
) -> Result<TrialResult> {
    let ctx_err = |e: Error, what: String| e.context(format!("{} / {strategy} / trial {trial}: {what}", ds.name));
    let k = ds.k_classes;
    if strategy.family.binary_only() && k != 2 {
        return Err(Error::UnsupportedTask {
            strategy: strategy.to_string(),
            reason: format!("needs a binary problem, `{}` has {k} classes", ds.name),
        });
    }
    let pool_x = ds.features.select_rows(&split.train_idx);
    let pool_y: Vec<usize> = split.train_idx.iter().map(|&i| ds.labels[i]).collect();
    let test_x = ds.features.select_rows(&split.test_idx);
    let test_y: Vec<usize> = split.test_idx.iter().map(|&i| ds.labels[i]).collect();

    let n = split.train_idx.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for &g in &split.initial_labeled_idx {
        let local = split
            .train_idx
            .binary_search(&g)
            .map_err(|_| Error::Split(format!("initial index {g} is not in the training split")))?;
        labels[local] = Some(pool_y[local]);
    }
    let budget = cfg.budget.resolve(n - split.initial_labeled_idx.len())?;

    let trial_seed = derive_seed(
        cfg.master_seed,
        &[
            "strategy".into(),
            ds.name.as_str().into(),
            trial.into(),
            strategy.to_string().as_str().into(),
        ],
    );
    let mut strat = build_strategy(strategy)?;
    let mut points: Vec<(usize, [f64; 3])> = Vec::new();
    let mut selections = Vec::with_capacity(budget);
    let mut timings = Vec::new();
    let mut queried = 0;
    let mut batches = 0;
    loop {
        let labeled: Vec<usize> = (0..n).filter(|&i| labels[i].is_some()).collect();
        let unlabeled: Vec<usize> = (0..n).filter(|&i| labels[i].is_none()).collect();
        let xl = pool_x.select_rows(&labeled);
        let yl: Vec<usize> = labeled.iter().map(|&i| pool_y[i]).collect();
        let model =
            fit(&cfg.evaluator, &xl, &yl, k).map_err(|e| ctx_err(e, format!("fit at {} labels", labeled.len())))?;
        if batches % cfg.eval_every == 0 || queried == budget {
            points.push((labeled.len(), evaluate(&model, &test_x, &test_y, k)?));
        }
        if queried == budget {
            break;
        }
        let s = strategy.batch_size.min(budget - queried);
        let ctx = QueryContext {
            x: &pool_x,
            labels: &labels,
            k_classes: k,
            labeled: &labeled,
            unlabeled: &unlabeled,
            batch_size: s,
            step: queried,
            budget,
            trial_seed,
            step_seed: derive_seed(trial_seed, &[queried.into()]),
            evaluator: &cfg.evaluator,
            model: &model,
        };
        let started = Instant::now();
        let sel = select_checked(strat.as_mut(), &ctx).map_err(|e| ctx_err(e, format!("query at step {queried}")))?;
        timings.push(started.elapsed().as_secs_f64());
        for &local in &sel.chosen {
            let global = split.train_idx[local];
            if split.test_idx.binary_search(&global).is_ok() {
                return Err(Error::Firewall(format!("row {global} of the test split was queried")));
            }
            labels[local] = Some(pool_y[local]);
            selections.push(global);
        }
        queried += s;
        batches += 1;
    }
    Ok(TrialResult {
        dataset: ds.name.clone(),
        strategy: strategy.to_string(),
        trial,
        split_hash: split.fingerprint(),
        curves: curves_from(&points)?,
        selections,
        timings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AubcRecord {
    pub dataset: String,
    pub strategy: String,
    pub trial: usize,
    pub aubc_acc: f64,
    pub aubc_auc: f64,
    pub aubc_f1: f64,
}

impl AubcRecord {
    pub fn values(&self) -> [f64; 3] {
        [self.aubc_acc, self.aubc_auc, self.aubc_f1]
    }

    fn key(&self) -> (String, String, usize) {
        (self.dataset.clone(), self.strategy.clone(), self.trial)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub dataset: String,
    pub strategy: String,
    pub trial: usize,
    pub num_labeled: usize,
    pub acc: f64,
    pub auc: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRow {
    pub dataset: String,
    pub strategy: String,
    pub trial: usize,
    pub split_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRow {
    pub dataset: String,
    pub strategy: String,
    pub trial: usize,
    pub error: String,
}

/// Everything a run produced, sorted by (dataset, strategy, trial).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<AubcRecord>,
    pub curves: Vec<CurveRow>,
    pub splits: Vec<SplitRow>,
    pub failures: Vec<FailureRow>,
}

impl ExperimentOutput {
    /// Sorts every table. Failures of cells that later succeeded are dropped
    /// and repeated failures keep only the newest message.
    pub(crate) fn sort(&mut self) {
        let done: BTreeSet<(String, String, usize)> = self.records.iter().map(AubcRecord::key).collect();
        let mut latest: BTreeMap<(String, String, usize), FailureRow> = BTreeMap::new();
        for f in self.failures.drain(..) {
            let key = (f.dataset.clone(), f.strategy.clone(), f.trial);
            if !done.contains(&key) {
                latest.insert(key, f);
            }
        }
        self.failures = latest.into_values().collect();
        self.records.sort_by_key(AubcRecord::key);
        self.curves.sort_by(|a, b| {
            (&a.dataset, &a.strategy, a.trial, a.num_labeled).cmp(&(&b.dataset, &b.strategy, b.trial, b.num_labeled))
        });
        self.splits
            .sort_by(|a, b| (&a.dataset, &a.strategy, a.trial).cmp(&(&b.dataset, &b.strategy, b.trial)));
        self.failures
            .sort_by(|a, b| (&a.dataset, &a.strategy, a.trial).cmp(&(&b.dataset, &b.strategy, b.trial)));
    }

    pub(crate) fn push_trial(&mut self, r: &TrialResult) -> Result<()> {
        self.records.push(r.record()?);
        self.curves.extend(r.curve_rows());
        self.splits.push(SplitRow {
            dataset: r.dataset.clone(),
            strategy: r.strategy.clone(),
            trial: r.trial,
            split_hash: r.split_hash.clone(),
        });
        Ok(())
    }

    /// Mean and sample SD of the AUBC values per (dataset, strategy).
    pub fn summary(&self) -> Vec<CellSummary> {
        summarize(&self.records)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub dataset: String,
    pub strategy: String,
    pub n_trials: usize,
    pub mean: [f64; 3],
    pub sd: [f64; 3],
}

pub fn summarize(records: &[AubcRecord]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(String, String), Vec<[f64; 3]>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.dataset.clone(), r.strategy.clone()))
            .or_default()
            .push(r.values());
    }
    cells
        .into_iter()
        .map(|((dataset, strategy), vals)| {
            let n = vals.len() as f64;
            let mut mean = [0.0; 3];
            let mut sd = [0.0; 3];
            for m in 0..3 {
                mean[m] = vals.iter().map(|v| v[m]).sum::<f64>() / n;
                sd[m] = if vals.len() > 1 {
                    (vals.iter().map(|v| (v[m] - mean[m]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
            }
            CellSummary {
                dataset,
                strategy,
                n_trials: vals.len(),
                mean,
                sd,
            }
        })
        .collect()
}

/// Split hashes that disagree within a (dataset, trial) across strategies.
pub fn audit_fair_comparison(splits: &[SplitRow]) -> Vec<String> {
    let mut seen: BTreeMap<(&str, usize), (&str, &str)> = BTreeMap::new();
    let mut violations = Vec::new();
    for s in splits {
        match seen.get(&(s.dataset.as_str(), s.trial)) {
            None => {
                seen.insert(
                    (s.dataset.as_str(), s.trial),
                    (s.strategy.as_str(), s.split_hash.as_str()),
                );
            }
            Some((first, hash)) if *hash != s.split_hash => violations.push(format!(
                "{} trial {}: {} and {} saw different splits",
                s.dataset, s.trial, first, s.strategy
            )),
            Some(_) => {}
        }
    }
    violations
}

/// Append-only per-trial store in a results directory. Rows are appended as
/// trials finish; the result row is written last so a trial counts as done
/// only when its AUBC row exists.
pub struct CheckpointStore {
    dir: PathBuf,
    lock: Mutex<()>,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let mut out = Vec::new();
    for row in rd.deserialize() {
        match row {
            Ok(r) => out.push(r),
            Err(e) => log::warn!("{}: skipping unreadable row ({e})", path.display()),
        }
    }
    Ok(out)
}

fn append_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows` with a header to `path` via a temporary file and rename.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let file = File::create(&tmp)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub const RESULTS_HEADER: [&str; 6] = ["dataset", "strategy", "trial", "aubc_acc", "aubc_auc", "aubc_f1"];
pub const CURVES_HEADER: [&str; 7] = ["dataset", "strategy", "trial", "num_labeled", "acc", "auc", "f1"];
pub const SPLITS_HEADER: [&str; 4] = ["dataset", "strategy", "trial", "split_hash"];
pub const FAILURES_HEADER: [&str; 4] = ["dataset", "strategy", "trial", "error"];

impl CheckpointStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Completed trials found on disk. Curve and split rows without a result
    /// row belong to an interrupted trial and are dropped.
    pub fn load(&self) -> Result<ExperimentOutput> {
        let records: Vec<AubcRecord> = read_rows(&self.dir.join(RESULTS_FILE))?;
        let mut done = BTreeSet::new();
        let mut out = ExperimentOutput::default();
        for r in records {
            if done.insert(r.key()) {
                out.records.push(r);
            }
        }
        let mut seen_curves = BTreeSet::new();
        for c in read_rows::<CurveRow>(&self.dir.join(CURVES_FILE))? {
            let key = (c.dataset.clone(), c.strategy.clone(), c.trial);
            if done.contains(&key) && seen_curves.insert((key, c.num_labeled)) {
                out.curves.push(c);
            }
        }
        let mut seen_splits = BTreeSet::new();
        for s in read_rows::<SplitRow>(&self.dir.join(SPLITS_FILE))? {
            let key = (s.dataset.clone(), s.strategy.clone(), s.trial);
            if done.contains(&key) && seen_splits.insert(key) {
                out.splits.push(s);
            }
        }
        out.failures = read_rows(&self.dir.join(FAILURES_FILE))?;
        Ok(out)
    }

    pub fn append(&self, r: &TrialResult) -> Result<()> {
        let record = r.record()?;
        let _guard = self.lock.lock().expect("checkpoint lock poisoned");
        append_rows(&self.dir.join(CURVES_FILE), &r.curve_rows())?;
        append_rows(
            &self.dir.join(SPLITS_FILE),
            &[SplitRow {
                dataset: r.dataset.clone(),
                strategy: r.strategy.clone(),
                trial: r.trial,
                split_hash: r.split_hash.clone(),
            }],
        )?;
        append_rows(&self.dir.join(RESULTS_FILE), &[record])?;
        Ok(())
    }

    /// Rewrites every file sorted; the final state depends only on the rows.
    pub fn finalize(&self, out: &ExperimentOutput) -> Result<()> {
        let _guard = self.lock.lock().expect("checkpoint lock poisoned");
        write_rows(&self.dir.join(RESULTS_FILE), &out.records, &RESULTS_HEADER)?;
        write_rows(&self.dir.join(CURVES_FILE), &out.curves, &CURVES_HEADER)?;
        write_rows(&self.dir.join(SPLITS_FILE), &out.splits, &SPLITS_HEADER)?;
        let failures = self.dir.join(FAILURES_FILE);
        if out.failures.is_empty() {
            if failures.exists() {
                fs::remove_file(&failures)?;
            }
        } else {
            write_rows(&failures, &out.failures, &FAILURES_HEADER)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
    /// Checkpoint directory; completed trials found there are skipped.
    pub out_dir: Option<PathBuf>,
    /// Stop after this many newly completed trials (for interruption tests).
    pub max_new_trials: Option<usize>,
}

/// Runs every (dataset, strategy, trial) cell. `datasets` must be in the
/// same order as `cfg.datasets`. A failing trial is recorded and the run continues.
pub fn run_experiment(cfg: &ExperimentConfig, datasets: &[Dataset], opts: &RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if datasets.len() != cfg.datasets.len() || datasets.iter().zip(&cfg.datasets).any(|(d, n)| &d.name != n) {
        return Err(Error::InvalidArgument(
            "loaded datasets do not match the configuration".into(),
        ));
    }
    let store = opts.out_dir.as_ref().map(CheckpointStore::open).transpose()?;
    let mut out = match &store {
        Some(s) => s.load()?,
        None => ExperimentOutput::default(),
    };
    let done: BTreeSet<(String, String, usize)> = out.records.iter().map(AubcRecord::key).collect();

    let mut units = Vec::new();
    for (d, ds) in datasets.iter().enumerate() {
        for (s, id) in cfg.strategies.iter().enumerate() {
            for t in 0..cfg.n_trials {
                if !done.contains(&(ds.name.clone(), id.to_string(), t)) {
                    units.push((d, s, t));
                }
            }
        }
    }
    if let Some(cap) = opts.max_new_trials {
        units.truncate(cap);
    }
    log::info!("{} trials to run ({} already complete)", units.len(), done.len());

    let work = |&(d, s, t): &(usize, usize, usize)| -> std::result::Result<TrialResult, FailureRow> {
        let ds = &datasets[d];
        let id = &cfg.strategies[s];
        let fail = |e: Error| FailureRow {
            dataset: ds.name.clone(),
            strategy: id.to_string(),
            trial: t,
            error: e.to_string(),
        };
        let split = cfg.trial_split(ds, t).map_err(fail)?;
        let r = run_trial(ds, id, &split, t, cfg).map_err(fail)?;
        if let Some(st) = &store {
            st.append(&r).map_err(fail)?;
        }
        log::debug!("done {} / {} / trial {t}", ds.name, id);
        Ok(r)
    };
    let results: Vec<std::result::Result<TrialResult, FailureRow>> = if opts.workers == 1 {
        units.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        pool.install(|| units.par_iter().map(work).collect())
    };
    for r in results {
        match r {
            Ok(tr) => out.push_trial(&tr)?,
            Err(f) => {
                log::warn!("{} / {} / trial {} failed: {}", f.dataset, f.strategy, f.trial, f.error);
                out.failures.push(f);
            }
        }
    }
    out.sort();
    if let Some(st) = &store {
        st.finalize(&out)?;
    }
    Ok(out)
}

/// Whether a strategy can run on a dataset with `k_classes` classes.
pub fn supports(id: &StrategyId, k_classes: usize) -> bool {
    !(id.family.binary_only() && k_classes != 2)
}
