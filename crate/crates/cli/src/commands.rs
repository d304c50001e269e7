use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use albench_core::analysis::{
    alpha_rank, difficulty_table, format_difficulty_text, format_ranking_text, group_rank, pairwise_wtl_all,
    ranking_rows, write_difficulty_csv, write_ranking_csv, AubcTable, TieRule,
};
use albench_core::bso::{bso_difficulty_inputs, run_bso};
use albench_core::datasets::SyntheticKind;
use albench_core::protocol::{
    run_experiment, write_rows, CheckpointStore, ExperimentOutput, FailureRow, RunOptions, CURVES_HEADER,
    FAILURES_FILE, FAILURES_HEADER, RESULTS_HEADER, SPLITS_HEADER,
};
use albench_core::{derive_tags, Dataset, DatasetTags, MetricKind};
use serde::{Deserialize, Serialize};

use crate::config::{self, RunConfig};
use crate::plot;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BSO_MANIFEST_FILE: &str = "manifest_bso.json";
pub const DATASETS_FILE: &str = "datasets.csv";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub workers: usize,
    pub seed: Option<u64>,
    pub label_col: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct BsoArgs {
    pub run: RunArgs,
    pub width: Option<usize>,
    pub budget: Option<usize>,
    pub candidate_cap: Option<usize>,
}

/// Everything needed to reproduce a run, written before the first trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub schema_version: u32,
    pub config_path: String,
    pub out_dir: String,
    pub master_seed: u64,
    pub experiments: serde_json::Value,
    pub csv_schemas: BTreeMap<String, Vec<String>>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub dataset: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub k_classes: usize,
    pub tags: String,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn schemas() -> BTreeMap<String, Vec<String>> {
    let h = |x: &[&str]| x.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    BTreeMap::from([
        ("results.csv".to_string(), h(&RESULTS_HEADER)),
        ("curves.csv".to_string(), h(&CURVES_HEADER)),
        ("splits.csv".to_string(), h(&SPLITS_HEADER)),
        ("failures.csv".to_string(), h(&FAILURES_HEADER)),
    ])
}

fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.base.master_seed = seed;
    }
    Ok(cfg)
}

fn load_datasets(cfg: &RunConfig, label_col: Option<usize>) -> Result<BTreeMap<String, Dataset>, CliError> {
    let mut out = BTreeMap::new();
    for name in cfg.dataset_names() {
        let (ds, report) = cfg
            .source(&name, label_col)
            .and_then(|s| s.load(&name))
            .map_err(|e| CliError::Usage(format!("dataset `{name}`: {e}")))?;
        if let Some(r) = report {
            log::info!(
                "{name}: {} rows, labels {:?} -> 0..{}",
                r.rows,
                r.label_mapping,
                r.label_mapping.len()
            );
        }
        out.insert(name, ds);
    }
    Ok(out)
}

/// Merges the datasets' shapes and tags into `datasets.csv`.
fn write_dataset_table(out: &Path, datasets: &BTreeMap<String, Dataset>) -> Result<(), CliError> {
    let path = out.join(DATASETS_FILE);
    let mut rows: BTreeMap<String, DatasetRow> = read_dataset_table(out)?
        .into_iter()
        .map(|r| (r.dataset.clone(), r))
        .collect();
    for (name, ds) in datasets {
        rows.insert(
            name.clone(),
            DatasetRow {
                dataset: name.clone(),
                n_samples: ds.n_samples(),
                n_features: ds.n_features(),
                k_classes: ds.k_classes,
                tags: derive_tags(ds).to_string(),
            },
        );
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows.values() {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_dataset_table(dir: &Path) -> Result<Vec<DatasetRow>, CliError> {
    let path = dir.join(DATASETS_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rd = csv::Reader::from_path(path)?;
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}

/// Writes the manifest, refusing to resume into a directory that holds a
/// different run.
fn start_manifest(path: &Path, manifest: &RunManifest) -> Result<RunManifest, CliError> {
    if path.exists() {
        let old: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if old.experiments != manifest.experiments || old.master_seed != manifest.master_seed {
            return Err(CliError::Usage(format!(
                "{} belongs to a different run; use another output directory",
                path.display()
            )));
        }
        return Ok(old);
    }
    fs::write(path, serde_json::to_string_pretty(manifest)?)?;
    Ok(manifest.clone())
}

fn finish_manifest(path: &Path, mut manifest: RunManifest) -> Result<(), CliError> {
    manifest.finished_unix = Some(now());
    fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn report_failures(out: &Path, failures: &[FailureRow]) -> Result<(), CliError> {
    let path = out.join(FAILURES_FILE);
    if failures.is_empty() {
        if path.exists() {
            fs::remove_file(path)?;
        }
        return Ok(());
    }
    write_rows(&path, failures, &FAILURES_HEADER)?;
    eprintln!("{} trial(s) failed; see {}", failures.len(), path.display());
    Ok(())
}

/// `albench run`: every grid of the configuration into one checkpointed directory.
pub fn cmd_run(args: &RunArgs) -> Result<ExperimentOutput, CliError> {
    let cfg = load_config(args)?;
    let datasets = load_datasets(&cfg, args.label_col)?;
    fs::create_dir_all(&args.out)?;
    let manifest_path = args.out.join(MANIFEST_FILE);
    let manifest = start_manifest(
        &manifest_path,
        &RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            config_path: args.config.display().to_string(),
            out_dir: args.out.display().to_string(),
            master_seed: cfg.base.master_seed,
            experiments: serde_json::to_value(cfg.resolved())?,
            csv_schemas: schemas(),
            started_unix: now(),
            finished_unix: None,
        },
    )?;
    write_dataset_table(&args.out, &datasets)?;

    let opts = RunOptions {
        workers: args.workers,
        out_dir: Some(args.out.clone()),
        max_new_trials: None,
    };
    for grid in &cfg.grids {
        let exp = cfg.grid_config(grid);
        let data: Vec<Dataset> = exp.datasets.iter().map(|d| datasets[d].clone()).collect();
        run_experiment(&exp, &data, &opts)?;
    }
    let out = CheckpointStore::open(&args.out)?.load()?;
    report_failures(&args.out, &out.failures)?;
    for c in out.summary() {
        println!(
            "{:<14} {:<24} n={:<4} acc {:.4} ± {:.4}  auc {:.4}  f1 {:.4}",
            c.dataset, c.strategy, c.n_trials, c.mean[0], c.sd[0], c.mean[1], c.mean[2]
        );
    }
    finish_manifest(&manifest_path, manifest)?;
    Ok(out)
}

/// `albench bso`: the beam-search oracle over every configured dataset,
/// on the same splits as `run`.
pub fn cmd_bso(args: &BsoArgs) -> Result<ExperimentOutput, CliError> {
    let mut cfg = load_config(&args.run)?;
    if let Some(w) = args.width {
        if w == 0 {
            return Err(CliError::Usage("--width must be at least 1".into()));
        }
        cfg.bso.width = w;
    }
    if args.budget.is_some() {
        cfg.bso.budget = args.budget;
    }
    if args.candidate_cap.is_some() {
        cfg.bso.candidate_cap = args.candidate_cap;
    }
    let datasets = load_datasets(&cfg, args.run.label_col)?;
    let out_dir = &args.run.out;
    fs::create_dir_all(out_dir)?;
    let mut exp = cfg.base.clone();
    exp.datasets = cfg.dataset_names();
    let manifest_path = out_dir.join(BSO_MANIFEST_FILE);
    let manifest = start_manifest(
        &manifest_path,
        &RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            config_path: args.run.config.display().to_string(),
            out_dir: out_dir.display().to_string(),
            master_seed: exp.master_seed,
            experiments: serde_json::json!({
                "experiment": exp,
                "bso": {
                    "width": cfg.bso.width,
                    "budget": cfg.bso.budget,
                    "candidate_cap": cfg.bso.candidate_cap,
                },
            }),
            csv_schemas: schemas(),
            started_unix: now(),
            finished_unix: None,
        },
    )?;
    write_dataset_table(out_dir, &datasets)?;
    let data: Vec<Dataset> = exp.datasets.iter().map(|d| datasets[d].clone()).collect();
    let opts = RunOptions {
        workers: args.run.workers,
        out_dir: Some(out_dir.clone()),
        max_new_trials: None,
    };
    let out = run_bso(&exp, &data, &cfg.bso, &opts)?;
    report_failures(out_dir, &out.failures)?;
    for (d, m) in bso_difficulty_inputs(&out) {
        println!("{d:<14} bso  acc {:.4}  auc {:.4}  f1 {:.4}", m[0], m[1], m[2]);
    }
    finish_manifest(&manifest_path, manifest)?;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct AnalyzeArgs {
    pub results: PathBuf,
    pub out: Option<PathBuf>,
    pub tie_threshold: f64,
    pub relative: bool,
}

/// Files written by `albench analyze`.
pub const RANKING_CSV: &str = "ranking.csv";
pub const RANKING_TXT: &str = "ranking.txt";
pub const WTL_CSV: &str = "wtl.csv";
pub const DIFFICULTY_CSV: &str = "difficulty.csv";
pub const DIFFICULTY_TXT: &str = "difficulty.txt";

fn load_results(dir: &Path) -> Result<ExperimentOutput, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
    }
    let out = CheckpointStore::open(dir)?.load()?;
    if out.records.is_empty() {
        return Err(CliError::Usage(format!("no results found in {}", dir.display())));
    }
    Ok(out)
}

/// `albench analyze`: win-tie-loss, rankings and (with BSO rows) difficulty.
pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<String, CliError> {
    let results = load_results(&args.results)?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.results.clone());
    fs::create_dir_all(&out_dir)?;
    let rule = if args.relative {
        TieRule::Relative(args.tie_threshold)
    } else {
        TieRule::Absolute(args.tie_threshold)
    };
    let table = AubcTable::from_records(&results.records);
    let mut report = String::new();
    if table.is_empty() {
        return Err(CliError::Usage(
            "results hold only oracle rows; run `albench run` first".into(),
        ));
    }

    let wtl = pairwise_wtl_all(&table, rule)?;
    {
        let mut w = csv::Writer::from_path(out_dir.join(WTL_CSV))?;
        w.write_record(["strategy", "metric", "win", "tie", "loss", "total"])?;
        for r in &wtl {
            w.write_record([
                r.strategy.clone(),
                r.metric.to_string(),
                r.win.to_string(),
                r.tie.to_string(),
                r.loss.to_string(),
                r.total().to_string(),
            ])?;
        }
        w.flush()?;
    }
    let overall = alpha_rank(&wtl)?;
    let tags: BTreeMap<String, DatasetTags> = read_dataset_table(&args.results)?
        .into_iter()
        .filter_map(|r| DatasetTags::parse(&r.tags).ok().map(|t| (r.dataset, t)))
        .collect();
    let groups = if table.datasets().iter().all(|d| tags.contains_key(d)) {
        group_rank(&table, &tags, rule)?
    } else {
        log::warn!("{DATASETS_FILE} is missing or incomplete; property-group rankings skipped");
        Vec::new()
    };
    let rows = ranking_rows(&overall, &groups);
    write_ranking_csv(out_dir.join(RANKING_CSV), &rows)?;
    let ranking_text = format_ranking_text(&rows);
    fs::write(out_dir.join(RANKING_TXT), &ranking_text)?;
    report.push_str(&ranking_text);

    let n = table.strategies().len();
    let totals: BTreeSet<u64> = wtl.iter().map(|r| r.total()).collect();
    let complete = ((n - 1) * table.datasets().len()) as u64;
    let totals: Vec<String> = totals.iter().map(u64::to_string).collect();
    report.push_str(&format!(
        "totals: win+tie+loss per strategy and metric = {} (complete grid: ({n} - 1) x {} datasets = {complete})\n",
        totals.join(", "),
        table.datasets().len()
    ));

    let bso = bso_difficulty_inputs(&results);
    if bso.is_empty() {
        log::warn!("no BSO results in {}; difficulty table skipped", args.results.display());
    } else {
        let covered: BTreeSet<String> = table.datasets().into_iter().filter(|d| bso.contains_key(d)).collect();
        for d in table.datasets().iter().filter(|d| !covered.contains(*d)) {
            log::warn!("no BSO result for `{d}`; left out of the difficulty table");
        }
        if !covered.is_empty() {
            let diff = difficulty_table(&table.restrict(&covered), &bso)?;
            write_difficulty_csv(out_dir.join(DIFFICULTY_CSV), &diff)?;
            let text = format_difficulty_text(&diff);
            fs::write(out_dir.join(DIFFICULTY_TXT), &text)?;
            report.push('\n');
            report.push_str(&text);
        }
    }
    print!("{report}");
    Ok(report)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// `albench plot`: one SVG per (dataset, metric) with the mean curve of every strategy.
pub fn cmd_plot(results: &Path, dataset: Option<&str>, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let res = load_results(results)?;
    let known: BTreeSet<&str> = res.curves.iter().map(|c| c.dataset.as_str()).collect();
    let chosen: Vec<&str> = match dataset {
        Some(d) if known.contains(d) => vec![d],
        Some(d) => {
            return Err(CliError::Usage(format!(
                "unknown dataset `{d}` in {}",
                results.display()
            )))
        }
        None => known.iter().copied().collect(),
    };
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| results.join("plots"));
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for d in chosen {
        for m in MetricKind::ALL {
            let curves = plot::mean_curves(&res.curves, d, m);
            let path = dir.join(format!("{}_{m}.svg", file_stem(d)));
            fs::write(&path, plot::render_svg(&format!("{d}: {m} vs budget"), m, &curves))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `albench gen-data`: writes a synthetic dataset as CSV (features then `label`).
pub fn cmd_gen_data(kind: &str, n: Option<usize>, seed: u64, out: &Path) -> Result<(), CliError> {
    let kind = SyntheticKind::parse(kind).ok_or_else(|| CliError::Usage(format!("unknown generator `{kind}`")))?;
    let ds = kind.generate(n.unwrap_or_else(|| kind.default_size()), seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(out)?;
    let mut header: Vec<String> = (1..=ds.n_features()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..ds.n_samples() {
        let mut row: Vec<String> = ds.features.row(i).iter().map(|v| v.to_string()).collect();
        row.push(ds.labels[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
