//! Comparative analysis over mean AUBC tables: pairwise win-tie-loss counts,
//! α scores (`2 * win + tie`), per-property-group rankings and the Δa/Δb
//! dataset difficulty table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::bso::BSO_STRATEGY;
use crate::datasets::DatasetTags;
use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::protocol::{summarize, AubcRecord};

/// Property groups in the order they are reported.
pub const GROUPS: [&str; 8] = ["B", "M", "R", "S", "LD", "HD", "SC", "LC"];

pub const DEFAULT_TIE_THRESHOLD: f64 = 0.005;

/// Mean AUBC (and trial SD) per (strategy, dataset) cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AubcTable {
    cells: BTreeMap<(String, String), [f64; 3]>,
}

impl AubcTable {
    /// Averages records over trials. Oracle rows (strategy `bso`) are left out.
    pub fn from_records(records: &[AubcRecord]) -> Self {
        let cells = summarize(records)
            .into_iter()
            .filter(|c| c.strategy != BSO_STRATEGY)
            .map(|c| ((c.strategy, c.dataset), c.mean))
            .collect();
        Self { cells }
    }

    pub fn insert(&mut self, strategy: &str, dataset: &str, means: [f64; 3]) {
        self.cells.insert((strategy.to_string(), dataset.to_string()), means);
    }

    pub fn get(&self, strategy: &str, dataset: &str, metric: MetricKind) -> Option<f64> {
        self.cells
            .get(&(strategy.to_string(), dataset.to_string()))
            .map(|v| v[metric.index()])
    }

    pub fn strategies(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.cells.keys().map(|k| &k.0).collect();
        set.into_iter().cloned().collect()
    }

    pub fn datasets(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.cells.keys().map(|k| &k.1).collect();
        set.into_iter().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Keeps only the named datasets.
    pub fn restrict(&self, datasets: &BTreeSet<String>) -> Self {
        Self {
            cells: self
                .cells
                .iter()
                .filter(|(k, _)| datasets.contains(&k.1))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }
}

/// When two mean AUBC values count as a tie.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TieRule {
    /// `|a - b| <= t`.
    Absolute(f64),
    /// `|a - b| <= t * max(|a|, |b|)`.
    Relative(f64),
}

impl Default for TieRule {
    fn default() -> Self {
        TieRule::Absolute(DEFAULT_TIE_THRESHOLD)
    }
}

impl TieRule {
    pub fn is_tie(self, a: f64, b: f64) -> bool {
        let diff = (a - b).abs();
        match self {
            TieRule::Absolute(t) => diff <= t,
            TieRule::Relative(t) => diff <= t * a.abs().max(b.abs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WtlRecord {
    pub strategy: String,
    pub metric: MetricKind,
    pub win: u64,
    pub tie: u64,
    pub loss: u64,
}

impl WtlRecord {
    pub fn total(&self) -> u64 {
        self.win + self.tie + self.loss
    }

    pub fn alpha(&self) -> u64 {
        2 * self.win + self.tie
    }
}

/// Win-tie-loss of every strategy against every other one on every dataset,
/// for one metric. A pair with a missing cell on a dataset is skipped for both.
pub fn pairwise_wtl(table: &AubcTable, metric: MetricKind, rule: TieRule) -> Result<Vec<WtlRecord>> {
    if table.is_empty() {
        return Err(Error::Analysis("empty AUBC table".into()));
    }
    let strategies = table.strategies();
    let datasets = table.datasets();
    let mut out = Vec::with_capacity(strategies.len());
    for a in &strategies {
        let mut rec = WtlRecord {
            strategy: a.clone(),
            metric,
            win: 0,
            tie: 0,
            loss: 0,
        };
        for d in &datasets {
            let Some(va) = table.get(a, d, metric) else { continue };
            for b in strategies.iter().filter(|b| *b != a) {
                let Some(vb) = table.get(b, d, metric) else { continue };
                if rule.is_tie(va, vb) {
                    rec.tie += 1;
                } else if va > vb {
                    rec.win += 1;
                } else {
                    rec.loss += 1;
                }
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// [`pairwise_wtl`] for all three metrics.
pub fn pairwise_wtl_all(table: &AubcTable, rule: TieRule) -> Result<Vec<WtlRecord>> {
    let mut out = Vec::new();
    for m in MetricKind::ALL {
        out.extend(pairwise_wtl(table, m, rule)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaScore {
    pub strategy: String,
    /// `2 * win + tie` per metric, in [`MetricKind::ALL`] order.
    pub alpha: [u64; 3],
    pub wtl: [(u64, u64, u64); 3],
    pub mean_alpha: f64,
    pub mean_win: f64,
}

impl AlphaScore {
    /// Mean α rounded to the nearest integer, as printed in ranking tables.
    pub fn rounded_alpha(&self) -> u64 {
        self.mean_alpha.round() as u64
    }
}

/// Ranks strategies by mean α over the three metrics (descending), then by
/// mean wins, then by name.
pub fn alpha_rank(records: &[WtlRecord]) -> Result<Vec<AlphaScore>> {
    let mut by: BTreeMap<&str, [Option<&WtlRecord>; 3]> = BTreeMap::new();
    for r in records {
        by.entry(r.strategy.as_str()).or_default()[r.metric.index()] = Some(r);
    }
    if by.is_empty() {
        return Err(Error::Analysis("no win-tie-loss records".into()));
    }
    let mut out = Vec::with_capacity(by.len());
    for (s, recs) in by {
        let mut alpha = [0; 3];
        let mut wtl = [(0, 0, 0); 3];
        for (m, r) in recs.iter().enumerate() {
            let r = r.ok_or_else(|| Error::Analysis(format!("`{s}` has no {} record", MetricKind::ALL[m])))?;
            alpha[m] = r.alpha();
            wtl[m] = (r.win, r.tie, r.loss);
        }
        out.push(AlphaScore {
            strategy: s.to_string(),
            alpha,
            wtl,
            mean_alpha: alpha.iter().sum::<u64>() as f64 / 3.0,
            mean_win: wtl.iter().map(|w| w.0).sum::<u64>() as f64 / 3.0,
        });
    }
    out.sort_by(|a, b| {
        b.mean_alpha
            .total_cmp(&a.mean_alpha)
            .then(b.mean_win.total_cmp(&a.mean_win))
            .then_with(|| a.strategy.cmp(&b.strategy))
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupRanking {
    pub group: &'static str,
    pub datasets: Vec<String>,
    pub ranking: Vec<AlphaScore>,
}

impl GroupRanking {
    /// 1-based position of a strategy in this group.
    pub fn position(&self, strategy: &str) -> Option<usize> {
        self.ranking.iter().position(|a| a.strategy == strategy).map(|p| p + 1)
    }
}

/// Re-ranks strategies on the datasets of each property group. Groups with
/// no dataset are omitted with a warning.
pub fn group_rank(table: &AubcTable, tags: &BTreeMap<String, DatasetTags>, rule: TieRule) -> Result<Vec<GroupRanking>> {
    let datasets = table.datasets();
    if let Some(d) = datasets.iter().find(|d| !tags.contains_key(*d)) {
        return Err(Error::Analysis(format!("dataset `{d}` has no property tags")));
    }
    let mut out = Vec::new();
    for group in GROUPS {
        let members: BTreeSet<String> = datasets.iter().filter(|d| tags[*d].in_group(group)).cloned().collect();
        if members.is_empty() {
            log::warn!("property group {group} has no dataset; omitted");
            continue;
        }
        let sub = table.restrict(&members);
        let ranking = alpha_rank(&pairwise_wtl_all(&sub, rule)?)?;
        out.push(GroupRanking {
            group,
            datasets: members.into_iter().collect(),
            ranking,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DifficultyRecord {
    pub dataset: String,
    pub bso: [f64; 3],
    pub mean: [f64; 3],
    pub max: [f64; 3],
    pub sd: [f64; 3],
    /// `BSO - mean`, averaged over the metrics.
    pub delta_a: f64,
    /// `BSO - max`, averaged over the metrics.
    pub delta_b: f64,
}

impl DifficultyRecord {
    pub fn from_parts(dataset: impl Into<String>, bso: [f64; 3], mean: [f64; 3], max: [f64; 3], sd: [f64; 3]) -> Self {
        let delta_a = (0..3).map(|m| bso[m] - mean[m]).sum::<f64>() / 3.0;
        let delta_b = (0..3).map(|m| bso[m] - max[m]).sum::<f64>() / 3.0;
        Self {
            dataset: dataset.into(),
            bso,
            mean,
            max,
            sd,
            delta_a,
            delta_b,
        }
    }

    fn mean_sd(&self) -> f64 {
        self.sd.iter().sum::<f64>() / 3.0
    }
}

/// Hardest first: larger Δb, then larger Δa, then larger mean SD.
pub fn difficulty_order(a: &DifficultyRecord, b: &DifficultyRecord) -> std::cmp::Ordering {
    b.delta_b
        .total_cmp(&a.delta_b)
        .then(b.delta_a.total_cmp(&a.delta_a))
        .then(b.mean_sd().total_cmp(&a.mean_sd()))
        .then_with(|| a.dataset.cmp(&b.dataset))
}

/// Per dataset: mean, max and sample SD of strategy mean AUBC against the
/// oracle's AUBC.
pub fn difficulty_table(table: &AubcTable, bso_means: &BTreeMap<String, [f64; 3]>) -> Result<Vec<DifficultyRecord>> {
    if table.is_empty() {
        return Err(Error::Analysis("empty AUBC table".into()));
    }
    let strategies = table.strategies();
    let mut out = Vec::new();
    for d in table.datasets() {
        let bso = *bso_means
            .get(&d)
            .ok_or_else(|| Error::Analysis(format!("no BSO result for dataset `{d}`")))?;
        let mut mean = [0.0; 3];
        let mut max = [0.0; 3];
        let mut sd = [0.0; 3];
        for m in MetricKind::ALL {
            let vals: Vec<f64> = strategies.iter().filter_map(|s| table.get(s, &d, m)).collect();
            let n = vals.len() as f64;
            let mu = vals.iter().sum::<f64>() / n;
            let i = m.index();
            mean[i] = mu;
            max[i] = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            sd[i] = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
        }
        out.push(DifficultyRecord::from_parts(d, bso, mean, max, sd));
    }
    out.sort_by(difficulty_order);
    Ok(out)
}

/// One row of the overall ranking table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankingRow {
    pub strategy: String,
    pub wtl_acc: String,
    pub wtl_auc: String,
    pub wtl_f1: String,
    pub avg_alpha: u64,
    pub comparisons: u64,
    /// Rank per property group, `None` when the group was omitted.
    pub group_ranks: Vec<Option<usize>>,
}

pub fn ranking_rows(overall: &[AlphaScore], groups: &[GroupRanking]) -> Vec<RankingRow> {
    let fmt = |w: (u64, u64, u64)| format!("{}-{}-{}", w.0, w.1, w.2);
    overall
        .iter()
        .map(|a| RankingRow {
            strategy: a.strategy.clone(),
            wtl_acc: fmt(a.wtl[0]),
            wtl_auc: fmt(a.wtl[1]),
            wtl_f1: fmt(a.wtl[2]),
            avg_alpha: a.rounded_alpha(),
            comparisons: a.wtl[0].0 + a.wtl[0].1 + a.wtl[0].2,
            group_ranks: GROUPS
                .iter()
                .map(|g| {
                    groups
                        .iter()
                        .find(|r| r.group == *g)
                        .and_then(|r| r.position(&a.strategy))
                })
                .collect(),
        })
        .collect()
}

fn ranking_header() -> Vec<String> {
    let mut h: Vec<String> = ["strategy", "wtl_acc", "wtl_auc", "wtl_f1", "avg_alpha", "comparisons"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(GROUPS.iter().map(|g| format!("rank_{g}")));
    h
}

fn ranking_fields(r: &RankingRow) -> Vec<String> {
    let mut f = vec![
        r.strategy.clone(),
        r.wtl_acc.clone(),
        r.wtl_auc.clone(),
        r.wtl_f1.clone(),
        r.avg_alpha.to_string(),
        r.comparisons.to_string(),
    ];
    f.extend(
        r.group_ranks
            .iter()
            .map(|g| g.map_or_else(|| "-".to_string(), |p| p.to_string())),
    );
    f
}

pub fn write_ranking_csv(path: impl AsRef<Path>, rows: &[RankingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ranking_header())?;
    for r in rows {
        w.write_record(ranking_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

const DIFFICULTY_HEADER: [&str; 15] = [
    "dataset", "bso_acc", "mean_acc", "max_acc", "sd_acc", "bso_auc", "mean_auc", "max_auc", "sd_auc", "bso_f1",
    "mean_f1", "max_f1", "sd_f1", "delta_a", "delta_b",
];

fn difficulty_fields(r: &DifficultyRecord) -> Vec<String> {
    let mut f = vec![r.dataset.clone()];
    for m in 0..3 {
        for v in [r.bso[m], r.mean[m], r.max[m], r.sd[m]] {
            f.push(format!("{v:.3}"));
        }
    }
    f.push(format!("{:.3}", r.delta_a));
    f.push(format!("{:.3}", r.delta_b));
    f
}

pub fn write_difficulty_csv(path: impl AsRef<Path>, rows: &[DifficultyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(DIFFICULTY_HEADER)?;
    for r in rows {
        w.write_record(difficulty_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Left-aligned first column, right-aligned rest, two spaces between columns.
fn align(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let mut line = String::new();
        for (i, (c, w)) in r.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(line, "{c:<w$}");
            } else {
                let _ = write!(line, "  {c:>w$}");
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn format_ranking_text(rows: &[RankingRow]) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(ranking_fields).collect();
    align(&ranking_header(), &body)
}

pub fn format_difficulty_text(rows: &[DifficultyRecord]) -> String {
    let header: Vec<String> = DIFFICULTY_HEADER.iter().map(|s| s.to_string()).collect();
    let body: Vec<Vec<String>> = rows.iter().map(difficulty_fields).collect();
    align(&header, &body)
}
