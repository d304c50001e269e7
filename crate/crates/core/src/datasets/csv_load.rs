use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::{Dataset, Origin};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Column layout of a CSV dataset file.
#[derive(Clone, Debug)]
pub struct CsvSchema {
    pub name: String,
    pub origin: Origin,
    /// Zero-based label column; `None` means the last column.
    pub label_col: Option<usize>,
    /// `None` auto-detects a header: the first row is a header if any of its
    /// feature cells is not a number.
    pub has_header: Option<bool>,
}

impl CsvSchema {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            origin: Origin::Real,
            label_col: None,
            has_header: None,
        }
    }
}

/// What happened while loading: the label mapping in particular.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LoadReport {
    pub path: String,
    pub rows: usize,
    pub features: usize,
    pub header: bool,
    /// `label_mapping[k]` is the original label that became class `k`.
    pub label_mapping: Vec<String>,
}

/// Loads a dataset. Original labels are sorted (numerically when they all parse
/// as numbers, lexicographically otherwise) and mapped to `0..K`.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let err = |reason: String| Error::Load {
        path: shown.clone(),
        reason,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;

    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(format!("line {}: {e}", i + 1)))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        records.push((i + 1, rec));
    }
    if records.is_empty() {
        return Err(err("file has no rows".into()));
    }

    let width = records[0].1.len();
    if width < 2 {
        return Err(err("need at least one feature column and a label column".into()));
    }
    let label_col = schema.label_col.unwrap_or(width - 1);
    if label_col >= width {
        return Err(err(format!(
            "label column {label_col} out of range for {width} columns"
        )));
    }

    let header = match schema.has_header {
        Some(h) => h,
        None => records[0]
            .1
            .iter()
            .enumerate()
            .any(|(c, cell)| c != label_col && cell.parse::<f64>().is_err()),
    };
    let body = if header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(err("file has a header but no data rows".into()));
    }

    let d = width - 1;
    let mut data = Vec::with_capacity(body.len() * d);
    let mut raw_labels = Vec::with_capacity(body.len());
    for (line, rec) in body {
        if rec.len() != width {
            return Err(err(format!(
                "row {line}: expected {width} columns, found {}",
                rec.len()
            )));
        }
        for (c, cell) in rec.iter().enumerate() {
            if c == label_col {
                if cell.is_empty() {
                    return Err(err(format!("row {line}, column {}: empty label", c + 1)));
                }
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                err(format!(
                    "row {line}, column {}: non-numeric feature value `{cell}`",
                    c + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(err(format!("row {line}, column {}: non-finite value `{cell}`", c + 1)));
            }
            data.push(v);
        }
    }

    let mapping = label_mapping(&raw_labels);
    if mapping.len() < 2 {
        return Err(err(format!(
            "only one class (`{}`) present",
            mapping.keys().next().cloned().unwrap_or_default()
        )));
    }
    let labels: Vec<usize> = raw_labels.iter().map(|l| mapping[l]).collect();
    let mut inverse = vec![String::new(); mapping.len()];
    for (label, &k) in &mapping {
        inverse[k] = label.clone();
    }

    let features = Matrix::from_vec(body.len(), d, data)?;
    let ds = Dataset::new(schema.name.clone(), features, labels, schema.origin)?;
    let report = LoadReport {
        path: shown.clone(),
        rows: body.len(),
        features: d,
        header,
        label_mapping: inverse,
    };
    Ok((ds, report))
}

fn label_mapping(raw: &[String]) -> BTreeMap<String, usize> {
    let mut distinct: Vec<&String> = raw.iter().collect();
    distinct.sort();
    distinct.dedup();
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
    match numeric {
        Some(values) => {
            let mut pairs: Vec<(f64, &String)> = values.into_iter().zip(distinct).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            pairs
                .into_iter()
                .enumerate()
                .map(|(k, (_, s))| (s.clone(), k))
                .collect()
        }
        None => distinct.into_iter().enumerate().map(|(k, s)| (s.clone(), k)).collect(),
    }
}
