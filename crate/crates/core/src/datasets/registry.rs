use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_csv, CsvSchema, Dataset, LoadReport, Origin, SyntheticKind};
use crate::error::{Error, Result};

/// One entry of the dataset registry file.
///
/// ```json
/// { "iris": { "path": "iris.csv", "origin": "real" },
///   "gcloudb": { "generator": "gcloudb", "n": 1000, "seed": 1 } }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_col: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Resolved description of where a dataset comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        origin: Origin,
        label_col: Option<usize>,
    },
    Synthetic {
        kind: SyntheticKind,
        n: usize,
        seed: u64,
    },
}

/// Seed used for the built-in synthetic datasets when none is given.
pub const DEFAULT_GENERATOR_SEED: u64 = 2020;

impl DatasetSource {
    pub fn from_entry(name: &str, entry: &RegistryEntry, base_dir: &Path) -> Result<Self> {
        match (&entry.path, &entry.generator) {
            (Some(_), Some(_)) => Err(Error::InvalidArgument(format!(
                "dataset `{name}` sets both `path` and `generator`"
            ))),
            (Some(path), None) => Ok(DatasetSource::Csv {
                path: if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                },
                origin: entry.origin.unwrap_or(Origin::Real),
                label_col: entry.label_col,
            }),
            (None, generator) => {
                let g = generator.as_deref().unwrap_or(name);
                let kind = SyntheticKind::parse(g).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "dataset `{name}` has no path and `{g}` is not a known generator"
                    ))
                })?;
                Ok(DatasetSource::Synthetic {
                    kind,
                    n: entry.n.unwrap_or_else(|| kind.default_size()),
                    seed: entry.seed.unwrap_or(DEFAULT_GENERATOR_SEED),
                })
            }
        }
    }

    pub fn load(&self, name: &str) -> Result<(Dataset, Option<LoadReport>)> {
        match self {
            DatasetSource::Csv {
                path,
                origin,
                label_col,
            } => {
                let schema = CsvSchema {
                    name: name.to_string(),
                    origin: *origin,
                    label_col: *label_col,
                    has_header: None,
                };
                let (ds, report) = load_csv(path, &schema)?;
                Ok((ds, Some(report)))
            }
            DatasetSource::Synthetic { kind, n, seed } => {
                let mut ds = kind.generate(*n, *seed)?;
                ds.name = name.to_string();
                Ok((ds, None))
            }
        }
    }
}

/// Name → source mapping read from a JSON registry file.
#[derive(Clone, Debug, Default)]
pub struct DatasetRegistry {
    pub entries: BTreeMap<String, RegistryEntry>,
    pub base_dir: PathBuf,
}

impl DatasetRegistry {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Load {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let entries: BTreeMap<String, RegistryEntry> = serde_json::from_str(&text)?;
        Ok(Self {
            entries,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    /// Looks a name up in the registry, falling back to the built-in generators.
    pub fn source(&self, name: &str) -> Result<DatasetSource> {
        match self.entries.get(name) {
            Some(entry) => DatasetSource::from_entry(name, entry, &self.base_dir),
            None => match SyntheticKind::parse(name) {
                Some(kind) => Ok(DatasetSource::Synthetic {
                    kind,
                    n: kind.default_size(),
                    seed: DEFAULT_GENERATOR_SEED,
                }),
                None => Err(Error::InvalidArgument(format!("unknown dataset `{name}`"))),
            },
        }
    }
}
