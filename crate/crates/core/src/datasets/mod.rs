//! Datasets: CSV ingestion, synthetic generators, property tags and trial splits.

mod csv_load;
mod registry;
mod split;
mod synthetic;

pub use csv_load::{load_csv, CsvSchema, LoadReport};
pub use registry::{DatasetRegistry, DatasetSource, RegistryEntry, DEFAULT_GENERATOR_SEED};
pub use split::{make_split, SplitSpec, TrialSplit};
pub use synthetic::{generate_gaussian_clouds, generate_xor_checkerboard, SyntheticKind};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Smallest dataset the experiment protocol accepts: 20 initial labels must fit
/// inside a 60% training split.
pub const MIN_PROTOCOL_SAMPLES: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Real,
    Synthetic,
}

/// A labelled feature table. Labels are contiguous integers in `0..k_classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub k_classes: usize,
    pub origin: Origin,
}

impl Dataset {
    /// Validates and builds a dataset. `k_classes` is inferred as `max(label) + 1`.
    pub fn new(name: impl Into<String>, features: Matrix, labels: Vec<usize>, origin: Origin) -> Result<Self> {
        let name = name.into();
        let bad = |reason: String| Error::InvalidDataset {
            name: name.clone(),
            reason,
        };
        if features.rows() != labels.len() {
            return Err(bad(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if features.cols() == 0 {
            return Err(bad("no feature columns".into()));
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos / features.cols(), pos % features.cols());
            return Err(bad(format!("non-finite feature at row {r}, column {c}")));
        }
        let k_classes = labels.iter().max().map_or(0, |m| m + 1);
        if k_classes < 2 {
            return Err(bad("fewer than two classes".into()));
        }
        let mut counts = vec![0usize; k_classes];
        for &y in &labels {
            counts[y] += 1;
        }
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(bad(format!("labels are not contiguous: class {missing} is empty")));
        }
        Ok(Self {
            name,
            features,
            labels,
            k_classes,
            origin,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Checks the extra size requirement imposed by the experiment protocol.
    pub fn check_protocol_size(&self) -> Result<()> {
        if self.n_samples() < MIN_PROTOCOL_SAMPLES {
            return Err(Error::InvalidDataset {
                name: self.name.clone(),
                reason: format!(
                    "{} samples; the protocol needs at least {MIN_PROTOCOL_SAMPLES}",
                    self.n_samples()
                ),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassArity {
    /// Binary, K = 2.
    B,
    /// Multi-class, K > 2.
    M,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DimClass {
    /// d < 50
    LD,
    /// d >= 50
    HD,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScaleClass {
    /// n < 1000
    SC,
    /// n >= 1000
    LC,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DatasetTags {
    pub binary_or_multi: ClassArity,
    pub dim_class: DimClass,
    pub scale_class: ScaleClass,
    pub origin: Origin,
}

pub const HIGH_DIM_THRESHOLD: usize = 50;
pub const LARGE_SCALE_THRESHOLD: usize = 1000;

impl DatasetTags {
    pub fn from_shape(d: usize, n: usize, k: usize, origin: Origin) -> Self {
        Self {
            binary_or_multi: if k == 2 { ClassArity::B } else { ClassArity::M },
            dim_class: if d < HIGH_DIM_THRESHOLD {
                DimClass::LD
            } else {
                DimClass::HD
            },
            scale_class: if n < LARGE_SCALE_THRESHOLD {
                ScaleClass::SC
            } else {
                ScaleClass::LC
            },
            origin,
        }
    }

    /// Parses the `R + B + LD + SC` notation (any order, `+` separated).
    pub fn parse(s: &str) -> Result<Self> {
        let mut arity = None;
        let mut dim = None;
        let mut scale = None;
        let mut origin = None;
        for tok in s.split('+').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "B" => arity = Some(ClassArity::B),
                "M" => arity = Some(ClassArity::M),
                "LD" => dim = Some(DimClass::LD),
                "HD" => dim = Some(DimClass::HD),
                "SC" => scale = Some(ScaleClass::SC),
                "LC" => scale = Some(ScaleClass::LC),
                "R" => origin = Some(Origin::Real),
                "S" => origin = Some(Origin::Synthetic),
                other => {
                    return Err(Error::InvalidArgument(format!("unknown tag `{other}`")));
                }
            }
        }
        match (arity, dim, scale, origin) {
            (Some(binary_or_multi), Some(dim_class), Some(scale_class), Some(origin)) => Ok(Self {
                binary_or_multi,
                dim_class,
                scale_class,
                origin,
            }),
            _ => Err(Error::InvalidArgument(format!("incomplete tag string `{s}`"))),
        }
    }

    /// True if the tag set belongs to the named property group (`B`, `M`, `R`, `S`, `LD`, `HD`, `SC`, `LC`).
    pub fn in_group(&self, group: &str) -> bool {
        match group {
            "B" => self.binary_or_multi == ClassArity::B,
            "M" => self.binary_or_multi == ClassArity::M,
            "R" => self.origin == Origin::Real,
            "S" => self.origin == Origin::Synthetic,
            "LD" => self.dim_class == DimClass::LD,
            "HD" => self.dim_class == DimClass::HD,
            "SC" => self.scale_class == ScaleClass::SC,
            "LC" => self.scale_class == ScaleClass::LC,
            _ => false,
        }
    }
}

impl fmt::Display for DatasetTags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let origin = match self.origin {
            Origin::Real => "R",
            Origin::Synthetic => "S",
        };
        write!(
            f,
            "{origin} + {:?} + {:?} + {:?}",
            self.binary_or_multi, self.dim_class, self.scale_class
        )
    }
}

pub fn derive_tags(ds: &Dataset) -> DatasetTags {
    DatasetTags::from_shape(ds.n_features(), ds.n_samples(), ds.k_classes, ds.origin)
}
