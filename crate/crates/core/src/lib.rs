//! Pool-based active learning benchmark engine.
//!
//! The crate is organised bottom-up:
//!
//! * [`datasets`]: CSV ingestion, synthetic generators, property tags, seeded trial splits
//! * [`classifiers`]: logistic regression, SMO-trained SVMs with Platt scaling, Nyström kernel logistic regression
//! * [`strategies`]: the query strategies, behind one [`strategies::Strategy`] trait
//! * [`metrics`]: accuracy / AUC / F1 and the area under the budget curve (AUBC)
//! * [`protocol`]: the repeated-trial experiment loop with fair-comparison seeding
//! * [`bso`]: the beam-search oracle that reads the test set on purpose
//! * [`analysis`]: win-tie-loss, α ranking, property-group rankings and dataset difficulty

pub mod analysis;
pub mod bso;
pub mod classifiers;
pub mod datasets;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod protocol;
pub mod seed;
pub mod strategies;

pub use error::{Error, Result};
pub use matrix::Matrix;

pub use datasets::{derive_tags, make_split, Dataset, DatasetTags, Origin, SplitSpec, TrialSplit};
pub use metrics::{aubc, BudgetCurve, MetricKind};
pub use strategies::{StrategyFamily, StrategyId};
