//! Query strategies.
//!
//! A strategy sees the training pool only: the [`QueryContext`] carries the
//! pool features, the labels revealed so far and the evaluator model fitted on
//! them. Indices are local to the pool. Strategy objects live for one trial
//! and may cache pool-level structures (distance matrices, trees, bandit
//! state) between calls.

mod albl;
mod cluster;
mod density;
mod diverse;
mod hier;
mod hintsvm;
mod id;
mod kcenter;
mod mmd;
mod quire;
mod uncertainty;
mod vr;

use std::collections::BTreeSet;

pub use albl::{Albl, Exp4P};
pub use cluster::{average_linkage, kmeans, Dendrogram, KMeans};
pub use density::{Dwus, Graph};
pub use diverse::{InfoDiv, Mcm};
pub use hier::Hier;
pub use hintsvm::HintSvm;
pub use id::{StrategyFamily, StrategyId};
pub use kcenter::{covering_radius, KCenter};
pub use mmd::{mmd2, MarginMmd};
pub use quire::{quire_scores, Quire};
pub use uncertainty::{entropy, margin_scores, qbc_scores, uncertainty_scores, Committee, Uniform, Us, UsVariant};
pub use vr::{Fisher, Vr};

use crate::classifiers::{ClassifierSpec, TrainedModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Everything a strategy may read when choosing the next batch.
#[derive(Clone, Copy)]
pub struct QueryContext<'a> {
    /// Pool features (training split only).
    pub x: &'a Matrix,
    /// Revealed labels, `Some` exactly on `labeled`.
    pub labels: &'a [Option<usize>],
    pub k_classes: usize,
    /// Sorted.
    pub labeled: &'a [usize],
    /// Sorted.
    pub unlabeled: &'a [usize],
    pub batch_size: usize,
    /// Queries made so far in this trial.
    pub step: usize,
    /// Total queries the trial will make.
    pub budget: usize,
    /// Seed fixed for the whole trial (pool-level structures).
    pub trial_seed: u64,
    /// Seed for this query step.
    pub step_seed: u64,
    pub evaluator: &'a ClassifierSpec,
    /// Evaluator fitted on `labeled`.
    pub model: &'a TrainedModel,
}

impl<'a> QueryContext<'a> {
    pub fn validate(&self) -> Result<()> {
        let n = self.x.rows();
        if self.labels.len() != n {
            return Err(Error::InvalidArgument("label vector does not match the pool".into()));
        }
        let sorted = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        if !sorted(self.labeled) || !sorted(self.unlabeled) {
            return Err(Error::InvalidArgument("index sets must be sorted and distinct".into()));
        }
        if self.labeled.len() + self.unlabeled.len() > n || self.labeled.iter().chain(self.unlabeled).any(|&i| i >= n) {
            return Err(Error::InvalidArgument("index outside the pool".into()));
        }
        let (mut a, mut b) = (0, 0);
        while a < self.labeled.len() && b < self.unlabeled.len() {
            match self.labeled[a].cmp(&self.unlabeled[b]) {
                std::cmp::Ordering::Equal => {
                    return Err(Error::InvalidArgument(format!(
                        "index {} is both labeled and unlabeled",
                        self.labeled[a]
                    )))
                }
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
            }
        }
        for (i, l) in self.labels.iter().enumerate() {
            if l.is_some() != self.labeled.binary_search(&i).is_ok() {
                return Err(Error::Firewall(format!(
                    "label visibility of pool index {i} does not match the labeled set"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if self.batch_size > self.unlabeled.len() {
            return Err(Error::PoolExhausted {
                requested: self.batch_size,
                available: self.unlabeled.len(),
            });
        }
        Ok(())
    }

    /// Labeled features and labels, in `labeled` order.
    pub fn labeled_data(&self) -> (Matrix, Vec<usize>) {
        let x = self.x.select_rows(self.labeled);
        let y = self
            .labeled
            .iter()
            .map(|&i| self.labels[i].expect("labeled index has a label"))
            .collect();
        (x, y)
    }

    pub fn unlabeled_x(&self) -> Matrix {
        self.x.select_rows(self.unlabeled)
    }

    /// Evaluator probabilities on the unlabeled points, one row each.
    pub fn unlabeled_proba(&self) -> Result<Matrix> {
        self.model.predict_proba(&self.unlabeled_x())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuerySelection {
    /// Pool indices, in pick order.
    pub chosen: Vec<usize>,
    /// Optional diagnostics, one per unlabeled candidate.
    pub scores: Option<Vec<f64>>,
}

impl QuerySelection {
    pub fn new(chosen: Vec<usize>) -> Self {
        Self { chosen, scores: None }
    }

    pub fn with_scores(chosen: Vec<usize>, scores: Vec<f64>) -> Self {
        Self {
            chosen,
            scores: Some(scores),
        }
    }
}

pub trait Strategy: Send {
    fn id(&self) -> &StrategyId;
    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection>;
}

/// Validates the context, runs the strategy and checks its output is `S`
/// distinct unlabeled indices.
pub fn select_checked(strategy: &mut dyn Strategy, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
    ctx.validate()?;
    if strategy.id().family.binary_only() && ctx.k_classes != 2 {
        return Err(Error::UnsupportedTask {
            strategy: strategy.id().to_string(),
            reason: format!("needs a binary problem, dataset has {} classes", ctx.k_classes),
        });
    }
    let sel = strategy.select(ctx)?;
    if sel.chosen.len() != ctx.batch_size {
        return Err(Error::Firewall(format!(
            "{} returned {} indices for a batch of {}",
            strategy.id(),
            sel.chosen.len(),
            ctx.batch_size
        )));
    }
    let distinct: BTreeSet<usize> = sel.chosen.iter().copied().collect();
    if distinct.len() != sel.chosen.len() {
        return Err(Error::Firewall(format!("{} returned duplicate indices", strategy.id())));
    }
    if let Some(bad) = sel.chosen.iter().find(|i| ctx.unlabeled.binary_search(i).is_err()) {
        return Err(Error::Firewall(format!(
            "{} selected index {bad} outside the unlabeled pool",
            strategy.id()
        )));
    }
    Ok(sel)
}

/// Creates a fresh per-trial strategy object.
pub fn build_strategy(id: &StrategyId) -> Result<Box<dyn Strategy>> {
    id.validate()?;
    let id = id.clone();
    Ok(match id.family {
        StrategyFamily::Uniform => Box::new(Uniform::new(id)),
        StrategyFamily::UsLc => Box::new(Us::new(id, UsVariant::Lc)),
        StrategyFamily::UsMargin => Box::new(Us::new(id, UsVariant::Margin)),
        StrategyFamily::UsEntropy => Box::new(Us::new(id, UsVariant::Entropy)),
        StrategyFamily::QbcVe => Box::new(Committee::new(id, false)),
        StrategyFamily::QbcKl => Box::new(Committee::new(id, true)),
        StrategyFamily::Dwus => Box::new(Dwus::new(id)),
        StrategyFamily::Kcenter => Box::new(KCenter::new(id)),
        StrategyFamily::Graph => Box::new(Graph::new(id)),
        StrategyFamily::MarginMmd => Box::new(MarginMmd::new(id)),
        StrategyFamily::Hier => Box::new(Hier::new(id)),
        StrategyFamily::Infodiv => Box::new(InfoDiv::new(id)),
        StrategyFamily::Mcm => Box::new(Mcm::new(id)),
        StrategyFamily::Quire => Box::new(Quire::new(id)),
        StrategyFamily::Albl => Box::new(Albl::new(id)),
        StrategyFamily::Hintsvm => Box::new(HintSvm::new(id)),
        StrategyFamily::Vr => Box::new(Vr::new(id)),
    })
}

/// The `s` candidates with the highest score; ties go to the lower index.
pub fn top_s(candidates: &[usize], scores: &[f64], s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(candidates[a].cmp(&candidates[b])));
    order.into_iter().take(s).map(|k| candidates[k]).collect()
}

/// The `s` candidates with the lowest score; ties go to the lower index.
pub fn bottom_s(candidates: &[usize], scores: &[f64], s: usize) -> Vec<usize> {
    let neg: Vec<f64> = scores.iter().map(|v| -v).collect();
    top_s(candidates, &neg, s)
}

/// Pairwise Euclidean distances between all rows.
pub(crate) fn distance_matrix(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = crate::matrix::sq_dist(x.row(i), x.row(j)).sqrt();
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::classifiers::{fit, ClassifierKind};

    /// Owns everything a [`QueryContext`] borrows.
    pub struct Fixture {
        pub x: Matrix,
        pub y: Vec<usize>,
        pub k: usize,
        pub labels: Vec<Option<usize>>,
        pub labeled: Vec<usize>,
        pub unlabeled: Vec<usize>,
        pub spec: ClassifierSpec,
        pub model: TrainedModel,
        pub batch: usize,
        pub step: usize,
        pub budget: usize,
        pub trial_seed: u64,
        pub step_seed: u64,
    }

    impl Fixture {
        pub fn new(x: Matrix, y: Vec<usize>, labeled: &[usize]) -> Self {
            Self::with_spec(x, y, labeled, ClassifierSpec::new(ClassifierKind::SvmRbf))
        }

        pub fn with_spec(x: Matrix, y: Vec<usize>, labeled: &[usize], spec: ClassifierSpec) -> Self {
            let k = y.iter().max().map(|m| m + 1).unwrap_or(2).max(2);
            let mut labeled = labeled.to_vec();
            labeled.sort_unstable();
            let unlabeled: Vec<usize> = (0..x.rows()).filter(|i| labeled.binary_search(i).is_err()).collect();
            let labels: Vec<Option<usize>> = (0..x.rows())
                .map(|i| labeled.binary_search(&i).ok().map(|_| y[i]))
                .collect();
            let xl = x.select_rows(&labeled);
            let yl: Vec<usize> = labeled.iter().map(|&i| y[i]).collect();
            let model = fit(&spec, &xl, &yl, k).expect("fixture model");
            Self {
                x,
                y,
                k,
                labels,
                labeled,
                unlabeled,
                spec,
                model,
                batch: 1,
                step: 0,
                budget: 10,
                trial_seed: 1,
                step_seed: 2,
            }
        }

        pub fn batch(mut self, s: usize) -> Self {
            self.batch = s;
            self
        }

        pub fn ctx(&self) -> QueryContext<'_> {
            QueryContext {
                x: &self.x,
                labels: &self.labels,
                k_classes: self.k,
                labeled: &self.labeled,
                unlabeled: &self.unlabeled,
                batch_size: self.batch,
                step: self.step,
                budget: self.budget,
                trial_seed: self.trial_seed,
                step_seed: self.step_seed,
                evaluator: &self.spec,
                model: &self.model,
            }
        }

        /// Reveals `idx` and refits the evaluator.
        pub fn reveal(&mut self, idx: &[usize]) {
            let mut lab = self.labeled.clone();
            lab.extend_from_slice(idx);
            let spec = self.spec;
            let batch = self.batch;
            let mut next = Self::with_spec(self.x.clone(), self.y.clone(), &lab, spec);
            next.batch = batch;
            next.step = self.step + idx.len();
            next.budget = self.budget;
            next.trial_seed = self.trial_seed;
            next.step_seed = self.step_seed + 1;
            *self = next;
        }
    }

    /// Two Gaussian-ish blobs in the plane, deterministic.
    pub fn two_blobs(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % 2;
            let m = if c == 0 { -1.0 } else { 1.0 };
            rows.push([m + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            y.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    /// Runs every check the protocol applies to a selection.
    pub fn assert_valid(sel: &QuerySelection, f: &Fixture) {
        assert_eq!(sel.chosen.len(), f.batch);
        let set: BTreeSet<usize> = sel.chosen.iter().copied().collect();
        assert_eq!(set.len(), f.batch);
        assert!(sel.chosen.iter().all(|i| f.unlabeled.binary_search(i).is_ok()));
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn top_and_bottom_break_ties_by_index() {
        let c = [7, 3, 5, 9];
        let s = [1.0, 2.0, 2.0, 0.5];
        assert_eq!(top_s(&c, &s, 2), vec![3, 5]);
        assert_eq!(bottom_s(&c, &s, 2), vec![9, 7]);
        assert_eq!(top_s(&[4, 2], &[1.0, 1.0], 1), vec![2]);
    }

    #[test]
    fn every_strategy_returns_a_valid_repeatable_batch() {
        let (x, y) = two_blobs(60, 3);
        let labeled: Vec<usize> = (0..10).collect();
        for family in StrategyFamily::ALL {
            for s in [1, 3] {
                let f = Fixture::new(x.clone(), y.clone(), &labeled).batch(s);
                let id = StrategyId::new(family, s);
                let a = select_checked(build_strategy(&id).unwrap().as_mut(), &f.ctx()).unwrap();
                let b = select_checked(build_strategy(&id).unwrap().as_mut(), &f.ctx()).unwrap();
                assert_valid(&a, &f);
                assert_eq!(a.chosen, b.chosen, "{id}");
            }
        }
    }

    #[test]
    fn batch_larger_than_pool_is_an_error() {
        let (x, y) = two_blobs(12, 1);
        let labeled: Vec<usize> = (0..10).collect();
        let f = Fixture::new(x, y, &labeled).batch(3);
        let mut s = build_strategy(&StrategyId::new(StrategyFamily::Uniform, 3)).unwrap();
        assert!(matches!(
            select_checked(s.as_mut(), &f.ctx()),
            Err(Error::PoolExhausted {
                requested: 3,
                available: 2
            })
        ));
    }

    #[test]
    fn binary_only_families_reject_multiclass() {
        let (x, _) = two_blobs(30, 2);
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let labeled: Vec<usize> = (0..9).collect();
        let f = Fixture::new(x, y, &labeled);
        for family in [StrategyFamily::Albl, StrategyFamily::Hintsvm] {
            let mut s = build_strategy(&StrategyId::new(family, 1)).unwrap();
            assert!(matches!(
                select_checked(s.as_mut(), &f.ctx()),
                Err(Error::UnsupportedTask { .. })
            ));
        }
    }

    #[test]
    fn context_rejects_leaked_labels() {
        let (x, y) = two_blobs(20, 1);
        let labeled: Vec<usize> = (0..6).collect();
        let mut f = Fixture::new(x, y, &labeled);
        f.labels[10] = Some(1);
        assert!(matches!(f.ctx().validate(), Err(Error::Firewall(_))));
    }
}
