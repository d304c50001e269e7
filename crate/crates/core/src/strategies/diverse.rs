//! Batch strategies that mix uncertainty with clustering for diversity.

use super::cluster::kmeans;
use super::uncertainty::margin_scores;
use super::{bottom_s, QueryContext, QuerySelection, Strategy, StrategyId};
use crate::classifiers::{fit, ClassifierKind, ClassifierSpec};
use crate::error::Result;
use crate::matrix::{sq_dist, Matrix};
use crate::seed::{derive_seed, rng_from_seed};

/// Most-uncertain-first (smallest margin) with a per-cluster quota: a pool
/// k-means cluster may contribute at most `ceil(S * share)` picks, where share
/// is its fraction of the unlabeled pool. Leftover slots are filled by
/// uncertainty alone.
pub struct InfoDiv {
    id: StrategyId,
    n_clusters: usize,
    assignment: Option<Vec<usize>>,
}

impl InfoDiv {
    pub fn new(id: StrategyId) -> Self {
        let n_clusters = id.param_usize("n_clusters", id.batch_size.max(10));
        Self {
            id,
            n_clusters,
            assignment: None,
        }
    }
}

/// `cluster_of[i]` is the cluster of pool index `i`.
pub(crate) fn quota_pick(cluster_of: &[usize], candidates: &[usize], margins: &[f64], s: usize) -> Vec<usize> {
    let n_clusters = cluster_of.iter().max().map_or(0, |m| m + 1);
    let mut share = vec![0usize; n_clusters];
    for &c in candidates {
        share[cluster_of[c]] += 1;
    }
    let u = candidates.len();
    let quota: Vec<usize> = share.iter().map(|&sz| (s * sz).div_ceil(u.max(1))).collect();
    let order = bottom_s(candidates, margins, candidates.len());
    let mut used = vec![0usize; n_clusters];
    let mut chosen = Vec::with_capacity(s);
    for &c in &order {
        if chosen.len() == s {
            break;
        }
        let cl = cluster_of[c];
        if used[cl] < quota[cl] {
            used[cl] += 1;
            chosen.push(c);
        }
    }
    for &c in &order {
        if chosen.len() == s {
            break;
        }
        if !chosen.contains(&c) {
            chosen.push(c);
        }
    }
    chosen
}

impl Strategy for InfoDiv {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let k = self.n_clusters;
        let assignment = self.assignment.get_or_insert_with(|| {
            let all: Vec<usize> = (0..ctx.x.rows()).collect();
            let mut rng = rng_from_seed(derive_seed(ctx.trial_seed, &["infodiv-kmeans".into()]));
            kmeans(ctx.x, &all, k, &mut rng).assignment
        });
        let margins = margin_scores(&ctx.unlabeled_proba()?);
        let chosen = quota_pick(assignment, ctx.unlabeled, &margins, ctx.batch_size);
        Ok(QuerySelection::with_scores(chosen, margins))
    }
}

/// Multi-class / margin-cluster sampling: cluster the unlabeled points inside
/// the SVM margin and take the point nearest each centroid.
pub struct Mcm {
    id: StrategyId,
}

impl Mcm {
    pub fn new(id: StrategyId) -> Self {
        Self { id }
    }
}

/// `|f(x)|` for binary models, `min_k |f_k(x)|` over the trained classes otherwise.
fn margin_distance(decision: &Matrix) -> Vec<f64> {
    decision
        .iter_rows()
        .map(|r| {
            r.iter()
                .filter(|v| v.is_finite())
                .map(|v| v.abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub(crate) fn mcm_pick(x: &Matrix, candidates: &[usize], dist: &[f64], s: usize, seed: u64) -> Vec<usize> {
    if s == 1 {
        return bottom_s(candidates, dist, 1);
    }
    let mut inside: Vec<usize> = candidates
        .iter()
        .zip(dist)
        .filter(|(_, &d)| d < 1.0)
        .map(|(&c, _)| c)
        .collect();
    if inside.len() < s {
        inside = bottom_s(candidates, dist, s);
        inside.sort_unstable();
    }
    let km = kmeans(x, &inside, s, &mut rng_from_seed(seed));
    let mut chosen: Vec<usize> = Vec::with_capacity(s);
    for c in 0..km.centroids.rows() {
        let centroid = km.centroids.row(c);
        let mut order: Vec<(f64, usize)> = inside.iter().map(|&i| (sq_dist(x.row(i), centroid), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some(&(_, i)) = order.iter().find(|(_, i)| !chosen.contains(i)) {
            chosen.push(i);
        }
    }
    // k-means may collapse duplicate centroids; refill by margin
    for i in bottom_s(candidates, dist, candidates.len()) {
        if chosen.len() == s {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    chosen
}

impl Strategy for Mcm {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let xu = ctx.unlabeled_x();
        let decision = match ctx.model.spec.kind {
            ClassifierKind::SvmLinear | ClassifierKind::SvmRbf => ctx.model.decision_values(&xu)?,
            _ => {
                let (xl, yl) = ctx.labeled_data();
                let spec = ClassifierSpec {
                    kind: ClassifierKind::SvmRbf,
                    ..*ctx.evaluator
                };
                fit(&spec, &xl, &yl, ctx.k_classes)?.decision_values(&xu)?
            }
        };
        let dist = margin_distance(&decision);
        let chosen = mcm_pick(ctx.x, ctx.unlabeled, &dist, ctx.batch_size, ctx.step_seed);
        Ok(QuerySelection::with_scores(chosen, dist))
    }
}
