use super::{QueryContext, QuerySelection, Strategy, StrategyId};
use crate::error::Result;
use crate::matrix::{sq_dist, Matrix};

/// Greedy k-center (core-set) selection: each pick is the unlabeled point
/// farthest from the labeled points and the picks so far.
pub struct KCenter {
    id: StrategyId,
}

impl KCenter {
    pub fn new(id: StrategyId) -> Self {
        Self { id }
    }
}

/// Largest distance from any of `points` to its nearest center.
pub fn covering_radius(x: &Matrix, centers: &[usize], points: &[usize]) -> f64 {
    points
        .iter()
        .map(|&p| {
            centers
                .iter()
                .map(|&c| sq_dist(x.row(p), x.row(c)))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

pub(crate) fn greedy_k_center(x: &Matrix, centers: &[usize], candidates: &[usize], s: usize) -> Vec<usize> {
    let mut min_d: Vec<f64> = candidates
        .iter()
        .map(|&p| {
            centers
                .iter()
                .map(|&c| sq_dist(x.row(p), x.row(c)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut taken = vec![false; candidates.len()];
    let mut chosen = Vec::with_capacity(s);
    for _ in 0..s {
        let mut best: Option<usize> = None;
        for k in 0..candidates.len() {
            if taken[k] {
                continue;
            }
            // candidates are sorted, so strict comparison keeps the lowest index on ties
            if best.is_none_or(|b| min_d[k] > min_d[b]) {
                best = Some(k);
            }
        }
        let Some(b) = best else { break };
        taken[b] = true;
        chosen.push(candidates[b]);
        let pb = x.row(candidates[b]);
        for k in 0..candidates.len() {
            if !taken[k] {
                min_d[k] = min_d[k].min(sq_dist(x.row(candidates[k]), pb));
            }
        }
    }
    chosen
}

impl Strategy for KCenter {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        Ok(QuerySelection::new(greedy_k_center(
            ctx.x,
            ctx.labeled,
            ctx.unlabeled,
            ctx.batch_size,
        )))
    }
}
