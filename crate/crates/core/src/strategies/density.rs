//! Strategies that weigh uncertainty by local density: density-weighted
//! uncertainty sampling and the k-NN graph schedule.

use super::uncertainty::{uncertainty_scores, UsVariant};
use super::{top_s, QueryContext, QuerySelection, Strategy, StrategyId};
use crate::classifiers::kernel::median_pairwise_distance;
use crate::error::Result;
use crate::matrix::{sq_dist, Matrix};

/// Entropy times `(mean similarity to the unlabeled pool)^beta`.
pub struct Dwus {
    id: StrategyId,
    beta: f64,
    sim: Option<Matrix>,
}

impl Dwus {
    pub fn new(id: StrategyId) -> Self {
        let beta = id.param_f64("beta", 1.0);
        Self { id, beta, sim: None }
    }
}

/// `exp(-|x - x'|^2 / (2 sigma^2))` with sigma the median pairwise distance.
pub(crate) fn similarity_matrix(x: &Matrix) -> Matrix {
    let sigma = median_pairwise_distance(x);
    let denom = 2.0 * sigma * sigma;
    let n = x.rows();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        s.set(i, i, 1.0);
        for j in i + 1..n {
            let v = (-sq_dist(x.row(i), x.row(j)) / denom).exp();
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    s
}

impl Strategy for Dwus {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let sim = self.sim.get_or_insert_with(|| similarity_matrix(ctx.x));
        let ent = uncertainty_scores(&ctx.unlabeled_proba()?, UsVariant::Entropy);
        let u = ctx.unlabeled.len() as f64;
        let scores: Vec<f64> = ctx
            .unlabeled
            .iter()
            .zip(&ent)
            .map(|(&i, &h)| {
                let row = sim.row(i);
                let dens = ctx.unlabeled.iter().map(|&j| row[j]).sum::<f64>() / u;
                h * dens.powf(self.beta)
            })
            .collect();
        let chosen = top_s(ctx.unlabeled, &scores, ctx.batch_size);
        Ok(QuerySelection::with_scores(chosen, scores))
    }
}

/// Symmetric k-NN graph with Gaussian edge weights.
#[derive(Clone, Debug)]
pub struct KnnGraph {
    pub edges: Vec<Vec<(usize, f64)>>,
}

impl KnnGraph {
    pub fn build(x: &Matrix, k: usize) -> Self {
        let n = x.rows();
        let k = k.min(n.saturating_sub(1));
        let mut nbrs: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            let mut d: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, sq_dist(x.row(i), x.row(j)).sqrt()))
                .collect();
            d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            d.truncate(k);
            total += d.iter().map(|p| p.1).sum::<f64>();
            nbrs.push(d);
        }
        let sigma = if n * k > 0 { total / (n * k) as f64 } else { 0.0 };
        let weight = |dist: f64| {
            if sigma > 0.0 {
                (-dist * dist / (2.0 * sigma * sigma)).exp()
            } else {
                1.0
            }
        };
        let mut edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, list) in nbrs.iter().enumerate() {
            for &(j, dist) in list {
                let w = weight(dist);
                if !edges[i].iter().any(|e| e.0 == j) {
                    edges[i].push((j, w));
                }
                if !edges[j].iter().any(|e| e.0 == i) {
                    edges[j].push((i, w));
                }
            }
        }
        for e in &mut edges {
            e.sort_by_key(|p| p.0);
        }
        Self { edges }
    }

    /// Mean edge weight per node.
    pub fn density(&self) -> Vec<f64> {
        self.edges
            .iter()
            .map(|e| {
                if e.is_empty() {
                    0.0
                } else {
                    e.iter().map(|p| p.1).sum::<f64>() / e.len() as f64
                }
            })
            .collect()
    }
}

/// Rank of each entry when sorted descending (0 = largest); ties by position.
fn descending_ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut rank = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

/// Blends density rank and uncertainty rank with the weight `t / B` moving
/// from density to uncertainty over the trial; each pick damps the density of
/// its graph neighbours by `(1 - w)` within the batch.
pub struct Graph {
    id: StrategyId,
    k: usize,
    graph: Option<(KnnGraph, Vec<f64>)>,
}

impl Graph {
    pub fn new(id: StrategyId) -> Self {
        let k = id.param_usize("k", 10);
        Self { id, k, graph: None }
    }
}

pub(crate) fn graph_select(
    graph: &KnnGraph,
    base_density: &[f64],
    candidates: &[usize],
    uncertainty: &[f64],
    beta: f64,
    s: usize,
) -> Vec<usize> {
    let mut density = base_density.to_vec();
    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut chosen = Vec::with_capacity(s);
    for _ in 0..s {
        let u: Vec<f64> = remaining.iter().map(|&k| uncertainty[k]).collect();
        let d: Vec<f64> = remaining.iter().map(|&k| density[candidates[k]]).collect();
        let ru = descending_ranks(&u);
        let rd = descending_ranks(&d);
        let mut best = 0;
        let mut best_score = f64::INFINITY;
        for pos in 0..remaining.len() {
            let score = beta * ru[pos] as f64 + (1.0 - beta) * rd[pos] as f64;
            if score < best_score {
                best_score = score;
                best = pos;
            }
        }
        let k = remaining.remove(best);
        let pick = candidates[k];
        chosen.push(pick);
        for &(j, w) in &graph.edges[pick] {
            density[j] *= 1.0 - w;
        }
    }
    chosen
}

impl Strategy for Graph {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let k = self.k;
        let (graph, density) = self.graph.get_or_insert_with(|| {
            let g = KnnGraph::build(ctx.x, k);
            let d = g.density();
            (g, d)
        });
        let unc = uncertainty_scores(&ctx.unlabeled_proba()?, UsVariant::Lc);
        let beta = if ctx.budget == 0 {
            1.0
        } else {
            (ctx.step as f64 / ctx.budget as f64).min(1.0)
        };
        let chosen = graph_select(graph, density, ctx.unlabeled, &unc, beta, ctx.batch_size);
        Ok(QuerySelection::with_scores(chosen, unc))
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{build_strategy, StrategyFamily};
    use super::*;

    #[test]
    fn dwus_with_beta_zero_is_entropy_sampling() {
        let (x, y) = two_blobs(40, 4);
        let labeled: Vec<usize> = (0..8).collect();
        let f = Fixture::new(x, y, &labeled).batch(3);
        let id: StrategyId = "dwus-3[beta=0]".parse().unwrap();
        let a = build_strategy(&id).unwrap().select(&f.ctx()).unwrap().chosen;
        let b = build_strategy(&StrategyId::new(StrategyFamily::UsEntropy, 3))
            .unwrap()
            .select(&f.ctx())
            .unwrap()
            .chosen;
        assert_eq!(a, b);
    }

    #[test]
    fn dwus_prefers_the_dense_point_at_equal_entropy() {
        // 10 points in a tight cluster around (0,0), one isolated point far away,
        // and a labelled pair placed symmetrically so both test points sit on the
        // boundary of a linear model.
        let mut rows: Vec<[f64; 2]> = Vec::new();
        for i in 0..10 {
            let a = i as f64 * 0.6;
            rows.push([0.05 * a.cos(), 5.0 + 0.05 * a.sin()]);
        }
        rows.push([0.0, -5.0]); // isolated
        rows.push([-1.0, 0.0]);
        rows.push([1.0, 0.0]);
        let x = Matrix::from_rows(&rows).unwrap();
        let mut y = vec![0; 13];
        y[12] = 1;
        let spec = crate::classifiers::ClassifierSpec::new(crate::classifiers::ClassifierKind::Logreg);
        let f = Fixture::with_spec(x, y, &[11, 12], spec);
        let proba = f.ctx().unlabeled_proba().unwrap();
        // the model depends on x1 only: cluster centre and isolated point share entropy
        let h = uncertainty_scores(&proba, UsVariant::Entropy);
        assert!((h[0] - h[10]).abs() < 1e-3);
        let mut d = Dwus::new(StrategyId::new(StrategyFamily::Dwus, 1));
        let pick = d.select(&f.ctx()).unwrap().chosen[0];
        assert!(pick < 10, "picked {pick}");
    }

    #[test]
    fn graph_endpoints() {
        let (x, _) = two_blobs(30, 9);
        let g = KnnGraph::build(&x, 5);
        let dens = g.density();
        let cands: Vec<usize> = (0..30).collect();
        let unc: Vec<f64> = (0..30).map(|i| ((i * 7) % 30) as f64).collect();
        let by_density = graph_select(&g, &dens, &cands, &unc, 0.0, 1)[0];
        assert_eq!(by_density, top_s(&cands, &dens, 1)[0]);
        let by_unc = graph_select(&g, &dens, &cands, &unc, 1.0, 1)[0];
        assert_eq!(by_unc, top_s(&cands, &unc, 1)[0]);
    }

    #[test]
    fn twin_density_drops_after_a_pick() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
        let g = KnnGraph::build(&x, 2);
        let dens = g.density();
        assert!(dens[1] > 0.0);
        // pure-density picks: 0 first (tie with 1, lower index), then the twin is damped
        let picks = graph_select(&g, &dens, &[0, 1, 2], &[0.0, 0.0, 0.0], 0.0, 2);
        assert_eq!(picks[0], 0);
        let w01 = g.edges[0].iter().find(|e| e.0 == 1).unwrap().1;
        assert_eq!(w01, 1.0);
        assert_eq!(picks[1], 2, "damped twin falls behind point 2");
    }

    #[test]
    fn knn_graph_is_symmetric() {
        let (x, _) = two_blobs(25, 3);
        let g = KnnGraph::build(&x, 4);
        for (i, e) in g.edges.iter().enumerate() {
            assert!(e.len() >= 4);
            for &(j, w) in e {
                let back = g.edges[j].iter().find(|p| p.0 == i).unwrap();
                assert_eq!(back.1, w);
            }
        }
    }
}
