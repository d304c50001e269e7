use rand::Rng as _;

use super::cluster::{average_linkage, Dendrogram};
use super::{QueryContext, QuerySelection, Strategy, StrategyId};
use crate::error::Result;
use crate::seed::{rng_from_seed, Rng};

/// Hierarchical sampling on an average-linkage tree of the pool.
///
/// The pruning starts at the root and splits a node while its labels disagree
/// and both children already hold a label. Nodes are drawn with probability
/// proportional to `size * impurity` (impurity `1 - max class fraction`, or 1
/// when the node has no labels yet), then a uniform unlabeled point inside.
pub struct Hier {
    id: StrategyId,
    tree: Option<Dendrogram>,
}

impl Hier {
    pub fn new(id: StrategyId) -> Self {
        Self { id, tree: None }
    }
}

/// Per-node class counts of the revealed labels.
fn label_counts(tree: &Dendrogram, labels: &[Option<usize>], k: usize) -> Vec<Vec<usize>> {
    let n = tree.n_leaves;
    let total = n + tree.children.len();
    let mut counts = vec![vec![0usize; k]; total];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            counts[i][*c] += 1;
        }
    }
    for (t, &(a, b)) in tree.children.iter().enumerate() {
        let merged: Vec<usize> = counts[a].iter().zip(&counts[b]).map(|(x, y)| x + y).collect();
        counts[n + t] = merged;
    }
    counts
}

/// Current pruning: disjoint nodes covering every leaf.
pub(crate) fn pruning(tree: &Dendrogram, labels: &[Option<usize>], k: usize) -> Vec<usize> {
    if tree.n_leaves == 0 {
        return Vec::new();
    }
    let counts = label_counts(tree, labels, k);
    let mut out = Vec::new();
    let mut stack = vec![tree.root()];
    while let Some(v) = stack.pop() {
        let mixed = counts[v].iter().filter(|&&c| c > 0).count() > 1;
        match tree.node_children(v) {
            Some((a, b)) if mixed => {
                let labelled = |u: usize| counts[u].iter().sum::<usize>() > 0;
                if labelled(a) && labelled(b) {
                    stack.push(b);
                    stack.push(a);
                } else {
                    out.push(v);
                }
            }
            _ => out.push(v),
        }
    }
    out.sort_unstable();
    out
}

fn impurity(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 1.0;
    }
    let max = *counts.iter().max().unwrap_or(&0);
    1.0 - max as f64 / total as f64
}

pub(crate) fn hier_pick(
    tree: &Dendrogram,
    labels: &[Option<usize>],
    k: usize,
    unlabeled: &[usize],
    s: usize,
    rng: &mut Rng,
) -> Vec<usize> {
    let nodes = pruning(tree, labels, k);
    let counts = label_counts(tree, labels, k);
    let mut pools: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&v| {
            tree.leaves(v)
                .into_iter()
                .filter(|i| unlabeled.binary_search(i).is_ok())
                .collect()
        })
        .collect();
    let mut chosen = Vec::with_capacity(s);
    for _ in 0..s {
        let mut weights: Vec<f64> = nodes
            .iter()
            .zip(&pools)
            .map(|(&v, p)| {
                if p.is_empty() {
                    0.0
                } else {
                    tree.size(v) as f64 * impurity(&counts[v])
                }
            })
            .collect();
        if weights.iter().all(|&w| w <= 0.0) {
            weights = pools.iter().map(|p| p.len() as f64).collect();
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random_range(0.0..total);
        let mut node = weights.iter().rposition(|&w| w > 0.0).expect("positive weight");
        for (j, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            if target < w {
                node = j;
                break;
            }
            target -= w;
        }
        let pos = rng.random_range(0..pools[node].len());
        chosen.push(pools[node].remove(pos));
    }
    chosen
}

impl Strategy for Hier {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let tree = self.tree.get_or_insert_with(|| average_linkage(ctx.x));
        let mut rng = rng_from_seed(ctx.step_seed);
        Ok(QuerySelection::new(hier_pick(
            tree,
            ctx.labels,
            ctx.k_classes,
            ctx.unlabeled,
            ctx.batch_size,
            &mut rng,
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn two_clusters(large: usize, small: usize) -> Matrix {
        let mut rows = Vec::new();
        for i in 0..large {
            rows.push([(i as f64 * 0.7).sin() * 0.3, (i as f64 * 1.3).cos() * 0.3]);
        }
        for i in 0..small {
            rows.push([20.0 + (i as f64 * 0.7).sin() * 0.3, (i as f64 * 1.3).cos() * 0.3]);
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn first_query_follows_cluster_size() {
        let x = two_clusters(30, 10);
        let tree = average_linkage(&x);
        let labels = vec![None; 40];
        let all: Vec<usize> = (0..40).collect();
        let mut hits = 0;
        for seed in 0..10_000u64 {
            let pick = hier_pick(&tree, &labels, 2, &all, 1, &mut rng_from_seed(seed))[0];
            if pick < 30 {
                hits += 1;
            }
        }
        let frac = hits as f64 / 10_000.0;
        assert!((frac - 0.75).abs() <= 0.05, "{frac}");
    }

    #[test]
    fn pure_nodes_are_not_sampled() {
        let mut x = two_clusters(10, 10);
        // a duplicated pair with conflicting labels keeps the small cluster impure
        let dup = x.row(10).to_vec();
        x.row_mut(11).copy_from_slice(&dup);
        let tree = average_linkage(&x);
        let mut labels = vec![None; 20];
        // large cluster: two agreeing labels; small cluster: disagreeing labels
        labels[0] = Some(0);
        labels[1] = Some(0);
        labels[10] = Some(0);
        labels[11] = Some(1);
        let unlabeled: Vec<usize> = (0..20).filter(|i| labels[*i].is_none()).collect();
        for seed in 0..500u64 {
            let pick = hier_pick(&tree, &labels, 2, &unlabeled, 1, &mut rng_from_seed(seed))[0];
            assert!(pick >= 10, "sampled pure cluster point {pick}");
        }
    }

    #[test]
    fn pruning_is_a_partition_at_every_step() {
        let x = two_clusters(15, 9);
        let tree = average_linkage(&x);
        let mut labels: Vec<Option<usize>> = vec![None; 24];
        let truth: Vec<usize> = (0..24).map(|i| usize::from(i % 3 == 0)).collect();
        let mut rng = rng_from_seed(5);
        for _ in 0..24 {
            let nodes = pruning(&tree, &labels, 2);
            let mut seen = vec![0u8; 24];
            for &v in &nodes {
                for l in tree.leaves(v) {
                    seen[l] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            let unlabeled: Vec<usize> = (0..24).filter(|i| labels[*i].is_none()).collect();
            if unlabeled.is_empty() {
                break;
            }
            let pick = hier_pick(&tree, &labels, 2, &unlabeled, 1, &mut rng)[0];
            labels[pick] = Some(truth[pick]);
        }
    }

    #[test]
    fn batch_picks_are_distinct() {
        let x = two_clusters(6, 6);
        let tree = average_linkage(&x);
        let labels = vec![None; 12];
        let all: Vec<usize> = (0..12).collect();
        let mut picks = hier_pick(&tree, &labels, 2, &all, 12, &mut rng_from_seed(1));
        picks.sort_unstable();
        assert_eq!(picks, all);
    }
}
