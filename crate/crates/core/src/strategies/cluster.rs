//! Clustering helpers: seeded k-means (k-means++ initialisation) and
//! average-linkage agglomerative clustering via the nearest-neighbour chain.

use rand::Rng as _;

use crate::matrix::{sq_dist, Matrix};
use crate::seed::Rng;

const KMEANS_MAX_ITER: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centroids: Matrix,
    /// Cluster of each input row, in input order.
    pub assignment: Vec<usize>,
}

/// Lloyd's algorithm on the given rows of `x`. `k` is capped at the number of rows.
pub fn kmeans(x: &Matrix, rows: &[usize], k: usize, rng: &mut Rng) -> KMeans {
    let n = rows.len();
    let d = x.cols();
    let k = k.clamp(1, n.max(1));
    if n == 0 {
        return KMeans {
            centroids: Matrix::zeros(0, d),
            assignment: Vec::new(),
        };
    }

    // k-means++ seeding
    let mut centers: Vec<usize> = vec![rows[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = rows.iter().map(|&r| sq_dist(x.row(r), x.row(centers[0]))).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // every remaining row coincides with a centre
            match (0..n).find(|&i| !centers.contains(&rows[i])) {
                Some(i) => i,
                None => break,
            }
        };
        centers.push(rows[pick]);
        for (i, &r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x.row(r), x.row(rows[pick])));
        }
    }
    let k = centers.len();
    let mut centroids = x.select_rows(&centers);
    let mut assignment = vec![usize::MAX; n];

    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, &r) in rows.iter().enumerate() {
            let best = nearest(&centroids, x.row(r));
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        // empty clusters take the point farthest from its centroid
        let mut counts = vec![0usize; k];
        for &a in &assignment {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n).filter(|&i| counts[assignment[i]] > 1).max_by(|&a, &b| {
                let da = sq_dist(x.row(rows[a]), centroids.row(assignment[a]));
                let db = sq_dist(x.row(rows[b]), centroids.row(assignment[b]));
                da.total_cmp(&db).then(b.cmp(&a))
            });
            if let Some(i) = far {
                counts[assignment[i]] -= 1;
                assignment[i] = c;
                counts[c] = 1;
                centroids.row_mut(c).copy_from_slice(x.row(rows[i]));
                changed = true;
            }
        }
        let mut sums = Matrix::zeros(k, d);
        for (i, &r) in rows.iter().enumerate() {
            for (s, v) in sums.row_mut(assignment[i]).iter_mut().zip(x.row(r)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        if !changed {
            break;
        }
    }
    KMeans { centroids, assignment }
}

fn nearest(centroids: &Matrix, p: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..centroids.rows() {
        let v = sq_dist(centroids.row(c), p);
        if v < best_d {
            best_d = v;
            best = c;
        }
    }
    best
}

/// Binary merge tree. Leaves are `0..n`; merge `t` creates node `n + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub children: Vec<(usize, usize)>,
    pub heights: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl Dendrogram {
    pub fn root(&self) -> usize {
        if self.n_leaves <= 1 {
            0
        } else {
            self.n_leaves + self.children.len() - 1
        }
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.n_leaves
    }

    pub fn node_children(&self, node: usize) -> Option<(usize, usize)> {
        (!self.is_leaf(node)).then(|| self.children[node - self.n_leaves])
    }

    pub fn size(&self, node: usize) -> usize {
        if self.is_leaf(node) {
            1
        } else {
            self.sizes[node - self.n_leaves]
        }
    }

    /// Leaves under `node`, ascending.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size(node));
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match self.node_children(v) {
                Some((a, b)) => {
                    stack.push(a);
                    stack.push(b);
                }
                None => out.push(v),
            }
        }
        out.sort_unstable();
        out
    }
}

/// Average-linkage (UPGMA) clustering of the rows of `x` under Euclidean
/// distance. Merges are reported in non-decreasing height order.
pub fn average_linkage(x: &Matrix) -> Dendrogram {
    let n = x.rows();
    if n <= 1 {
        return Dendrogram {
            n_leaves: n,
            children: Vec::new(),
            heights: Vec::new(),
            sizes: Vec::new(),
        };
    }
    let mut dist = super::distance_matrix(x);
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    // raw merges on slot indices: (slot a, slot b, height); b's cluster is absorbed into a
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::with_capacity(n);

    while raw.len() < n - 1 {
        if chain.is_empty() {
            chain.push((0..n).find(|&i| active[i]).expect("an active cluster"));
        }
        loop {
            let a = *chain.last().expect("non-empty chain");
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // nearest active neighbour; the previous chain element wins ties
            let mut best = prev;
            let mut best_d = prev.map(|p| dist.get(a, p)).unwrap_or(f64::INFINITY);
            for j in 0..n {
                if j == a || !active[j] {
                    continue;
                }
                let dj = dist.get(a, j);
                if dj < best_d || (best.is_none() && dj == best_d) {
                    best_d = dj;
                    best = Some(j);
                }
            }
            let b = best.expect("two active clusters remain");
            if Some(b) == prev {
                chain.pop();
                chain.pop();
                let (keep, gone) = if a < b { (a, b) } else { (b, a) };
                raw.push((keep, gone, best_d));
                let (sa, sb) = (size[keep] as f64, size[gone] as f64);
                for k in 0..n {
                    if active[k] && k != keep && k != gone {
                        let v = (sa * dist.get(keep, k) + sb * dist.get(gone, k)) / (sa + sb);
                        dist.set(keep, k, v);
                        dist.set(k, keep, v);
                    }
                }
                size[keep] += size[gone];
                active[gone] = false;
                break;
            }
            chain.push(b);
        }
    }

    // stable sort by height, then relabel slots into node ids
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&p, &q| raw[p].2.total_cmp(&raw[q].2));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut node_size = vec![1usize; n];
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut children = Vec::with_capacity(n - 1);
    let mut heights = Vec::with_capacity(n - 1);
    let mut sizes = Vec::with_capacity(n - 1);
    for (t, &m) in order.iter().enumerate() {
        let (a, b, h) = raw[m];
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        let (na, nb) = (node_of[ra], node_of[rb]);
        let (lo, hi) = if na < nb { (na, nb) } else { (nb, na) };
        children.push((lo, hi));
        heights.push(h);
        let s = node_size[ra] + node_size[rb];
        sizes.push(s);
        parent[rb] = ra;
        node_of[ra] = n + t;
        node_size[ra] = s;
    }
    Dendrogram {
        n_leaves: n,
        children,
        heights,
        sizes,
    }
}
