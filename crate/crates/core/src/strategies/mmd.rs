use super::{QueryContext, QuerySelection, Strategy, StrategyId};
use crate::classifiers::Kernel;
use crate::error::Result;
use crate::matrix::Matrix;

/// Squared empirical MMD between index sets `a` and `r` under the Gram matrix `k`.
/// Defined as 0 when either set is empty.
pub fn mmd2(k: &Matrix, a: &[usize], r: &[usize]) -> f64 {
    if a.is_empty() || r.is_empty() {
        return 0.0;
    }
    let sum =
        |p: &[usize], q: &[usize]| -> f64 { p.iter().map(|&i| q.iter().map(|&j| k.get(i, j)).sum::<f64>()).sum() };
    let (na, nr) = (a.len() as f64, r.len() as f64);
    sum(a, a) / (na * na) - 2.0 * sum(a, r) / (na * nr) + sum(r, r) / (nr * nr)
}

/// Representativeness by distribution matching: greedily moves unlabeled
/// points into the labeled side so that (labeled + picks) and the remaining
/// unlabeled points have minimal MMD. The RBF bandwidth is the median pairwise
/// distance of the pool.
pub struct MarginMmd {
    id: StrategyId,
    gram: Option<Matrix>,
}

impl MarginMmd {
    pub fn new(id: StrategyId) -> Self {
        Self { id, gram: None }
    }
}

pub(crate) fn median_rbf(x: &Matrix) -> Kernel {
    let sigma = crate::classifiers::kernel::median_pairwise_distance(x);
    Kernel::Rbf {
        gamma: 1.0 / (2.0 * sigma * sigma),
    }
}

/// Greedy MMD selection with O(1) candidate evaluation from running totals.
pub(crate) fn greedy_mmd(k: &Matrix, labeled: &[usize], unlabeled: &[usize], s: usize) -> Vec<usize> {
    let n = k.rows();
    let mut in_a = vec![false; n];
    let mut in_r = vec![false; n];
    labeled.iter().for_each(|&i| in_a[i] = true);
    unlabeled.iter().for_each(|&i| in_r[i] = true);
    let mut s_a = vec![0.0; n];
    let mut s_r = vec![0.0; n];
    for p in labeled.iter().chain(unlabeled) {
        let row = k.row(*p);
        s_a[*p] = labeled.iter().map(|&a| row[a]).sum();
        s_r[*p] = unlabeled.iter().map(|&r| row[r]).sum();
    }
    let mut t_aa: f64 = labeled.iter().map(|&a| s_a[a]).sum();
    let mut t_rr: f64 = unlabeled.iter().map(|&r| s_r[r]).sum();
    let mut t_ar: f64 = labeled.iter().map(|&a| s_r[a]).sum();
    let mut na = labeled.len() as f64;
    let mut nr = unlabeled.len() as f64;

    let mut chosen = Vec::with_capacity(s);
    for _ in 0..s {
        let mut best: Option<(usize, f64)> = None;
        for &c in unlabeled {
            if !in_r[c] {
                continue;
            }
            let kcc = k.get(c, c);
            let obj = if nr - 1.0 <= 0.0 {
                0.0
            } else {
                let aa = t_aa + 2.0 * s_a[c] + kcc;
                let rr = t_rr - 2.0 * s_r[c] + kcc;
                let ar = t_ar - s_a[c] + s_r[c] - kcc;
                let (na2, nr2) = (na + 1.0, nr - 1.0);
                aa / (na2 * na2) - 2.0 * ar / (na2 * nr2) + rr / (nr2 * nr2)
            };
            if best.is_none_or(|(_, b)| obj < b) {
                best = Some((c, obj));
            }
        }
        let Some((c, _)) = best else { break };
        let kcc = k.get(c, c);
        t_aa += 2.0 * s_a[c] + kcc;
        t_rr += -2.0 * s_r[c] + kcc;
        t_ar += -s_a[c] + s_r[c] - kcc;
        na += 1.0;
        nr -= 1.0;
        in_r[c] = false;
        in_a[c] = true;
        let row = k.row(c);
        for p in 0..n {
            s_a[p] += row[p];
            s_r[p] -= row[p];
        }
        chosen.push(c);
    }
    chosen
}

impl Strategy for MarginMmd {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let gram = self.gram.get_or_insert_with(|| median_rbf(ctx.x).gram_sym(ctx.x));
        Ok(QuerySelection::new(greedy_mmd(
            gram,
            ctx.labeled,
            ctx.unlabeled,
            ctx.batch_size,
        )))
    }
}
