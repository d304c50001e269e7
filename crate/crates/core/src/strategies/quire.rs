use nalgebra::{DMatrix, DVector};

use super::mmd::median_rbf;
use super::{QueryContext, QuerySelection, Strategy, StrategyId};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const TIE_RTOL: f64 = 1e-12;

/// Min-max margin selection over an RBF kernel with median bandwidth.
///
/// For candidate `s` the objective `y^T (K + lambda I)^{-1} y`, minimised over
/// real-valued labels of the other unlabeled points, is quadratic in `y_s`.
/// Its worst-case increase over `y_s in {-1, +1}` is `(1 + 2|w_s|) / B_ss`
/// with `w = -K_ul (K_ll + lambda I)^{-1} y_l` and `B_ss` the Schur complement
/// `K_ss + lambda - K_sl (K_ll + lambda I)^{-1} K_ls`. The lowest score is
/// queried. Multi-class problems average the one-vs-rest columns.
pub struct Quire {
    id: StrategyId,
    lambda: f64,
    gram: Option<Matrix>,
}

impl Quire {
    pub fn new(id: StrategyId) -> Self {
        let lambda = id.param_f64("lambda", 1.0);
        Self { id, lambda, gram: None }
    }
}

/// Scores for every entry of `unlabeled`; `y_cols[c][i]` is the `+-1` label of
/// `labeled[i]` in column `c`.
pub fn quire_scores(
    k: &Matrix,
    labeled: &[usize],
    unlabeled: &[usize],
    y_cols: &[Vec<f64>],
    lambda: f64,
) -> Result<Vec<f64>> {
    match quire_once(k, labeled, unlabeled, y_cols, lambda) {
        Err(Error::Numerical(_)) => {
            log::warn!(
                "QUIRE system singular at lambda={lambda}, retrying with {}",
                lambda * 10.0
            );
            quire_once(k, labeled, unlabeled, y_cols, lambda * 10.0)
        }
        other => other,
    }
}

fn quire_once(
    k: &Matrix,
    labeled: &[usize],
    unlabeled: &[usize],
    y_cols: &[Vec<f64>],
    lambda: f64,
) -> Result<Vec<f64>> {
    let nl = labeled.len();
    let kll = DMatrix::from_fn(nl, nl, |i, j| {
        k.get(labeled[i], labeled[j]) + if i == j { lambda } else { 0.0 }
    });
    let chol = kll
        .cholesky()
        .ok_or_else(|| Error::Numerical("labeled kernel block is not positive definite".into()))?;
    let alphas: Vec<DVector<f64>> = y_cols
        .iter()
        .map(|y| chol.solve(&DVector::from_column_slice(y)))
        .collect();
    let lower = chol.l();
    let mut scores = Vec::with_capacity(unlabeled.len());
    for &s in unlabeled {
        let ks = DVector::from_fn(nl, |i, _| k.get(s, labeled[i]));
        let z = lower
            .solve_lower_triangular(&ks)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let b = k.get(s, s) + lambda - z.norm_squared();
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Numerical(format!("non-positive Schur complement {b}")));
        }
        let mean = alphas.iter().map(|a| 1.0 + 2.0 * ks.dot(a).abs()).sum::<f64>() / alphas.len() as f64;
        scores.push(mean / b);
    }
    Ok(scores)
}

/// Repeatedly takes the lowest index whose score is within a relative
/// tolerance of the remaining minimum.
pub(crate) fn bottom_s_tol(candidates: &[usize], scores: &[f64], s: usize) -> Vec<usize> {
    let mut taken = vec![false; candidates.len()];
    let mut chosen = Vec::with_capacity(s);
    for _ in 0..s {
        let min = (0..candidates.len())
            .filter(|&k| !taken[k])
            .map(|k| scores[k])
            .fold(f64::INFINITY, f64::min);
        let limit = min + TIE_RTOL * min.abs();
        let Some(k) = (0..candidates.len())
            .filter(|&k| !taken[k] && scores[k] <= limit)
            .min_by_key(|&k| candidates[k])
        else {
            break;
        };
        taken[k] = true;
        chosen.push(candidates[k]);
    }
    chosen
}

/// One-vs-rest `+-1` columns; a single column for binary problems.
pub(crate) fn label_columns(labels: &[usize], k_classes: usize) -> Vec<Vec<f64>> {
    let sign = |c: usize| labels.iter().map(|&y| if y == c { 1.0 } else { -1.0 }).collect();
    if k_classes <= 2 {
        vec![sign(1)]
    } else {
        (0..k_classes).map(sign).collect()
    }
}

impl Strategy for Quire {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let gram = self.gram.get_or_insert_with(|| median_rbf(ctx.x).gram_sym(ctx.x));
        let (_, yl) = ctx.labeled_data();
        let cols = label_columns(&yl, ctx.k_classes);
        let scores = quire_scores(gram, ctx.labeled, ctx.unlabeled, &cols, self.lambda)?;
        let chosen = bottom_s_tol(ctx.unlabeled, &scores, ctx.batch_size);
        Ok(QuerySelection::with_scores(chosen, scores))
    }
}
