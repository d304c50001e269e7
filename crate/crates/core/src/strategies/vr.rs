use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;

use super::{bottom_s, QueryContext, QuerySelection, Strategy, StrategyId};
use crate::classifiers::{fit, ClassifierKind, ClassifierSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_from_seed;

const SINGULAR_RIDGE: f64 = 1e-6;

/// Variance reduction (A-optimal design) on a logistic surrogate.
///
/// With Fisher information `F` of the labeled set and `A` the information of a
/// pool subsample, the score of `x` is `tr((F + a g g^T)^{-1} A)` where `g` is
/// the bias-augmented feature vector and `a = p (1 - p)`. The rank-one update
/// is applied with Sherman-Morrison. Multi-class problems sum the per-class
/// terms. The lowest score is queried.
pub struct Vr {
    id: StrategyId,
    subsample: usize,
}

impl Vr {
    pub fn new(id: StrategyId) -> Self {
        let subsample = id.param_usize("subsample", 100);
        Self { id, subsample }
    }
}

/// `F^{-1}` together with the pieces that make candidate scoring O(d^2).
#[derive(Clone, Debug)]
pub struct Fisher {
    pub inv: DMatrix<f64>,
    /// `F^{-1} A F^{-1}`.
    pub inv_a_inv: DMatrix<f64>,
    /// `tr(F^{-1} A)`.
    pub baseline: f64,
}

impl Fisher {
    /// Inverts `f` (adding a small ridge if it is singular).
    pub fn new(f: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Self> {
        let inv = match f.clone().cholesky() {
            Some(c) => c.inverse(),
            None => {
                let n = f.nrows();
                (f + DMatrix::identity(n, n) * SINGULAR_RIDGE)
                    .cholesky()
                    .ok_or_else(|| Error::Numerical("Fisher information is not positive definite".into()))?
                    .inverse()
            }
        };
        let inv_a_inv = &inv * a * &inv;
        let baseline = (&inv * a).trace();
        Ok(Self {
            inv,
            inv_a_inv,
            baseline,
        })
    }

    /// `tr((F + a g g^T)^{-1} A)`.
    pub fn score(&self, g: &DVector<f64>, a: f64) -> f64 {
        let h = g.dot(&(&self.inv * g));
        let t = g.dot(&(&self.inv_a_inv * g));
        self.baseline - a * t / (1.0 + a * h)
    }
}

fn augmented(row: &[f64]) -> DVector<f64> {
    let mut v = DVector::zeros(row.len() + 1);
    v.rows_mut(0, row.len()).copy_from_slice(row);
    v[row.len()] = 1.0;
    v
}

/// Sum of `w_i g_i g_i^T` over augmented rows.
fn weighted_outer(x: &Matrix, rows: &[usize], w: &[f64]) -> DMatrix<f64> {
    let d = x.cols() + 1;
    let mut m = DMatrix::zeros(d, d);
    for (&i, &wi) in rows.iter().zip(w) {
        let g = augmented(x.row(i));
        m.ger(wi, &g, &g, 1.0);
    }
    m
}

/// Per-candidate scores given class probabilities for every pool row.
pub(crate) fn vr_scores(
    x: &Matrix,
    proba: &Matrix,
    labeled: &[usize],
    sample_rows: &[usize],
    candidates: &[usize],
    columns: &[usize],
    c: f64,
) -> Result<Vec<f64>> {
    let d = x.cols();
    let mut scores = vec![0.0; candidates.len()];
    for &col in columns {
        let var = |i: usize| {
            let p = proba.get(i, col);
            p * (1.0 - p)
        };
        let wl: Vec<f64> = labeled.iter().map(|&i| var(i)).collect();
        let mut f = weighted_outer(x, labeled, &wl);
        for j in 0..d {
            f[(j, j)] += 1.0 / c;
        }
        let ws: Vec<f64> = sample_rows.iter().map(|&i| var(i)).collect();
        let a = weighted_outer(x, sample_rows, &ws);
        let fisher = Fisher::new(&f, &a)?;
        for (s, &i) in scores.iter_mut().zip(candidates) {
            *s += fisher.score(&augmented(x.row(i)), var(i));
        }
    }
    Ok(scores)
}

impl Strategy for Vr {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let spec = ClassifierSpec::new(ClassifierKind::Logreg);
        let (xl, yl) = ctx.labeled_data();
        let surrogate = fit(&spec, &xl, &yl, ctx.k_classes)?;
        let proba = surrogate.predict_proba(ctx.x)?;
        let m = self.subsample.min(ctx.unlabeled.len());
        let mut rng = rng_from_seed(ctx.step_seed);
        let mut rows: Vec<usize> = sample(&mut rng, ctx.unlabeled.len(), m)
            .into_iter()
            .map(|k| ctx.unlabeled[k])
            .collect();
        rows.sort_unstable();
        let columns: Vec<usize> = if ctx.k_classes <= 2 {
            vec![1]
        } else {
            (0..ctx.k_classes).collect()
        };
        let scores = vr_scores(ctx.x, &proba, ctx.labeled, &rows, ctx.unlabeled, &columns, spec.c)?;
        let chosen = bottom_s(ctx.unlabeled, &scores, ctx.batch_size);
        Ok(QuerySelection::with_scores(chosen, scores))
    }
}
