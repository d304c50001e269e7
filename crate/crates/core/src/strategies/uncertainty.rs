use rand::seq::SliceRandom;

use super::{top_s, QueryContext, QuerySelection, Strategy, StrategyId};
use crate::classifiers::{committee, fit, ClassifierSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_from_seed;

/// Random sampling without replacement.
pub struct Uniform {
    id: StrategyId,
}

impl Uniform {
    pub fn new(id: StrategyId) -> Self {
        Self { id }
    }
}

impl Strategy for Uniform {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let mut rng = rng_from_seed(ctx.step_seed);
        let mut pool = ctx.unlabeled.to_vec();
        let (chosen, _) = pool.partial_shuffle(&mut rng, ctx.batch_size);
        Ok(QuerySelection::new(chosen.to_vec()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UsVariant {
    /// Least confidence.
    Lc,
    /// Smallest gap between the two most probable classes.
    Margin,
    Entropy,
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

fn top_two(p: &[f64]) -> (f64, f64) {
    let mut a = f64::NEG_INFINITY;
    let mut b = f64::NEG_INFINITY;
    for &v in p {
        if v > a {
            b = a;
            a = v;
        } else if v > b {
            b = v;
        }
    }
    (a, b.max(0.0))
}

/// `p(y1|x) - p(y2|x)` per row; small means uncertain.
pub fn margin_scores(proba: &Matrix) -> Vec<f64> {
    proba
        .iter_rows()
        .map(|r| {
            let (a, b) = top_two(r);
            a - b
        })
        .collect()
}

/// Per-row uncertainty, larger is more uncertain.
pub fn uncertainty_scores(proba: &Matrix, variant: UsVariant) -> Vec<f64> {
    match variant {
        UsVariant::Lc => proba
            .iter_rows()
            .map(|r| 1.0 - r.iter().copied().fold(0.0, f64::max))
            .collect(),
        UsVariant::Margin => margin_scores(proba).into_iter().map(|m| -m).collect(),
        UsVariant::Entropy => proba.iter_rows().map(entropy).collect(),
    }
}

pub struct Us {
    id: StrategyId,
    variant: UsVariant,
}

impl Us {
    pub fn new(id: StrategyId, variant: UsVariant) -> Self {
        Self { id, variant }
    }
}

impl Strategy for Us {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let scores = uncertainty_scores(&ctx.unlabeled_proba()?, self.variant);
        let chosen = top_s(ctx.unlabeled, &scores, ctx.batch_size);
        Ok(QuerySelection::with_scores(chosen, scores))
    }
}

/// Disagreement scores for a committee of probability tables over the same rows.
/// Vote entropy counts hard (arg-max) votes; KL is the mean divergence of each
/// member from the consensus, with `0 ln 0 = 0`.
pub fn qbc_scores(probas: &[Matrix], kl: bool) -> Result<Vec<f64>> {
    if probas.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a committee needs at least 2 members, got {}",
            probas.len()
        )));
    }
    let (rows, k) = (probas[0].rows(), probas[0].cols());
    if probas.iter().any(|p| p.rows() != rows || p.cols() != k) {
        return Err(Error::InvalidArgument("committee tables differ in shape".into()));
    }
    let c = probas.len() as f64;
    let mut scores = Vec::with_capacity(rows);
    let mut buf = vec![0.0; k];
    for i in 0..rows {
        buf.fill(0.0);
        if kl {
            for p in probas {
                for (b, v) in buf.iter_mut().zip(p.row(i)) {
                    *b += v / c;
                }
            }
            let mut s = 0.0;
            for p in probas {
                for (&pm, &pc) in p.row(i).iter().zip(&buf) {
                    if pm > 0.0 {
                        s += pm * (pm / pc).ln();
                    }
                }
            }
            scores.push(s / c);
        } else {
            for p in probas {
                buf[crate::classifiers::argmax(p.row(i))] += 1.0 / c;
            }
            scores.push(entropy(&buf));
        }
    }
    Ok(scores)
}

/// Query-by-committee over the default heterogeneous committee.
pub struct Committee {
    id: StrategyId,
    kl: bool,
    members: Vec<ClassifierSpec>,
}

impl Committee {
    pub fn new(id: StrategyId, kl: bool) -> Self {
        Self {
            id,
            kl,
            members: committee(),
        }
    }
}

impl Strategy for Committee {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let (xl, yl) = ctx.labeled_data();
        let xu = ctx.unlabeled_x();
        let mut probas = Vec::with_capacity(self.members.len());
        for spec in &self.members {
            let m =
                fit(spec, &xl, &yl, ctx.k_classes).map_err(|e| e.context(format!("committee member {}", spec.kind)))?;
            probas.push(m.predict_proba(&xu)?);
        }
        let scores = qbc_scores(&probas, self.kl)?;
        let chosen = top_s(ctx.unlabeled, &scores, ctx.batch_size);
        Ok(QuerySelection::with_scores(chosen, scores))
    }
}
