//! Classification metrics and the area under the budget curve.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Acc,
    Auc,
    F1,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Acc, MetricKind::Auc, MetricKind::F1];

    pub fn index(self) -> usize {
        match self {
            MetricKind::Acc => 0,
            MetricKind::Auc => 1,
            MetricKind::F1 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Acc => "acc",
            MetricKind::Auc => "auc",
            MetricKind::F1 => "f1",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acc" => Ok(MetricKind::Acc),
            "auc" => Ok(MetricKind::Auc),
            "f1" => Ok(MetricKind::F1),
            _ => Err(Error::InvalidArgument(format!("unknown metric `{s}`"))),
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {a} true labels vs {b} predictions"
        )));
    }
    if a == 0 {
        return Err(Error::InvalidArgument("empty label vector".into()));
    }
    Ok(())
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    check_lengths(y_true.len(), y_pred.len())?;
    let correct = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(correct as f64 / y_true.len() as f64)
}

/// Mann–Whitney AUC of `scores` for the positive mask. Ties count one half.
fn rank_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks over tie groups (1-based)
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if positive[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// ROC AUC. Binary: class-1 probability column. Multi-class: one-vs-rest,
/// macro-averaged over classes present in `y_true`.
pub fn auc(y_true: &[usize], proba: &Matrix) -> Result<f64> {
    check_lengths(y_true.len(), proba.rows())?;
    let k = proba.cols();
    if k < 2 {
        return Err(Error::InvalidArgument("probability table needs >= 2 columns".into()));
    }
    if k == 2 {
        let scores: Vec<f64> = (0..proba.rows()).map(|i| proba.get(i, 1)).collect();
        let positive: Vec<bool> = y_true.iter().map(|&y| y == 1).collect();
        return rank_auc(&scores, &positive)
            .ok_or_else(|| Error::UndefinedMetric("binary AUC needs both classes in y_true".into()));
    }
    let mut present = vec![false; k];
    for &y in y_true {
        if y >= k {
            return Err(Error::InvalidArgument(format!("label {y} outside 0..{k}")));
        }
        present[y] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::UndefinedMetric(
            "multi-class AUC needs at least two classes in y_true".into(),
        ));
    }
    let mut total = 0.0;
    let mut count = 0;
    for c in (0..k).filter(|&c| present[c]) {
        let scores: Vec<f64> = (0..proba.rows()).map(|i| proba.get(i, c)).collect();
        let positive: Vec<bool> = y_true.iter().map(|&y| y == c).collect();
        if let Some(a) = rank_auc(&scores, &positive) {
            total += a;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn class_f1(y_true: &[usize], y_pred: &[usize], c: usize) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == c, p == c) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// F1. Binary (`k_classes == 2`): F1 of class 1, zero when there are no true
/// positives. Multi-class: macro F1 over classes present in `y_true`.
pub fn f1(y_true: &[usize], y_pred: &[usize], k_classes: usize) -> Result<f64> {
    check_lengths(y_true.len(), y_pred.len())?;
    if k_classes <= 2 {
        return Ok(class_f1(y_true, y_pred, 1));
    }
    let mut present: Vec<usize> = y_true.to_vec();
    present.sort_unstable();
    present.dedup();
    let total: f64 = present.iter().map(|&c| class_f1(y_true, y_pred, c)).sum();
    Ok(total / present.len() as f64)
}

/// Metric value as a function of the number of labelled samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetCurve {
    pub points: Vec<(usize, f64)>,
    pub metric_kind: MetricKind,
}

impl BudgetCurve {
    pub fn new(points: Vec<(usize, f64)>, metric_kind: MetricKind) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a budget curve needs at least 2 points, got {}",
                points.len()
            )));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidArgument(format!(
                    "budget grid must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(b, v)) = points.iter().find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(v))) {
            return Err(Error::InvalidArgument(format!(
                "curve value {v} at budget {b} is outside [0, 1]"
            )));
        }
        Ok(Self { points, metric_kind })
    }
}

/// Trapezoid area under the curve, normalised by the budget span so a constant
/// curve maps to its constant.
pub fn aubc(curve: &BudgetCurve) -> Result<f64> {
    aubc_points(&curve.points)
}

pub fn aubc_points(points: &[(usize, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("AUBC needs at least two curve points".into()));
    }
    let first = points[0].0 as f64;
    let last = points[points.len() - 1].0 as f64;
    if last <= first {
        return Err(Error::InvalidArgument("AUBC needs a non-empty budget span".into()));
    }
    let area: f64 = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) as f64 * (w[0].1 + w[1].1) / 2.0)
        .sum();
    Ok(area / (last - first))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn curve(p: &[(usize, f64)]) -> BudgetCurve {
        BudgetCurve::new(p.to_vec(), MetricKind::Acc).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 1], &[0, 1, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.75);
        assert!(accuracy(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn accuracy_of_random_labels() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let t: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
        let p: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
        assert!((accuracy(&t, &p).unwrap() - 0.5).abs() < 0.02);
    }

    fn binary_proba(p1: &[f64]) -> Matrix {
        let rows: Vec<[f64; 2]> = p1.iter().map(|&p| [1.0 - p, p]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn auc_examples() {
        let y = [0, 0, 1, 1];
        assert_eq!(auc(&y, &binary_proba(&[0.1, 0.2, 0.8, 0.9])).unwrap(), 1.0);
        assert_eq!(auc(&y, &binary_proba(&[0.5; 4])).unwrap(), 0.5);
        // pairs (neg,pos): (.1,.35) (.1,.8) (.4,.35)x (.4,.8) -> 3/4
        assert_eq!(auc(&y, &binary_proba(&[0.1, 0.4, 0.35, 0.8])).unwrap(), 0.75);
        assert!(matches!(
            auc(&[1, 1], &binary_proba(&[0.2, 0.3])),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn auc_matches_pair_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = 30;
            let y: Vec<usize> = (0..n).map(|i| if i < 2 { i } else { rng.random_range(0..2) }).collect();
            // coarse scores so ties happen
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
            let mut wins = 0.0;
            let mut pairs = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if y[i] == 1 && y[j] == 0 {
                        pairs += 1.0;
                        if p[i] > p[j] {
                            wins += 1.0;
                        } else if p[i] == p[j] {
                            wins += 0.5;
                        }
                    }
                }
            }
            let got = auc(&y, &binary_proba(&p)).unwrap();
            assert!((got - wins / pairs).abs() < 1e-12);
        }
    }

    #[test]
    fn multiclass_auc_is_macro_over_present_classes() {
        let proba = Matrix::from_rows(&[[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8], [0.6, 0.3, 0.1]]).unwrap();
        assert_eq!(auc(&[0, 1, 2, 0], &proba).unwrap(), 1.0);
        // class 2 absent from y_true: averaged over classes 0 and 1 only
        let a = auc(&[0, 1, 1, 0], &proba).unwrap();
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(&[1, 0, 1], &[1, 0, 1], 2).unwrap(), 1.0);
        assert!((f1(&[1, 1, 0, 0], &[1, 0, 0, 0], 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1(&[0, 0], &[0, 0], 2).unwrap(), 0.0);
        assert_eq!(f1(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        // macro over present classes {0, 1}: class0 F1 = 2/3, class1 F1 = 0
        assert!((f1(&[0, 1], &[0, 0], 3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn aubc_examples() {
        assert!((aubc(&curve(&[(20, 0.8), (25, 0.8), (100, 0.8)])).unwrap() - 0.8).abs() < 1e-15);
        assert!((aubc(&curve(&[(20, 0.5), (21, 0.7), (22, 0.9)])).unwrap() - 0.7).abs() < 1e-15);
        let uneven = aubc(&curve(&[(0, 0.0), (1, 1.0), (3, 1.0)])).unwrap();
        assert!((uneven - 2.5 / 3.0).abs() < 1e-15);
        assert!(BudgetCurve::new(vec![(1, 0.5)], MetricKind::Acc).is_err());
        assert!(BudgetCurve::new(vec![(1, 0.5), (1, 0.6)], MetricKind::Acc).is_err());
        assert!(BudgetCurve::new(vec![(1, 0.5), (2, 1.5)], MetricKind::Acc).is_err());
    }

    proptest! {
        #[test]
        fn constant_curves_integrate_to_their_value(
            c in 0.0f64..=1.0,
            steps in proptest::collection::vec(1usize..50, 1..40),
        ) {
            let mut b = 20;
            let mut pts = vec![(b, c)];
            for s in steps { b += s; pts.push((b, c)); }
            let a = aubc_points(&pts).unwrap();
            prop_assert!((a - c).abs() <= 1e-12);
        }

        #[test]
        fn inserting_a_collinear_point_is_a_no_op(
            v0 in 0.0f64..=1.0, v1 in 0.0f64..=1.0, gap in 2usize..40, cut in 0.0f64..1.0,
        ) {
            let mid = 1 + ((gap - 1) as f64 * cut) as usize;
            let t = mid as f64 / gap as f64;
            let base = vec![(10, v0), (10 + gap, v1)];
            let with = vec![(10, v0), (10 + mid, v0 + t * (v1 - v0)), (10 + gap, v1)];
            prop_assert!((aubc_points(&base).unwrap() - aubc_points(&with).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn auc_invariant_under_monotone_transform(
            scores in proptest::collection::vec(0.0f64..1.0, 6..40),
        ) {
            let y: Vec<usize> = (0..scores.len()).map(|i| i % 2).collect();
            let a = auc(&y, &binary_proba(&scores)).unwrap();
            let squashed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
            let b = auc(&y, &binary_proba(&squashed)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
