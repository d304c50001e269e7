use serde::{Deserialize, Serialize};

use crate::matrix::{dot, sq_dist, Matrix};

/// RBF bandwidth: a fixed value or the `scale` heuristic `1 / (d * Var(X))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    Scale,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, x: &Matrix) -> f64 {
        match self {
            Gamma::Value(g) => g,
            Gamma::Scale => scale_gamma(x),
        }
    }
}

/// `1 / (d * Var(X))` with the variance taken over every entry of `x`.
/// A constant matrix falls back to `1 / d`.
pub fn scale_gamma(x: &Matrix) -> f64 {
    let d = x.cols().max(1) as f64;
    let data = x.as_slice();
    if data.is_empty() {
        return 1.0 / d;
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0 / d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => (-gamma * sq_dist(a, b)).exp(),
        }
    }

    /// Gram matrix between the rows of `a` and the rows of `b`.
    pub fn gram(&self, a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.rows());
        for i in 0..a.rows() {
            let ra = a.row(i);
            let dst = out.row_mut(i);
            for (j, v) in dst.iter_mut().enumerate() {
                *v = self.eval(ra, b.row(j));
            }
        }
        out
    }

    /// Symmetric Gram matrix of `a` with itself; only the upper triangle is evaluated.
    pub fn gram_sym(&self, a: &Matrix) -> Matrix {
        let n = a.rows();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval(a.row(i), a.row(j));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }
}

/// Median of the pairwise Euclidean distances between rows, skipping zeros.
/// Used as the bandwidth heuristic by the density-based strategies.
pub fn median_pairwise_distance(x: &Matrix) -> f64 {
    let n = x.rows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(x.row(i), x.row(j));
            if v > 0.0 {
                d.push(v);
            }
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    m.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_gamma_matches_hand_computation() {
        // entries 0,1,2,3: mean 1.5, population variance 1.25, d = 2
        let x = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0]]).unwrap();
        assert!((scale_gamma(&x) - 1.0 / 2.5).abs() < 1e-15);
        let c = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(scale_gamma(&c), 0.5);
    }

    #[test]
    fn rbf_is_one_on_the_diagonal() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [-1.0, 0.5]]).unwrap();
        let g = Kernel::Rbf { gamma: 0.7 }.gram_sym(&x);
        for i in 0..3 {
            assert_eq!(g.get(i, i), 1.0);
        }
        assert!((g.get(0, 1) - (-0.7f64 * 8.0).exp()).abs() < 1e-15);
        assert_eq!(g, Kernel::Rbf { gamma: 0.7 }.gram(&x, &x));
    }

    #[test]
    fn median_distance() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        // distances 1, 3, 2
        assert_eq!(median_pairwise_distance(&x), 2.0);
    }
}
