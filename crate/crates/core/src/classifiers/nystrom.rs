//! Low-rank RBF feature map `phi(x) = L^{-1/2} U' k(landmarks, x)` from the
//! eigen-decomposition `K_mm = U L U'` of the landmark Gram matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use crate::matrix::Matrix;

const EIGEN_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NystromMap {
    pub kernel: Kernel,
    pub landmarks: Matrix,
    /// `r' x r` projection, one row per retained eigenpair.
    pub projection: Matrix,
}

impl NystromMap {
    /// Landmarks are `rank` rows of `x` spread evenly over its row order.
    pub fn fit(x: &Matrix, kernel: Kernel, rank: usize) -> Self {
        let m = x.rows();
        let r = rank.clamp(1, m.max(1));
        let idx: Vec<usize> = (0..r).map(|i| i * m / r).collect();
        let landmarks = x.select_rows(&idx);
        let g = kernel.gram_sym(&landmarks);
        let kmm = DMatrix::from_row_slice(r, r, g.as_slice());
        let eig = kmm.symmetric_eigen();
        let max_ev = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&k| eig.eigenvalues[k] > EIGEN_FLOOR * max_ev.max(f64::MIN_POSITIVE))
            .collect();
        let mut projection = Matrix::zeros(kept.len(), r);
        for (row, &k) in kept.iter().enumerate() {
            let scale = 1.0 / eig.eigenvalues[k].sqrt();
            // fix the eigenvector sign so the map is reproducible
            let col = eig.eigenvectors.column(k);
            let pivot = col
                .iter()
                .copied()
                .fold(0.0, |acc: f64, v| if v.abs() > acc.abs() { v } else { acc });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for j in 0..r {
                projection.set(row, j, sign * scale * col[j]);
            }
        }
        Self {
            kernel,
            landmarks,
            projection,
        }
    }

    pub fn dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let kx = self.kernel.gram(x, &self.landmarks);
        let kx = DMatrix::from_row_slice(x.rows(), self.landmarks.rows(), kx.as_slice());
        let p = DMatrix::from_row_slice(self.dim(), self.landmarks.rows(), self.projection.as_slice());
        let phi = kx * p.transpose();
        let mut out = Matrix::zeros(x.rows(), self.dim());
        for i in 0..x.rows() {
            for k in 0..self.dim() {
                out.set(i, k, phi[(i, k)]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_rank_map_reproduces_the_kernel() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.5], [-1.0, 2.0], [0.3, -0.7], [2.0, 2.0]]).unwrap();
        let k = Kernel::Rbf { gamma: 0.5 };
        let map = NystromMap::fit(&x, k, 64);
        let phi = map.transform(&x);
        let g = k.gram_sym(&x);
        for i in 0..5 {
            for j in 0..5 {
                let v = crate::matrix::dot(phi.row(i), phi.row(j));
                assert!((v - g.get(i, j)).abs() < 1e-8, "({i},{j}) {v} vs {}", g.get(i, j));
            }
        }
    }
}
