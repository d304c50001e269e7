//! Multinomial logistic regression with an L2 penalty on the weights (biases
//! are unpenalised), fitted by damped Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Above this many parameters Newton's dense Hessian gets expensive and plain
/// gradient descent with backtracking is used instead.
const NEWTON_MAX_PARAMS: usize = 1000;
const HESSIAN_RIDGE: f64 = 1e-8;

/// Linear scores `z = W x + b` over `n_out` outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `n_out x d`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(n_out: usize, d: usize) -> Self {
        Self {
            weights: Matrix::zeros(n_out, d),
            bias: vec![0.0; n_out],
        }
    }

    pub fn n_out(&self) -> usize {
        self.bias.len()
    }

    pub fn scores_row(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = crate::matrix::dot(self.weights.row(k), x) + self.bias[k];
        }
    }

    pub fn scores(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.n_out());
        for i in 0..x.rows() {
            self.scores_row(x.row(i), out.row_mut(i));
        }
        out
    }

    fn to_theta(&self) -> Vec<f64> {
        let d = self.weights.cols();
        let mut t = Vec::with_capacity(self.n_out() * (d + 1));
        for k in 0..self.n_out() {
            t.extend_from_slice(self.weights.row(k));
            t.push(self.bias[k]);
        }
        t
    }

    fn from_theta(theta: &[f64], n_out: usize, d: usize) -> Self {
        let mut m = Self::zeros(n_out, d);
        for k in 0..n_out {
            let block = &theta[k * (d + 1)..(k + 1) * (d + 1)];
            m.weights.row_mut(k).copy_from_slice(&block[..d]);
            m.bias[k] = block[d];
        }
        m
    }
}

/// In-place numerically stable softmax.
pub fn softmax(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Penalised negative log-likelihood for labels `y` in `0..n_out`.
pub fn objective(model: &LinearModel, x: &Matrix, y: &[usize], c: f64) -> f64 {
    let mut z = vec![0.0; model.n_out()];
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        model.scores_row(x.row(i), &mut z);
        loss += log_sum_exp(&z) - z[yi];
    }
    let penalty: f64 = model.weights.as_slice().iter().map(|w| w * w).sum();
    loss + penalty / (2.0 * c)
}

/// Gradient of [`objective`], laid out like `model` (weights then bias).
pub fn gradient(model: &LinearModel, x: &Matrix, y: &[usize], c: f64) -> LinearModel {
    let (k, d) = (model.n_out(), x.cols());
    let mut g = LinearModel::zeros(k, d);
    let mut p = vec![0.0; k];
    for (i, &yi) in y.iter().enumerate() {
        let xi = x.row(i);
        model.scores_row(xi, &mut p);
        softmax(&mut p);
        for (kk, &pk) in p.iter().enumerate() {
            let r = pk - f64::from(u8::from(kk == yi));
            for (gw, &xv) in g.weights.row_mut(kk).iter_mut().zip(xi) {
                *gw += r * xv;
            }
            g.bias[kk] += r;
        }
    }
    for (gw, &w) in g.weights.as_mut_slice().iter_mut().zip(model.weights.as_slice()) {
        *gw += w / c;
    }
    g
}

fn norm(theta: &[f64]) -> f64 {
    theta.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct LogregOptions {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct LogregFit {
    pub model: LinearModel,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Fits the multinomial model on labels `0..n_out`.
pub fn fit(x: &Matrix, y: &[usize], n_out: usize, opts: LogregOptions) -> Result<LogregFit> {
    if x.rows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if y.iter().any(|&v| v >= n_out) {
        return Err(Error::InvalidArgument("label outside the output range".into()));
    }
    let d = x.cols();
    let n_params = n_out * (d + 1);
    let mut model = LinearModel::zeros(n_out, d);
    let mut fval = objective(&model, x, y, opts.c);
    let mut iterations = 0;
    let mut grad = gradient(&model, x, y, opts.c).to_theta();
    let mut gnorm = norm(&grad);

    while gnorm > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let theta = model.to_theta();
        let dir: Vec<f64> = if n_params <= NEWTON_MAX_PARAMS {
            newton_direction(&model, x, opts.c, &grad)?
        } else {
            grad.iter().map(|g| -g).collect()
        };
        let slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let (dir, slope) = if slope < 0.0 {
            (dir, slope)
        } else {
            (grad.iter().map(|g| -g).collect(), -gnorm * gnorm)
        };
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-16 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let cm = LinearModel::from_theta(&cand, n_out, d);
            let cf = objective(&cm, x, y, opts.c);
            if cf <= fval + 1e-4 * step * slope {
                model = cm;
                fval = cf;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        grad = gradient(&model, x, y, opts.c).to_theta();
        gnorm = norm(&grad);
        if !moved {
            break;
        }
    }
    if !fval.is_finite() || model.weights.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("logistic regression diverged".into()));
    }
    Ok(LogregFit {
        model,
        iterations,
        grad_norm: gnorm,
    })
}

fn newton_direction(model: &LinearModel, x: &Matrix, c: f64, grad: &[f64]) -> Result<Vec<f64>> {
    let (k, d) = (model.n_out(), x.cols());
    let dim = d + 1;
    let n = k * dim;
    let m = x.rows();
    let xa = DMatrix::from_fn(m, dim, |i, j| if j < d { x.get(i, j) } else { 1.0 });
    let mut probs = DMatrix::<f64>::zeros(m, k);
    let mut p = vec![0.0; k];
    for i in 0..m {
        model.scores_row(x.row(i), &mut p);
        softmax(&mut p);
        for a in 0..k {
            probs[(i, a)] = p[a];
        }
    }
    let mut h = DMatrix::<f64>::zeros(n, n);
    for a in 0..k {
        for b in a..k {
            let mut xw = xa.clone();
            for i in 0..m {
                let w = if a == b {
                    probs[(i, a)] * (1.0 - probs[(i, a)])
                } else {
                    -probs[(i, a)] * probs[(i, b)]
                };
                xw.row_mut(i).scale_mut(w);
            }
            let block = xa.transpose() * xw;
            h.view_mut((a * dim, b * dim), (dim, dim)).copy_from(&block);
        }
    }
    for a in 0..k {
        for b in a + 1..k {
            for r in 0..dim {
                for s in 0..dim {
                    h[(b * dim + s, a * dim + r)] = h[(a * dim + r, b * dim + s)];
                }
            }
        }
        for r in 0..d {
            h[(a * dim + r, a * dim + r)] += 1.0 / c;
        }
    }
    let g = DVector::from_column_slice(grad);
    let mut ridge = HESSIAN_RIDGE;
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += ridge;
        }
        if let Some(ch) = hr.cholesky() {
            let step = ch.solve(&g);
            return Ok(step.iter().map(|v| -v).collect());
        }
        ridge *= 100.0;
    }
    Err(Error::Numerical("logistic Hessian is not positive definite".into()))
}
