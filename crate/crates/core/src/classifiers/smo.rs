//! Sequential minimal optimisation for the generic SVM dual
//!
//! ```text
//! min_a  1/2 a'Qa + p'a   s.t.  y'a = 0,  0 <= a_i <= C_i,   Q_ij = y_i y_j K(x_v(i), x_v(j))
//! ```
//!
//! Every variable points at a row of a shared point matrix, so one point may
//! own several variables (the hinted SVM gives each hint point two). Working
//! pairs are picked with second-order information; the loop stops once the
//! maximal KKT violation `m(a) - M(a)` drops below `tol`.

use std::collections::VecDeque;
use std::rc::Rc;

use super::kernel::Kernel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const TAU: f64 = 1e-12;
/// Upper bound on cached kernel entries (about 256 MiB of `f64`).
const CACHE_ENTRIES: usize = 32 * 1024 * 1024;

#[derive(Clone, Debug)]
pub struct SmoProblem<'a> {
    pub points: &'a Matrix,
    pub kernel: Kernel,
    /// Variable index -> row of `points`.
    pub var_point: Vec<usize>,
    /// Variable signs, each `+1.0` or `-1.0`.
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    /// Per-variable upper bound.
    pub c: Vec<f64>,
}

impl<'a> SmoProblem<'a> {
    /// The C-SVC dual: one variable per point, `p = -1`.
    pub fn classification(points: &'a Matrix, kernel: Kernel, y: &[f64], c: f64) -> Self {
        let n = points.rows();
        Self {
            points,
            kernel,
            var_point: (0..n).collect(),
            y: y.to_vec(),
            p: vec![-1.0; n],
            c: vec![c; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.y.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.var_point.len() != n || self.p.len() != n || self.c.len() != n {
            return Err(Error::InvalidArgument(
                "SMO problem vectors have inconsistent lengths".into(),
            ));
        }
        if n < 2 {
            return Err(Error::Training("SMO needs at least two variables".into()));
        }
        if self.var_point.iter().any(|&v| v >= self.points.rows()) {
            return Err(Error::InvalidArgument("SMO variable refers to a missing point".into()));
        }
        if self.y.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidArgument("SMO signs must be +1 or -1".into()));
        }
        if self.c.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument("SMO bounds must be positive and finite".into()));
        }
        Ok(())
    }

    /// Coefficient of every point in the decision function `sum_v y_v a_v K(x_v, .)`.
    pub fn point_coefficients(&self, alpha: &[f64]) -> Vec<f64> {
        let mut coef = vec![0.0; self.points.rows()];
        for (v, &a) in alpha.iter().enumerate() {
            coef[self.var_point[v]] += self.y[v] * a;
        }
        coef
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// Final maximal violation `m(a) - M(a)`.
    pub kkt_gap: f64,
    pub converged: bool,
}

/// FIFO cache of kernel rows, keyed by point.
struct RowCache<'a> {
    points: &'a Matrix,
    kernel: Kernel,
    rows: Vec<Option<Rc<[f64]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> RowCache<'a> {
    fn new(points: &'a Matrix, kernel: Kernel) -> Self {
        let n = points.rows();
        Self {
            points,
            kernel,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity: (CACHE_ENTRIES / n.max(1)).max(2),
        }
    }

    fn row(&mut self, i: usize) -> Rc<[f64]> {
        if let Some(r) = &self.rows[i] {
            return Rc::clone(r);
        }
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        let xi = self.points.row(i);
        let r: Rc<[f64]> = (0..self.points.rows())
            .map(|j| self.kernel.eval(xi, self.points.row(j)))
            .collect();
        self.rows[i] = Some(Rc::clone(&r));
        self.order.push_back(i);
        r
    }
}

#[inline]
fn is_upper(a: f64, c: f64) -> bool {
    a >= c
}

#[inline]
fn is_lower(a: f64) -> bool {
    a <= 0.0
}

/// Maximal violation `m(a) - M(a)` for the gradient `g`.
fn violation(y: &[f64], alpha: &[f64], c: &[f64], g: &[f64]) -> f64 {
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::NEG_INFINITY;
    for t in 0..y.len() {
        if y[t] > 0.0 {
            if !is_upper(alpha[t], c[t]) {
                up = up.max(-g[t]);
            }
            if !is_lower(alpha[t]) {
                low = low.max(g[t]);
            }
        } else {
            if !is_lower(alpha[t]) {
                up = up.max(g[t]);
            }
            if !is_upper(alpha[t], c[t]) {
                low = low.max(-g[t]);
            }
        }
    }
    up + low
}

/// Gradient `Qa + p` computed from scratch.
pub fn gradient(problem: &SmoProblem<'_>, alpha: &[f64]) -> Vec<f64> {
    let mut g = problem.p.clone();
    for (i, &ai) in alpha.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let xi = problem.points.row(problem.var_point[i]);
        for (j, gj) in g.iter_mut().enumerate() {
            let k = problem.kernel.eval(xi, problem.points.row(problem.var_point[j]));
            *gj += problem.y[i] * problem.y[j] * k * ai;
        }
    }
    g
}

/// KKT audit: the maximal violation `m(a) - M(a)` of `alpha` (non-positive at an
/// exact optimum) together with the largest bound or equality breach.
pub fn kkt_audit(problem: &SmoProblem<'_>, alpha: &[f64]) -> (f64, f64) {
    let g = gradient(problem, alpha);
    let gap = violation(&problem.y, alpha, &problem.c, &g);
    let mut feas = problem.y.iter().zip(alpha).map(|(y, a)| y * a).sum::<f64>().abs();
    for (a, c) in alpha.iter().zip(&problem.c) {
        feas = feas.max(-a).max(a - c);
    }
    (gap, feas)
}

/// Dual objective `1/2 a'Qa + p'a`.
pub fn objective(problem: &SmoProblem<'_>, alpha: &[f64]) -> f64 {
    let g = gradient(problem, alpha);
    alpha
        .iter()
        .zip(g.iter().zip(&problem.p))
        .map(|(a, (gi, pi))| 0.5 * a * (gi + pi))
        .sum()
}

pub fn solve(problem: &SmoProblem<'_>, tol: f64, max_iter: usize) -> Result<SmoSolution> {
    problem.validate()?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "SMO tolerance must be positive, got {tol}"
        )));
    }
    let n = problem.n_vars();
    let y = &problem.y;
    let c = &problem.c;
    let vp = &problem.var_point;
    let mut cache = RowCache::new(problem.points, problem.kernel);
    let qd: Vec<f64> = vp
        .iter()
        .map(|&v| problem.kernel.eval(problem.points.row(v), problem.points.row(v)))
        .collect();

    let mut alpha = vec![0.0; n];
    let mut g = problem.p.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;

    while iterations < max_iter {
        // first index: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let cand = if y[t] > 0.0 {
                (!is_upper(alpha[t], c[t])).then(|| -g[t])
            } else {
                (!is_lower(alpha[t])).then(|| g[t])
            };
            if let Some(v) = cand {
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else {
            gap = f64::NEG_INFINITY;
            converged = true;
            break;
        };
        let ki = cache.row(vp[i]);

        // second index: largest objective decrease among I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let q_it = y[i] * y[t] * ki[vp[t]];
            if y[t] > 0.0 {
                if !is_lower(alpha[t]) {
                    let grad_diff = gmax + g[t];
                    gmax2 = gmax2.max(g[t]);
                    if grad_diff > 0.0 {
                        let quad = (qd[i] + qd[t] - 2.0 * y[i] * q_it).max(TAU);
                        let obj = -(grad_diff * grad_diff) / quad;
                        if obj <= best {
                            best = obj;
                            j_sel = Some(t);
                        }
                    }
                }
            } else if !is_upper(alpha[t], c[t]) {
                let grad_diff = gmax - g[t];
                gmax2 = gmax2.max(-g[t]);
                if grad_diff > 0.0 {
                    let quad = (qd[i] + qd[t] + 2.0 * y[i] * q_it).max(TAU);
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= best {
                        best = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        gap = gmax + gmax2;
        let Some(j) = j_sel.filter(|_| gap >= tol) else {
            converged = true;
            break;
        };
        iterations += 1;

        let kj = cache.row(vp[j]);
        let q_ij = y[i] * y[j] * ki[vp[j]];
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let (ci, cj) = (c[i], c[j]);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * q_ij).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * q_ij).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        for t in 0..n {
            let kit = ki[vp[t]];
            let kjt = kj[vp[t]];
            g[t] += y[t] * (y[i] * kit * dai + y[j] * kjt * daj);
        }
    }

    if !converged {
        gap = violation(y, &alpha, c, &g);
        log::warn!("SMO stopped at the iteration cap ({max_iter}) with KKT gap {gap:.3e}");
    }

    let rho = compute_rho(y, &alpha, c, &g);
    if !rho.is_finite() || alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numerical("SMO produced non-finite coefficients".into()));
    }
    Ok(SmoSolution {
        alpha,
        rho,
        iterations,
        kkt_gap: gap,
        converged,
    })
}

/// Offset from the free variables, or the midpoint of the feasible interval when
/// every variable sits at a bound.
fn compute_rho(y: &[f64], alpha: &[f64], c: &[f64], g: &[f64]) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * g[t];
        if is_upper(alpha[t], c[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else {
        lb
    }
}
