//! Probabilistic classifiers behind one interface: [`fit`] returns a
//! [`TrainedModel`] that answers `predict_proba`, `predict` and
//! `decision_values`.
//!
//! Models are trained on the classes present in the labels and report
//! probability 0 (decision value `-inf`) for the others, so every output has
//! one column per dataset class.

pub mod kernel;
pub mod logreg;
pub mod nystrom;
pub mod platt;
pub mod smo;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
pub use kernel::{Gamma, Kernel};
pub use logreg::LinearModel;
pub use nystrom::NystromMap;
pub use platt::Platt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logreg,
    SvmLinear,
    SvmRbf,
    /// Logistic regression on Nyström RBF features.
    KernelLogreg,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Logreg => "logreg",
            Self::SvmLinear => "svm_linear",
            Self::SvmRbf => "svm_rbf",
            Self::KernelLogreg => "kernel_logreg",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(Self::Logreg),
            "svm_linear" => Ok(Self::SvmLinear),
            "svm_rbf" => Ok(Self::SvmRbf),
            "kernel_logreg" => Ok(Self::KernelLogreg),
            _ => Err(Error::InvalidArgument(format!("unknown classifier `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub c: f64,
    pub gamma: Gamma,
    pub max_iter: usize,
    pub tol: f64,
    /// Landmark count for [`ClassifierKind::KernelLogreg`].
    pub nystrom_rank: usize,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Self {
        Self {
            kind,
            c: 1.0,
            gamma: Gamma::Scale,
            max_iter: 100_000,
            tol: 1e-4,
            nystrom_rank: 64,
        }
    }

    pub fn svm_rbf() -> Self {
        Self::new(ClassifierKind::SvmRbf)
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Gamma::Value(gamma);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be positive, got {}", self.c)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidArgument(format!("gamma must be positive, got {g}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if self.kind == ClassifierKind::KernelLogreg && self.nystrom_rank == 0 {
            return Err(Error::InvalidArgument("nystrom_rank must be positive".into()));
        }
        Ok(())
    }
}

/// The default query-by-committee members.
pub fn committee() -> Vec<ClassifierSpec> {
    [
        ClassifierKind::Logreg,
        ClassifierKind::SvmLinear,
        ClassifierKind::SvmRbf,
        ClassifierKind::KernelLogreg,
    ]
    .into_iter()
    .map(ClassifierSpec::new)
    .collect()
}

/// One binary SVM: `f(x) = sum_i coef_i K(sv_i, x) - rho`, positive side first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub kernel: Kernel,
    pub support: Matrix,
    pub coef: Vec<f64>,
    pub rho: f64,
    /// Primal weights, only for the linear kernel.
    pub w: Option<Vec<f64>>,
    pub platt: Platt,
}

impl BinarySvm {
    /// Trains on `positive[i]` labels with box constraint `c`.
    pub fn train(x: &Matrix, positive: &[bool], kernel: Kernel, c: f64, tol: f64, max_iter: usize) -> Result<Self> {
        let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
        let problem = smo::SmoProblem::classification(x, kernel, &y, c);
        let sol = smo::solve(&problem, tol, max_iter)?;
        let coef_all = problem.point_coefficients(&sol.alpha);
        let mut svm = Self::from_coefficients(x, &coef_all, sol.rho, kernel);
        let f: Vec<f64> = (0..x.rows()).map(|i| svm.decision_row(x.row(i))).collect();
        svm.platt = Platt::fit(&f, positive);
        Ok(svm)
    }

    /// Keeps the points with non-zero coefficient.
    pub fn from_coefficients(x: &Matrix, coef_all: &[f64], rho: f64, kernel: Kernel) -> Self {
        let sv: Vec<usize> = (0..x.rows()).filter(|&i| coef_all[i] != 0.0).collect();
        let support = x.select_rows(&sv);
        let coef: Vec<f64> = sv.iter().map(|&i| coef_all[i]).collect();
        let w = (kernel == Kernel::Linear).then(|| {
            let mut w = vec![0.0; x.cols()];
            for (k, &i) in sv.iter().enumerate() {
                for (wj, &xv) in w.iter_mut().zip(x.row(i)) {
                    *wj += coef[k] * xv;
                }
            }
            w
        });
        Self {
            kernel,
            support,
            coef,
            rho,
            w,
            platt: Platt::FALLBACK,
        }
    }

    #[inline]
    pub fn decision_row(&self, x: &[f64]) -> f64 {
        match &self.w {
            Some(w) => dot(w, x) - self.rho,
            None => {
                let mut s = 0.0;
                for (k, &c) in self.coef.iter().enumerate() {
                    s += c * self.kernel.eval(self.support.row(k), x);
                }
                s - self.rho
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Linear(LinearModel),
    /// One machine when two classes are present, otherwise one-vs-rest.
    Svm(Vec<BinarySvm>),
    Nystrom {
        map: NystromMap,
        model: LinearModel,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub k_classes: usize,
    /// Classes present at training time, ascending.
    pub classes: Vec<usize>,
    pub n_features: usize,
    pub params: ModelParams,
}

/// Trains a classifier on `x` with labels in `0..k_classes`.
pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[usize], k_classes: usize) -> Result<TrainedModel> {
    spec.validate()?;
    if x.rows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::Training(format!("need at least 2 samples, got {}", x.rows())));
    }
    if !x.is_finite() {
        return Err(Error::Training("features contain non-finite values".into()));
    }
    if let Some(&bad) = y.iter().find(|&&v| v >= k_classes) {
        return Err(Error::Training(format!("label {bad} outside 0..{k_classes}")));
    }
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training("labels contain a single class".into()));
    }
    let local: Vec<usize> = y
        .iter()
        .map(|v| classes.binary_search(v).expect("present class"))
        .collect();

    let logreg_opts = logreg::LogregOptions {
        c: spec.c,
        tol: spec.tol,
        max_iter: spec.max_iter.min(1000),
    };
    let params = match spec.kind {
        ClassifierKind::Logreg => ModelParams::Linear(logreg::fit(x, &local, classes.len(), logreg_opts)?.model),
        ClassifierKind::KernelLogreg => {
            let kernel = Kernel::Rbf {
                gamma: spec.gamma.resolve(x),
            };
            let map = NystromMap::fit(x, kernel, spec.nystrom_rank);
            let phi = map.transform(x);
            let model = logreg::fit(&phi, &local, classes.len(), logreg_opts)?.model;
            ModelParams::Nystrom { map, model }
        }
        ClassifierKind::SvmLinear | ClassifierKind::SvmRbf => {
            let kernel = match spec.kind {
                ClassifierKind::SvmLinear => Kernel::Linear,
                _ => Kernel::Rbf {
                    gamma: spec.gamma.resolve(x),
                },
            };
            let targets: Vec<usize> = if classes.len() == 2 {
                vec![1]
            } else {
                (0..classes.len()).collect()
            };
            let mut machines = Vec::with_capacity(targets.len());
            for t in targets {
                let positive: Vec<bool> = local.iter().map(|&v| v == t).collect();
                machines.push(BinarySvm::train(x, &positive, kernel, spec.c, spec.tol, spec.max_iter)?);
            }
            ModelParams::Svm(machines)
        }
    };
    Ok(TrainedModel {
        spec: *spec,
        k_classes,
        classes,
        n_features: x.cols(),
        params,
    })
}

impl TrainedModel {
    fn check_dims(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.cols(),
            });
        }
        Ok(())
    }

    /// Raw per-present-class scores: logits, or SVM decision values (one column
    /// for a two-class machine).
    fn local_scores(&self, x: &Matrix) -> Matrix {
        match &self.params {
            ModelParams::Linear(m) => m.scores(x),
            ModelParams::Nystrom { map, model } => model.scores(&map.transform(x)),
            ModelParams::Svm(machines) => {
                let mut out = Matrix::zeros(x.rows(), machines.len());
                for i in 0..x.rows() {
                    for (k, svm) in machines.iter().enumerate() {
                        out.set(i, k, svm.decision_row(x.row(i)));
                    }
                }
                out
            }
        }
    }

    /// Row-stochastic `rows x K` probabilities.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        self.check_dims(x)?;
        let scores = self.local_scores(x);
        let kp = self.classes.len();
        let mut out = Matrix::zeros(x.rows(), self.k_classes);
        let mut p = vec![0.0; kp];
        for i in 0..x.rows() {
            let s = scores.row(i);
            match &self.params {
                ModelParams::Linear(_) | ModelParams::Nystrom { .. } => {
                    p.copy_from_slice(s);
                    logreg::softmax(&mut p);
                }
                ModelParams::Svm(machines) if machines.len() == 1 => {
                    let p1 = machines[0].platt.prob(s[0]);
                    p[0] = 1.0 - p1;
                    p[1] = p1;
                }
                ModelParams::Svm(machines) => {
                    for (k, svm) in machines.iter().enumerate() {
                        p[k] = svm.platt.prob(s[k]);
                    }
                    let sum: f64 = p.iter().sum();
                    if sum > 0.0 && sum.is_finite() {
                        p.iter_mut().for_each(|v| *v /= sum);
                    } else {
                        p.fill(1.0 / kp as f64);
                    }
                }
            }
            let row = out.row_mut(i);
            for (k, &c) in self.classes.iter().enumerate() {
                row[c] = p[k];
            }
        }
        Ok(out)
    }

    /// Arg-max of [`predict_proba`](Self::predict_proba), ties to the lowest class.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.iter_rows().map(argmax).collect())
    }

    /// Signed scores. For a binary dataset one column, positive towards class 1;
    /// otherwise `K` columns with `-inf` for classes unseen in training. Logistic
    /// models report logits (their difference in the binary case).
    pub fn decision_values(&self, x: &Matrix) -> Result<Matrix> {
        self.check_dims(x)?;
        let scores = self.local_scores(x);
        let is_svm_pair = matches!(&self.params, ModelParams::Svm(m) if m.len() == 1);
        if self.k_classes == 2 {
            let mut out = Matrix::zeros(x.rows(), 1);
            for i in 0..x.rows() {
                let s = scores.row(i);
                out.set(i, 0, if is_svm_pair { s[0] } else { s[1] - s[0] });
            }
            return Ok(out);
        }
        let mut out = Matrix::from_vec(
            x.rows(),
            self.k_classes,
            vec![f64::NEG_INFINITY; x.rows() * self.k_classes],
        )?;
        for i in 0..x.rows() {
            let s = scores.row(i);
            let row = out.row_mut(i);
            if is_svm_pair {
                row[self.classes[0]] = -s[0];
                row[self.classes[1]] = s[0];
            } else {
                for (k, &c) in self.classes.iter().enumerate() {
                    row[c] = s[k];
                }
            }
        }
        Ok(out)
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}
