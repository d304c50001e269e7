use rand::seq::index::sample;

use super::{bottom_s, QueryContext, QuerySelection, Strategy, StrategyId};
use crate::classifiers::kernel::scale_gamma;
use crate::classifiers::smo::{self, SmoProblem};
use crate::classifiers::Kernel;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::seed::rng_from_seed;

const SMO_TOL: f64 = 1e-4;
const SMO_MAX_ITER: usize = 100_000;

/// Hinted SVM: the labeled points enter as C-SVC variables, each hint point
/// as an epsilon-insensitive regression pair with target 0, which pulls the
/// boundary through the hints. Queries the unlabeled points closest to the
/// hinted boundary.
pub struct HintSvm {
    id: StrategyId,
    params: HintParams,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct HintParams {
    pub hint_fraction: f64,
    pub c_hint: f64,
    pub c_label: f64,
    pub epsilon: f64,
    pub simplified: bool,
}

impl Default for HintParams {
    fn default() -> Self {
        Self {
            hint_fraction: 1.0,
            c_hint: 0.1,
            c_label: 1.0,
            epsilon: 0.1,
            simplified: false,
        }
    }
}

impl HintSvm {
    pub fn new(id: StrategyId) -> Self {
        let d = HintParams::default();
        let params = HintParams {
            hint_fraction: id.param_f64("hint_fraction", d.hint_fraction),
            c_hint: id.param_f64("c_hint", d.c_hint),
            c_label: id.param_f64("c_label", d.c_label),
            epsilon: id.param_f64("epsilon", d.epsilon),
            simplified: id.param_bool("simplified", d.simplified),
        };
        Self { id, params }
    }
}

/// Decision values of the hinted model on `unlabeled`. `y` holds `+-1` for
/// `labeled`; `hints` are pool indices.
pub(crate) fn hinted_decision(
    x: &Matrix,
    kernel: Kernel,
    labeled: &[usize],
    y: &[f64],
    hints: &[usize],
    params: &HintParams,
) -> Result<Vec<f64>> {
    let mut var_point = labeled.to_vec();
    let mut sign = y.to_vec();
    let mut p = vec![-1.0; labeled.len()];
    let mut c = vec![params.c_label; labeled.len()];
    if !params.simplified && params.c_hint > 0.0 {
        for &h in hints {
            for s in [1.0, -1.0] {
                var_point.push(h);
                sign.push(s);
                p.push(params.epsilon);
                c.push(params.c_hint);
            }
        }
    }
    let problem = SmoProblem {
        points: x,
        kernel,
        var_point,
        y: sign,
        p,
        c,
    };
    let sol = smo::solve(&problem, SMO_TOL, SMO_MAX_ITER)?;
    let coef = problem.point_coefficients(&sol.alpha);
    let active: Vec<usize> = (0..x.rows()).filter(|&i| coef[i] != 0.0).collect();
    Ok((0..x.rows())
        .map(|i| {
            active
                .iter()
                .map(|&a| coef[a] * kernel.eval(x.row(a), x.row(i)))
                .sum::<f64>()
                - sol.rho
        })
        .collect())
}

impl Strategy for HintSvm {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        let (_, yl) = ctx.labeled_data();
        let y: Vec<f64> = yl.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect();
        let n_hint =
            ((ctx.unlabeled.len() as f64 * self.params.hint_fraction).round() as usize).min(ctx.unlabeled.len());
        let mut rng = rng_from_seed(ctx.step_seed);
        let mut hints: Vec<usize> = sample(&mut rng, ctx.unlabeled.len(), n_hint)
            .into_iter()
            .map(|k| ctx.unlabeled[k])
            .collect();
        hints.sort_unstable();
        let kernel = Kernel::Rbf {
            gamma: scale_gamma(ctx.x),
        };
        let f = hinted_decision(ctx.x, kernel, ctx.labeled, &y, &hints, &self.params)?;
        let dist: Vec<f64> = ctx.unlabeled.iter().map(|&i| f[i].abs()).collect();
        let chosen = bottom_s(ctx.unlabeled, &dist, ctx.batch_size);
        Ok(QuerySelection::with_scores(chosen, dist))
    }
}
