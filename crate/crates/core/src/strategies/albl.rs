use rand::Rng as _;

use super::{build_strategy, QueryContext, QuerySelection, Strategy, StrategyFamily, StrategyId};
use crate::error::Result;
use crate::seed::rng_from_seed;

/// EXP4.P over expert advice vectors, with log-domain weights.
///
/// Experts are active-learning strategies and actions are unlabeled points.
/// The exploration floor is `min(sqrt(ln N / (K T)), 1 / (2K))` for `N` experts,
/// `K` actions and horizon `T`.
#[derive(Clone, Debug)]
pub struct Exp4P {
    log_w: Vec<f64>,
    delta: f64,
    horizon: usize,
}

impl Exp4P {
    pub fn new(n_experts: usize, delta: f64, horizon: usize) -> Self {
        Self {
            log_w: vec![0.0; n_experts],
            delta,
            horizon: horizon.max(1),
        }
    }

    pub fn n_experts(&self) -> usize {
        self.log_w.len()
    }

    /// Current expert probabilities `p_k`.
    pub fn expert_probs(&self) -> Vec<f64> {
        let max = self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.log_w.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|v| v / total).collect()
    }

    pub fn p_min(&self, n_actions: usize) -> f64 {
        let k = n_actions.max(1) as f64;
        let n = self.n_experts() as f64;
        (n.ln() / (k * self.horizon as f64)).sqrt().min(0.5 / k)
    }

    /// `q_j = (1 - K p_min) sum_k p_k advice[k][j] + p_min`.
    pub fn action_probs(&self, advice: &[Vec<f64>]) -> Vec<f64> {
        let k = advice.first().map_or(0, Vec::len);
        let p_min = self.p_min(k);
        let p = self.expert_probs();
        (0..k)
            .map(|j| {
                let mix: f64 = p.iter().zip(advice).map(|(pk, a)| pk * a[j]).sum();
                (1.0 - k as f64 * p_min) * mix + p_min
            })
            .collect()
    }

    /// Importance-weighted update after playing action `j` with reward `reward`.
    pub fn update(&mut self, advice: &[Vec<f64>], q: &[f64], j: usize, reward: f64) {
        let phi_j: Vec<f64> = advice.iter().map(|a| a[j]).collect();
        let v_hat: Vec<f64> = advice
            .iter()
            .map(|a| a.iter().zip(q).map(|(p, qq)| p / qq).sum())
            .collect();
        self.update_parts(&phi_j, q[j], &v_hat, q.len(), reward);
    }

    fn update_parts(&mut self, phi_j: &[f64], q_j: f64, v_hat: &[f64], n_actions: usize, reward: f64) {
        let p_min = self.p_min(n_actions);
        let k = n_actions.max(1) as f64;
        let n = self.n_experts() as f64;
        let bonus = ((n / self.delta).ln() / (k * self.horizon as f64)).sqrt();
        for ((w, &phi), &v) in self.log_w.iter_mut().zip(phi_j).zip(v_hat) {
            let y_hat = phi * reward / q_j;
            *w += p_min / 2.0 * (y_hat + v * bonus);
        }
    }
}

/// What is needed to credit the experts once the reward is known.
struct Pending {
    phi_j: Vec<f64>,
    q_j: f64,
    v_hat: Vec<f64>,
    n_actions: usize,
}

/// Active learning by learning: an EXP4.P bandit over a committee of
/// strategies, rewarded by importance-weighted accuracy of the current model
/// on the points it queried.
pub struct Albl {
    id: StrategyId,
    arm_ids: Vec<StrategyId>,
    arms: Vec<Box<dyn Strategy>>,
    bandit: Option<Exp4P>,
    /// Queried pool index and its query probability.
    history: Vec<(usize, f64)>,
    pending: Option<Pending>,
}

impl Albl {
    pub const DELTA: f64 = 0.1;

    pub fn new(id: StrategyId) -> Self {
        let arms = [
            StrategyFamily::UsLc,
            StrategyFamily::QbcVe,
            StrategyFamily::Kcenter,
            StrategyFamily::Uniform,
        ]
        .into_iter()
        .map(|f| StrategyId::new(f, 1))
        .collect();
        Self::with_arms(id, arms)
    }

    pub fn with_arms(id: StrategyId, arm_ids: Vec<StrategyId>) -> Self {
        Self {
            id,
            arm_ids,
            arms: Vec::new(),
            bandit: None,
            history: Vec::new(),
            pending: None,
        }
    }

    /// Expert probabilities, once the bandit has started.
    pub fn arm_probs(&self) -> Option<Vec<f64>> {
        self.bandit.as_ref().map(Exp4P::expert_probs)
    }

    fn reward(&self, ctx: &QueryContext<'_>) -> Result<f64> {
        if self.history.is_empty() {
            return Ok(0.0);
        }
        let idx: Vec<usize> = self.history.iter().map(|h| h.0).collect();
        let pred = ctx.model.predict(&ctx.x.select_rows(&idx))?;
        let hits: f64 = self
            .history
            .iter()
            .zip(&pred)
            .filter(|((i, _), p)| ctx.labels[*i] == Some(**p))
            .map(|((_, q), _)| 1.0 / q)
            .sum();
        Ok(hits / (ctx.x.rows() as f64 * ctx.budget.max(1) as f64))
    }

    fn advice(&mut self, ctx: &QueryContext<'_>) -> Result<Vec<Vec<f64>>> {
        let single = QueryContext { batch_size: 1, ..*ctx };
        let u = ctx.unlabeled.len();
        let mut advice = Vec::with_capacity(self.arms.len());
        for (arm, id) in self.arms.iter_mut().zip(&self.arm_ids) {
            if id.family == StrategyFamily::Uniform {
                advice.push(vec![1.0 / u as f64; u]);
                continue;
            }
            let pick = arm.select(&single)?.chosen[0];
            let pos = ctx
                .unlabeled
                .binary_search(&pick)
                .expect("arm picked an unlabeled point");
            let mut phi = vec![0.0; u];
            phi[pos] = 1.0;
            advice.push(phi);
        }
        Ok(advice)
    }
}

impl Strategy for Albl {
    fn id(&self) -> &StrategyId {
        &self.id
    }

    fn select(&mut self, ctx: &QueryContext<'_>) -> Result<QuerySelection> {
        if self.bandit.is_none() {
            self.arms = self.arm_ids.iter().map(build_strategy).collect::<Result<_>>()?;
            self.bandit = Some(Exp4P::new(self.arms.len(), Self::DELTA, ctx.budget));
        }
        if let Some(p) = self.pending.take() {
            let r = self.reward(ctx)?;
            let bandit = self.bandit.as_mut().expect("bandit initialised");
            bandit.update_parts(&p.phi_j, p.q_j, &p.v_hat, p.n_actions, r);
        }
        let advice = self.advice(ctx)?;
        let bandit = self.bandit.as_ref().expect("bandit initialised");
        let q = bandit.action_probs(&advice);
        let v_hat: Vec<f64> = advice
            .iter()
            .map(|a| a.iter().zip(&q).map(|(p, qq)| p / qq).sum())
            .collect();

        let mut rng = rng_from_seed(ctx.step_seed);
        let mut weights = q.clone();
        let mut chosen = Vec::with_capacity(ctx.batch_size);
        for _ in 0..ctx.batch_size {
            let total: f64 = weights.iter().sum();
            let mut target = rng.random_range(0.0..total);
            let mut j = weights.iter().rposition(|&w| w > 0.0).expect("positive mass");
            for (pos, &w) in weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    j = pos;
                    break;
                }
                target -= w;
            }
            if chosen.is_empty() {
                self.pending = Some(Pending {
                    phi_j: advice.iter().map(|a| a[j]).collect(),
                    q_j: q[j],
                    v_hat: v_hat.clone(),
                    n_actions: q.len(),
                });
            }
            weights[j] = 0.0;
            self.history.push((ctx.unlabeled[j], q[j]));
            chosen.push(ctx.unlabeled[j]);
        }
        Ok(QuerySelection::with_scores(chosen, q))
    }
}
