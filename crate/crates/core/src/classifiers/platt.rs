//! Sigmoid calibration of SVM decision values, `P(y = 1 | f) = 1 / (1 + exp(A f + B))`.

use serde::{Deserialize, Serialize};

const MAX_ITER: usize = 100;
const MIN_STEP: f64 = 1e-10;
const SIGMA: f64 = 1e-12;
const EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
    /// True when the fit failed or was skipped and the fixed sigmoid `sigma(2 f)` is used.
    pub fallback: bool,
}

impl Platt {
    pub const FALLBACK: Platt = Platt {
        a: -2.0,
        b: 0.0,
        fallback: true,
    };

    #[inline]
    pub fn prob(&self, f: f64) -> f64 {
        let z = self.a * f + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }

    /// Fits `(A, B)` by Newton's method with backtracking on the regularised
    /// targets of Lin, Lin and Weng. Perfectly separated training values and
    /// non-convergence both fall back to [`Platt::FALLBACK`].
    pub fn fit(decision: &[f64], positive: &[bool]) -> Platt {
        debug_assert_eq!(decision.len(), positive.len());
        let prior1 = positive.iter().filter(|&&p| p).count() as f64;
        let prior0 = positive.len() as f64 - prior1;
        if prior1 == 0.0 || prior0 == 0.0 {
            return Self::FALLBACK;
        }
        let separated = decision
            .iter()
            .zip(positive)
            .all(|(&f, &p)| if p { f > 0.0 } else { f < 0.0 });
        if separated {
            return Self::FALLBACK;
        }

        let hi = (prior1 + 1.0) / (prior1 + 2.0);
        let lo = 1.0 / (prior0 + 2.0);
        let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

        let objective = |a: f64, b: f64| -> f64 {
            decision
                .iter()
                .zip(&t)
                .map(|(&f, &ti)| {
                    let z = f * a + b;
                    if z >= 0.0 {
                        ti * z + (-z).exp().ln_1p()
                    } else {
                        (ti - 1.0) * z + z.exp().ln_1p()
                    }
                })
                .sum()
        };

        let mut a = 0.0;
        let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
        let mut fval = objective(a, b);
        for _ in 0..MAX_ITER {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
            for (&f, &ti) in decision.iter().zip(&t) {
                let z = f * a + b;
                let (p, q) = if z >= 0.0 {
                    let e = (-z).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = z.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                let d2 = p * q;
                h11 += f * f * d2;
                h22 += d2;
                h21 += f * d2;
                let d1 = ti - p;
                g1 += f * d1;
                g2 += d1;
            }
            if g1.abs() < EPS && g2.abs() < EPS {
                return Platt { a, b, fallback: false };
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            let mut accepted = false;
            while step >= MIN_STEP {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    accepted = true;
                    break;
                }
                step /= 2.0;
            }
            if !accepted || !a.is_finite() || !b.is_finite() {
                log::debug!("Platt line search failed; using the fixed sigmoid");
                return Self::FALLBACK;
            }
        }
        log::debug!("Platt fit did not converge; using the fixed sigmoid");
        Self::FALLBACK
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_values_fall_back() {
        let p = Platt::fit(&[-2.0, -1.0, 1.0, 3.0], &[false, false, true, true]);
        assert_eq!(p, Platt::FALLBACK);
        assert!((p.prob(0.5) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(p.prob(0.0), 0.5);
    }

    #[test]
    fn overlapping_values_fit_a_decreasing_sigmoid() {
        let f: Vec<f64> = (0..40).map(|i| (i as f64 - 20.0) / 10.0).collect();
        // noisy labels: positives mostly on the right
        let y: Vec<bool> = (0..40).map(|i| (i > 20) ^ (i % 7 == 0)).collect();
        let p = Platt::fit(&f, &y);
        assert!(!p.fallback);
        assert!(p.a < 0.0);
        assert!(p.prob(2.0) > p.prob(-2.0));
        // stationarity of the fitted log-likelihood
        let n1 = y.iter().filter(|&&v| v).count() as f64;
        let n0 = 40.0 - n1;
        let (hi, lo) = ((n1 + 1.0) / (n1 + 2.0), 1.0 / (n0 + 2.0));
        let g2: f64 = f
            .iter()
            .zip(&y)
            .map(|(&fi, &yi)| (if yi { hi } else { lo }) - p.prob(fi))
            .sum();
        assert!(g2.abs() < 1e-4);
    }

    #[test]
    fn probabilities_are_bounded_for_extreme_inputs() {
        let p = Platt {
            a: -3.0,
            b: 0.1,
            fallback: false,
        };
        for f in [-1e300, -50.0, 0.0, 50.0, 1e300] {
            let v = p.prob(f);
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
