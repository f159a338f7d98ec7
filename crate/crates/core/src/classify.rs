//! Linear max-margin "call for help" classifier trained with Pegasos.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::HelpLabel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textfeat::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<F> {
    pub weights: Vec<F>,
    pub bias: F,
    #[serde(rename = "vectorizer_fingerprint")]
    pub trained_on: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    pub lambda: F,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        TrainConfig {
            lambda: F::of(1e-4),
            epochs: 50,
            seed: 0,
            shuffle: true,
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > F::zero()) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Regularized hinge objective `λ/2·(‖w‖² + b²) + mean(max(0, 1 − y·(w·x + b)))`.
pub fn objective<F: Scalar>(model: &LinearModel<F>, xs: &[SparseVector<F>], ys: &[HelpLabel], lambda: F) -> F {
    objective_with(&model.weights, model.bias, xs, ys, lambda)
}

fn objective_with<F: Scalar>(w: &[F], b: F, xs: &[SparseVector<F>], ys: &[HelpLabel], lambda: F) -> F {
    let reg = (w.iter().map(|v| *v * *v).sum::<F>() + b * b) * lambda / F::of(2.0);
    let loss: F = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let m = F::of(y.sign()) * (x.dot_dense(w) + b);
            (F::one() - m).max(F::zero())
        })
        .sum();
    reg + loss / F::of_usize(xs.len().max(1))
}

/// Trains with Pegasos subgradient steps of size `1/(λ·t)`.
///
/// The bias is treated as the weight of a constant feature and shares the
/// regularizer; dimension is `max index + 1` of the inputs or `dim`,
/// whichever is larger.
pub fn train_classifier<F: Scalar>(
    xs: &[SparseVector<F>],
    ys: &[HelpLabel],
    dim: usize,
    fingerprint: impl Into<String>,
    cfg: &TrainConfig<F>,
) -> Result<(LinearModel<F>, Vec<F>)> {
    cfg.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::invalid("need at least two training examples"));
    }
    if !(ys.iter().any(|y| y.is_positive()) && ys.iter().any(|y| !y.is_positive())) {
        return Err(Error::SingleClass);
    }
    if let Some(bad) = xs
        .iter()
        .position(|x| x.entries().iter().any(|e| !e.1.is_finite()))
    {
        return Err(Error::NonFinite(bad));
    }
    let dim = xs
        .iter()
        .filter_map(|x| x.max_index())
        .map(|i| i + 1)
        .max()
        .unwrap_or(0)
        .max(dim);

    let mut w = vec![F::zero(); dim];
    let mut b = F::zero();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t: usize = 0;
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            t += 1;
            let eta = F::one() / (cfg.lambda * F::of_usize(t));
            let y = F::of(ys[i].sign());
            let margin = y * (xs[i].dot_dense(&w) + b);
            let shrink = F::one() - eta * cfg.lambda;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            b *= shrink;
            if margin < F::one() {
                for &(j, xv) in xs[i].entries() {
                    w[j] += eta * y * xv;
                }
                b += eta * y;
            }
        }
        history.push(objective_with(&w, b, xs, ys, cfg.lambda));
    }

    Ok((
        LinearModel {
            weights: w,
            bias: b,
            trained_on: fingerprint.into(),
        },
        history,
    ))
}

impl<F: Scalar> LinearModel<F> {
    /// Returns the label and the raw margin `w·x + b`. A zero margin is negative.
    pub fn predict(&self, x: &SparseVector<F>) -> Result<(HelpLabel, F)> {
        if let Some(i) = x.max_index() {
            if i >= self.weights.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    size: self.weights.len(),
                });
            }
        }
        let margin = x.dot_dense(&self.weights) + self.bias;
        let label = if margin > F::zero() {
            HelpLabel::CallForHelp
        } else {
            HelpLabel::NotCallForHelp
        };
        Ok((label, margin))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.weights.iter().any(|w| !w.is_finite()) || !m.bias.is_finite() {
            return Err(Error::invalid("non-finite classifier weight"));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use HelpLabel::*;

    fn sv(pairs: &[(usize, f64)]) -> SparseVector<f64> {
        SparseVector::from_pairs(pairs.to_vec())
    }

    fn model(w: Vec<f64>, b: f64) -> LinearModel<f64> {
        LinearModel {
            weights: w,
            bias: b,
            trained_on: String::new(),
        }
    }

    #[test]
    fn two_point_toy() {
        let xs = vec![sv(&[(0, 1.0)]), sv(&[(1, 1.0)])];
        let ys = vec![CallForHelp, NotCallForHelp];
        let (m, _) = train_classifier(&xs, &ys, 2, "fp", &TrainConfig::default()).unwrap();
        assert_eq!(m.predict(&xs[0]).unwrap().0, CallForHelp);
        assert_eq!(m.predict(&xs[1]).unwrap().0, NotCallForHelp);
        assert_eq!(m.trained_on, "fp");
    }

    #[test]
    fn zero_vector_uses_bias_sign() {
        let zero = sv(&[]);
        assert_eq!(model(vec![1.0, 0.0], 0.5).predict(&zero).unwrap(), (CallForHelp, 0.5));
        assert_eq!(model(vec![1.0, 0.0], -0.5).predict(&zero).unwrap().0, NotCallForHelp);
    }

    #[test]
    fn predict_examples() {
        let x = sv(&[(0, 1.0)]);
        assert_eq!(model(vec![1.0, 0.0], 0.0).predict(&x).unwrap(), (CallForHelp, 1.0));
        assert_eq!(model(vec![0.0, 0.0], 0.0).predict(&x).unwrap(), (NotCallForHelp, 0.0));
        assert_eq!(model(vec![1.0, 0.0], -2.0).predict(&x).unwrap(), (NotCallForHelp, -1.0));
        assert!(matches!(
            model(vec![1.0], 0.0).predict(&sv(&[(3, 1.0)])),
            Err(Error::IndexOutOfRange { index: 3, size: 1 })
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let xs: Vec<_> = (0..10).map(|i| sv(&[(i % 3, 1.0), (3, i as f64 / 10.0)])).collect();
        let ys: Vec<_> = (0..10).map(|i| if i % 3 == 0 { CallForHelp } else { NotCallForHelp }).collect();
        let cfg = TrainConfig { seed: 9, ..Default::default() };
        let a = train_classifier(&xs, &ys, 4, "", &cfg).unwrap().0;
        let b = train_classifier(&xs, &ys, 4, "", &cfg).unwrap().0;
        assert_eq!(
            a.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
            b.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a.bias.to_bits(), b.bias.to_bits());
    }

    #[test]
    fn rejects_bad_input() {
        let xs = vec![sv(&[(0, 1.0)]), sv(&[(1, 1.0)])];
        let cfg = TrainConfig::default();
        assert!(matches!(
            train_classifier(&xs, &[CallForHelp, CallForHelp], 2, "", &cfg),
            Err(Error::SingleClass)
        ));
        let bad = vec![sv(&[(0, f64::NAN)]), sv(&[(1, 1.0)])];
        assert!(matches!(
            train_classifier(&bad, &[CallForHelp, NotCallForHelp], 2, "", &cfg),
            Err(Error::NonFinite(0))
        ));
        let cfg0 = TrainConfig { epochs: 0, ..cfg };
        assert!(train_classifier(&xs, &[CallForHelp, NotCallForHelp], 2, "", &cfg0).is_err());
    }

    #[test]
    fn objective_decreases_every_ten_epochs() {
        // fixed, non-separable dataset
        let xs: Vec<_> = (0..400)
            .map(|i| {
                let a = ((i * 7) % 11) as f64 / 11.0;
                let b = ((i * 5) % 13) as f64 / 13.0;
                SparseVector::from_pairs(vec![(0, a), (1, b), (2 + i % 4, 0.5)])
            })
            .collect();
        let ys: Vec<_> = (0..400)
            .map(|i| if (i * 3) % 7 < 3 { CallForHelp } else { NotCallForHelp })
            .collect();
        let cfg = TrainConfig {
            lambda: 0.05,
            epochs: 100,
            seed: 3,
            shuffle: true,
        };
        let (_, hist) = train_classifier(&xs, &ys, 6, "", &cfg).unwrap();
        let sampled: Vec<f64> = hist.iter().skip(9).step_by(10).copied().collect();
        for w in sampled.windows(2) {
            assert!(w[1] <= w[0] + 1e-3, "{sampled:?}");
        }
    }

    #[test]
    fn json_shape() {
        let m = model(vec![0.5, -1.0], 0.25);
        let js = m.to_json().unwrap();
        assert_eq!(js, r#"{"weights":[0.5,-1.0],"bias":0.25,"vectorizer_fingerprint":""}"#);
        assert_eq!(LinearModel::<f64>::from_json(&js).unwrap(), m);
    }

    proptest! {
        #[test]
        fn label_invariant_under_positive_scaling(w in prop::collection::vec(-3.0f64..3.0, 3),
                                                  b in -2.0f64..2.0,
                                                  x in prop::collection::vec(-1.0f64..1.0, 3),
                                                  k in 0.01f64..100.0) {
            let xv = SparseVector::from_pairs(x.into_iter().enumerate().collect());
            let m = model(w.clone(), b);
            let scaled = model(w.iter().map(|v| v * k).collect(), b * k);
            let (l1, m1) = m.predict(&xv).unwrap();
            let (l2, m2) = scaled.predict(&xv).unwrap();
            prop_assume!(m1.abs() > 1e-9 && m2.abs() > 1e-9);
            prop_assert_eq!(l1, l2);
        }

        #[test]
        fn separable_toy_sets_fit(points in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..20)) {
            // label by the sign of x0 with a margin gap
            let pts: Vec<(f64, f64)> = points.into_iter().map(|(a, b)| (if a >= 0.0 { a + 0.3 } else { a - 0.3 }, b)).collect();
            let ys: Vec<_> = pts.iter().map(|p| if p.0 > 0.0 { CallForHelp } else { NotCallForHelp }).collect();
            prop_assume!(ys.contains(&CallForHelp) && ys.contains(&NotCallForHelp));
            let xs: Vec<_> = pts.iter().map(|p| sv(&[(0, p.0), (1, p.1)])).collect();
            let (m, _) = train_classifier(&xs, &ys, 2, "", &TrainConfig::default()).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                prop_assert_eq!(m.predict(x).unwrap().0, *y);
            }
        }
    }
}
