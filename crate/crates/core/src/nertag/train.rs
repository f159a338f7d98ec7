use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::inference;
use super::model::{accumulate_expected_minus_gold, CrfModel};
use crate::domain::{BioLabel, NUM_LABELS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const L: usize = NUM_LABELS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrfTrainConfig<F> {
    /// Passes over the training data.
    pub iterations: usize,
    /// L2 coefficient on the summed (not averaged) sequence loss.
    pub l2: F,
    /// Initial step; epoch `e` uses `learning_rate / sqrt(e)`.
    pub learning_rate: F,
    pub seed: u64,
    /// Stop once the relative objective improvement over `period` epochs
    /// falls below `delta`. Zero disables the test.
    pub delta: F,
    pub period: usize,
}

impl<F: Scalar> Default for CrfTrainConfig<F> {
    fn default() -> Self {
        CrfTrainConfig {
            iterations: 1000,
            l2: F::of(0.1),
            learning_rate: F::of(0.05),
            seed: 0,
            delta: F::of(1e-6),
            period: 10,
        }
    }
}

impl<F: Scalar> CrfTrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        if !(self.l2 >= F::zero()) || !self.l2.is_finite() {
            return Err(Error::invalid("l2 must be >= 0"));
        }
        if !(self.learning_rate > F::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        if self.learning_rate * self.l2 >= F::one() {
            return Err(Error::invalid("learning_rate * l2 must be < 1"));
        }
        if self.period == 0 {
            return Err(Error::invalid("period must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport<F> {
    pub epochs: usize,
    /// Objective `Σ nll + l2/2·‖w‖²` measured during each epoch.
    pub objective: Vec<F>,
}

impl<F: Scalar> TrainReport<F> {
    pub fn final_objective(&self) -> F {
        self.objective.last().copied().unwrap_or_else(F::zero)
    }
}

/// Stochastic gradient descent over whole sequences.
///
/// Weights are kept as `scale · v` so the per-step L2 decay costs O(1); only
/// the features present in a sequence are touched by its update.
pub fn train_crf<F: Scalar>(
    data: &[(Vec<FeatureVector>, Vec<BioLabel>)],
    cfg: &CrfTrainConfig<F>,
) -> Result<(CrfModel<F>, TrainReport<F>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("no training sequences"));
    }
    for (feats, gold) in data {
        if feats.len() != gold.len() {
            return Err(Error::LengthMismatch {
                expected: feats.len(),
                got: gold.len(),
            });
        }
    }

    let mut model = CrfModel::new(
        data.iter()
            .flat_map(|(feats, _)| feats.iter().flat_map(|fv| fv.0.iter().cloned())),
        cfg.l2,
    );
    let seqs: Vec<(Vec<Vec<usize>>, Vec<usize>)> = data
        .iter()
        .filter(|(feats, _)| !feats.is_empty())
        .map(|(feats, gold)| {
            (
                model.feature_ids(feats),
                gold.iter().map(|l| l.index()).collect(),
            )
        })
        .collect();
    if seqs.is_empty() {
        return Err(Error::invalid("all training sequences are empty"));
    }

    let n = F::of_usize(seqs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut scale = F::one();
    let mut objective: Vec<F> = Vec::new();
    let mut state_step = vec![[F::zero(); L]; model.num_features()];

    for epoch in 1..=cfg.iterations {
        order.shuffle(&mut rng);
        let eta = cfg.learning_rate / F::of_usize(epoch).sqrt();
        let decay = F::one() - eta * cfg.l2 / n;
        let mut loss = F::zero();

        for &i in &order {
            let (ids, gold) = &seqs[i];
            scale *= decay;

            let state = model.scores_for_ids(ids, scale);
            let trans = model.trans.map(|r| r.map(|w| w * scale));
            let m = inference::forward_backward(&state, &trans);
            loss += m.log_z - inference::sequence_score(&state, &trans, gold);

            // gradient lands in the step buffers, then v -= eta/scale * g
            for pos in ids {
                for &f in pos {
                    state_step[f] = [F::zero(); L];
                }
            }
            let mut trans_step = [[F::zero(); L]; L];
            accumulate_expected_minus_gold(&mut state_step, &mut trans_step, ids, &m, gold, F::one());
            let k = eta / scale;
            for pos in ids {
                for &f in pos {
                    let g = std::mem::replace(&mut state_step[f], [F::zero(); L]);
                    for (w, gv) in model.state[f].iter_mut().zip(g) {
                        *w -= k * gv;
                    }
                }
            }
            for (wr, gr) in model.trans.iter_mut().zip(&trans_step) {
                for (w, gv) in wr.iter_mut().zip(gr) {
                    *w -= k * *gv;
                }
            }

            if scale < F::of(1e-9) {
                rescale(&mut model, scale);
                scale = F::one();
            }
        }

        let reg = cfg.l2 / F::of(2.0) * model.squared_norm() * scale * scale;
        objective.push(loss + reg);

        if cfg.delta > F::zero() && epoch > cfg.period {
            let now = objective[epoch - 1];
            let before = objective[epoch - 1 - cfg.period];
            if now > F::zero() && (before - now) / now < cfg.delta {
                log::debug!("crf converged after {epoch} epochs");
                break;
            }
        }
    }

    rescale(&mut model, scale);
    model.l2 = cfg.l2;
    let epochs = objective.len();
    Ok((model, TrainReport { epochs, objective }))
}

fn rescale<F: Scalar>(model: &mut CrfModel<F>, scale: F) {
    for row in model.state.iter_mut() {
        for w in row.iter_mut() {
            *w *= scale;
        }
    }
    for row in model.trans.iter_mut() {
        for w in row.iter_mut() {
            *w *= scale;
        }
    }
}
