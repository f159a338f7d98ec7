use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::inference::{self, Marginals, Row, Square};
use crate::domain::{BioLabel, NUM_LABELS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const L: usize = NUM_LABELS;

/// State weights per (feature, label) and label-bigram transition weights.
///
/// The feature index is frozen at construction; features not in it are
/// ignored when scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel<F> {
    features: Vec<String>,
    index: HashMap<String, usize>,
    pub(crate) state: Vec<Row<F>>,
    pub(crate) trans: Square<F>,
    pub l2: F,
}

/// Gradient with the same layout as the model weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradient<F> {
    pub state: Vec<Row<F>>,
    pub trans: Square<F>,
}

impl<F: Scalar> CrfGradient<F> {
    /// Same flattening as [`CrfModel::param`].
    pub fn flat(&self, k: usize) -> F {
        let ns = self.state.len() * L;
        if k < ns {
            self.state[k / L][k % L]
        } else {
            let k = k - ns;
            self.trans[k / L][k % L]
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CrfDoc<F> {
    features: Vec<String>,
    state_weights: Vec<Vec<F>>,
    transition_weights: Vec<Vec<F>>,
    l2: F,
}

impl<F: Scalar> CrfModel<F> {
    /// Zero-weight model over the given feature strings (deduplicated, first wins).
    pub fn new(features: impl IntoIterator<Item = String>, l2: F) -> Self {
        let mut names = Vec::new();
        let mut index = HashMap::new();
        for f in features {
            if !index.contains_key(&f) {
                index.insert(f.clone(), names.len());
                names.push(f);
            }
        }
        let state = vec![[F::zero(); L]; names.len()];
        CrfModel {
            features: names,
            index,
            state,
            trans: [[F::zero(); L]; L],
            l2,
        }
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn state_weight(&self, feature: &str, label: BioLabel) -> Option<F> {
        self.index.get(feature).map(|&f| self.state[f][label.index()])
    }

    pub fn set_state_weight(&mut self, feature: &str, label: BioLabel, w: F) -> bool {
        match self.index.get(feature) {
            Some(&f) => {
                self.state[f][label.index()] = w;
                true
            }
            None => false,
        }
    }

    pub fn transition(&self, from: BioLabel, to: BioLabel) -> F {
        self.trans[from.index()][to.index()]
    }

    pub fn set_transition(&mut self, from: BioLabel, to: BioLabel, w: F) {
        self.trans[from.index()][to.index()] = w;
    }

    /// Number of scalar parameters: `num_features * 9 + 81`.
    pub fn num_params(&self) -> usize {
        self.state.len() * L + L * L
    }

    /// Parameter `k` in flat order: state weights row-major, then transitions.
    pub fn param(&self, k: usize) -> F {
        let ns = self.state.len() * L;
        if k < ns {
            self.state[k / L][k % L]
        } else {
            let k = k - ns;
            self.trans[k / L][k % L]
        }
    }

    pub fn set_param(&mut self, k: usize, v: F) {
        let ns = self.state.len() * L;
        if k < ns {
            self.state[k / L][k % L] = v;
        } else {
            let k = k - ns;
            self.trans[k / L][k % L] = v;
        }
    }

    pub fn squared_norm(&self) -> F {
        let s: F = self.state.iter().flat_map(|r| r.iter()).map(|w| *w * *w).sum();
        let t: F = self.trans.iter().flat_map(|r| r.iter()).map(|w| *w * *w).sum();
        s + t
    }

    /// Known feature ids per position.
    pub fn feature_ids(&self, feats: &[FeatureVector]) -> Vec<Vec<usize>> {
        feats
            .iter()
            .map(|fv| fv.iter().filter_map(|f| self.index.get(f).copied()).collect())
            .collect()
    }

    pub(crate) fn scores_for_ids(&self, ids: &[Vec<usize>], scale: F) -> Vec<Row<F>> {
        ids.iter()
            .map(|pos| {
                let mut row = [F::zero(); L];
                for &f in pos {
                    for (r, w) in row.iter_mut().zip(&self.state[f]) {
                        *r += *w;
                    }
                }
                if scale != F::one() {
                    for r in row.iter_mut() {
                        *r *= scale;
                    }
                }
                row
            })
            .collect()
    }

    pub fn state_scores(&self, feats: &[FeatureVector]) -> Vec<Row<F>> {
        self.scores_for_ids(&self.feature_ids(feats), F::one())
    }

    /// Unnormalized log-score of a label sequence.
    pub fn score(&self, feats: &[FeatureVector], labels: &[BioLabel]) -> F {
        let idx: Vec<usize> = labels.iter().map(|l| l.index()).collect();
        inference::sequence_score(&self.state_scores(feats), &self.trans, &idx)
    }

    pub fn forward_backward(&self, feats: &[FeatureVector]) -> Marginals<F> {
        inference::forward_backward(&self.state_scores(feats), &self.trans)
    }

    /// MAP label sequence and its unnormalized score. Empty input gives an empty path.
    pub fn viterbi_decode(&self, feats: &[FeatureVector]) -> (Vec<BioLabel>, F) {
        if feats.is_empty() {
            return (Vec::new(), F::zero());
        }
        let (path, score) = inference::viterbi(&self.state_scores(feats), &self.trans);
        let labels = path
            .into_iter()
            .map(|i| BioLabel::from_index(i).expect("label index < 9"))
            .collect();
        (labels, score)
    }

    /// `log Z − score(gold) + l2/2·‖w‖²` and its gradient.
    pub fn nll_and_gradient(
        &self,
        feats: &[FeatureVector],
        gold: &[BioLabel],
    ) -> Result<(F, CrfGradient<F>)> {
        if gold.len() != feats.len() {
            return Err(Error::LengthMismatch {
                expected: feats.len(),
                got: gold.len(),
            });
        }
        if feats.is_empty() {
            return Err(Error::invalid("empty sequence"));
        }
        let ids = self.feature_ids(feats);
        let state = self.scores_for_ids(&ids, F::one());
        let m = inference::forward_backward(&state, &self.trans);
        let gold_idx: Vec<usize> = gold.iter().map(|l| l.index()).collect();
        let gold_score = inference::sequence_score(&state, &self.trans, &gold_idx);
        let nll = m.log_z - gold_score + self.l2 / F::of(2.0) * self.squared_norm();

        let mut grad = CrfGradient {
            state: self.state.iter().map(|r| r.map(|w| self.l2 * w)).collect(),
            trans: self.trans.map(|r| r.map(|w| self.l2 * w)),
        };
        accumulate_expected_minus_gold(&mut grad.state, &mut grad.trans, &ids, &m, &gold_idx, F::one());
        Ok((nll, grad))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CrfDoc {
            features: self.features.clone(),
            state_weights: self.state.iter().map(|r| r.to_vec()).collect(),
            transition_weights: self.trans.iter().map(|r| r.to_vec()).collect(),
            l2: self.l2,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: CrfDoc<F> = serde_json::from_str(s)?;
        if doc.state_weights.len() != doc.features.len() {
            return Err(Error::LengthMismatch {
                expected: doc.features.len(),
                got: doc.state_weights.len(),
            });
        }
        let row = |v: &Vec<F>| -> Result<Row<F>> {
            if v.iter().any(|w| !w.is_finite()) {
                return Err(Error::invalid("non-finite CRF weight"));
            }
            <Row<F>>::try_from(v.as_slice()).map_err(|_| Error::LengthMismatch {
                expected: L,
                got: v.len(),
            })
        };
        if doc.transition_weights.len() != L {
            return Err(Error::LengthMismatch {
                expected: L,
                got: doc.transition_weights.len(),
            });
        }
        let mut model = CrfModel::new(doc.features, doc.l2);
        if model.num_features() != doc.state_weights.len() {
            return Err(Error::invalid("duplicate feature names in CRF model"));
        }
        for (dst, src) in model.state.iter_mut().zip(&doc.state_weights) {
            *dst = row(src)?;
        }
        for (dst, src) in model.trans.iter_mut().zip(&doc.transition_weights) {
            *dst = row(src)?;
        }
        Ok(model)
    }
}

/// Adds `factor · (expected − empirical)` feature counts into the buffers.
pub(crate) fn accumulate_expected_minus_gold<F: Scalar>(
    state_grad: &mut [Row<F>],
    trans_grad: &mut Square<F>,
    ids: &[Vec<usize>],
    m: &Marginals<F>,
    gold: &[usize],
    factor: F,
) {
    for (t, pos) in ids.iter().enumerate() {
        for &f in pos {
            let g = &mut state_grad[f];
            for y in 0..L {
                g[y] += factor * m.node[t][y];
            }
            g[gold[t]] -= factor;
        }
    }
    for (t, e) in m.edge.iter().enumerate() {
        for a in 0..L {
            for b in 0..L {
                trans_grad[a][b] += factor * e[a][b];
            }
        }
        trans_grad[gold[t]][gold[t + 1]] -= factor;
    }
}
