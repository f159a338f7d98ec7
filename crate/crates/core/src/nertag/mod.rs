//! Linear-chain CRF entity tagger over BIO labels.

mod features;
mod inference;
mod model;
mod train;

pub use features::{extract_features, sentence_features, FeatureVector};
pub use inference::{forward_backward, sequence_score, viterbi, Marginals};
pub use model::{CrfGradient, CrfModel};
pub use train::{train_crf, CrfTrainConfig, TrainReport};

use crate::domain::{bio_to_spans, EntitySpan};
use crate::scalar::Scalar;
use crate::textfeat::tokenize;

/// Tokenizes, decodes and converts the best label path back to spans.
pub fn tag_tweet<F: Scalar>(model: &CrfModel<F>, text: &str) -> Vec<EntitySpan> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Vec::new();
    }
    let feats = sentence_features(&tokens);
    let (labels, _) = model.viterbi_decode(&feats);
    bio_to_spans(text, &tokens, &labels)
}
