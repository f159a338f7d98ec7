use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kfold::stratified_kfold;
use super::metrics::{binary_f1_positive, conll_span_f1, PRF};
use crate::domain::{EntitySpan, EntityTag, HelpLabel, LabeledTweet};
use crate::error::{Error, Result};
use crate::models::{tagging_sequences, tokenized_texts, train_classifier_on, ModelConfig};
use crate::nertag::{tag_tweet, train_crf};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig<F> {
    pub k: usize,
    pub seed: u64,
    pub models: ModelConfig<F>,
}

impl<F: Scalar> Default for CvConfig<F> {
    fn default() -> Self {
        CvConfig {
            k: 5,
            seed: 0,
            models: ModelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub folds: Vec<FoldScore>,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingFold {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub per_tag: BTreeMap<EntityTag, PRF>,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingReport {
    pub folds: Vec<TaggingFold>,
    /// Per-tag scores averaged over folds.
    pub per_tag: BTreeMap<EntityTag, PRF>,
    pub mean_weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub seed: u64,
    pub examples: usize,
    pub classification: ClassificationReport,
    pub tagging: TaggingReport,
}

/// Runs `job` for every fold on its own thread and returns results in fold order.
fn per_fold<T: Send>(k: usize, job: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let job = &job;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..k).map(|f| s.spawn(move || job(f))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold worker panicked"))
            .collect()
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Stratified k-fold F1 of the positive class.
pub fn cross_validate_classifier<F: Scalar>(
    data: &[LabeledTweet],
    cfg: &CvConfig<F>,
) -> Result<ClassificationReport> {
    cfg.models.validate()?;
    let labels: Vec<HelpLabel> = data.iter().map(|e| e.label).collect();
    let folds = stratified_kfold(&labels, cfg.k, cfg.seed)?;
    let scores = per_fold(cfg.k, |f| {
        let train: Vec<&LabeledTweet> = folds.train_indices(f).into_iter().map(|i| &data[i]).collect();
        let test: Vec<&LabeledTweet> = folds.test_indices(f).into_iter().map(|i| &data[i]).collect();
        let (vectorizer, model, _) = train_classifier_on(&train, &cfg.models)?;
        let pred = tokenized_texts(&test)
            .iter()
            .map(|d| model.predict(&vectorizer.transform(d)).map(|p| p.0))
            .collect::<Result<Vec<_>>>()?;
        let gold: Vec<HelpLabel> = test.iter().map(|e| e.label).collect();
        let prf = binary_f1_positive(&pred, &gold)?;
        Ok(FoldScore {
            fold: f,
            train_size: train.len(),
            test_size: test.len(),
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
        })
    })?;
    let mean_f1 = mean(scores.iter().map(|s| s.f1));
    Ok(ClassificationReport { folds: scores, mean_f1 })
}

/// k-fold CoNLL span scores of the tagger, over calls for help only.
pub fn cross_validate_tagger<F: Scalar>(data: &[LabeledTweet], cfg: &CvConfig<F>) -> Result<TaggingReport> {
    cfg.models.validate()?;
    let tagged: Vec<&LabeledTweet> = data.iter().filter(|e| e.label.is_positive()).collect();
    if tagged.len() < cfg.k {
        return Err(Error::invalid(format!(
            "k = {} exceeds the {} tagged examples",
            cfg.k,
            tagged.len()
        )));
    }
    let folds = stratified_kfold(&vec![(); tagged.len()], cfg.k, cfg.seed)?;
    let scores = per_fold(cfg.k, |f| {
        let train: Vec<&LabeledTweet> = folds.train_indices(f).into_iter().map(|i| tagged[i]).collect();
        let test: Vec<&LabeledTweet> = folds.test_indices(f).into_iter().map(|i| tagged[i]).collect();
        let (crf, _) = train_crf(&tagging_sequences(&train)?, &cfg.models.crf)?;
        let pred: Vec<Vec<EntitySpan>> = test.iter().map(|e| tag_tweet(&crf, &e.tweet.text)).collect();
        let gold: Vec<Vec<EntitySpan>> = test.iter().map(|e| e.spans.clone()).collect();
        let r = conll_span_f1(&pred, &gold)?;
        Ok(TaggingFold {
            fold: f,
            train_size: train.len(),
            test_size: test.len(),
            per_tag: r.per_tag,
            weighted_f1: r.weighted_f1,
        })
    })?;
    let per_tag = EntityTag::ALL
        .iter()
        .map(|t| {
            let rows: Vec<&PRF> = scores.iter().filter_map(|s| s.per_tag.get(t)).collect();
            let prf = PRF {
                precision: mean(rows.iter().map(|p| p.precision)),
                recall: mean(rows.iter().map(|p| p.recall)),
                f1: mean(rows.iter().map(|p| p.f1)),
                support: rows.iter().map(|p| p.support).sum(),
            };
            (*t, prf)
        })
        .collect();
    let mean_weighted_f1 = mean(scores.iter().map(|s| s.weighted_f1));
    Ok(TaggingReport {
        folds: scores,
        per_tag,
        mean_weighted_f1,
    })
}

pub fn cross_validate<F: Scalar>(data: &[LabeledTweet], cfg: &CvConfig<F>) -> Result<EvalReport> {
    Ok(EvalReport {
        k: cfg.k,
        seed: cfg.seed,
        examples: data.len(),
        classification: cross_validate_classifier(data, cfg)?,
        tagging: cross_validate_tagger(data, cfg)?,
    })
}
