//! Training and persisting the three model artifacts together.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{train_classifier, LinearModel, TrainConfig};
use crate::domain::{spans_to_bio, BioLabel, HelpLabel, LabeledTweet};
use crate::error::{Error, Result};
use crate::nertag::{sentence_features, tag_tweet, train_crf, CrfModel, CrfTrainConfig, FeatureVector};
use crate::scalar::Scalar;
use crate::textfeat::{surfaces, tokenize, SparseVector, TfIdfVectorizer};

pub const VECTORIZER_FILE: &str = "vectorizer.json";
pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const CRF_FILE: &str = "crf.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig<F> {
    pub min_df: usize,
    pub svm: TrainConfig<F>,
    pub crf: CrfTrainConfig<F>,
}

impl<F: Scalar> Default for ModelConfig<F> {
    fn default() -> Self {
        ModelConfig {
            min_df: 1,
            svm: TrainConfig::default(),
            crf: CrfTrainConfig::default(),
        }
    }
}

impl<F: Scalar> ModelConfig<F> {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.svm.seed = seed;
        self.crf.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_df == 0 {
            return Err(Error::invalid("min_df must be >= 1"));
        }
        self.svm.validate()?;
        self.crf.validate()
    }
}

#[derive(Debug, Clone)]
pub struct ModelBundle<F> {
    pub vectorizer: TfIdfVectorizer<F>,
    pub classifier: LinearModel<F>,
    pub crf: CrfModel<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub examples: usize,
    pub tagged_examples: usize,
    pub feature_size: usize,
    pub classifier_objective: f64,
    pub classifier_train_accuracy: f64,
    pub crf_features: usize,
    pub crf_epochs: usize,
    pub crf_objective: f64,
    pub crf_token_accuracy: f64,
}

pub fn tokenized_texts(data: &[&LabeledTweet]) -> Vec<Vec<String>> {
    data.iter().map(|e| surfaces(&tokenize(&e.tweet.text))).collect()
}

/// Feature/label sequences for the tagger; only calls for help carry spans.
pub fn tagging_sequences(data: &[&LabeledTweet]) -> Result<Vec<(Vec<FeatureVector>, Vec<BioLabel>)>> {
    data.iter()
        .filter(|e| e.label.is_positive())
        .map(|e| {
            let toks = tokenize(&e.tweet.text);
            Ok((sentence_features(&toks), spans_to_bio(&toks, &e.spans)?))
        })
        .collect()
}

pub fn train_classifier_on<F: Scalar>(
    data: &[&LabeledTweet],
    cfg: &ModelConfig<F>,
) -> Result<(TfIdfVectorizer<F>, LinearModel<F>, F)> {
    let docs = tokenized_texts(data);
    let vectorizer = TfIdfVectorizer::fit(&docs, cfg.min_df)?;
    let xs: Vec<SparseVector<F>> = docs.iter().map(|d| vectorizer.transform(d)).collect();
    let ys: Vec<HelpLabel> = data.iter().map(|e| e.label).collect();
    let (model, hist) = train_classifier(
        &xs,
        &ys,
        vectorizer.feature_size(),
        vectorizer.fingerprint(),
        &cfg.svm,
    )?;
    let obj = hist.last().copied().unwrap_or_else(F::zero);
    Ok((vectorizer, model, obj))
}

pub fn token_accuracy<F: Scalar>(crf: &CrfModel<F>, seqs: &[(Vec<FeatureVector>, Vec<BioLabel>)]) -> f64 {
    let (mut ok, mut total) = (0usize, 0usize);
    for (feats, gold) in seqs {
        let (pred, _) = crf.viterbi_decode(feats);
        ok += pred.iter().zip(gold).filter(|(a, b)| a == b).count();
        total += gold.len();
    }
    if total == 0 {
        0.0
    } else {
        ok as f64 / total as f64
    }
}

impl<F: Scalar> ModelBundle<F> {
    pub fn train(data: &[LabeledTweet], cfg: &ModelConfig<F>) -> Result<(Self, TrainSummary)> {
        cfg.validate()?;
        let refs: Vec<&LabeledTweet> = data.iter().collect();
        let (vectorizer, classifier, obj) = train_classifier_on(&refs, cfg)?;
        let seqs = tagging_sequences(&refs)?;
        let (crf, report) = train_crf(&seqs, &cfg.crf)?;

        let correct = refs
            .iter()
            .filter(|e| {
                let x = vectorizer.transform_text(&e.tweet.text);
                classifier.predict(&x).map(|p| p.0 == e.label).unwrap_or(false)
            })
            .count();
        let summary = TrainSummary {
            examples: data.len(),
            tagged_examples: seqs.len(),
            feature_size: vectorizer.feature_size(),
            classifier_objective: obj.to_f64().unwrap_or(f64::NAN),
            classifier_train_accuracy: correct as f64 / data.len() as f64,
            crf_features: crf.num_features(),
            crf_epochs: report.epochs,
            crf_objective: report.final_objective().to_f64().unwrap_or(f64::NAN),
            crf_token_accuracy: token_accuracy(&crf, &seqs),
        };
        Ok((
            ModelBundle {
                vectorizer,
                classifier,
                crf,
            },
            summary,
        ))
    }

    /// Classifies a text, returning the label and margin.
    pub fn classify(&self, text: &str) -> Result<(HelpLabel, F)> {
        self.classifier.predict(&self.vectorizer.transform_text(text))
    }

    pub fn tag(&self, text: &str) -> Vec<crate::domain::EntitySpan> {
        tag_tweet(&self.crf, text)
    }

    pub fn paths(dir: &Path) -> [PathBuf; 3] {
        [dir.join(VECTORIZER_FILE), dir.join(CLASSIFIER_FILE), dir.join(CRF_FILE)]
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let [v, c, m] = Self::paths(dir);
        for (path, body) in [
            (v, self.vectorizer.to_json()?),
            (c, self.classifier.to_json()?),
            (m, self.crf.to_json()?),
        ] {
            fs::write(&path, body).map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        Ok(())
    }

    /// Loads all three artifacts; the error names the first missing or broken file.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let [v, c, m] = Self::paths(dir.as_ref());
        let read = |p: &PathBuf| fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e));
        let with_path = |p: &PathBuf, e: Error| Error::invalid(format!("{}: {e}", p.display()));
        let vectorizer = TfIdfVectorizer::from_json(&read(&v)?).map_err(|e| with_path(&v, e))?;
        let classifier = LinearModel::from_json(&read(&c)?).map_err(|e| with_path(&c, e))?;
        let crf = CrfModel::from_json(&read(&m)?).map_err(|e| with_path(&m, e))?;
        if classifier.weights.len() != vectorizer.feature_size() {
            return Err(Error::LengthMismatch {
                expected: vectorizer.feature_size(),
                got: classifier.weights.len(),
            });
        }
        if classifier.trained_on != vectorizer.fingerprint() {
            return Err(Error::invalid(format!(
                "{} was trained on a different vectorizer",
                c.display()
            )));
        }
        Ok(ModelBundle {
            vectorizer,
            classifier,
            crf,
        })
    }
}
