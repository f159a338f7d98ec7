//! Evaluation protocol: stratified folds, classification and span F1,
//! cross-validation harness and the synthetic labeled corpus.

mod cv;
mod kfold;
mod metrics;
mod synth;

pub use cv::{
    cross_validate, cross_validate_classifier, cross_validate_tagger, ClassificationReport, CvConfig,
    EvalReport, FoldScore, TaggingFold, TaggingReport,
};
pub use kfold::{stratified_kfold, FoldAssignment};
pub use metrics::{binary_f1_positive, conll_span_f1, SpanReport, PRF};
pub use synth::{demo_geocoder_table, generate_synthetic_corpus, AFFECTED_CITIES};
