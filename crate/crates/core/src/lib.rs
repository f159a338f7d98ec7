//! Crisis-tweet triage.
//!
//! Ingests tweet streams, flags messages calling for help, tags
//! person/city/address/status entities with a linear-chain CRF, normalizes
//! the extracted address and resolves it through a geocoding provider.
//!
//! The numeric models ([`TfIdfVectorizer`](textfeat::TfIdfVectorizer),
//! [`LinearModel`](classify::LinearModel), [`CrfModel`](nertag::CrfModel))
//! are generic over a [`Scalar`]; the aliases below fix them to `f64`, which
//! is what the CLI and server use.

pub mod classify;
pub mod domain;
pub mod error;
pub mod evalkit;
pub mod geoloc;
pub mod ingest;
pub mod models;
pub mod nertag;
pub mod scalar;
pub mod textfeat;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TfIdf = textfeat::TfIdfVectorizer<f64>;
pub type Sparse = textfeat::SparseVector<f64>;
pub type Linear = classify::LinearModel<f64>;
pub type Crf = nertag::CrfModel<f64>;
pub type CrfConfig = nertag::CrfTrainConfig<f64>;
pub type SvmConfig = classify::TrainConfig<f64>;
