//! Exemplar-based multi-label impression tag estimation.
//!
//! A query (a word image, a font, anything a classifier can score) is
//! compared against a set of exemplar fonts with known impression tags. The
//! tags of the best-matching exemplars are pooled and the ones that occur
//! often enough are returned. Around that core the crate provides vocabulary
//! construction, a direct multi-label thresholding baseline, macro-averaged
//! evaluation with a hyperparameter sweep, a simulator for corpora with
//! missing and noisy labels, and a genre-vs-impression correlation pipeline.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod corpus;
pub mod error;
pub mod estimator;
pub mod exemplar;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod vocab;

pub use error::{Error, Result};
pub use estimator::{
    class_weight, class_weight_exact, estimate_ensemble, estimate_multilabel, EnsembleParams, Estimate,
    MultiLabelParams,
};
pub use exemplar::{
    load_exemplars, nearest_exemplar_scores, score_from_matrix, top_n_indices, ExemplarSet, FeatureStore,
    FeatureVector, ScoreVector,
};
pub use metrics::{evaluate, sweep, EvalReport, SweepResult};
pub use scalar::Scalar;
pub use vocab::{build_vocabulary, canonicalize, MergeRules, RawTagRecord, TagSet, TagVocabulary};

pub type ScoreVector64 = exemplar::ScoreVector<f64>;
pub type ScoreVector32 = exemplar::ScoreVector<f32>;
pub type FeatureVector64 = exemplar::FeatureVector<f64>;
pub type FeatureVector32 = exemplar::FeatureVector<f32>;
pub type FeatureStore64 = exemplar::FeatureStore<f64>;
pub type MultiLabelParams64 = estimator::MultiLabelParams<f64>;
pub type EvalReport64 = metrics::EvalReport<f64>;
pub type EvalReport32 = metrics::EvalReport<f32>;
pub type SweepResult64 = metrics::SweepResult<f64>;
pub type LatentFontModel64 = simulate::LatentFontModel<f64>;
pub type Simulation64 = simulate::Simulation<f64>;
pub type GenreImpressionMatrix64 = corpus::GenreImpressionMatrix<f64>;
pub type Matrix64 = corpus::Matrix<f64>;
pub type ScoreTable64 = io::ScoreTable<f64>;
