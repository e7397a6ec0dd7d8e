//! Weak-labeled data augmentation for multilingual text regression.
//!
//! The crate holds the pure parts of the augmentation pipeline: corpus
//! statistics, distribution-based candidate sampling, the cross-lingual
//! translation scheme, weak-label validation with difference-based
//! selection, a hashed character n-gram ridge regressor used as the
//! reference scorer, mean ensembling and Pearson correlation reporting.
//!
//! Everything here works on in-memory values. Reading and writing files,
//! talking to HTTP backends and orchestrating stages lives in the
//! `wader-cli` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod corpus;
pub mod ensembler;
pub mod evaluator;
pub mod sampler;
pub mod scorer;
pub mod stats;
pub mod synthetic;
pub mod translator;
pub mod validator;

mod backend;

pub use backend::BackendError;
pub use corpus::{Corpus, CorpusError, CorpusStats, LabeledText, SummaryRow};
pub use ensembler::{ensemble_mean, EnsembleConfig, EnsembleError, PredictionFile};
pub use evaluator::{evaluate, pearson_r, split, Correlation, EvaluationReport, GroupMode};
pub use sampler::{sample_candidates, SamplingConfig};
pub use scorer::{clamp, NgramRegressor, Prediction, ScoreItem, ScorerBackend};
pub use translator::{
    build_plan, build_plan_for, execute_plan, AugmentedExample, TranslationBackend, TranslationPlan,
    TranslationRequest,
};
pub use validator::{
    assemble_training_set, difference_stats, select_by_difference, validate, DifferenceStats,
    ValidatedExample, ValidationConfig,
};

/// Lowest score on the Likert intimacy scale.
pub const MIN_SCORE: f64 = 1.0;
/// Highest score on the Likert intimacy scale.
pub const MAX_SCORE: f64 = 5.0;
