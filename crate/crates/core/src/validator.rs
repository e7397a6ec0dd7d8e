//! Weak-label validation and difference-based selection.
//!
//! A scorer trained on gold data re-scores every translated text. The
//! absolute gap between that prediction and the carried-over label is a
//! proxy for translation quality, and only examples within `beta` of their
//! derived label are kept.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Corpus, CorpusError, LabeledText};
use crate::scorer::{predict, PredictError, ScoreItem, ScorerBackend};
use crate::stats;
use crate::translator::AugmentedExample;

pub const DEFAULT_BETAS: [f64; 3] = [0.1, 0.2, 0.3];

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedExample {
    pub example: AugmentedExample,
    pub predicted_label: f64,
    /// `|predicted_label − derived_label|`
    pub difference: f64,
}

impl ValidatedExample {
    pub fn new(example: AugmentedExample, predicted_label: f64) -> Self {
        let difference = libm::fabs(predicted_label - example.derived_label);
        ValidatedExample {
            example,
            predicted_label,
            difference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("difference threshold must be non-negative and finite, got {0}")]
pub struct InvalidBeta(pub f64);

impl ValidationConfig {
    /// `beta = 0` is allowed and keeps only exact matches.
    pub fn new(beta: f64) -> Result<Self, InvalidBeta> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(InvalidBeta(beta));
        }
        Ok(ValidationConfig { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("validation stopped at example {cursor}: {source}")]
pub struct ValidateError {
    /// Index of the first example without a prediction; resume from here.
    pub cursor: usize,
    pub completed: Vec<ValidatedExample>,
    #[source]
    pub source: PredictError,
}

/// Score every example and attach its prediction and difference.
pub fn validate<B: ScorerBackend>(examples: &[AugmentedExample], scorer: B) -> Result<Vec<ValidatedExample>, ValidateError> {
    let items: Vec<ScoreItem> = examples
        .iter()
        .map(|e| ScoreItem::new(e.id.clone(), e.text.clone(), e.language.clone()))
        .collect();
    let attach = |preds: Vec<crate::scorer::Prediction>| -> Vec<ValidatedExample> {
        examples
            .iter()
            .zip(preds)
            .map(|(e, p)| ValidatedExample::new(e.clone(), p.score))
            .collect()
    };
    match predict(scorer, &items) {
        Ok(preds) => Ok(attach(preds)),
        Err(mut e) => {
            let partial = core::mem::take(&mut e.partial);
            Err(ValidateError {
                cursor: partial.len(),
                completed: attach(partial),
                source: e,
            })
        }
    }
}

/// Drop later copies of an exact `(text, language)` pair.
///
/// Returns the survivors in order and the number removed.
pub fn dedup_translations(examples: Vec<AugmentedExample>) -> (Vec<AugmentedExample>, usize) {
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let before = examples.len();
    let kept: Vec<AugmentedExample> = examples
        .into_iter()
        .filter(|e| seen.insert((e.text.clone(), e.language.clone())))
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("no validated examples")]
pub struct EmptyValidation;

pub fn difference_stats(validated: &[ValidatedExample]) -> Result<DifferenceStats, EmptyValidation> {
    let diffs: Vec<f64> = validated.iter().map(|v| v.difference).collect();
    let s = stats::summarize(&diffs).ok_or(EmptyValidation)?;
    Ok(DifferenceStats {
        count: s.count,
        mean: s.mean,
        std: s.std_dev,
        min: s.min,
        p25: s.p25,
        p50: s.p50,
        p75: s.p75,
        max: s.max,
    })
}

/// Examples with `difference ≤ beta`, in order.
pub fn select_by_difference(validated: &[ValidatedExample], config: &ValidationConfig) -> Vec<ValidatedExample> {
    validated
        .iter()
        .filter(|v| v.difference <= config.beta)
        .cloned()
        .collect()
}

/// Gold items first, then the selected weak-labeled examples.
///
/// Languages that only appeared as translation targets become seen.
pub fn assemble_training_set(gold: &Corpus, selected: &[ValidatedExample]) -> Result<Corpus, CorpusError> {
    let mut items: Vec<LabeledText> = gold.items().to_vec();
    items.reserve(selected.len());
    for v in selected {
        let e = &v.example;
        items.push(LabeledText::new(
            e.id.clone(),
            e.text.clone(),
            e.language.clone(),
            e.derived_label,
        )?);
    }
    Corpus::with_absorbed_unseen(items, gold.unseen_languages().iter().cloned())
}
