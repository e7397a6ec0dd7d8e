//! Pearson correlation, grouped evaluation reports and the per-language
//! train/validation split.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, CorpusError, LabeledText};

/// A correlation coefficient, or the explicit marker for constant input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Defined(f64),
    Undefined,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Defined(r) => Some(r),
            Correlation::Undefined => None,
        }
    }
}

impl core::fmt::Display for Correlation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Correlation::Defined(r) => write!(f, "{r:.4}"),
            Correlation::Undefined => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PearsonError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Pearson's r from deviations about the means.
///
/// Constant input on either side yields [`Correlation::Undefined`].
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<Correlation, PearsonError> {
    if x.len() != y.len() {
        return Err(PearsonError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(PearsonError::TooFewPoints(x.len()));
    }
    if is_constant(x) || is_constant(y) {
        return Ok(Correlation::Undefined);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let denom = libm::sqrt(sxx * syy);
    if denom.is_nan() || denom <= 0.0 {
        return Ok(Correlation::Undefined);
    }
    Ok(Correlation::Defined((sxy / denom).clamp(-1.0, 1.0)))
}

/// Ordered `(id, score)` pairs with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionFile {
    entries: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("duplicate prediction id {0:?}")]
pub struct DuplicatePrediction(pub String);

impl PredictionFile {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self, DuplicatePrediction> {
        let mut ids = BTreeSet::new();
        for (id, _) in &entries {
            if !ids.insert(id.as_str()) {
                return Err(DuplicatePrediction(id.clone()));
            }
        }
        Ok(PredictionFile { entries })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_map(&self) -> BTreeMap<&str, f64> {
        self.entries.iter().map(|(id, s)| (id.as_str(), *s)).collect()
    }
}

impl From<Vec<crate::scorer::Prediction>> for PredictionFile {
    fn from(preds: Vec<crate::scorer::Prediction>) -> Self {
        // ids of a prediction run mirror the (unique) ids of its input
        PredictionFile {
            entries: preds.into_iter().map(|p| (p.id, p.score)).collect(),
        }
    }
}

/// How overall, seen and unseen columns combine their items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupMode {
    /// One correlation over all items of the group.
    #[default]
    Pooled,
    /// Mean of the defined per-language correlations in the group.
    Average,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub overall: Correlation,
    pub seen: Correlation,
    pub unseen: Correlation,
    pub per_language: BTreeMap<String, Correlation>,
    pub counts: BTreeMap<String, usize>,
    pub mode: GroupMode,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluateError {
    #[error("{n} gold ids have no prediction: {ids:?}", n = .0.len(), ids = .0)]
    MissingPredictions(Vec<String>),
    #[error("{n} predictions have no gold item: {ids:?}", n = .0.len(), ids = .0)]
    UnknownPredictions(Vec<String>),
}

fn correlate(pairs: &[(f64, f64)]) -> Correlation {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    pearson_r(&x, &y).unwrap_or(Correlation::Undefined)
}

/// Correlate predictions with gold labels per language and per group.
pub fn evaluate(
    predictions: &PredictionFile,
    gold: &Corpus,
    seen: &BTreeSet<String>,
    unseen: &BTreeSet<String>,
    mode: GroupMode,
) -> Result<EvaluationReport, EvaluateError> {
    let scores = predictions.to_map();
    let missing: Vec<String> = gold
        .items()
        .iter()
        .filter(|i| !scores.contains_key(i.id.as_str()))
        .map(|i| i.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EvaluateError::MissingPredictions(missing));
    }
    let gold_ids: BTreeSet<&str> = gold.items().iter().map(|i| i.id.as_str()).collect();
    let unknown: Vec<String> = predictions
        .entries()
        .iter()
        .filter(|(id, _)| !gold_ids.contains(id.as_str()))
        .map(|(id, _)| id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(EvaluateError::UnknownPredictions(unknown));
    }

    let mut by_lang: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for lang in seen.iter().chain(unseen) {
        by_lang.entry(lang.clone()).or_default();
    }
    for item in gold.items() {
        by_lang
            .entry(item.language.clone())
            .or_default()
            .push((scores[item.id.as_str()], item.label));
    }
    let per_language: BTreeMap<String, Correlation> =
        by_lang.iter().map(|(l, pairs)| (l.clone(), correlate(pairs))).collect();
    let counts = by_lang.iter().map(|(l, p)| (l.clone(), p.len())).collect();

    let group = |member: &dyn Fn(&str) -> bool| -> Correlation {
        match mode {
            GroupMode::Pooled => {
                let pooled: Vec<(f64, f64)> = by_lang
                    .iter()
                    .filter(|(l, _)| member(l))
                    .flat_map(|(_, p)| p.iter().copied())
                    .collect();
                correlate(&pooled)
            }
            GroupMode::Average => {
                let rs: Vec<f64> = per_language
                    .iter()
                    .filter(|(l, _)| member(l))
                    .filter_map(|(_, r)| r.value())
                    .collect();
                if rs.is_empty() {
                    Correlation::Undefined
                } else {
                    Correlation::Defined(rs.iter().sum::<f64>() / rs.len() as f64)
                }
            }
        }
    };
    Ok(EvaluationReport {
        overall: group(&|_| true),
        seen: group(&|l| seen.contains(l)),
        unseen: group(&|l| unseen.contains(l)),
        per_language,
        counts,
        mode,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("validation fraction must lie strictly between 0 and 1, got {0}")]
    Fraction(f64),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Corpus,
    pub validation: Corpus,
    /// Languages too small to contribute a validation item.
    pub warnings: Vec<String>,
}

/// Validation items drawn for a language with `count` items.
pub fn validation_size(count: usize, fraction: f64) -> usize {
    if count < 2 {
        return 0;
    }
    let k = libm::round(count as f64 * fraction) as usize;
    k.clamp(1, count - 1)
}

/// Stratified random split: each language contributes
/// `round(count · fraction)` validation items (at least one when it has two
/// or more). Both halves keep corpus order.
pub fn split(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Split, SplitError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SplitError::Fraction(fraction));
    }
    let mut by_lang: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, item) in corpus.items().iter().enumerate() {
        by_lang.entry(item.language.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_validation = alloc::vec![false; corpus.len()];
    let mut warnings = Vec::new();
    for (lang, mut idx) in by_lang {
        if idx.len() < 2 {
            warnings.push(format!("language {lang:?} has a single item; kept in train"));
            continue;
        }
        let k = validation_size(idx.len(), fraction);
        idx.shuffle(&mut rng);
        for &i in &idx[..k] {
            in_validation[i] = true;
        }
    }
    let (mut train, mut validation): (Vec<LabeledText>, Vec<LabeledText>) = (Vec::new(), Vec::new());
    for (item, v) in corpus.items().iter().zip(in_validation) {
        if v {
            validation.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    let unseen = corpus.unseen_languages().iter().cloned();
    Ok(Split {
        train: Corpus::new(train, unseen.clone())?,
        validation: Corpus::new(validation, unseen)?,
        warnings,
    })
}
