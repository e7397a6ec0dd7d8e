//! Labeled multilingual corpora and their descriptive statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::stats;
use crate::{MAX_SCORE, MIN_SCORE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("label {label} of item {id:?} is outside [1, 5]")]
    LabelOutOfRange { id: String, label: f64 },
    #[error("item {id:?} has empty text")]
    EmptyText { id: String },
    #[error("item {id:?} has an empty language code")]
    EmptyLanguage { id: String },
    #[error("item id is empty")]
    EmptyId,
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("language {0:?} is both seen and unseen")]
    OverlappingLanguages(String),
    #[error("corpus is empty")]
    Empty,
    #[error("bin width must be positive, got {0}")]
    BinWidth(f64),
}

/// One gold- or weakly-labeled text.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledText {
    pub id: String,
    pub text: String,
    pub language: String,
    pub label: f64,
}

impl LabeledText {
    /// Build an item, checking the label range and non-empty text and language.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        language: impl Into<String>,
        label: f64,
    ) -> Result<Self, CorpusError> {
        let item = LabeledText {
            id: id.into(),
            text: text.into(),
            language: language.into(),
            label,
        };
        item.check()?;
        Ok(item)
    }

    fn check(&self) -> Result<(), CorpusError> {
        if self.id.is_empty() {
            return Err(CorpusError::EmptyId);
        }
        if !(MIN_SCORE..=MAX_SCORE).contains(&self.label) {
            return Err(CorpusError::LabelOutOfRange {
                id: self.id.clone(),
                label: self.label,
            });
        }
        if self.text.trim().is_empty() {
            return Err(CorpusError::EmptyText { id: self.id.clone() });
        }
        if self.language.is_empty() {
            return Err(CorpusError::EmptyLanguage { id: self.id.clone() });
        }
        Ok(())
    }
}

/// An ordered, immutable collection of labeled texts.
///
/// `seen_languages` is always derived from the items. `unseen_languages`
/// names target-only languages and never overlaps the seen set.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    items: Vec<LabeledText>,
    seen: BTreeSet<String>,
    unseen: BTreeSet<String>,
}

impl Corpus {
    pub fn new(
        items: Vec<LabeledText>,
        unseen: impl IntoIterator<Item = String>,
    ) -> Result<Self, CorpusError> {
        let mut ids = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for item in &items {
            item.check()?;
            if !ids.insert(item.id.as_str()) {
                return Err(CorpusError::DuplicateId(item.id.clone()));
            }
            if !seen.contains(&item.language) {
                seen.insert(item.language.clone());
            }
        }
        let unseen: BTreeSet<String> = unseen.into_iter().collect();
        if let Some(lang) = seen.intersection(&unseen).next() {
            return Err(CorpusError::OverlappingLanguages(lang.clone()));
        }
        Ok(Corpus { items, seen, unseen })
    }

    /// Like [`Corpus::new`], but languages that gained items are dropped from
    /// the unseen set instead of being reported as overlapping.
    pub fn with_absorbed_unseen(
        items: Vec<LabeledText>,
        unseen: impl IntoIterator<Item = String>,
    ) -> Result<Self, CorpusError> {
        let present: BTreeSet<&str> = items.iter().map(|i| i.language.as_str()).collect();
        let unseen: Vec<String> = unseen
            .into_iter()
            .filter(|l| !present.contains(l.as_str()))
            .collect();
        Corpus::new(items, unseen)
    }

    pub fn items(&self) -> &[LabeledText] {
        &self.items
    }

    pub fn into_items(self) -> Vec<LabeledText> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn seen_languages(&self) -> &BTreeSet<String> {
        &self.seen
    }

    pub fn unseen_languages(&self) -> &BTreeSet<String> {
        &self.unseen
    }

    /// Items of one language, in corpus order.
    pub fn language_slice<'a>(&'a self, language: &'a str) -> impl Iterator<Item = &'a LabeledText> {
        self.items.iter().filter(move |i| i.language == language)
    }

    /// Keep the items matching `keep`; seen languages are recomputed.
    pub fn filtered(&self, mut keep: impl FnMut(&LabeledText) -> bool) -> Corpus {
        let items: Vec<LabeledText> = self.items.iter().filter(|i| keep(i)).cloned().collect();
        let seen = items.iter().map(|i| i.language.clone()).collect();
        Corpus {
            items,
            seen,
            unseen: self.unseen.clone(),
        }
    }

    /// Per-language and overall label statistics.
    pub fn describe(&self) -> Result<CorpusStats, CorpusError> {
        if self.items.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut by_lang: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for item in &self.items {
            by_lang.entry(item.language.as_str()).or_default().push(item.label);
        }
        let all: Vec<f64> = self.items.iter().map(|i| i.label).collect();
        let per_language = by_lang
            .into_iter()
            .map(|(lang, labels)| (lang.to_string(), SummaryRow::from_labels(&labels)))
            .collect();
        Ok(CorpusStats {
            per_language,
            overall: SummaryRow::from_labels(&all),
        })
    }

    /// Label histogram per language over `[1, 5]` with bins of `bin_width`.
    ///
    /// Every seen and unseen language gets a row. A value on a bin boundary
    /// counts towards the higher bin, except 5.0 which lands in the last bin.
    pub fn histogram(&self, bin_width: f64) -> Result<BTreeMap<String, Vec<(f64, usize)>>, CorpusError> {
        if !bin_width.is_finite() || bin_width <= 0.0 {
            return Err(CorpusError::BinWidth(bin_width));
        }
        let span = MAX_SCORE - MIN_SCORE;
        let n_bins = (libm::ceil(span / bin_width - 1e-9) as usize).max(1);
        let lowers: Vec<f64> = (0..n_bins).map(|k| MIN_SCORE + k as f64 * bin_width).collect();

        let mut out: BTreeMap<String, Vec<(f64, usize)>> = self
            .seen
            .iter()
            .chain(self.unseen.iter())
            .map(|l| (l.clone(), lowers.iter().map(|&lo| (lo, 0)).collect()))
            .collect();
        for item in &self.items {
            let raw = libm::floor((item.label - MIN_SCORE) / bin_width + 1e-9);
            let bin = (raw.max(0.0) as usize).min(n_bins - 1);
            if let Some(row) = out.get_mut(&item.language) {
                row[bin].1 += 1;
            }
        }
        Ok(out)
    }
}

/// Count, mean, spread and quartiles of one group of labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

impl SummaryRow {
    fn from_labels(labels: &[f64]) -> Self {
        // callers never pass an empty slice
        let s = stats::summarize(labels).unwrap_or(stats::Summary {
            count: 0,
            mean: f64::NAN,
            std_dev: f64::NAN,
            min: f64::NAN,
            p25: f64::NAN,
            p50: f64::NAN,
            p75: f64::NAN,
            max: f64::NAN,
        });
        SummaryRow {
            count: s.count,
            mean: s.mean,
            std_dev: s.std_dev,
            p25: s.p25,
            p50: s.p50,
            p75: s.p75,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub per_language: BTreeMap<String, SummaryRow>,
    pub overall: SummaryRow,
}

/// Synthesized id for a row without one: `{language}-{row_index}`.
pub fn synthesize_id(language: &str, row_index: usize) -> String {
    let mut id = String::from(language);
    id.push('-');
    id.push_str(&row_index.to_string());
    id
}
