//! Distribution-based candidate selection.
//!
//! Intimacy labels are skewed towards the low end of the scale, so only the
//! upper tail is sent for augmentation.

use crate::corpus::Corpus;
use crate::{MAX_SCORE, MIN_SCORE};

pub const DEFAULT_THRESHOLD_P: f64 = 3.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    threshold_p: f64,
    boundary_inclusive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("sampling threshold {0} is outside [1, 5]")]
pub struct ThresholdOutOfRange(pub f64);

impl SamplingConfig {
    pub fn new(threshold_p: f64, boundary_inclusive: bool) -> Result<Self, ThresholdOutOfRange> {
        if !(MIN_SCORE..=MAX_SCORE).contains(&threshold_p) {
            return Err(ThresholdOutOfRange(threshold_p));
        }
        Ok(SamplingConfig {
            threshold_p,
            boundary_inclusive,
        })
    }

    pub fn threshold_p(&self) -> f64 {
        self.threshold_p
    }

    pub fn boundary_inclusive(&self) -> bool {
        self.boundary_inclusive
    }

    pub fn accepts(&self, label: f64) -> bool {
        if self.boundary_inclusive {
            label >= self.threshold_p
        } else {
            label > self.threshold_p
        }
    }
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            threshold_p: DEFAULT_THRESHOLD_P,
            boundary_inclusive: true,
        }
    }
}

/// Items whose label clears the threshold, in corpus order.
pub fn sample_candidates(corpus: &Corpus, config: &SamplingConfig) -> Corpus {
    corpus.filtered(|item| config.accepts(item.label))
}
