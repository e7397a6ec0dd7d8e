//! Pipeline configuration, loaded from JSON and patched by command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wader_core::evaluator::GroupMode;
use wader_core::sampler::DEFAULT_THRESHOLD_P;
use wader_core::scorer::DEFAULT_L2;
use wader_core::translator::{BackMode, DEFAULT_BATCH_SIZE};
use wader_core::validator::DEFAULT_BETAS;

use crate::error::{CliError, Result};
use crate::http::RetryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TranslationBackendKind {
    MockIdentity,
    MockNoisy,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerBackendKind {
    /// Hashed character n-gram ridge regressor trained on the gold split.
    Reference,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GroupModeArg {
    Pooled,
    Average,
}

impl From<GroupModeArg> for GroupMode {
    fn from(m: GroupModeArg) -> Self {
        match m {
            GroupModeArg::Pooled => GroupMode::Pooled,
            GroupModeArg::Average => GroupMode::Average,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryConfig {
    pub base_delay_ms: u64,
    pub factor: u32,
    pub max_attempts: u32,
}

impl Default for RetryConfig {
    fn default() -> Self {
        let p = RetryPolicy::default();
        RetryConfig {
            base_delay_ms: p.base_delay.as_millis() as u64,
            factor: p.factor,
            max_attempts: p.max_attempts,
        }
    }
}

impl RetryConfig {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            base_delay: Duration::from_millis(self.base_delay_ms),
            factor: self.factor,
            max_attempts: self.max_attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TranslationConfig {
    pub backend: TranslationBackendKind,
    pub http_url: Option<String>,
    pub noise_q: f64,
    pub single_back: bool,
    pub max_in_flight: usize,
    pub batch_size: usize,
    pub retry: RetryConfig,
}

impl Default for TranslationConfig {
    fn default() -> Self {
        TranslationConfig {
            backend: TranslationBackendKind::MockIdentity,
            http_url: None,
            noise_q: 0.2,
            single_back: false,
            max_in_flight: 4,
            batch_size: DEFAULT_BATCH_SIZE,
            retry: RetryConfig::default(),
        }
    }
}

impl TranslationConfig {
    pub fn back_mode(&self) -> BackMode {
        if self.single_back {
            BackMode::Single
        } else {
            BackMode::EveryPivot
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerConfig {
    pub backend: ScorerBackendKind,
    pub http_url: Option<String>,
    pub l2: f64,
    pub retry: RetryConfig,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            backend: ScorerBackendKind::Reference,
            http_url: None,
            l2: DEFAULT_L2,
            retry: RetryConfig::default(),
        }
    }
}

/// A named ensemble over model names produced by the predict stage
/// (`baseline`, `beta-0.1`, …).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub corpus_path: Option<PathBuf>,
    pub unseen_languages: Vec<String>,
    pub threshold_p: f64,
    pub boundary_inclusive: bool,
    pub betas: Vec<f64>,
    pub translation: TranslationConfig,
    pub scorer: ScorerConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub validation_fraction: f64,
    pub histogram_bin_width: f64,
    pub group_mode: GroupModeArg,
    /// Ensembles to build. Empty means one ensemble over every β model.
    pub ensembles: Vec<EnsembleSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_path: None,
            unseen_languages: vec![],
            threshold_p: DEFAULT_THRESHOLD_P,
            boundary_inclusive: true,
            betas: DEFAULT_BETAS.to_vec(),
            translation: TranslationConfig::default(),
            scorer: ScorerConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("wader-out"),
            validation_fraction: 0.15,
            histogram_bin_width: 0.5,
            group_mode: GroupModeArg::Pooled,
            ensembles: vec![],
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
    }

    /// Check every field before any stage runs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Invalid(m));
        if self.corpus_path.is_none() {
            return bad("corpus_path is required".into());
        }
        if !(1.0..=5.0).contains(&self.threshold_p) {
            return bad(format!("threshold_p {} is outside [1, 5]", self.threshold_p));
        }
        if self.betas.is_empty() {
            return bad("at least one beta is required".into());
        }
        for &b in &self.betas {
            if !b.is_finite() || b < 0.0 {
                return bad(format!("beta {b} must be a non-negative number"));
            }
        }
        let mut sorted = self.betas.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != self.betas.len() {
            return bad("betas must be distinct".into());
        }
        if self.unseen_languages.iter().any(|l| l.trim().is_empty()) {
            return bad("unseen language codes must be non-empty".into());
        }
        let t = &self.translation;
        if !(0.0..=1.0).contains(&t.noise_q) {
            return bad(format!("noise_q {} is outside [0, 1]", t.noise_q));
        }
        if t.max_in_flight == 0 || t.batch_size == 0 {
            return bad("max_in_flight and batch_size must be at least 1".into());
        }
        if t.backend == TranslationBackendKind::Http && t.http_url.is_none() {
            return bad("the http translation backend needs translation.http_url".into());
        }
        for r in [&t.retry, &self.scorer.retry] {
            if r.max_attempts == 0 || r.factor == 0 {
                return bad("retry max_attempts and factor must be at least 1".into());
            }
        }
        if self.scorer.backend == ScorerBackendKind::Http && self.scorer.http_url.is_none() {
            return bad("the http scorer backend needs scorer.http_url".into());
        }
        if !self.scorer.l2.is_finite() || self.scorer.l2 <= 0.0 {
            return bad(format!("l2 must be positive, got {}", self.scorer.l2));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!("validation_fraction {} must lie in (0, 1)", self.validation_fraction));
        }
        if !self.histogram_bin_width.is_finite() || self.histogram_bin_width <= 0.0 {
            return bad(format!("histogram_bin_width {} must be positive", self.histogram_bin_width));
        }
        for e in &self.ensembles {
            if e.members.is_empty() {
                return bad(format!("ensemble {:?} has no members", e.name));
            }
        }
        Ok(())
    }

    /// Lower-cased, trimmed unseen language codes.
    pub fn unseen(&self) -> Vec<String> {
        self.unseen_languages.iter().map(|l| l.trim().to_ascii_lowercase()).collect()
    }

    pub fn corpus_path(&self) -> &Path {
        self.corpus_path.as_deref().unwrap_or(Path::new(""))
    }
}

/// SHA-256 over the JSON rendering of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config values serialize");
    hex::encode(Sha256::digest(bytes))
}

/// Name used for β-specific artifacts, e.g. `beta-0.1`.
pub fn beta_name(beta: f64) -> String {
    format!("beta-{beta}")
}
