//! Scoring backends and the reference regressor.
//!
//! Every score leaving a backend through [`predict`] is clamped into the
//! Likert range. The reference model is a ridge regression over signed,
//! hashed character 2–4-grams, fitted by conjugate gradient.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::backend::batch_ranges;
use crate::corpus::Corpus;
use crate::BackendError;
use crate::{MAX_SCORE, MIN_SCORE};

pub const DEFAULT_HASH_DIM: usize = 1 << 18;
pub const DEFAULT_L2: f64 = 1.0;
pub const NGRAM_MIN: usize = 2;
pub const NGRAM_MAX: usize = 4;

/// Items per scorer call.
pub const SCORE_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("score {0} is not finite")]
pub struct NonFiniteScore(pub f64);

/// Bound a score to `[1, 5]`.
pub fn clamp(score: f64) -> Result<f64, NonFiniteScore> {
    if !score.is_finite() {
        return Err(NonFiniteScore(score));
    }
    Ok(score.clamp(MIN_SCORE, MAX_SCORE))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreItem {
    pub id: String,
    pub text: String,
    pub language: String,
}

impl ScoreItem {
    pub fn new(id: impl Into<String>, text: impl Into<String>, language: impl Into<String>) -> Self {
        ScoreItem {
            id: id.into(),
            text: text.into(),
            language: language.into(),
        }
    }
}

/// Produces raw (not yet clamped) scores for a batch of texts.
pub trait ScorerBackend {
    fn score(&mut self, batch: &[ScoreItem]) -> Result<Vec<f64>, BackendError>;
}

impl<T: ScorerBackend + ?Sized> ScorerBackend for &mut T {
    fn score(&mut self, batch: &[ScoreItem]) -> Result<Vec<f64>, BackendError> {
        (**self).score(batch)
    }
}

/// Adapts a closure into a scorer.
pub struct FnScorer<F>(pub F);

impl<F: FnMut(&ScoreItem) -> f64> ScorerBackend for FnScorer<F> {
    fn score(&mut self, batch: &[ScoreItem]) -> Result<Vec<f64>, BackendError> {
        Ok(batch.iter().map(|item| (self.0)(item)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("scoring failed after {completed} predictions; failed batch ids {failed_ids:?}: {cause}")]
pub struct PredictError {
    pub completed: usize,
    pub failed_ids: Vec<String>,
    pub cause: BackendError,
    pub partial: Vec<Prediction>,
}

/// Score `items` in batches and clamp every score. Order is preserved.
pub fn predict<B: ScorerBackend>(mut backend: B, items: &[ScoreItem]) -> Result<Vec<Prediction>, PredictError> {
    let mut out = Vec::with_capacity(items.len());
    for range in batch_ranges(items.len(), SCORE_BATCH_SIZE) {
        let batch = &items[range];
        let fail = |cause: BackendError, out: Vec<Prediction>| PredictError {
            completed: out.len(),
            failed_ids: batch.iter().map(|i| i.id.clone()).collect(),
            cause,
            partial: out,
        };
        let scores = match backend.score(batch) {
            Ok(s) if s.len() == batch.len() => s,
            Ok(s) => {
                let msg = alloc::format!("expected {} scores, got {}", batch.len(), s.len());
                return Err(fail(BackendError::Protocol(msg), out));
            }
            Err(e) => return Err(fail(e, out)),
        };
        for (item, raw) in batch.iter().zip(scores) {
            match clamp(raw) {
                Ok(score) => out.push(Prediction {
                    id: item.id.clone(),
                    score,
                }),
                Err(e) => {
                    let msg = alloc::format!("item {:?}: {e}", item.id);
                    return Err(fail(BackendError::Protocol(msg), out));
                }
            }
        }
    }
    Ok(out)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

// final avalanche so that low bits depend on every input byte
fn mix(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

/// Sparse, L2-normalized hashed character n-gram counts of `text`.
///
/// Entries are sorted by index with duplicates merged.
pub fn featurize(text: &str, hash_dim: usize) -> Vec<(u32, f64)> {
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(core::iter::once(text.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    let mut raw: Vec<(u32, f64)> = Vec::new();
    for n in NGRAM_MIN..=NGRAM_MAX {
        if n > n_chars {
            break;
        }
        for start in 0..=(n_chars - n) {
            let gram = &text.as_bytes()[bounds[start]..bounds[start + n]];
            let h = mix(fnv1a(gram));
            let index = (h % hash_dim as u64) as u32;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            raw.push((index, sign));
        }
    }
    raw.sort_by_key(|&(i, _)| i);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(raw.len());
    for (i, v) in raw {
        match merged.last_mut() {
            Some((j, acc)) if *j == i => *acc += v,
            _ => merged.push((i, v)),
        }
    }
    merged.retain(|&(_, v)| v != 0.0);
    let norm = libm::sqrt(merged.iter().map(|&(_, v)| v * v).sum::<f64>());
    if norm > 0.0 {
        for (_, v) in &mut merged {
            *v /= norm;
        }
    }
    merged
}

fn sparse_dot(x: &[(u32, f64)], w: &[f64]) -> f64 {
    x.iter().map(|&(i, v)| v * w[i as usize]).sum()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("need at least 2 items to train, got {0}")]
    TooSmall(usize),
    #[error("l2 must be positive, got {0}")]
    NonPositiveL2(f64),
    #[error("hash dimension must be between 1 and 2^32")]
    HashDim,
    #[error("conjugate gradient stalled at relative residual {0:e} after {1} iterations")]
    NotConverged(f64, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub hash_dim: usize,
    pub l2: f64,
    /// Stop once ‖residual‖ ≤ tolerance · ‖right-hand side‖.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            hash_dim: DEFAULT_HASH_DIM,
            l2: DEFAULT_L2,
            tolerance: 1e-6,
            max_iterations: 10_000,
        }
    }
}

/// Ridge regression over hashed character n-grams.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramRegressor {
    weights: Vec<f64>,
    bias: f64,
}

impl NgramRegressor {
    pub fn from_parts(weights: Vec<f64>, bias: f64) -> Self {
        NgramRegressor { weights, bias }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn hash_dim(&self) -> usize {
        self.weights.len()
    }

    /// Unclamped model output for `text`.
    pub fn raw_score(&self, text: &str) -> f64 {
        self.bias + sparse_dot(&featurize(text, self.hash_dim()), &self.weights)
    }

    /// Fit on `corpus` with default hashing and tolerance.
    ///
    /// Training is deterministic; `seed` is accepted so the signature stays
    /// stable if a stochastic solver is ever swapped in.
    pub fn train_reference(corpus: &Corpus, l2: f64, seed: u64) -> Result<Self, TrainError> {
        let _ = seed;
        let texts: Vec<(&str, f64)> = corpus.items().iter().map(|i| (i.text.as_str(), i.label)).collect();
        Self::fit(&texts, &TrainOptions { l2, ..TrainOptions::default() })
    }

    /// Minimize `(1/n)·‖Xw + b − y‖² + l2·‖w‖²` with an unpenalized bias.
    ///
    /// The mean loss makes the solution invariant to repeating the data.
    pub fn fit(data: &[(&str, f64)], opts: &TrainOptions) -> Result<Self, TrainError> {
        let n = data.len();
        if n < 2 {
            return Err(TrainError::TooSmall(n));
        }
        if !opts.l2.is_finite() || opts.l2 <= 0.0 {
            return Err(TrainError::NonPositiveL2(opts.l2));
        }
        if opts.hash_dim == 0 || opts.hash_dim > u32::MAX as usize {
            return Err(TrainError::HashDim);
        }
        let dim = opts.hash_dim;
        let rows: Vec<Vec<(u32, f64)>> = data.iter().map(|(t, _)| featurize(t, dim)).collect();
        let y: Vec<f64> = data.iter().map(|&(_, l)| l).collect();
        let inv_n = 1.0 / n as f64;
        let y_mean = y.iter().sum::<f64>() * inv_n;

        // Normal equations over (w, b):
        //   [ XᵀX/n + λI   Xᵀ1/n ] [w]   [ Xᵀy/n ]
        //   [ 1ᵀX/n        1     ] [b] = [ ȳ     ]
        let apply = |w: &[f64], b: f64, out_w: &mut [f64]| -> f64 {
            for (o, wi) in out_w.iter_mut().zip(w) {
                *o = opts.l2 * wi;
            }
            let mut u_sum = 0.0;
            for row in &rows {
                let u = sparse_dot(row, w) + b;
                u_sum += u;
                for &(i, v) in row {
                    out_w[i as usize] += inv_n * u * v;
                }
            }
            u_sum * inv_n
        };

        let mut rhs_w = vec![0.0; dim];
        for (row, &yi) in rows.iter().zip(&y) {
            for &(i, v) in row {
                rhs_w[i as usize] += inv_n * yi * v;
            }
        }
        let rhs_b = y_mean;
        let rhs_norm = libm::sqrt(dot(&rhs_w, &rhs_w) + rhs_b * rhs_b);

        let mut w = vec![0.0; dim];
        let mut b = y_mean;
        let mut aw = vec![0.0; dim];
        let ab = apply(&w, b, &mut aw);
        let mut r_w: Vec<f64> = rhs_w.iter().zip(&aw).map(|(r, a)| r - a).collect();
        let mut r_b = rhs_b - ab;
        let mut p_w = r_w.clone();
        let mut p_b = r_b;
        let mut rr = dot(&r_w, &r_w) + r_b * r_b;
        let target = opts.tolerance * rhs_norm;

        let mut iterations = 0;
        while libm::sqrt(rr) > target {
            if iterations >= opts.max_iterations {
                return Err(TrainError::NotConverged(libm::sqrt(rr) / rhs_norm, iterations));
            }
            let ap_b = apply(&p_w, p_b, &mut aw);
            let p_ap = dot(&p_w, &aw) + p_b * ap_b;
            let alpha = rr / p_ap;
            for i in 0..dim {
                w[i] += alpha * p_w[i];
                r_w[i] -= alpha * aw[i];
            }
            b += alpha * p_b;
            r_b -= alpha * ap_b;
            let rr_next = dot(&r_w, &r_w) + r_b * r_b;
            let beta = rr_next / rr;
            for i in 0..dim {
                p_w[i] = r_w[i] + beta * p_w[i];
            }
            p_b = r_b + beta * p_b;
            rr = rr_next;
            iterations += 1;
        }
        Ok(NgramRegressor { weights: w, bias: b })
    }

    /// Serialize as `WADR`, version, hash_dim, bias, weights (little endian).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 8 * self.weights.len());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.weights.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.bias.to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelFormatError> {
        if bytes.len() < 20 {
            return Err(ModelFormatError::Truncated);
        }
        if &bytes[..4] != MODEL_MAGIC {
            return Err(ModelFormatError::BadMagic);
        }
        let u32_at = |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
        let f64_at = |at: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[at..at + 8]);
            f64::from_le_bytes(b)
        };
        let version = u32_at(4);
        if version != MODEL_VERSION {
            return Err(ModelFormatError::Version(version));
        }
        let dim = u32_at(8) as usize;
        if bytes.len() != 20 + 8 * dim {
            return Err(ModelFormatError::Length {
                expected: 20 + 8 * dim,
                actual: bytes.len(),
            });
        }
        let bias = f64_at(12);
        let weights = (0..dim).map(|k| f64_at(20 + 8 * k)).collect();
        Ok(NgramRegressor { weights, bias })
    }
}

impl ScorerBackend for NgramRegressor {
    fn score(&mut self, batch: &[ScoreItem]) -> Result<Vec<f64>, BackendError> {
        Ok(batch.iter().map(|i| self.raw_score(&i.text)).collect())
    }
}

pub const MODEL_MAGIC: &[u8; 4] = b"WADR";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelFormatError {
    #[error("model file is truncated")]
    Truncated,
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error("model file has {actual} bytes, header implies {expected}")]
    Length { expected: usize, actual: usize },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledText;
    use alloc::string::ToString;

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(0.5), Ok(1.0));
        assert_eq!(clamp(5.7), Ok(5.0));
        assert_eq!(clamp(3.2), Ok(3.2));
        assert!(clamp(f64::NAN).is_err());
        assert!(clamp(f64::INFINITY).is_err());
    }

    #[test]
    fn features_are_unit_norm_and_sorted() {
        let f = featurize("hello there", 1 << 10);
        let norm: f64 = f.iter().map(|(_, v)| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(featurize("a", 64).is_empty());
    }

    #[test]
    fn features_handle_multibyte_text() {
        // 4 chars: 3 bigrams + 2 trigrams + 1 four-gram before merging
        let f = featurize("我们是朋", 1 << 18);
        assert!(!f.is_empty() && f.len() <= 6);
    }

    #[test]
    fn predict_empty_is_empty() {
        let model = NgramRegressor::from_parts(vec![0.0; 16], 2.0);
        assert!(predict(model, &[]).unwrap().is_empty());
    }

    #[test]
    fn predict_clamps() {
        let items: Vec<ScoreItem> = (0..70).map(|i| ScoreItem::new(i.to_string(), "x", "en")).collect();
        let mut k = 0.0;
        let preds = predict(
            FnScorer(|_: &ScoreItem| {
                k += 0.25;
                k - 5.0
            }),
            &items,
        )
        .unwrap();
        assert_eq!(preds.len(), 70);
        assert!(preds.iter().all(|p| (1.0..=5.0).contains(&p.score)));
        assert!(preds.iter().zip(&items).all(|(p, i)| p.id == i.id));
    }

    struct Broken;
    impl ScorerBackend for Broken {
        fn score(&mut self, _: &[ScoreItem]) -> Result<Vec<f64>, BackendError> {
            Err(BackendError::Exhausted { attempts: 5, message: "503".into() })
        }
    }

    #[test]
    fn predict_reports_failed_batch_ids() {
        let items = vec![ScoreItem::new("a", "x", "en"), ScoreItem::new("b", "y", "en")];
        let err = predict(Broken, &items).unwrap_err();
        assert_eq!(err.failed_ids, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(err.completed, 0);
    }

    #[test]
    fn constant_target_is_reproduced() {
        let items: Vec<LabeledText> = (0..10)
            .map(|i| LabeledText::new(i.to_string(), alloc::format!("text number {i}"), "en", 2.7).unwrap())
            .collect();
        let corpus = Corpus::new(items, vec![]).unwrap();
        let model = NgramRegressor::train_reference(&corpus, 1.0, 0).unwrap();
        for item in corpus.items() {
            assert!((model.raw_score(&item.text) - 2.7).abs() < 1e-6);
        }
    }

    #[test]
    fn train_argument_checks() {
        let one = Corpus::new(vec![LabeledText::new("a", "xx", "en", 2.0).unwrap()], vec![]).unwrap();
        assert_eq!(NgramRegressor::train_reference(&one, 1.0, 0).unwrap_err(), TrainError::TooSmall(1));
        let two = Corpus::new(
            vec![
                LabeledText::new("a", "xx", "en", 2.0).unwrap(),
                LabeledText::new("b", "yy", "en", 3.0).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        assert!(matches!(
            NgramRegressor::train_reference(&two, 0.0, 0),
            Err(TrainError::NonPositiveL2(_))
        ));
    }

    #[test]
    fn model_bytes_round_trip() {
        let model = NgramRegressor::from_parts(vec![0.5, -1.25, 3.0], 2.5);
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..4], b"WADR");
        assert_eq!(bytes.len(), 20 + 24);
        assert_eq!(NgramRegressor::from_bytes(&bytes).unwrap(), model);
    }

    #[test]
    fn model_bytes_rejects_garbage() {
        let bytes = NgramRegressor::from_parts(vec![1.0; 4], 0.0).to_bytes();
        assert_eq!(NgramRegressor::from_bytes(&bytes[..10]), Err(ModelFormatError::Truncated));
        assert!(matches!(
            NgramRegressor::from_bytes(&bytes[..bytes.len() - 1]),
            Err(ModelFormatError::Length { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(NgramRegressor::from_bytes(&bad), Err(ModelFormatError::BadMagic));
        let mut v2 = bytes;
        v2[4] = 2;
        assert_eq!(NgramRegressor::from_bytes(&v2), Err(ModelFormatError::Version(2)));
    }
}
