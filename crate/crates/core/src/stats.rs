//! Descriptive statistics shared by corpus and difference reporting.
//!
//! Standard deviation uses the n−1 divisor. Percentiles interpolate linearly
//! between the closest ranks, i.e. the value at position `q·(n−1)` of the
//! sorted sample.

use alloc::vec::Vec;

/// Arithmetic mean. Returns `None` on an empty slice.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation with divisor `n − 1`.
///
/// A single observation has no spread and yields `0.0`.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some(libm::sqrt(ss / (values.len() - 1) as f64))
}

/// Percentile of an already sorted slice, `q` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Sort a copy of `values` in ascending order. NaNs are not expected here.
pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    out.sort_by(f64::total_cmp);
    out
}

/// Count, mean, standard deviation and the five-number summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

/// Summarize a non-empty sample. Returns `None` when `values` is empty.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    let s = sorted(values);
    Some(Summary {
        count: values.len(),
        mean: mean(values)?,
        std_dev: sample_std(values)?,
        min: *s.first()?,
        p25: percentile_sorted(&s, 0.25)?,
        p50: percentile_sorted(&s, 0.50)?,
        p75: percentile_sorted(&s, 0.75)?,
        max: *s.last()?,
    })
}
