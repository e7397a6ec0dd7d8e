//! Mean ensembling of prediction files.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use crate::evaluator::PredictionFile;
use crate::scorer::clamp;

/// A named set of prediction files to average.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub name: String,
    pub members: Vec<String>,
}

impl EnsembleConfig {
    pub fn new(name: impl Into<String>, members: Vec<String>) -> Result<Self, EnsembleError> {
        if members.is_empty() {
            return Err(EnsembleError::NoMembers);
        }
        Ok(EnsembleConfig {
            name: name.into(),
            members,
        })
    }

    /// One of the six standard ensembles over the two model families and
    /// three difference thresholds, named `ensemble-1` … `ensemble-6`.
    ///
    /// Members resolve to `{model}-beta{β}.tsv` with models `xlmr` and
    /// `xlnet`.
    pub fn preset(name: &str) -> Option<Self> {
        let file = |model: &str, beta: &str| format!("{model}-beta{beta}.tsv");
        let both = |beta: &str| alloc::vec![file("xlmr", beta), file("xlnet", beta)];
        let family = |model: &str| ["0.1", "0.2", "0.3"].iter().map(|b| file(model, b)).collect::<Vec<_>>();
        let members = match name {
            "ensemble-1" => family("xlmr"),
            "ensemble-2" => family("xlnet"),
            "ensemble-3" => both("0.1"),
            "ensemble-4" => both("0.2"),
            "ensemble-5" => both("0.3"),
            "ensemble-6" => {
                let mut m = family("xlmr");
                m.extend(family("xlnet"));
                m
            }
            _ => return None,
        };
        Some(EnsembleConfig {
            name: name.into(),
            members,
        })
    }

    pub const PRESETS: [&'static str; 6] = [
        "ensemble-1",
        "ensemble-2",
        "ensemble-3",
        "ensemble-4",
        "ensemble-5",
        "ensemble-6",
    ];
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnsembleError {
    #[error("an ensemble needs at least one member")]
    NoMembers,
    #[error("member {member} disagrees on ids; symmetric difference with the first member: {ids:?}")]
    IdMismatch { member: usize, ids: Vec<String> },
    #[error("member {member} has a non-finite score for {id:?}")]
    NonFinite { member: usize, id: String },
}

/// Average member scores per id and clamp the mean into `[1, 5]`.
///
/// Scores for an id are combined in sorted order with a running mean, so
/// the result does not depend on member order and `k` copies of one file
/// reproduce it exactly. Output follows the first member's order.
pub fn ensemble_mean(members: &[PredictionFile]) -> Result<PredictionFile, EnsembleError> {
    let first = members.first().ok_or(EnsembleError::NoMembers)?;
    let first_ids: BTreeSet<&str> = first.entries().iter().map(|(id, _)| id.as_str()).collect();
    let maps: Vec<_> = members.iter().map(PredictionFile::to_map).collect();
    for (m, map) in maps.iter().enumerate().skip(1) {
        let ids: BTreeSet<&str> = map.keys().copied().collect();
        let diff: Vec<String> = first_ids.symmetric_difference(&ids).map(|s| String::from(*s)).collect();
        if !diff.is_empty() {
            return Err(EnsembleError::IdMismatch { member: m, ids: diff });
        }
    }

    let mut out = Vec::with_capacity(first.len());
    let mut scores = Vec::with_capacity(members.len());
    for (id, _) in first.entries() {
        scores.clear();
        scores.extend(maps.iter().map(|m| m[id.as_str()]));
        scores.sort_by(f64::total_cmp);
        let mut mean = 0.0;
        for (k, s) in scores.iter().enumerate() {
            mean += (s - mean) / (k + 1) as f64;
        }
        let score = clamp(mean).map_err(|_| EnsembleError::NonFinite {
            member: maps.iter().position(|m| !m[id.as_str()].is_finite()).unwrap_or(0),
            id: id.clone(),
        })?;
        out.push((id.clone(), score));
    }
    // ids come from the first member, which is already unique
    Ok(PredictionFile::new(out).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn pf(entries: &[(&str, f64)]) -> PredictionFile {
        PredictionFile::new(entries.iter().map(|&(i, s)| (i.to_string(), s)).collect()).unwrap()
    }

    #[test]
    fn two_point_mean() {
        let out = ensemble_mean(&[pf(&[("a", 1.0)]), pf(&[("a", 3.0)])]).unwrap();
        assert_eq!(out, pf(&[("a", 2.0)]));
    }

    #[test]
    fn single_member_identity() {
        let p = pf(&[("b", 1.7), ("a", 4.2)]);
        assert_eq!(ensemble_mean(core::slice::from_ref(&p)).unwrap(), p);
    }

    #[test]
    fn order_follows_first_member() {
        let out = ensemble_mean(&[pf(&[("b", 2.0), ("a", 4.0)]), pf(&[("a", 2.0), ("b", 4.0)])]).unwrap();
        assert_eq!(out, pf(&[("b", 3.0), ("a", 3.0)]));
    }

    #[test]
    fn clamps_external_scores() {
        let out = ensemble_mean(&[pf(&[("a", 7.0)]), pf(&[("a", 6.0)])]).unwrap();
        assert_eq!(out.entries()[0].1, 5.0);
    }

    #[test]
    fn id_mismatch_reports_symmetric_difference() {
        let err = ensemble_mean(&[pf(&[("a", 1.0), ("b", 1.0)]), pf(&[("a", 1.0), ("c", 1.0)])]).unwrap_err();
        assert_eq!(
            err,
            EnsembleError::IdMismatch {
                member: 1,
                ids: vec!["b".into(), "c".into()]
            }
        );
        assert_eq!(ensemble_mean(&[]).unwrap_err(), EnsembleError::NoMembers);
    }

    #[test]
    fn presets() {
        assert_eq!(EnsembleConfig::preset("ensemble-1").unwrap().members.len(), 3);
        assert_eq!(
            EnsembleConfig::preset("ensemble-4").unwrap().members,
            vec!["xlmr-beta0.2.tsv".to_string(), "xlnet-beta0.2.tsv".to_string()]
        );
        assert_eq!(EnsembleConfig::preset("ensemble-6").unwrap().members.len(), 6);
        assert!(EnsembleConfig::preset("ensemble-7").is_none());
        assert!(EnsembleConfig::new("x", vec![]).is_err());
    }
}
