//! Human-readable and JSON renderings of statistics and evaluation reports.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Map, Value};
use wader_core::corpus::{CorpusStats, SummaryRow};
use wader_core::evaluator::{Correlation, EvaluationReport, GroupMode};
use wader_core::validator::DifferenceStats;

fn row_json(r: &SummaryRow) -> Value {
    json!({
        "count": r.count,
        "mean": r.mean,
        "std_dev": r.std_dev,
        "p25": r.p25,
        "p50": r.p50,
        "p75": r.p75,
    })
}

pub fn stats_json(stats: &CorpusStats, bin_width: f64, histogram: &BTreeMap<String, Vec<(f64, usize)>>) -> Value {
    let per_language: Map<String, Value> = stats.per_language.iter().map(|(l, r)| (l.clone(), row_json(r))).collect();
    let hist: Map<String, Value> = histogram
        .iter()
        .map(|(l, bins)| {
            let bins: Vec<Value> = bins.iter().map(|&(lo, n)| json!([lo, n])).collect();
            (l.clone(), Value::Array(bins))
        })
        .collect();
    json!({
        "per_language": per_language,
        "overall": row_json(&stats.overall),
        "histogram": {"bin_width": bin_width, "languages": hist},
    })
}

pub fn stats_table(stats: &CorpusStats) -> String {
    let mut rows = vec![[
        "Language".to_string(),
        "Count".into(),
        "Mean".into(),
        "Std. Dev.".into(),
        "25th %ile".into(),
        "50th %ile".into(),
        "75th %ile".into(),
    ]];
    let fmt = |name: &str, r: &SummaryRow| {
        [
            name.to_string(),
            r.count.to_string(),
            format!("{:.2}", r.mean),
            format!("{:.6}", r.std_dev),
            format!("{:.3}", r.p25),
            format!("{:.3}", r.p50),
            format!("{:.3}", r.p75),
        ]
    };
    for (l, r) in &stats.per_language {
        rows.push(fmt(l, r));
    }
    rows.push(fmt("Overall", &stats.overall));
    align(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

pub fn difference_json(stats: &DifferenceStats, deduplicated: usize) -> Value {
    json!({
        "count": stats.count,
        "mean": stats.mean,
        "std": stats.std,
        "min": stats.min,
        "p25": stats.p25,
        "p50": stats.p50,
        "p75": stats.p75,
        "max": stats.max,
        "duplicates_removed": deduplicated,
    })
}

fn correlation_json(c: Correlation) -> Value {
    match c {
        Correlation::Defined(r) => json!(r),
        Correlation::Undefined => Value::Null,
    }
}

/// Language columns: seen languages, then unseen ones, each sorted.
fn language_columns(systems: &[(String, EvaluationReport)], seen: &BTreeSet<String>, unseen: &BTreeSet<String>) -> Vec<String> {
    let mut all: BTreeSet<&String> = BTreeSet::new();
    for (_, r) in systems {
        all.extend(r.per_language.keys());
    }
    let mut cols: Vec<String> = all.iter().filter(|l| seen.contains(**l)).map(|l| (*l).clone()).collect();
    cols.extend(all.iter().filter(|l| !seen.contains(**l) && unseen.contains(**l)).map(|l| (*l).clone()));
    cols.extend(all.iter().filter(|l| !seen.contains(**l) && !unseen.contains(**l)).map(|l| (*l).clone()));
    cols
}

/// JSON document with one entry per system; undefined correlations are `null`.
pub fn evaluation_json(systems: &[(String, EvaluationReport)], seen: &BTreeSet<String>, unseen: &BTreeSet<String>) -> Value {
    let mode = systems.first().map(|(_, r)| r.mode).unwrap_or_default();
    let entries: Vec<Value> = systems
        .iter()
        .map(|(name, r)| {
            let per: Map<String, Value> = r.per_language.iter().map(|(l, c)| (l.clone(), correlation_json(*c))).collect();
            json!({
                "name": name,
                "overall": correlation_json(r.overall),
                "seen": correlation_json(r.seen),
                "unseen": correlation_json(r.unseen),
                "per_language": per,
                "counts": r.counts,
            })
        })
        .collect();
    json!({
        "group_mode": match mode { GroupMode::Pooled => "pooled", GroupMode::Average => "average" },
        "seen_languages": seen,
        "unseen_languages": unseen,
        "language_order": language_columns(systems, seen, unseen),
        "systems": entries,
    })
}

/// Aligned table: System, Overall, Seen, Unseen, then one column per language.
pub fn evaluation_table(systems: &[(String, EvaluationReport)], seen: &BTreeSet<String>, unseen: &BTreeSet<String>) -> String {
    let langs = language_columns(systems, seen, unseen);
    let mut header = vec!["System".to_string(), "Overall".into(), "Seen".into(), "Unseen".into()];
    header.extend(langs.iter().cloned());
    let mut rows = vec![header];
    for (name, r) in systems {
        let mut row = vec![name.clone(), r.overall.to_string(), r.seen.to_string(), r.unseen.to_string()];
        for l in &langs {
            row.push(r.per_language.get(l).copied().unwrap_or(Correlation::Undefined).to_string());
        }
        rows.push(row);
    }
    align(&rows)
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
