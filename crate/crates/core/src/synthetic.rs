//! Seeded synthetic corpora whose labels are a fixed function of the tokens.
//!
//! Each text mixes filler words from a per-language vocabulary with marker
//! words shared by all languages. The label is `1 + Σ marker weights`,
//! clamped to the scale and rounded to a 0.1 grid, so a model that sees the
//! markers can recover it exactly. Markers are rare, giving the same
//! low-heavy label skew the augmentation stages are built around.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{synthesize_id, Corpus, LabeledText};
use crate::{MAX_SCORE, MIN_SCORE};

/// Marker words and their contribution to the label.
pub const MARKERS: [(&str, f64); 5] = [
    ("cuddle", 1.5),
    ("darling", 1.2),
    ("kiss", 2.0),
    ("miss", 0.7),
    ("hug", 1.0),
];

const SYLLABLES: [&str; 12] = ["ka", "lo", "mi", "su", "te", "ra", "no", "vi", "de", "po", "ge", "fu"];

/// Label implied by a text: one plus the weight of every marker token.
pub fn label_of(text: &str) -> f64 {
    let raw = 1.0
        + text
            .split_whitespace()
            .filter_map(|t| MARKERS.iter().find(|(m, _)| *m == t).map(|(_, w)| *w))
            .sum::<f64>();
    libm::round(raw.clamp(MIN_SCORE, MAX_SCORE) * 10.0) / 10.0
}

fn filler(rng: &mut ChaCha8Rng, language: &str) -> String {
    let a = SYLLABLES[rng.gen_range(0..SYLLABLES.len())];
    let b = SYLLABLES[rng.gen_range(0..SYLLABLES.len())];
    format!("{language}{a}{b}")
}

/// One synthetic text in `language`.
pub fn text(rng: &mut ChaCha8Rng, language: &str) -> String {
    let n_filler = rng.gen_range(5..10);
    let mut tokens: Vec<String> = (0..n_filler).map(|_| filler(rng, language)).collect();
    // 0 markers half the time, then 1, 2, 3 with decreasing odds
    let n_markers = match rng.gen_range(0..16) {
        0..=7 => 0,
        8..=12 => 1,
        13..=14 => 2,
        _ => 3,
    };
    for _ in 0..n_markers {
        let (m, _) = MARKERS[rng.gen_range(0..MARKERS.len())];
        let at = rng.gen_range(0..=tokens.len());
        tokens.insert(at, String::from(m));
    }
    tokens.join(" ")
}

/// `n` items spread round-robin over `languages`, ids `{lang}-{row}`.
pub fn corpus(n: usize, languages: &[&str], unseen: &[&str], seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..n)
        .map(|row| {
            let lang = languages[row % languages.len()];
            let t = text(&mut rng, lang);
            let label = label_of(&t);
            LabeledText {
                id: synthesize_id(lang, row),
                text: t,
                language: String::from(lang),
                label,
            }
        })
        .collect();
    // ids are unique and labels in range by construction
    Corpus::new(items, unseen.iter().map(|s| String::from(*s))).expect("synthetic corpus is valid")
}
