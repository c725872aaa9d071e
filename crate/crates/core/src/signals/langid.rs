//! Character-trigram language identification over bundled profiles.
//!
//! Each profile is built from a short sample text per language (see
//! `resources/langid`). A text is scored with a smoothed multinomial
//! likelihood per language; the confidence is the posterior of the best
//! language scaled by the square root of the share of the text's trigrams
//! that the winning profile knows, so text in an unknown script scores low.

use std::collections::HashMap;
use std::sync::LazyLock;

/// Minimum number of characters before a guess is attempted.
pub const MIN_CHARS: usize = 20;
/// Guesses below this confidence are reported as `und`.
pub const CONFIDENCE_FLOOR: f64 = 0.25;
/// Trigrams kept per profile.
const PROFILE_SIZE: usize = 1000;

const SAMPLES: &[(&str, &str)] = &[
    ("de", include_str!("../../resources/langid/de.txt")),
    ("en", include_str!("../../resources/langid/en.txt")),
    ("es", include_str!("../../resources/langid/es.txt")),
    ("fr", include_str!("../../resources/langid/fr.txt")),
    ("id", include_str!("../../resources/langid/id.txt")),
    ("it", include_str!("../../resources/langid/it.txt")),
    ("nl", include_str!("../../resources/langid/nl.txt")),
    ("pt", include_str!("../../resources/langid/pt.txt")),
    ("sv", include_str!("../../resources/langid/sv.txt")),
    ("tr", include_str!("../../resources/langid/tr.txt")),
];

struct Profile {
    lang: &'static str,
    log_probs: HashMap<[char; 3], f64>,
    unseen: f64,
}

static PROFILES: LazyLock<Vec<Profile>> = LazyLock::new(|| {
    SAMPLES
        .iter()
        .map(|(lang, sample)| build_profile(lang, sample))
        .collect()
});

/// Trigrams of lower-cased letter runs, each padded with one space per side.
fn trigrams(text: &str) -> Vec<[char; 3]> {
    let mut out = Vec::new();
    let lower = text.to_lowercase();
    for word in lower.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
        let chars: Vec<char> = std::iter::once(' ')
            .chain(word.chars())
            .chain(std::iter::once(' '))
            .collect();
        out.extend(chars.windows(3).map(|w| [w[0], w[1], w[2]]));
    }
    out
}

fn build_profile(lang: &'static str, sample: &str) -> Profile {
    let mut counts: HashMap<[char; 3], u64> = HashMap::new();
    for t in trigrams(sample) {
        *counts.entry(t).or_default() += 1;
    }
    let mut ranked: Vec<([char; 3], u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(PROFILE_SIZE);
    // Add-one smoothing over the kept trigrams plus one unseen bucket.
    let total: u64 = ranked.iter().map(|(_, c)| c + 1).sum::<u64>() + 1;
    let total = total as f64;
    Profile {
        lang,
        log_probs: ranked
            .into_iter()
            .map(|(t, c)| (t, ((c + 1) as f64 / total).ln()))
            .collect(),
        unseen: (1.0 / total).ln(),
    }
}

/// Languages with a bundled profile.
pub fn supported_languages() -> Vec<&'static str> {
    SAMPLES.iter().map(|(l, _)| *l).collect()
}

/// Returns `(language, confidence)`, or `("und", 0.0)` for short or
/// unrecognized text.
pub fn builtin_language_id(text: &str) -> (String, f64) {
    let undetermined = ("und".to_owned(), 0.0);
    if text.chars().filter(|c| !c.is_whitespace()).count() < MIN_CHARS {
        return undetermined;
    }
    let grams = trigrams(text);
    if grams.is_empty() {
        return undetermined;
    }
    let scores: Vec<f64> = PROFILES
        .iter()
        .map(|p| {
            grams
                .iter()
                .map(|g| p.log_probs.get(g).copied().unwrap_or(p.unseen))
                .sum()
        })
        .collect();
    let (best, &best_score) = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("profiles are non-empty");
    let norm: f64 = scores.iter().map(|s| (s - best_score).exp()).sum();
    let posterior = 1.0 / norm;
    let profile = &PROFILES[best];
    let known = grams.iter().filter(|g| profile.log_probs.contains_key(*g)).count();
    let coverage = known as f64 / grams.len() as f64;
    let confidence = posterior * coverage.sqrt();
    if confidence < CONFIDENCE_FLOOR {
        return undetermined;
    }
    (profile.lang.to_owned(), confidence)
}
