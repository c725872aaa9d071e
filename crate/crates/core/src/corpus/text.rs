use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization as _;

use super::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnicodeNormalization {
    None,
    /// NFKC.
    #[default]
    CompatibilityComposed,
}

/// How text is normalized and cut into tokens.
///
/// The token rule itself is fixed: a token is a maximal run of letters and
/// digits (combining marks included), where a single hyphen or apostrophe
/// between two such characters stays inside the token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizationPolicy {
    pub case_fold: bool,
    pub unicode_normalization: UnicodeNormalization,
}

impl Default for TokenizationPolicy {
    fn default() -> Self {
        TokenizationPolicy {
            case_fold: true,
            unicode_normalization: UnicodeNormalization::CompatibilityComposed,
        }
    }
}

impl TokenizationPolicy {
    pub fn verbatim() -> Self {
        TokenizationPolicy {
            case_fold: false,
            unicode_normalization: UnicodeNormalization::None,
        }
    }

    /// Normalizes a single token (no whitespace handling).
    pub fn fold(&self, s: &str) -> String {
        let normalized: String = match self.unicode_normalization {
            UnicodeNormalization::None => s.to_owned(),
            UnicodeNormalization::CompatibilityComposed => s.nfkc().collect(),
        };
        if self.case_fold {
            normalized.to_lowercase()
        } else {
            normalized
        }
    }
}

/// A token: its normalized form plus the byte span of the original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Span,
}

/// Applies Unicode normalization and case folding, collapses whitespace runs
/// to one space and trims both ends.
pub fn normalize_text(text: &str, policy: &TokenizationPolicy) -> String {
    let folded = policy.fold(text);
    let mut out = String::with_capacity(folded.len());
    for word in folded.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\u{2010}' | '\u{2011}' | '\'' | '\u{2019}')
}

/// Byte spans of tokens in `text`, before any normalization.
pub(crate) fn token_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match start {
            None => {
                if c.is_alphanumeric() {
                    start = Some(i);
                }
            }
            Some(s) => {
                if is_word_char(c) {
                    continue;
                }
                let next_is_word = chars.peek().map(|&(_, n)| is_word_char(n)).unwrap_or(false);
                if is_joiner(c) && next_is_word {
                    continue;
                }
                spans.push(Span::new(s, i));
                start = None;
                if c.is_alphanumeric() {
                    start = Some(i);
                }
            }
        }
    }
    if let Some(s) = start {
        spans.push(Span::new(s, text.len()));
    }
    spans
}

/// Splits `text` into tokens. Spans index the input; token strings are
/// normalized per `policy`.
pub fn tokenize(text: &str, policy: &TokenizationPolicy) -> Vec<Token> {
    token_spans(text)
        .into_iter()
        .map(|span| Token {
            text: policy.fold(&text[span.start..span.end]),
            span,
        })
        .collect()
}
