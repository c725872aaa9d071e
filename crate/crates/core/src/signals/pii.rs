//! Fixed-pattern PII scanner.
//!
//! Patterns (applied to the raw text):
//!
//! | label              | shape                                                      |
//! |--------------------|------------------------------------------------------------|
//! | `email`            | `local@domain.tld`, tld of two or more letters             |
//! | `phone`            | optional `+CC`, then 3-3-4 digits with `-`, `.`, space or no separators, area code optionally in parentheses |
//! | `ipv4`             | dotted quad, each octet 0-255                              |
//! | `id-number-pattern`| `ddd-dd-dddd`, or 13-19 digit card numbers passing the Luhn check |
//!
//! Overlapping candidates are resolved left to right, longest first.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiiLabel {
    Email,
    IdNumberPattern,
    Ipv4,
    Phone,
}

impl PiiLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PiiLabel::Email => "email",
            PiiLabel::IdNumberPattern => "id-number-pattern",
            PiiLabel::Ipv4 => "ipv4",
            PiiLabel::Phone => "phone",
        }
    }
}

static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}\b").unwrap());
static PHONE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:\+\d{1,3}[-. ]?)?(?:\(\d{3}\)[-. ]?|\b\d{3}[-. ]?)\d{3}[-. ]?\d{4}\b").unwrap());
static IPV4: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\.){3}(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\b").unwrap()
});
static SSN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d{3}-\d{2}-\d{4}\b").unwrap());
static CARD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d(?:[- ]?\d){12,18}\b").unwrap());

fn luhn_valid(digits: &[u8]) -> bool {
    let mut sum = 0u32;
    for (i, d) in digits.iter().rev().enumerate() {
        let mut v = *d as u32;
        if i % 2 == 1 {
            v *= 2;
            if v > 9 {
                v -= 9;
            }
        }
        sum += v;
    }
    sum.is_multiple_of(10)
}

/// Finds PII spans in `text`; spans are non-overlapping and ascending.
pub fn builtin_pii_scan(text: &str) -> Vec<(Span, PiiLabel)> {
    let mut candidates: Vec<(Span, PiiLabel)> = Vec::new();
    let mut push = |re: &Regex, label: PiiLabel| {
        for m in re.find_iter(text) {
            candidates.push((Span::new(m.start(), m.end()), label));
        }
    };
    push(&EMAIL, PiiLabel::Email);
    push(&PHONE, PiiLabel::Phone);
    push(&IPV4, PiiLabel::Ipv4);
    push(&SSN, PiiLabel::IdNumberPattern);
    for m in CARD.find_iter(text) {
        let digits: Vec<u8> = m
            .as_str()
            .bytes()
            .filter(u8::is_ascii_digit)
            .map(|b| b - b'0')
            .collect();
        if luhn_valid(&digits) {
            candidates.push((Span::new(m.start(), m.end()), PiiLabel::IdNumberPattern));
        }
    }
    candidates.sort_by(|a, b| {
        a.0.start
            .cmp(&b.0.start)
            .then(b.0.len().cmp(&a.0.len()))
            .then(a.1.cmp(&b.1))
    });
    let mut out: Vec<(Span, PiiLabel)> = Vec::new();
    for (span, label) in candidates {
        if out.last().is_some_and(|(prev, _)| prev.overlaps(&span)) {
            continue;
        }
        out.push((span, label));
    }
    out
}
