//! Inferred signals: per-record classifier outputs such as topic, toxicity or
//! image content flags.
//!
//! Signals come from providers. Built-in providers run in process (PII
//! patterns, trigram language id, lexicon toxicity, keyword topics, and a
//! manifest of precomputed values); external classifiers speak the line
//! protocol in [`protocol`] over a subprocess or HTTP.

mod builtin;
mod langid;
mod pii;
pub mod protocol;
mod provider;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Span;
use crate::error::{Error, Result};

pub use builtin::{BuiltinProvider, BuiltinSpec, KeywordTopicModel, ToxicityLexicon};
pub use langid::{builtin_language_id, supported_languages, CONFIDENCE_FLOOR, MIN_CHARS};
pub use pii::{builtin_pii_scan, PiiLabel};
pub use provider::{
    endpoint_override_var, query_provider, Provider, ProviderConfig, ProviderHandle, TransportConfig, TransportKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Scalar01,
    Categorical,
    Boolean,
    Count,
    Spans,
}

impl SignalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignalKind::Scalar01 => "scalar01",
            SignalKind::Categorical => "categorical",
            SignalKind::Boolean => "boolean",
            SignalKind::Count => "count",
            SignalKind::Spans => "spans",
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalDescriptor {
    pub name: String,
    pub kind: SignalKind,
    #[serde(default)]
    pub provider: String,
}

impl SignalDescriptor {
    pub fn new(name: impl Into<String>, kind: SignalKind, provider: impl Into<String>) -> Self {
        SignalDescriptor {
            name: name.into(),
            kind,
            provider: provider.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledSpan {
    pub span: Span,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SignalPayload {
    Scalar01 {
        score: f64,
    },
    Categorical {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        confidence: Option<f64>,
    },
    Boolean {
        flag: bool,
    },
    Count {
        count: u64,
    },
    Spans {
        spans: Vec<LabeledSpan>,
    },
}

impl SignalPayload {
    pub fn kind(&self) -> SignalKind {
        match self {
            SignalPayload::Scalar01 { .. } => SignalKind::Scalar01,
            SignalPayload::Categorical { .. } => SignalKind::Categorical,
            SignalPayload::Boolean { .. } => SignalKind::Boolean,
            SignalPayload::Count { .. } => SignalKind::Count,
            SignalPayload::Spans { .. } => SignalKind::Spans,
        }
    }

    /// Checks the value ranges: scores and confidences in `[0, 1]`, spans
    /// well-formed.
    pub fn validate(&self) -> Result<(), String> {
        let unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        match self {
            SignalPayload::Scalar01 { score } if !unit(*score) => Err(format!("score {score} outside [0,1]")),
            SignalPayload::Categorical {
                confidence: Some(c), ..
            } if !unit(*c) => Err(format!("confidence {c} outside [0,1]")),
            SignalPayload::Spans { spans } => match spans.iter().find(|s| s.span.start > s.span.end) {
                Some(s) => Err(format!("span {}..{} is reversed", s.span.start, s.span.end)),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn score(&self) -> Option<f64> {
        match self {
            SignalPayload::Scalar01 { score } => Some(*score),
            _ => None,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            SignalPayload::Categorical { label, .. } => Some(label),
            _ => None,
        }
    }
}

/// One inferred value for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalValue {
    pub record_id: String,
    pub signal: String,
    pub payload: SignalPayload,
}

/// A `(record, signal)` pair the provider could not answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingSignal {
    pub record_id: String,
    pub signal: String,
    pub reason: String,
}

/// Result of one provider query: every requested `(record, signal)` pair is
/// in exactly one of the two lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProviderResponse {
    pub values: Vec<SignalValue>,
    pub missing: Vec<MissingSignal>,
}

impl ProviderResponse {
    pub fn all_missing<'a>(ids: impl IntoIterator<Item = &'a str>, signals: &[String], reason: &str) -> Self {
        let mut resp = ProviderResponse::default();
        for id in ids {
            for s in signals {
                resp.missing.push(MissingSignal {
                    record_id: id.to_owned(),
                    signal: s.clone(),
                    reason: reason.to_owned(),
                });
            }
        }
        resp
    }

    pub fn extend(&mut self, other: ProviderResponse) {
        self.values.extend(other.values);
        self.missing.extend(other.missing);
    }
}

/// Signals attached to one record. Absent names are missing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalSet {
    values: BTreeMap<String, SignalPayload>,
}

impl SignalSet {
    pub fn insert(&mut self, name: impl Into<String>, payload: SignalPayload) {
        self.values.insert(name.into(), payload);
    }

    pub fn get(&self, name: &str) -> Option<&SignalPayload> {
        self.values.get(name)
    }

    pub fn names(&self) -> BTreeSet<&str> {
        self.values.keys().map(String::as_str).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `score >= threshold` for a `scalar01` value.
pub fn threshold_signal(value: &SignalValue, threshold: f64) -> Result<bool> {
    match value.payload {
        SignalPayload::Scalar01 { score } => Ok(score >= threshold),
        ref other => Err(Error::SignalKind {
            signal: value.signal.clone(),
            expected: SignalKind::Scalar01.to_string(),
            actual: other.kind().to_string(),
        }),
    }
}
