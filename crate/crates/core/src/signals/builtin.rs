use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::protocol::WireValue;
use super::{
    builtin_language_id, builtin_pii_scan, LabeledSpan, MissingSignal, ProviderResponse, SignalDescriptor, SignalKind,
    SignalPayload, SignalValue,
};
use crate::corpus::{tokenize, Record, TokenizationPolicy};
use crate::error::{Error, Result};

/// Configuration of an in-process provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum BuiltinSpec {
    /// `pii` spans from the fixed pattern scanner.
    Pii,
    /// `language` labels from trigram profiles.
    Language,
    /// `toxicity` = highest weight of any listed term present in the text.
    LexiconToxicity { weights: PathBuf },
    /// `topic` = category with the most keyword occurrences, `other` if none.
    KeywordTopic { keywords: PathBuf },
    /// Precomputed values keyed by record id or image reference.
    Manifest { path: PathBuf },
}

/// Term weights for the lexicon toxicity scorer. Terms are token sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct ToxicityLexicon {
    weights: HashMap<Vec<String>, f64>,
    max_len: usize,
}

impl ToxicityLexicon {
    pub fn new(terms: BTreeMap<String, f64>) -> Result<Self, String> {
        let policy = TokenizationPolicy::default();
        let mut weights = HashMap::new();
        let mut max_len = 0;
        for (term, w) in terms {
            if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
                return Err(format!("weight {w} of `{term}` outside [0,1]"));
            }
            let toks: Vec<String> = tokenize(&term, &policy).into_iter().map(|t| t.text).collect();
            if toks.is_empty() {
                return Err(format!("term `{term}` has no tokens"));
            }
            max_len = max_len.max(toks.len());
            let slot = weights.entry(toks).or_insert(w);
            *slot = f64::max(*slot, w);
        }
        Ok(ToxicityLexicon { weights, max_len })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let terms: BTreeMap<String, f64> = serde_json::from_str(&text)?;
        ToxicityLexicon::new(terms).map_err(|message| Error::Resource {
            name: path.display().to_string(),
            message,
        })
    }

    /// Maximum weight over terms occurring anywhere in `text`, 0 if none.
    pub fn score(&self, text: &str) -> f64 {
        let toks: Vec<String> = tokenize(text, &TokenizationPolicy::default())
            .into_iter()
            .map(|t| t.text)
            .collect();
        let mut best = 0.0f64;
        for start in 0..toks.len() {
            for len in 1..=self.max_len.min(toks.len() - start) {
                if let Some(&w) = self.weights.get(&toks[start..start + len]) {
                    best = best.max(w);
                }
            }
        }
        best
    }
}

/// Category → keywords topic classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordTopicModel {
    keywords: Vec<(Vec<String>, String)>,
}

impl KeywordTopicModel {
    pub const DEFAULT_LABEL: &'static str = "other";

    pub fn new(map: BTreeMap<String, Vec<String>>) -> Result<Self, String> {
        let policy = TokenizationPolicy::default();
        let mut keywords = Vec::new();
        for (category, words) in map {
            for w in words {
                let toks: Vec<String> = tokenize(&w, &policy).into_iter().map(|t| t.text).collect();
                if toks.is_empty() {
                    return Err(format!("keyword `{w}` of `{category}` has no tokens"));
                }
                keywords.push((toks, category.clone()));
            }
        }
        Ok(KeywordTopicModel { keywords })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: BTreeMap<String, Vec<String>> = serde_json::from_str(&text)?;
        KeywordTopicModel::new(map).map_err(|message| Error::Resource {
            name: path.display().to_string(),
            message,
        })
    }

    pub fn classify(&self, text: &str) -> String {
        let toks: Vec<String> = tokenize(text, &TokenizationPolicy::default())
            .into_iter()
            .map(|t| t.text)
            .collect();
        let mut hits: BTreeMap<&str, usize> = BTreeMap::new();
        for (kw, category) in &self.keywords {
            let n = if kw.len() > toks.len() {
                0
            } else {
                toks.windows(kw.len()).filter(|w| *w == kw.as_slice()).count()
            };
            if n > 0 {
                *hits.entry(category).or_default() += n;
            }
        }
        // BTreeMap iteration is lexicographic, so the first maximum wins ties.
        let mut best: Option<(&str, usize)> = None;
        for (cat, n) in hits {
            if best.is_none_or(|(_, b)| n > b) {
                best = Some((cat, n));
            }
        }
        best.map(|(c, _)| c.to_owned())
            .unwrap_or_else(|| Self::DEFAULT_LABEL.to_owned())
    }
}

#[derive(Deserialize)]
struct ManifestLine {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    image: Option<String>,
    values: Vec<WireValue>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    by_id: HashMap<String, Vec<WireValue>>,
    by_image: HashMap<String, Vec<WireValue>>,
}

impl Manifest {
    /// Reads JSON lines `{"id" | "image": ..., "values": [...]}` where values
    /// use the wire value layout.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Manifest::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestLine = serde_json::from_str(line).map_err(|e| Error::Resource {
                name: path.display().to_string(),
                message: format!("line {}: {e}", i + 1),
            })?;
            match (entry.id, entry.image) {
                (Some(id), _) => m.by_id.entry(id).or_default().extend(entry.values),
                (None, Some(img)) => m.by_image.entry(img).or_default().extend(entry.values),
                (None, None) => {
                    return Err(Error::Resource {
                        name: path.display().to_string(),
                        message: format!("line {}: needs `id` or `image`", i + 1),
                    })
                }
            }
        }
        Ok(m)
    }

    fn lookup(&self, record: &Record, signal: &str) -> Option<&WireValue> {
        fn find<'a>(vals: &'a [WireValue], signal: &str) -> Option<&'a WireValue> {
            vals.iter().find(|v| v.signal == signal)
        }
        self.by_id.get(&record.id).and_then(|v| find(v, signal)).or_else(|| {
            let img = record.image.as_ref()?;
            self.by_image.get(img.location()).and_then(|v| find(v, signal))
        })
    }
}

/// A loaded in-process provider.
#[derive(Debug, Clone)]
pub enum BuiltinProvider {
    Pii,
    Language,
    LexiconToxicity(ToxicityLexicon),
    KeywordTopic(KeywordTopicModel),
    Manifest(Manifest, Vec<SignalDescriptor>),
}

impl BuiltinProvider {
    /// Loads resources; `declared` lists the signals a manifest carries.
    pub fn load(spec: &BuiltinSpec, declared: &[SignalDescriptor]) -> Result<Self> {
        Ok(match spec {
            BuiltinSpec::Pii => BuiltinProvider::Pii,
            BuiltinSpec::Language => BuiltinProvider::Language,
            BuiltinSpec::LexiconToxicity { weights } => {
                BuiltinProvider::LexiconToxicity(ToxicityLexicon::load(weights)?)
            }
            BuiltinSpec::KeywordTopic { keywords } => BuiltinProvider::KeywordTopic(KeywordTopicModel::load(keywords)?),
            BuiltinSpec::Manifest { path } => BuiltinProvider::Manifest(Manifest::load(path)?, declared.to_vec()),
        })
    }

    /// Signals this provider produces (name, kind).
    pub fn signals(spec: &BuiltinSpec, declared: &[SignalDescriptor]) -> Vec<(String, SignalKind)> {
        match spec {
            BuiltinSpec::Pii => vec![("pii".into(), SignalKind::Spans)],
            BuiltinSpec::Language => vec![("language".into(), SignalKind::Categorical)],
            BuiltinSpec::LexiconToxicity { .. } => vec![("toxicity".into(), SignalKind::Scalar01)],
            BuiltinSpec::KeywordTopic { .. } => vec![("topic".into(), SignalKind::Categorical)],
            BuiltinSpec::Manifest { .. } => declared.iter().map(|d| (d.name.clone(), d.kind)).collect(),
        }
    }

    fn value_for(&self, record: &Record, signal: &str) -> Result<SignalPayload, String> {
        let text = || record.text.as_deref().ok_or_else(|| "record has no text".to_owned());
        match self {
            BuiltinProvider::Pii => Ok(SignalPayload::Spans {
                spans: builtin_pii_scan(text()?)
                    .into_iter()
                    .map(|(span, label)| LabeledSpan {
                        span,
                        label: label.as_str().to_owned(),
                    })
                    .collect(),
            }),
            BuiltinProvider::Language => {
                let (label, conf) = builtin_language_id(text()?);
                Ok(SignalPayload::Categorical {
                    label,
                    confidence: Some(conf),
                })
            }
            BuiltinProvider::LexiconToxicity(lex) => Ok(SignalPayload::Scalar01 {
                score: lex.score(text()?),
            }),
            BuiltinProvider::KeywordTopic(model) => Ok(SignalPayload::Categorical {
                label: model.classify(text()?),
                confidence: None,
            }),
            BuiltinProvider::Manifest(manifest, declared) => {
                let kind = declared
                    .iter()
                    .find(|d| d.name == signal)
                    .map(|d| d.kind)
                    .ok_or_else(|| format!("signal `{signal}` not declared"))?;
                let wire = manifest
                    .lookup(record, signal)
                    .ok_or_else(|| "not in manifest".to_owned())?;
                wire.clone().into_payload(kind)
            }
        }
    }

    pub fn query(&self, batch: &[Record], signals: &[String]) -> ProviderResponse {
        let mut resp = ProviderResponse::default();
        for record in batch {
            for signal in signals {
                match self.value_for(record, signal) {
                    Ok(payload) => resp.values.push(SignalValue {
                        record_id: record.id.clone(),
                        signal: signal.clone(),
                        payload,
                    }),
                    Err(reason) => resp.missing.push(MissingSignal {
                        record_id: record.id.clone(),
                        signal: signal.clone(),
                        reason,
                    }),
                }
            }
        }
        resp
    }
}
