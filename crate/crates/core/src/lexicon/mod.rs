//! Identity, pronoun and hateful term lists and token-boundary matching.
//!
//! Lists are user-supplied data. The demo lists under `demos/lexicons` are
//! examples for the shipped demo plans, not reference vocabularies.

mod matcher;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, TokenizationPolicy};
use crate::error::{Error, Result};

pub use matcher::{compile_matcher, match_terms, TermHit, TermMatcher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconKind {
    Identity,
    Pronoun,
    /// Group names of a hateful lexicon name the group each term references.
    Hateful,
}

impl fmt::Display for LexiconKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LexiconKind::Identity => "identity",
            LexiconKind::Pronoun => "pronoun",
            LexiconKind::Hateful => "hateful",
        })
    }
}

/// Terms of one axis, grouped. Terms are stored as their case-folded tokens
/// joined by single spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityLexicon {
    pub axis: String,
    pub kind: LexiconKind,
    pub locale: String,
    pub groups: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    axis: String,
    kind: LexiconKind,
    #[serde(default = "default_locale")]
    locale: String,
    groups: BTreeMap<String, Vec<String>>,
}

fn default_locale() -> String {
    "und".into()
}

impl IdentityLexicon {
    /// Builds a lexicon, folding and deduplicating terms.
    pub fn new(
        axis: impl Into<String>,
        kind: LexiconKind,
        locale: impl Into<String>,
        groups: BTreeMap<String, Vec<String>>,
    ) -> Result<Self, String> {
        let axis = axis.into();
        if axis.trim().is_empty() {
            return Err("axis name is empty".into());
        }
        if groups.is_empty() {
            return Err("axis has no groups".into());
        }
        let policy = TokenizationPolicy::default();
        let mut owner: BTreeMap<String, String> = BTreeMap::new();
        let mut folded_groups = BTreeMap::new();
        for (group, terms) in groups {
            if group.trim().is_empty() {
                return Err("group name is empty".into());
            }
            if terms.is_empty() {
                return Err(format!("group `{group}` has no terms"));
            }
            let mut folded = Vec::with_capacity(terms.len());
            for term in terms {
                let toks: Vec<String> = tokenize(&term, &policy).into_iter().map(|t| t.text).collect();
                if toks.is_empty() {
                    return Err(format!("term `{term}` in group `{group}` has no tokens"));
                }
                let key = toks.join(" ");
                match owner.get(&key) {
                    Some(g) if *g == group => continue,
                    Some(g) => {
                        return Err(Error::DuplicateTerm {
                            axis: axis.clone(),
                            term: key,
                            first: g.clone(),
                            second: group,
                        }
                        .to_string())
                    }
                    None => {
                        owner.insert(key.clone(), group.clone());
                        folded.push(key);
                    }
                }
            }
            folded_groups.insert(group, folded);
        }
        Ok(IdentityLexicon {
            axis,
            kind,
            locale: locale.into(),
            groups: folded_groups,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self, String> {
        let file: LexiconFile = serde_json::from_str(s).map_err(|e| format!("line {}: {e}", e.line()))?;
        IdentityLexicon::new(file.axis, file.kind, file.locale, file.groups)
    }

    pub fn term_count(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    /// The group a (folded) term belongs to.
    pub fn group_of(&self, term: &str) -> Option<&str> {
        self.groups
            .iter()
            .find(|(_, terms)| terms.iter().any(|t| t == term))
            .map(|(g, _)| g.as_str())
    }
}

/// Reads a lexicon file (JSON with `axis`, `kind`, `locale`, `groups`).
pub fn load_lexicon(path: &Path) -> Result<IdentityLexicon> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    IdentityLexicon::from_json_str(&text).map_err(|message| Error::Lexicon {
        path: path.to_owned(),
        message,
    })
}
