use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;
use std::sync::Arc;

use super::{IdentityLexicon, LexiconKind};
use crate::corpus::{tokenize, Span, Token, TokenizationPolicy};
use crate::error::{Error, Result};

/// A lexicon term found in a text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermHit {
    pub term: Arc<str>,
    pub group: Arc<str>,
    pub axis: Arc<str>,
    pub kind: LexiconKind,
    /// Byte span in the source text, covering whole tokens.
    pub span: Span,
    /// Token index range in the tokenized text.
    pub tokens: Range<usize>,
}

#[derive(Debug, Clone)]
struct Entry {
    term: Arc<str>,
    group: Arc<str>,
    axis: Arc<str>,
    kind: LexiconKind,
    lane: usize,
    len: usize,
}

#[derive(Debug, Default, Clone)]
struct Node {
    children: HashMap<String, u32>,
    entries: Vec<u32>,
}

/// Token-level trie over the terms of all loaded lexicons.
///
/// Each `(kind, axis)` pair is a lane. Within a lane matching is
/// leftmost-longest and non-overlapping; lanes never suppress each other, so
/// the same words can be reported by an identity axis and a hateful list.
#[derive(Debug, Clone)]
pub struct TermMatcher {
    policy: TokenizationPolicy,
    nodes: Vec<Node>,
    entries: Vec<Entry>,
    lanes: Vec<(LexiconKind, String)>,
    lexicons: Vec<IdentityLexicon>,
}

pub fn compile_matcher(lexicons: &[IdentityLexicon], policy: TokenizationPolicy) -> Result<TermMatcher> {
    if lexicons.is_empty() {
        return Err(Error::NoLexicons);
    }
    let mut nodes = vec![Node::default()];
    let mut entries: Vec<Entry> = Vec::new();
    let mut lanes: Vec<(LexiconKind, String)> = Vec::new();
    // (lane, term) -> group, to reject the same term under two groups of one
    // lane when a lane is spread over several files.
    let mut owners: HashMap<(usize, String), Arc<str>> = HashMap::new();

    for lex in lexicons {
        let lane_key = (lex.kind, lex.axis.clone());
        let lane = match lanes.iter().position(|l| *l == lane_key) {
            Some(i) => i,
            None => {
                lanes.push(lane_key);
                lanes.len() - 1
            }
        };
        let axis: Arc<str> = Arc::from(lex.axis.as_str());
        for (group, terms) in &lex.groups {
            let group: Arc<str> = Arc::from(group.as_str());
            for term in terms {
                let toks: Vec<String> = term.split(' ').map(|t| policy.fold(t)).collect();
                let key = toks.join(" ");
                if let Some(prev) = owners.get(&(lane, key.clone())) {
                    if *prev == group {
                        continue;
                    }
                    return Err(Error::DuplicateTerm {
                        axis: lex.axis.clone(),
                        term: key,
                        first: prev.to_string(),
                        second: group.to_string(),
                    });
                }
                owners.insert((lane, key.clone()), group.clone());

                let mut node = 0usize;
                for tok in &toks {
                    let next = match nodes[node].children.get(tok) {
                        Some(&n) => n as usize,
                        None => {
                            nodes.push(Node::default());
                            let n = nodes.len() - 1;
                            nodes[node].children.insert(tok.clone(), n as u32);
                            n
                        }
                    };
                    node = next;
                }
                entries.push(Entry {
                    term: Arc::from(key.as_str()),
                    group: group.clone(),
                    axis: axis.clone(),
                    kind: lex.kind,
                    lane,
                    len: toks.len(),
                });
                nodes[node].entries.push((entries.len() - 1) as u32);
            }
        }
    }
    Ok(TermMatcher {
        policy,
        nodes,
        entries,
        lanes,
        lexicons: lexicons.to_vec(),
    })
}

impl TermMatcher {
    pub fn policy(&self) -> &TokenizationPolicy {
        &self.policy
    }

    /// Number of distinct terms over all lexicons.
    pub fn vocabulary_size(&self) -> usize {
        self.entries.iter().map(|e| &*e.term).collect::<BTreeSet<_>>().len()
    }

    pub fn lexicons(&self) -> &[IdentityLexicon] {
        &self.lexicons
    }

    pub fn has_kind(&self, kind: LexiconKind) -> bool {
        self.lexicons.iter().any(|l| l.kind == kind)
    }

    pub fn has_axis(&self, axis: &str) -> bool {
        self.lexicons.iter().any(|l| l.axis == axis)
    }

    /// Axis names of lexicons of `kind`, sorted.
    pub fn axes(&self, kind: LexiconKind) -> Vec<String> {
        self.lexicons
            .iter()
            .filter(|l| l.kind == kind)
            .map(|l| l.axis.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// All groups of `(kind, axis)`, sorted.
    pub fn groups(&self, kind: LexiconKind, axis: &str) -> Vec<String> {
        self.lexicons
            .iter()
            .filter(|l| l.kind == kind && l.axis == axis)
            .flat_map(|l| l.groups.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Folded tokens of every term of each group of `(kind, axis)`.
    pub fn trigger_tokens(&self, kind: LexiconKind, axis: &str) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.kind == kind && &*e.axis == axis) {
            out.entry(e.group.to_string())
                .or_default()
                .extend(e.term.split(' ').map(str::to_owned));
        }
        out
    }

    pub fn tokenize(&self, text: &str) -> Vec<Token> {
        tokenize(text, &self.policy)
    }

    /// Matches over an already tokenized text (tokens from [`Self::tokenize`]).
    pub fn match_tokens(&self, tokens: &[Token]) -> Vec<TermHit> {
        let mut hits = Vec::new();
        let mut blocked_until = vec![0usize; self.lanes.len()];
        // Longest term per lane starting at the current position.
        let mut best: Vec<Option<(usize, u32)>> = vec![None; self.lanes.len()];
        for start in 0..tokens.len() {
            best.iter_mut().for_each(|b| *b = None);
            let mut node = 0usize;
            for (offset, tok) in tokens[start..].iter().enumerate() {
                match self.nodes[node].children.get(&tok.text) {
                    Some(&n) => node = n as usize,
                    None => break,
                }
                for &eid in &self.nodes[node].entries {
                    let e = &self.entries[eid as usize];
                    debug_assert_eq!(e.len, offset + 1);
                    best[e.lane] = Some((offset + 1, eid));
                }
            }
            for (lane, b) in best.iter().enumerate() {
                let Some((len, eid)) = *b else { continue };
                if start < blocked_until[lane] {
                    continue;
                }
                blocked_until[lane] = start + len;
                let e = &self.entries[eid as usize];
                hits.push(TermHit {
                    term: e.term.clone(),
                    group: e.group.clone(),
                    axis: e.axis.clone(),
                    kind: e.kind,
                    span: Span::new(tokens[start].span.start, tokens[start + len - 1].span.end),
                    tokens: start..start + len,
                });
            }
        }
        hits
    }
}

/// Finds lexicon terms in `text`, sorted by span start.
pub fn match_terms(matcher: &TermMatcher, text: &str) -> Vec<TermHit> {
    matcher.match_tokens(&matcher.tokenize(text))
}
