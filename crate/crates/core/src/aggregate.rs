//! Mergeable partial results and the per-record view the aggregators read.

use std::collections::BTreeMap;

use crate::corpus::{tokenize, Record, Token, TokenizationPolicy};
use crate::lexicon::{TermHit, TermMatcher};
use crate::signals::SignalSet;

/// Partial result of a shard scan. `merge` must be associative and
/// commutative, and `Default` must be its identity.
pub trait Mergeable: Default {
    fn merge(&mut self, other: Self);
}

/// Merges an iterator of partials, starting from the identity.
pub fn merge_all<M: Mergeable>(parts: impl IntoIterator<Item = M>) -> M {
    let mut acc = M::default();
    for p in parts {
        acc.merge(p);
    }
    acc
}

/// Sparse counter keyed by an ordered type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts<K: Ord>(pub BTreeMap<K, u64>);

impl<K: Ord> Default for Counts<K> {
    fn default() -> Self {
        Counts(BTreeMap::new())
    }
}

impl<K: Ord> Counts<K> {
    pub fn add(&mut self, key: K, n: u64) {
        *self.0.entry(key).or_default() += n;
    }

    pub fn bump(&mut self, key: K) {
        self.add(key, 1);
    }

    pub fn get(&self, key: &K) -> u64 {
        self.0.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, u64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<K: Ord> Mergeable for Counts<K> {
    fn merge(&mut self, other: Self) {
        for (k, v) in other.0 {
            self.add(k, v);
        }
    }
}

/// A record together with everything derived from it during the scan.
#[derive(Debug, Clone)]
pub struct Observed {
    pub record: Record,
    pub tokens: Vec<Token>,
    pub hits: Vec<TermHit>,
    pub signals: SignalSet,
}

impl Observed {
    /// Tokenizes the record with the matcher's policy (or the default one)
    /// and collects its lexicon hits.
    pub fn new(record: Record, matcher: Option<&TermMatcher>, signals: SignalSet) -> Self {
        let text = record.text_or_empty();
        let (tokens, hits) = match matcher {
            Some(m) => {
                let tokens = m.tokenize(text);
                let hits = m.match_tokens(&tokens);
                (tokens, hits)
            }
            None => (tokenize(text, &TokenizationPolicy::default()), Vec::new()),
        };
        Observed {
            record,
            tokens,
            hits,
            signals,
        }
    }

    pub fn plain(record: Record, matcher: Option<&TermMatcher>) -> Self {
        Observed::new(record, matcher, SignalSet::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_merge_is_commutative() {
        let mut a = Counts::default();
        a.add("x", 2);
        a.bump("y");
        let mut b = Counts::default();
        b.add("y", 3);
        let mut ab = a.clone();
        ab.merge(b.clone());
        let mut ba = b;
        ba.merge(a);
        assert_eq!(ab, ba);
        assert_eq!(ab.get(&"y"), 4);
        assert_eq!(ab.total(), 6);
    }
}
