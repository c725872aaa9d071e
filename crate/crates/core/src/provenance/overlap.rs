//! Overlap of one dataset with another (benchmark contamination).

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::dedup::content_digest;
use crate::aggregate::{Mergeable, Observed};
use crate::corpus::{Token, TokenizationPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMode {
    ExactText,
    NgramContainment,
}

pub const DEFAULT_NGRAM: usize = 13;
const SAMPLE_IDS: usize = 20;

fn ngram_hashes(tokens: &[Token], n: usize) -> impl Iterator<Item = u64> + '_ {
    tokens.windows(n).map(|win| {
        let mut h = DefaultHasher::new();
        for t in win {
            t.text.hash(&mut h);
        }
        h.finish()
    })
}

/// Digests and n-grams of the comparison dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverlapIndex {
    digests: HashSet<[u8; 32]>,
    ngrams: HashSet<u64>,
    records: u64,
}

impl OverlapIndex {
    pub fn observe(&mut self, obs: &Observed, mode: OverlapMode, n: usize, policy: &TokenizationPolicy) {
        self.records += 1;
        if obs.record.text.is_none() {
            return;
        }
        self.digests.insert(content_digest(&obs.record, policy));
        if mode == OverlapMode::NgramContainment {
            self.ngrams.extend(ngram_hashes(&obs.tokens, n));
        }
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    /// Whether a record of the audited dataset occurs in this one.
    pub fn matches(&self, obs: &Observed, mode: OverlapMode, n: usize, policy: &TokenizationPolicy) -> bool {
        if obs.record.text.is_none() {
            return false;
        }
        if self.digests.contains(&content_digest(&obs.record, policy)) {
            return true;
        }
        mode == OverlapMode::NgramContainment && ngram_hashes(&obs.tokens, n).any(|h| self.ngrams.contains(&h))
    }
}

impl Mergeable for OverlapIndex {
    fn merge(&mut self, other: Self) {
        self.digests.extend(other.digests);
        self.ngrams.extend(other.ngrams);
        self.records += other.records;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverlapAcc {
    scanned: u64,
    matched: u64,
    sample: BTreeSet<String>,
}

impl OverlapAcc {
    pub fn observe(
        &mut self,
        obs: &Observed,
        index: &OverlapIndex,
        mode: OverlapMode,
        n: usize,
        policy: &TokenizationPolicy,
    ) {
        self.scanned += 1;
        if index.matches(obs, mode, n, policy) {
            self.matched += 1;
            self.sample.insert(obs.record.id.clone());
            while self.sample.len() > SAMPLE_IDS {
                self.sample.pop_last();
            }
        }
    }

    pub fn finish(
        self,
        datasets: (String, String),
        mode: OverlapMode,
        n: usize,
        index: &OverlapIndex,
    ) -> OverlapReport {
        OverlapReport {
            datasets,
            mode,
            ngram: (mode == OverlapMode::NgramContainment).then_some(n),
            records_a: self.scanned,
            records_b: index.records,
            matched: self.matched,
            percent: if self.scanned > 0 {
                Some(100.0 * self.matched as f64 / self.scanned as f64)
            } else {
                None
            },
            matched_sample: self.sample.into_iter().collect(),
        }
    }
}

impl Mergeable for OverlapAcc {
    fn merge(&mut self, other: Self) {
        self.scanned += other.scanned;
        self.matched += other.matched;
        self.sample.extend(other.sample);
        while self.sample.len() > SAMPLE_IDS {
            self.sample.pop_last();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    /// Audited dataset and comparison dataset labels.
    pub datasets: (String, String),
    pub mode: OverlapMode,
    pub ngram: Option<usize>,
    pub records_a: u64,
    pub records_b: u64,
    pub matched: u64,
    /// Matched share of the audited dataset, in percent.
    pub percent: Option<f64>,
    /// Lowest matched ids.
    pub matched_sample: Vec<String>,
}

/// Share of `a`'s records found in `b`. In n-gram mode a record also
/// matches when any of its `n`-token windows occurs in `b`, so n-gram
/// matches are a superset of exact ones.
pub fn dataset_overlap<'a, 'b>(
    a: impl IntoIterator<Item = &'a Observed>,
    b: impl IntoIterator<Item = &'b Observed>,
    labels: (String, String),
    mode: OverlapMode,
    n: usize,
    policy: &TokenizationPolicy,
) -> Result<OverlapReport> {
    if n < 1 {
        return Err(Error::InvalidParameter("n-gram width must be at least 1".into()));
    }
    let mut index = OverlapIndex::default();
    for obs in b {
        index.observe(obs, mode, n, policy);
    }
    let mut acc = OverlapAcc::default();
    for obs in a {
        acc.observe(obs, &index, mode, n, policy);
    }
    Ok(acc.finish(labels, mode, n, &index))
}
