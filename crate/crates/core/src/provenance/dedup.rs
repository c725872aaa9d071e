//! Exact and near-duplicate detection.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::{Mergeable, Observed};
use crate::corpus::{normalize_text, Record, Token, TokenizationPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DuplicateMode {
    Exact,
    Near,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuplicateParams {
    pub mode: DuplicateMode,
    /// Shingle width in tokens.
    pub shingle_width: usize,
    pub permutations: usize,
    /// Jaccard similarity at or above which two records are near duplicates.
    pub threshold: f64,
    pub seed: u64,
    /// Compare every pair by true Jaccard instead of using LSH candidates.
    pub exhaustive: bool,
}

impl Default for DuplicateParams {
    fn default() -> Self {
        DuplicateParams {
            mode: DuplicateMode::Exact,
            shingle_width: 13,
            permutations: 128,
            threshold: 0.8,
            seed: 0,
            exhaustive: false,
        }
    }
}

/// Required probability that a pair at exactly the threshold shares a band.
const BAND_RECALL: f64 = 0.999;

impl DuplicateParams {
    pub fn validate(&self) -> Result<()> {
        if self.mode == DuplicateMode::Near {
            if self.shingle_width == 0 {
                return Err(Error::InvalidParameter("shingle_width must be at least 1".into()));
            }
            if self.permutations == 0 {
                return Err(Error::InvalidParameter("permutations must be at least 1".into()));
            }
            if !(self.threshold > 0.0 && self.threshold <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "threshold {} outside (0, 1]",
                    self.threshold
                )));
            }
        }
        Ok(())
    }

    /// `(bands, rows)` for LSH: the most rows per band (fewest spurious
    /// candidates) whose recall at the threshold is still `BAND_RECALL`.
    pub fn banding(&self) -> (usize, usize) {
        let p = self.permutations;
        let mut best = (p, 1);
        for r in 1..=p {
            if !p.is_multiple_of(r) {
                continue;
            }
            let b = p / r;
            let miss = (1.0 - self.threshold.powi(r as i32)).powi(b as i32);
            if 1.0 - miss >= BAND_RECALL {
                best = (b, r);
            }
        }
        best
    }
}

/// Content digest deciding exact-duplicate identity: the normalized text,
/// or the image file bytes for image-only records (the reference string if
/// the file cannot be read).
pub fn content_digest(record: &Record, policy: &TokenizationPolicy) -> [u8; 32] {
    let mut h = Sha256::new();
    match (&record.text, &record.image) {
        (Some(t), _) => {
            h.update(b"text\0");
            h.update(normalize_text(t, policy).as_bytes());
        }
        (None, Some(img)) => match std::fs::read(img.location()) {
            Ok(bytes) => {
                h.update(b"image-bytes\0");
                h.update(&bytes);
            }
            Err(_) => {
                h.update(b"image-ref\0");
                h.update(img.location().as_bytes());
            }
        },
        (None, None) => h.update(b"empty\0"),
    }
    h.finalize().into()
}

fn hash_of<T: Hash + ?Sized>(v: &T) -> u64 {
    let mut h = DefaultHasher::new();
    v.hash(&mut h);
    h.finish()
}

/// Sorted, deduplicated hashes of every `w`-token window.
pub fn shingles(tokens: &[Token], w: usize) -> Vec<u64> {
    if tokens.len() < w || w == 0 {
        return Vec::new();
    }
    let mut out: Vec<u64> = tokens
        .windows(w)
        .map(|win| {
            let mut h = DefaultHasher::new();
            for t in win {
                t.text.hash(&mut h);
            }
            h.finish()
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Jaccard similarity of two sorted, deduplicated sets.
pub fn jaccard(a: &[u64], b: &[u64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

const MERSENNE_61: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % MERSENNE_61 as u128) as u64
}

/// Seeded universal hash family `(a·x + b) mod (2^61 − 1)`.
#[derive(Debug, Clone)]
pub struct MinHasher {
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(permutations: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..permutations)
            .map(|_| (rng.gen_range(1..MERSENNE_61), rng.gen_range(0..MERSENNE_61)))
            .collect();
        MinHasher { coeffs }
    }

    pub fn signature(&self, shingles: &[u64]) -> Vec<u64> {
        self.coeffs
            .iter()
            .map(|&(a, b)| {
                shingles
                    .iter()
                    .map(|&x| (mul_mod(a, x % MERSENNE_61) + b) % MERSENNE_61)
                    .min()
                    .unwrap_or(u64::MAX)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    id: String,
    digest: [u8; 32],
    shingles: Option<Vec<u64>>,
}

/// Collects digests (and shingle sets in near mode); clustering happens in
/// `finish`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DuplicateAcc {
    entries: Vec<Entry>,
}

impl DuplicateAcc {
    pub fn observe(&mut self, obs: &Observed, params: &DuplicateParams, policy: &TokenizationPolicy) {
        let shingles = match params.mode {
            DuplicateMode::Near if obs.tokens.len() >= params.shingle_width => {
                Some(shingles(&obs.tokens, params.shingle_width))
            }
            _ => None,
        };
        self.entries.push(Entry {
            id: obs.record.id.clone(),
            digest: content_digest(&obs.record, policy),
            shingles,
        });
    }

    pub fn finish(mut self, params: &DuplicateParams) -> DuplicateReport {
        self.entries.sort_by(|a, b| a.id.cmp(&b.id));
        let n = self.entries.len();
        let mut uf = UnionFind::new(n);
        let mut by_digest: HashMap<[u8; 32], usize> = HashMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            if let Some(&first) = by_digest.get(&e.digest) {
                uf.union(first, i);
            } else {
                by_digest.insert(e.digest, i);
            }
        }
        let mut near = None;
        if params.mode == DuplicateMode::Near {
            let with_sets: Vec<usize> = (0..n).filter(|&i| self.entries[i].shingles.is_some()).collect();
            let set = |i: usize| self.entries[i].shingles.as_deref().unwrap_or(&[]);
            let (bands, rows) = params.banding();
            let mut candidates: Vec<(usize, usize)> = Vec::new();
            if params.exhaustive {
                for (x, &i) in with_sets.iter().enumerate() {
                    for &j in &with_sets[x + 1..] {
                        candidates.push((i, j));
                    }
                }
            } else {
                let hasher = MinHasher::new(params.permutations, params.seed);
                let mut buckets: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
                for &i in &with_sets {
                    let sig = hasher.signature(set(i));
                    for (b, chunk) in sig.chunks(rows).enumerate() {
                        buckets.entry((b, hash_of(chunk))).or_default().push(i);
                    }
                }
                for members in buckets.values() {
                    for (x, &i) in members.iter().enumerate() {
                        for &j in &members[x + 1..] {
                            candidates.push((i.min(j), i.max(j)));
                        }
                    }
                }
                candidates.sort_unstable();
                candidates.dedup();
            }
            let candidate_pairs = candidates.len();
            let mut verified = 0usize;
            for (i, j) in candidates {
                if uf.find(i) != uf.find(j) && jaccard(set(i), set(j)) >= params.threshold {
                    verified += 1;
                    uf.union(i, j);
                }
            }
            near = Some(NearDetails {
                shingle_width: params.shingle_width,
                permutations: params.permutations,
                threshold: params.threshold,
                seed: params.seed,
                exhaustive: params.exhaustive,
                bands,
                rows,
                candidate_pairs,
                verified_pairs: verified,
                short_records: (n - with_sets.len()) as u64,
            });
        }
        let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for i in 0..n {
            groups.entry(uf.find(i)).or_default().push(self.entries[i].id.clone());
        }
        let mut clusters: Vec<Vec<String>> = groups.into_values().filter(|g| g.len() > 1).collect();
        for c in &mut clusters {
            c.sort();
        }
        clusters.sort();
        let duplicates: u64 = clusters.iter().map(|c| c.len() as u64 - 1).sum();
        DuplicateReport {
            mode: params.mode,
            records_scanned: n as u64,
            duplicates,
            proportion: if n > 0 {
                Some(duplicates as f64 / n as f64)
            } else {
                None
            },
            clusters,
            near,
        }
    }
}

impl Mergeable for DuplicateAcc {
    fn merge(&mut self, other: Self) {
        self.entries.extend(other.entries);
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    // The smaller root wins, so roots (and thus cluster order) depend only
    // on the id-sorted entry order.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearDetails {
    pub shingle_width: usize,
    pub permutations: usize,
    pub threshold: f64,
    pub seed: u64,
    pub exhaustive: bool,
    pub bands: usize,
    pub rows: usize,
    pub candidate_pairs: usize,
    pub verified_pairs: usize,
    /// Records shorter than one shingle, matched by exact digest only.
    pub short_records: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DuplicateReport {
    pub mode: DuplicateMode,
    /// Each cluster lists its ids in ascending order; clusters are disjoint.
    pub clusters: Vec<Vec<String>>,
    pub records_scanned: u64,
    /// Sum over clusters of (size - 1).
    pub duplicates: u64,
    pub proportion: Option<f64>,
    pub near: Option<NearDetails>,
}

impl DuplicateReport {
    /// Every cluster member except the lowest id.
    pub fn removable_ids(&self) -> impl Iterator<Item = &str> {
        self.clusters.iter().flat_map(|c| c[1..].iter().map(String::as_str))
    }
}

pub fn duplicate_report<'a>(
    corpus: impl IntoIterator<Item = &'a Observed>,
    params: &DuplicateParams,
    policy: &TokenizationPolicy,
) -> Result<DuplicateReport> {
    params.validate()?;
    let mut acc = DuplicateAcc::default();
    for obs in corpus {
        acc.observe(obs, params, policy);
    }
    Ok(acc.finish(params))
}
