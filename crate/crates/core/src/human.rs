//! Who is in the data: identity terms, pronouns, hateful terms and PII.

use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::aggregate::{Counts, Mergeable, Observed};
use crate::content::Proportion;
use crate::error::{Error, Result};
use crate::lexicon::{LexiconKind, TermHit, TermMatcher};
use crate::signals::{builtin_pii_scan, SignalPayload};

/// Labelled counts with derived proportions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Distribution {
    categories: Vec<(String, u64)>,
    total: u64,
}

impl Distribution {
    /// Builds a distribution ordered by count descending, then label.
    pub fn from_counts<S: Into<String>>(counts: impl IntoIterator<Item = (S, u64)>) -> Self {
        let mut merged: BTreeMap<String, u64> = BTreeMap::new();
        for (label, n) in counts {
            *merged.entry(label.into()).or_default() += n;
        }
        let mut categories: Vec<(String, u64)> = merged.into_iter().collect();
        categories.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let total = categories.iter().map(|c| c.1).sum();
        Distribution { categories, total }
    }

    /// Like `from_counts`, but every label in `labels` appears even when
    /// its count is zero.
    pub fn with_labels<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        counts: impl IntoIterator<Item = (S, u64)>,
    ) -> Self {
        Distribution::from_counts(labels.into_iter().map(|l| (l, 0)).chain(counts))
    }

    pub fn categories(&self) -> &[(String, u64)] {
        &self.categories
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, label: &str) -> u64 {
        self.categories.iter().find(|(l, _)| l == label).map_or(0, |(_, n)| *n)
    }

    pub fn proportion(&self, label: &str) -> Option<f64> {
        (self.total > 0).then(|| self.count(label) as f64 / self.total as f64)
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

#[derive(Serialize)]
struct CategoryOut<'a> {
    label: &'a str,
    count: u64,
    proportion: Option<f64>,
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let cats: Vec<CategoryOut> = self
            .categories
            .iter()
            .map(|(label, count)| CategoryOut {
                label,
                count: *count,
                proportion: (self.total > 0).then(|| *count as f64 / self.total as f64),
            })
            .collect();
        let mut st = s.serialize_struct("Distribution", 2)?;
        st.serialize_field("categories", &cats)?;
        st.serialize_field("total", &self.total)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GroupRef {
    pub axis: String,
    pub group: String,
}

/// Records containing hits from every listed group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntersectionCount {
    pub groups: Vec<GroupRef>,
    pub count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IdentityConfig {
    /// Axis pairs to intersect.
    pub intersections: Vec<(String, String)>,
    /// When set, two groups intersect only if their hits lie within this
    /// many tokens of each other; otherwise anywhere in the record.
    pub window: Option<usize>,
}

impl IdentityConfig {
    pub fn validate(&self, matcher: &TermMatcher) -> Result<()> {
        if !matcher.has_kind(LexiconKind::Identity) {
            return Err(Error::MissingLexicon("identity"));
        }
        let axes = matcher.axes(LexiconKind::Identity);
        for (a, b) in &self.intersections {
            for axis in [a, b] {
                if !axes.contains(axis) {
                    return Err(Error::UnknownAxis(axis.clone()));
                }
            }
            if a == b {
                return Err(Error::InvalidParameter(format!(
                    "intersection needs two distinct axes, got `{a}` twice"
                )));
            }
        }
        Ok(())
    }
}

/// Tokens between two hits; zero when they touch or overlap.
fn token_gap(a: &TermHit, b: &TermHit) -> usize {
    if a.tokens.end <= b.tokens.start {
        b.tokens.start - a.tokens.end
    } else {
        a.tokens.start.saturating_sub(b.tokens.end)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityAcc {
    records: u64,
    groups: Counts<(String, String)>,
    terms: Counts<(String, String, String)>,
    pairs: Counts<(GroupRef, GroupRef)>,
}

impl IdentityAcc {
    pub fn observe(&mut self, obs: &Observed, cfg: &IdentityConfig) {
        self.records += 1;
        let hits: Vec<&TermHit> = obs.hits.iter().filter(|h| h.kind == LexiconKind::Identity).collect();
        let mut present: BTreeSet<(&str, &str)> = BTreeSet::new();
        for h in &hits {
            self.terms
                .bump((h.axis.to_string(), h.group.to_string(), h.term.to_string()));
            present.insert((&h.axis, &h.group));
        }
        for (axis, group) in &present {
            self.groups.bump((axis.to_string(), group.to_string()));
        }
        for (a, b) in &cfg.intersections {
            for &(axis_a, ga) in present.iter().filter(|(x, _)| x == a) {
                for &(axis_b, gb) in present.iter().filter(|(x, _)| x == b) {
                    let near = cfg.window.is_none_or(|n| {
                        hits.iter().filter(|h| &*h.axis == axis_a && &*h.group == ga).any(|ha| {
                            hits.iter()
                                .filter(|h| &*h.axis == axis_b && &*h.group == gb)
                                .any(|hb| token_gap(ha, hb) <= n)
                        })
                    });
                    if near {
                        self.pairs.bump((
                            GroupRef {
                                axis: axis_a.into(),
                                group: ga.into(),
                            },
                            GroupRef {
                                axis: axis_b.into(),
                                group: gb.into(),
                            },
                        ));
                    }
                }
            }
        }
    }

    /// Record count of one (axis, group).
    pub fn group_records(&self, axis: &str, group: &str) -> u64 {
        self.groups.get(&(axis.to_owned(), group.to_owned()))
    }

    pub fn finish(self, matcher: &TermMatcher, cfg: &IdentityConfig) -> IdentityStats {
        let mut axes = BTreeMap::new();
        for axis in matcher.axes(LexiconKind::Identity) {
            let counts = self
                .groups
                .iter()
                .filter(|((a, _), _)| *a == axis)
                .map(|((_, g), n)| (g.clone(), n));
            axes.insert(
                axis.clone(),
                Distribution::with_labels(matcher.groups(LexiconKind::Identity, &axis), counts),
            );
        }
        let mut axes_of_term: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for ((axis, _, term), _) in self.terms.iter() {
            axes_of_term.entry(term).or_default().insert(axis);
        }
        let terms = Distribution::from_counts(self.terms.iter().map(|((axis, _, term), n)| {
            let label = if axes_of_term[term.as_str()].len() > 1 {
                format!("{axis}:{term}")
            } else {
                term.clone()
            };
            (label, n)
        }));
        let mut intersections = Vec::new();
        for (a, b) in &cfg.intersections {
            for ga in matcher.groups(LexiconKind::Identity, a) {
                for gb in matcher.groups(LexiconKind::Identity, b) {
                    let key = (
                        GroupRef {
                            axis: a.clone(),
                            group: ga.clone(),
                        },
                        GroupRef {
                            axis: b.clone(),
                            group: gb,
                        },
                    );
                    let count = self.pairs.get(&key);
                    intersections.push(IntersectionCount {
                        groups: vec![key.0, key.1],
                        count,
                    });
                }
            }
        }
        IdentityStats {
            records_scanned: self.records,
            axes,
            terms,
            intersections,
            window: cfg.window,
        }
    }
}

impl Mergeable for IdentityAcc {
    fn merge(&mut self, other: Self) {
        self.records += other.records;
        self.groups.merge(other.groups);
        self.terms.merge(other.terms);
        self.pairs.merge(other.pairs);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityStats {
    pub records_scanned: u64,
    /// Per axis, records mentioning each group.
    pub axes: BTreeMap<String, Distribution>,
    /// Occurrences of each term.
    pub terms: Distribution,
    pub intersections: Vec<IntersectionCount>,
    pub window: Option<usize>,
}

impl IdentityStats {
    pub fn group_records(&self, axis: &str, group: &str) -> u64 {
        self.axes.get(axis).map_or(0, |d| d.count(group))
    }

    pub fn intersection(&self, a: (&str, &str), b: (&str, &str)) -> Option<u64> {
        self.intersections
            .iter()
            .find(|i| {
                i.groups.len() == 2
                    && i.groups[0].axis == a.0
                    && i.groups[0].group == a.1
                    && i.groups[1].axis == b.0
                    && i.groups[1].group == b.1
            })
            .map(|i| i.count)
    }
}

pub fn identity_term_stats<'a>(
    corpus: impl IntoIterator<Item = &'a Observed>,
    matcher: &TermMatcher,
    cfg: &IdentityConfig,
) -> Result<IdentityStats> {
    cfg.validate(matcher)?;
    let mut acc = IdentityAcc::default();
    for obs in corpus {
        acc.observe(obs, cfg);
    }
    Ok(acc.finish(matcher, cfg))
}

/// Occurrences of each group of one lexicon kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KindOccurrenceAcc {
    terms: Counts<(String, String)>,
}

impl KindOccurrenceAcc {
    pub fn observe(&mut self, obs: &Observed, kind: LexiconKind) {
        for h in obs.hits.iter().filter(|h| h.kind == kind) {
            self.terms.bump((h.group.to_string(), h.term.to_string()));
        }
    }

    pub fn finish_pronouns(self, matcher: &TermMatcher) -> Distribution {
        let labels: Vec<String> = matcher
            .axes(LexiconKind::Pronoun)
            .iter()
            .flat_map(|a| matcher.groups(LexiconKind::Pronoun, a))
            .collect();
        Distribution::with_labels(labels, self.terms.iter().map(|((g, _), n)| (g.clone(), n)))
    }

    pub fn finish_hateful(self) -> HatefulStats {
        let terms = Distribution::from_counts(self.terms.iter().map(|((_, t), n)| (t.clone(), n)));
        let by_group = Distribution::from_counts(self.terms.iter().map(|((g, _), n)| (g.clone(), n)));
        let mut detail: Vec<HatefulTermCount> = self
            .terms
            .iter()
            .map(|((g, t), n)| HatefulTermCount {
                term: t.clone(),
                referenced_group: g.clone(),
                count: n,
            })
            .collect();
        detail.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
        HatefulStats {
            terms,
            by_group,
            detail,
        }
    }
}

impl Mergeable for KindOccurrenceAcc {
    fn merge(&mut self, other: Self) {
        self.terms.merge(other.terms);
    }
}

pub fn pronoun_distribution<'a>(
    corpus: impl IntoIterator<Item = &'a Observed>,
    matcher: &TermMatcher,
) -> Result<Distribution> {
    if !matcher.has_kind(LexiconKind::Pronoun) {
        return Err(Error::MissingLexicon("pronoun"));
    }
    let mut acc = KindOccurrenceAcc::default();
    for obs in corpus {
        acc.observe(obs, LexiconKind::Pronoun);
    }
    Ok(acc.finish_pronouns(matcher))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HatefulTermCount {
    pub term: String,
    pub referenced_group: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HatefulStats {
    pub terms: Distribution,
    pub by_group: Distribution,
    pub detail: Vec<HatefulTermCount>,
}

impl HatefulStats {
    pub fn total(&self) -> u64 {
        self.terms.total()
    }
}

pub fn hateful_term_stats<'a>(
    corpus: impl IntoIterator<Item = &'a Observed>,
    matcher: &TermMatcher,
) -> Result<HatefulStats> {
    if !matcher.has_kind(LexiconKind::Hateful) {
        return Err(Error::MissingLexicon("hateful"));
    }
    let mut acc = KindOccurrenceAcc::default();
    for obs in corpus {
        acc.observe(obs, LexiconKind::Hateful);
    }
    Ok(acc.finish_hateful())
}

pub const DEFAULT_ID_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PiiConfig {
    /// Run the built-in pattern scanner.
    pub builtin: bool,
    /// Spans signal from a provider, merged with the built-in spans.
    pub signal: Option<String>,
    /// Maximum number of ids listed; the total is always reported.
    pub id_cap: usize,
}

impl Default for PiiConfig {
    fn default() -> Self {
        PiiConfig {
            builtin: true,
            signal: None,
            id_cap: DEFAULT_ID_CAP,
        }
    }
}

/// Distinct `(span, label)` detections for one record, or `None` when no
/// detector covered it.
pub fn pii_detections(obs: &Observed, cfg: &PiiConfig) -> Option<BTreeSet<(usize, usize, String)>> {
    let mut found = BTreeSet::new();
    let mut covered = false;
    if cfg.builtin {
        covered = true;
        if let Some(text) = &obs.record.text {
            for (span, label) in builtin_pii_scan(text) {
                found.insert((span.start, span.end, label.as_str().to_owned()));
            }
        }
    }
    if let Some(name) = &cfg.signal {
        if let Some(SignalPayload::Spans { spans }) = obs.signals.get(name) {
            covered = true;
            for s in spans {
                found.insert((s.span.start, s.span.end, s.label.clone()));
            }
        }
    }
    covered.then_some(found)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PiiAcc {
    assessed: u64,
    missing: u64,
    flagged: u64,
    labels: Counts<String>,
    ids: BTreeSet<String>,
    cap: usize,
}

impl PiiAcc {
    pub fn new(cfg: &PiiConfig) -> Self {
        PiiAcc {
            cap: cfg.id_cap,
            ..Default::default()
        }
    }

    pub fn observe(&mut self, obs: &Observed, cfg: &PiiConfig) {
        self.cap = cfg.id_cap;
        let Some(found) = pii_detections(obs, cfg) else {
            self.missing += 1;
            return;
        };
        self.assessed += 1;
        if found.is_empty() {
            return;
        }
        self.flagged += 1;
        for (_, _, label) in found {
            self.labels.bump(label);
        }
        self.ids.insert(obs.record.id.clone());
        self.trim();
    }

    // Keeping the smallest ids makes the capped list independent of shard
    // layout.
    fn trim(&mut self) {
        while self.ids.len() > self.cap {
            self.ids.pop_last();
        }
    }

    pub fn finish(self) -> PiiPresence {
        PiiPresence {
            proportion: Proportion::new(self.flagged, self.assessed, self.missing),
            labels: self.labels.0,
            ids: self.ids.into_iter().collect(),
            ids_total: self.flagged,
        }
    }
}

impl Mergeable for PiiAcc {
    fn merge(&mut self, other: Self) {
        self.assessed += other.assessed;
        self.missing += other.missing;
        self.flagged += other.flagged;
        self.labels.merge(other.labels);
        self.cap = self.cap.max(other.cap);
        self.ids.extend(other.ids);
        self.trim();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiiPresence {
    pub proportion: Proportion,
    /// Detections per label; a record with two labels counts under both.
    pub labels: BTreeMap<String, u64>,
    /// Lowest flagged ids, up to the configured cap.
    pub ids: Vec<String>,
    pub ids_total: u64,
}

pub fn pii_presence<'a>(corpus: impl IntoIterator<Item = &'a Observed>, cfg: &PiiConfig) -> PiiPresence {
    let mut acc = PiiAcc::new(cfg);
    for obs in corpus {
        acc.observe(obs, cfg);
    }
    acc.finish()
}
