//! Human × content associations: top co-occurring tokens, disaggregated
//! tables and lift flags.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::aggregate::{Counts, Mergeable, Observed};
use crate::content::{bin_index, bin_label, validate_edges, BoolRule};
use crate::corpus::TokenizationPolicy;
use crate::error::{Error, Result};
use crate::lexicon::{LexiconKind, TermHit, TermMatcher};
use crate::signals::{SignalKind, SignalPayload};

pub const DEFAULT_LIFT: f64 = 2.0;
pub const DEFAULT_SUPPORT: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyOrigin {
    TermAxisGroup,
    InferredSignalLabel,
}

/// A fully qualified group: where it comes from, the axis or signal name,
/// and the group or label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub origin: KeyOrigin,
    pub name: String,
    pub value: String,
}

impl GroupKey {
    pub fn term(axis: &str, group: &str) -> Self {
        GroupKey {
            origin: KeyOrigin::TermAxisGroup,
            name: axis.to_owned(),
            value: group.to_owned(),
        }
    }

    pub fn signal(name: &str, label: &str) -> Self {
        GroupKey {
            origin: KeyOrigin::InferredSignalLabel,
            name: name.to_owned(),
            value: label.to_owned(),
        }
    }
}

/// Where the human side of an association comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum GroupSource {
    /// Identity groups of one lexicon axis.
    TermAxis { axis: String },
    /// Labels of a categorical signal, or of a spans signal's spans.
    Signal { signal: String },
}

impl GroupSource {
    pub fn validate(
        &self,
        matcher: Option<&TermMatcher>,
        signal_kind: impl Fn(&str) -> Option<SignalKind>,
    ) -> Result<()> {
        match self {
            GroupSource::TermAxis { axis } => {
                let known = matcher.is_some_and(|m| m.axes(LexiconKind::Identity).contains(axis));
                if known {
                    Ok(())
                } else {
                    Err(Error::UnknownAxis(axis.clone()))
                }
            }
            GroupSource::Signal { signal } => match signal_kind(signal) {
                None => Err(Error::UnknownSignal(signal.clone())),
                Some(SignalKind::Categorical | SignalKind::Spans) => Ok(()),
                Some(k) => Err(Error::SignalKind {
                    signal: signal.clone(),
                    expected: "categorical or spans".into(),
                    actual: k.to_string(),
                }),
            },
        }
    }

    /// Group keys carried by a record, or `None` when the signal is missing.
    pub fn keys(&self, obs: &Observed) -> Option<BTreeSet<GroupKey>> {
        match self {
            GroupSource::TermAxis { axis } => Some(
                identity_hits(obs, axis)
                    .map(|h| GroupKey::term(axis, &h.group))
                    .collect(),
            ),
            GroupSource::Signal { signal } => {
                signal_labels(obs, signal).map(|ls| ls.into_iter().map(|l| GroupKey::signal(signal, &l)).collect())
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            GroupSource::TermAxis { axis } => format!("term axis `{axis}`"),
            GroupSource::Signal { signal } => format!("signal `{signal}`"),
        }
    }
}

fn identity_hits<'a>(obs: &'a Observed, axis: &'a str) -> impl Iterator<Item = &'a TermHit> {
    obs.hits
        .iter()
        .filter(move |h| h.kind == LexiconKind::Identity && &*h.axis == axis)
}

fn signal_labels(obs: &Observed, signal: &str) -> Option<BTreeSet<String>> {
    match obs.signals.get(signal)? {
        SignalPayload::Categorical { label, .. } => Some(BTreeSet::from([label.clone()])),
        SignalPayload::Spans { spans } => Some(spans.iter().map(|s| s.label.clone()).collect()),
        _ => None,
    }
}

/// Parses a stopword list: one word per line, `#` starts a comment line.
/// Words are folded with `policy`.
pub fn parse_stopwords(text: &str, policy: &TokenizationPolicy) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|w| policy.fold(w))
        .collect()
}

/// The bundled English function-word list.
pub fn bundled_stopwords(policy: &TokenizationPolicy) -> BTreeSet<String> {
    parse_stopwords(include_str!("../resources/stopwords_en.txt"), policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ranking {
    #[default]
    Count,
    Pmi,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CooccurrenceConfig {
    pub source: GroupSource,
    pub k: usize,
    pub ranking: Ranking,
    pub stopwords: BTreeSet<String>,
    pub min_count: u64,
    /// Count a token only within this many tokens of a group hit (term
    /// axes only); otherwise anywhere in the record.
    pub window: Option<usize>,
}

impl CooccurrenceConfig {
    pub fn new(source: GroupSource) -> Self {
        CooccurrenceConfig {
            source,
            k: 20,
            ranking: Ranking::Count,
            stopwords: BTreeSet::new(),
            min_count: 1,
            window: None,
        }
    }
}

/// `log2(c(g,t)·T / (c(g)·c(t)))`.
pub fn pmi(joint: u64, total: u64, group: u64, token: u64) -> f64 {
    ((joint as f64 * total as f64) / (group as f64 * token as f64)).log2()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CooccurrenceAcc {
    records: u64,
    missing: u64,
    token_records: Counts<String>,
    group_records: Counts<GroupKey>,
    joint: Counts<(GroupKey, String)>,
}

impl CooccurrenceAcc {
    /// `triggers` maps each group to the tokens of its own terms.
    pub fn observe(&mut self, obs: &Observed, cfg: &CooccurrenceConfig, triggers: &BTreeMap<String, BTreeSet<String>>) {
        self.records += 1;
        let tokens: BTreeSet<&str> = obs
            .tokens
            .iter()
            .map(|t| t.text.as_str())
            .filter(|t| !cfg.stopwords.contains(*t))
            .collect();
        for t in &tokens {
            self.token_records.bump((*t).to_owned());
        }
        let Some(keys) = cfg.source.keys(obs) else {
            self.missing += 1;
            return;
        };
        for key in keys {
            let own = triggers.get(&key.value);
            let near: Option<HashSet<&str>> = match (&cfg.source, cfg.window) {
                (GroupSource::TermAxis { axis }, Some(n)) => Some(
                    identity_hits(obs, axis)
                        .filter(|h| *h.group == *key.value)
                        .flat_map(|h| {
                            let lo = h.tokens.start.saturating_sub(n);
                            let hi = (h.tokens.end + n).min(obs.tokens.len());
                            obs.tokens[lo..hi].iter().map(|t| t.text.as_str())
                        })
                        .collect(),
                ),
                _ => None,
            };
            for t in &tokens {
                if own.is_some_and(|o| o.contains(*t)) || near.as_ref().is_some_and(|n| !n.contains(t)) {
                    continue;
                }
                self.joint.bump((key.clone(), (*t).to_owned()));
            }
            self.group_records.bump(key);
        }
    }

    pub fn finish(self, cfg: &CooccurrenceConfig) -> Cooccurrences {
        let total = self.records;
        let mut groups: BTreeMap<String, GroupTokens> = BTreeMap::new();
        for (key, g_count) in self.group_records.iter() {
            let mut tokens: Vec<TokenScore> = self
                .joint
                .0
                .range((key.clone(), String::new())..)
                .take_while(|((k, _), _)| k == key)
                .filter(|(_, c)| **c >= cfg.min_count)
                .map(|((_, t), &c)| TokenScore {
                    token: t.clone(),
                    count: c,
                    pmi: pmi(c, total, g_count, self.token_records.get(t)),
                })
                .collect();
            match cfg.ranking {
                Ranking::Count => tokens.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.token.cmp(&b.token))),
                Ranking::Pmi => tokens.sort_by(|a, b| b.pmi.total_cmp(&a.pmi).then_with(|| a.token.cmp(&b.token))),
            }
            tokens.truncate(cfg.k);
            groups.insert(
                key.value.clone(),
                GroupTokens {
                    key: key.clone(),
                    records: g_count,
                    tokens,
                },
            );
        }
        Cooccurrences {
            source: cfg.source.clone(),
            ranking: cfg.ranking,
            k: cfg.k,
            min_count: cfg.min_count,
            window: cfg.window,
            records_scanned: total,
            n_missing: self.missing,
            groups,
        }
    }
}

impl Mergeable for CooccurrenceAcc {
    fn merge(&mut self, other: Self) {
        self.records += other.records;
        self.missing += other.missing;
        self.token_records.merge(other.token_records);
        self.group_records.merge(other.group_records);
        self.joint.merge(other.joint);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenScore {
    pub token: String,
    /// Records containing both the group and the token.
    pub count: u64,
    pub pmi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupTokens {
    pub key: GroupKey,
    pub records: u64,
    pub tokens: Vec<TokenScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cooccurrences {
    pub source: GroupSource,
    pub ranking: Ranking,
    pub k: usize,
    pub min_count: u64,
    pub window: Option<usize>,
    pub records_scanned: u64,
    /// Records lacking the group signal.
    pub n_missing: u64,
    pub groups: BTreeMap<String, GroupTokens>,
}

/// Trigger tokens per group for a group source (empty for signals).
pub fn group_triggers(source: &GroupSource, matcher: Option<&TermMatcher>) -> BTreeMap<String, BTreeSet<String>> {
    match (source, matcher) {
        (GroupSource::TermAxis { axis }, Some(m)) => m.trigger_tokens(LexiconKind::Identity, axis),
        _ => BTreeMap::new(),
    }
}

pub fn top_cooccurrences<'a>(
    corpus: impl IntoIterator<Item = &'a Observed>,
    matcher: Option<&TermMatcher>,
    signal_kind: impl Fn(&str) -> Option<SignalKind>,
    cfg: &CooccurrenceConfig,
) -> Result<Cooccurrences> {
    cfg.source.validate(matcher, signal_kind)?;
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let triggers = group_triggers(&cfg.source, matcher);
    let mut acc = CooccurrenceAcc::default();
    for obs in corpus {
        acc.observe(obs, cfg, &triggers);
    }
    Ok(acc.finish(cfg))
}

/// Where the content side of a table comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum ContentSource {
    Categorical {
        signal: String,
    },
    /// Scalar scores binned with the given edges.
    BinnedScalar {
        signal: String,
        edges: Vec<f64>,
    },
    /// `true` / `false` per record; scalar signals need a threshold.
    Boolean {
        signal: String,
        #[serde(default)]
        threshold: Option<f64>,
    },
    /// Groups of a lexicon axis found in the record.
    TermAxis {
        axis: String,
    },
    /// Distinct span labels of a spans signal.
    SpanLabels {
        signal: String,
    },
}

impl ContentSource {
    pub fn signal(&self) -> Option<&str> {
        match self {
            ContentSource::Categorical { signal }
            | ContentSource::BinnedScalar { signal, .. }
            | ContentSource::Boolean { signal, .. }
            | ContentSource::SpanLabels { signal } => Some(signal),
            ContentSource::TermAxis { .. } => None,
        }
    }

    pub fn validate(
        &self,
        matcher: Option<&TermMatcher>,
        signal_kind: impl Fn(&str) -> Option<SignalKind>,
    ) -> Result<()> {
        let need = |signal: &str, want: &[SignalKind]| -> Result<SignalKind> {
            let k = signal_kind(signal).ok_or_else(|| Error::UnknownSignal(signal.to_owned()))?;
            if want.contains(&k) {
                Ok(k)
            } else {
                Err(Error::SignalKind {
                    signal: signal.to_owned(),
                    expected: want.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(" or "),
                    actual: k.to_string(),
                })
            }
        };
        match self {
            ContentSource::Categorical { signal } => need(signal, &[SignalKind::Categorical]).map(drop),
            ContentSource::BinnedScalar { signal, edges } => {
                need(signal, &[SignalKind::Scalar01])?;
                validate_edges(edges)
            }
            ContentSource::Boolean { signal, threshold } => {
                let k = need(signal, &[SignalKind::Boolean, SignalKind::Scalar01, SignalKind::Count])?;
                BoolRule::for_kind(signal, k, *threshold).map(drop)
            }
            ContentSource::SpanLabels { signal } => need(signal, &[SignalKind::Spans]).map(drop),
            ContentSource::TermAxis { axis } => {
                if matcher.is_some_and(|m| m.has_axis(axis)) {
                    Ok(())
                } else {
                    Err(Error::UnknownAxis(axis.clone()))
                }
            }
        }
    }

    /// Content categories of a record, or `None` when its signal is missing.
    pub fn categories(&self, obs: &Observed) -> Option<BTreeSet<String>> {
        match self {
            ContentSource::Categorical { signal } => obs
                .signals
                .get(signal)
                .and_then(SignalPayload::label)
                .map(|l| BTreeSet::from([l.to_owned()])),
            ContentSource::BinnedScalar { signal, edges } => obs
                .signals
                .get(signal)
                .and_then(SignalPayload::score)
                .map(|s| BTreeSet::from([bin_label(edges, bin_index(edges, s))])),
            ContentSource::Boolean { signal, threshold } => {
                let p = obs.signals.get(signal)?;
                let rule = BoolRule::for_kind(signal, p.kind(), *threshold).ok()?;
                rule.apply(p).map(|v| BTreeSet::from([v.to_string()]))
            }
            ContentSource::SpanLabels { signal } => match obs.signals.get(signal)? {
                SignalPayload::Spans { spans } => Some(spans.iter().map(|s| s.label.clone()).collect()),
                _ => None,
            },
            ContentSource::TermAxis { axis } => Some(
                obs.hits
                    .iter()
                    .filter(|h| &*h.axis == axis)
                    .map(|h| h.group.to_string())
                    .collect(),
            ),
        }
    }

    /// Column order: bin order for binned scores, otherwise sorted labels.
    fn order_columns(&self, mut cols: Vec<String>) -> Vec<String> {
        if let ContentSource::BinnedScalar { edges, .. } = self {
            let all: Vec<String> = (0..edges.len() - 1).map(|i| bin_label(edges, i)).collect();
            return all;
        }
        if let ContentSource::Boolean { .. } = self {
            return vec!["false".into(), "true".into()];
        }
        cols.sort();
        cols
    }

    pub fn describe(&self) -> String {
        match self {
            ContentSource::Categorical { signal } => format!("signal `{signal}`"),
            ContentSource::BinnedScalar { signal, .. } => format!("binned signal `{signal}`"),
            ContentSource::Boolean {
                signal,
                threshold: Some(t),
            } => format!("signal `{signal}` >= {t}"),
            ContentSource::Boolean {
                signal,
                threshold: None,
            } => format!("signal `{signal}`"),
            ContentSource::TermAxis { axis } => format!("term axis `{axis}`"),
            ContentSource::SpanLabels { signal } => format!("span labels of `{signal}`"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableAcc {
    cells: Counts<(GroupKey, String)>,
    rows: Counts<GroupKey>,
    columns: Counts<String>,
    grand: u64,
    missing_human: u64,
    missing_content: u64,
}

impl TableAcc {
    pub fn observe(&mut self, obs: &Observed, human: &GroupSource, content: &ContentSource) {
        let Some(keys) = human.keys(obs) else {
            self.missing_human += 1;
            return;
        };
        if keys.is_empty() {
            return;
        }
        let Some(cats) = content.categories(obs) else {
            self.missing_content += 1;
            return;
        };
        self.grand += 1;
        for c in &cats {
            self.columns.bump(c.clone());
        }
        for k in keys {
            for c in &cats {
                self.cells.bump((k.clone(), c.clone()));
            }
            self.rows.bump(k);
        }
    }

    pub fn finish(self, human: &GroupSource, content: &ContentSource) -> DisaggregatedTable {
        let rows: Vec<GroupKey> = self.rows.0.keys().cloned().collect();
        let columns = content.order_columns(self.columns.0.keys().cloned().collect());
        let cells = rows
            .iter()
            .map(|r| {
                columns
                    .iter()
                    .map(|c| self.cells.get(&(r.clone(), c.clone())))
                    .collect()
            })
            .collect();
        DisaggregatedTable {
            human: human.clone(),
            content: content.clone(),
            row_totals: rows.iter().map(|r| self.rows.get(r)).collect(),
            column_totals: columns.iter().map(|c| self.columns.get(c)).collect(),
            rows,
            columns,
            cells,
            grand_total: self.grand,
            n_missing_human: self.missing_human,
            n_missing_content: self.missing_content,
        }
    }
}

impl Mergeable for TableAcc {
    fn merge(&mut self, other: Self) {
        self.cells.merge(other.cells);
        self.rows.merge(other.rows);
        self.columns.merge(other.columns);
        self.grand += other.grand;
        self.missing_human += other.missing_human;
        self.missing_content += other.missing_content;
    }
}

/// Group × content record counts. Only records carrying at least one group
/// key and a non-missing content value are tabulated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisaggregatedTable {
    pub human: GroupSource,
    pub content: ContentSource,
    pub rows: Vec<GroupKey>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<u64>>,
    pub row_totals: Vec<u64>,
    pub column_totals: Vec<u64>,
    pub grand_total: u64,
    pub n_missing_human: u64,
    pub n_missing_content: u64,
}

impl DisaggregatedTable {
    pub fn cell(&self, row: &GroupKey, column: &str) -> u64 {
        match (
            self.rows.iter().position(|r| r == row),
            self.columns.iter().position(|c| c == column),
        ) {
            (Some(i), Some(j)) => self.cells[i][j],
            _ => 0,
        }
    }

    pub fn row_total(&self, row: &GroupKey) -> u64 {
        self.rows
            .iter()
            .position(|r| r == row)
            .map_or(0, |i| self.row_totals[i])
    }
}

pub fn disaggregate<'a>(
    corpus: impl IntoIterator<Item = &'a Observed>,
    matcher: Option<&TermMatcher>,
    signal_kind: impl Fn(&str) -> Option<SignalKind> + Copy,
    human: &GroupSource,
    content: &ContentSource,
) -> Result<DisaggregatedTable> {
    human.validate(matcher, signal_kind)?;
    content.validate(matcher, signal_kind)?;
    let mut acc = TableAcc::default();
    for obs in corpus {
        acc.observe(obs, human, content);
    }
    Ok(acc.finish(human, content))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationFlag {
    pub group: GroupKey,
    pub category: String,
    /// Records carrying both.
    pub support: u64,
    pub lift: f64,
    pub flagged: bool,
}

/// `P(category | group) / P(category)` for every non-empty cell, highest
/// lift first. A cell is flagged when `lift >= min_lift` and
/// `support >= min_support`.
pub fn association_lift(table: &DisaggregatedTable, min_lift: f64, min_support: u64) -> Vec<AssociationFlag> {
    if table.grand_total == 0 {
        return Vec::new();
    }
    let grand = table.grand_total as f64;
    let mut out = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        for (j, col) in table.columns.iter().enumerate() {
            let support = table.cells[i][j];
            if support == 0 {
                continue;
            }
            let lift = (support as f64 / table.row_totals[i] as f64) / (table.column_totals[j] as f64 / grand);
            out.push(AssociationFlag {
                group: row.clone(),
                category: col.clone(),
                support,
                lift,
                flagged: lift >= min_lift && support >= min_support,
            });
        }
    }
    out.sort_by(|a, b| {
        b.lift
            .total_cmp(&a.lift)
            .then_with(|| a.group.cmp(&b.group))
            .then_with(|| a.category.cmp(&b.category))
    });
    out
}
