//! Source domains, ccTLD geography and publication years.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::LazyLock;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime};
use serde::Serialize;

use crate::aggregate::{Counts, Mergeable, Observed};
use crate::corpus::Record;
use crate::human::Distribution;

const SUFFIX_SNAPSHOT: &str = include_str!("../../resources/public_suffix.txt");
const CCTLD_TABLE: &str = include_str!("../../resources/cctld.tsv");

pub const UNATTRIBUTED: &str = "unattributed";
pub const UNKNOWN: &str = "unknown";

/// Public suffix rules in the usual list syntax.
#[derive(Debug, Clone, Default)]
pub struct SuffixList {
    rules: HashSet<String>,
    wildcards: HashSet<String>,
    exceptions: HashSet<String>,
}

impl SuffixList {
    pub fn parse(text: &str) -> Self {
        let mut list = SuffixList::default();
        for line in text.lines() {
            let rule = line.split_whitespace().next().unwrap_or("");
            if rule.is_empty() || rule.starts_with("//") {
                continue;
            }
            let rule = rule.to_lowercase();
            if let Some(rest) = rule.strip_prefix('!') {
                list.exceptions.insert(rest.to_owned());
            } else if let Some(rest) = rule.strip_prefix("*.") {
                list.wildcards.insert(rest.to_owned());
            } else {
                list.rules.insert(rule);
            }
        }
        list
    }

    /// The bundled snapshot.
    pub fn bundled() -> &'static SuffixList {
        static LIST: LazyLock<SuffixList> = LazyLock::new(|| SuffixList::parse(SUFFIX_SNAPSHOT));
        &LIST
    }

    /// Number of trailing labels forming the public suffix. Unlisted TLDs
    /// count as a one-label suffix.
    fn suffix_labels(&self, labels: &[&str]) -> usize {
        let n = labels.len();
        for i in 0..n {
            let cand = labels[i..].join(".");
            if self.exceptions.contains(&cand) {
                return n - i - 1;
            }
            let wild = i + 1 < n && self.wildcards.contains(&labels[i + 1..].join("."));
            if self.rules.contains(&cand) || wild {
                return n - i;
            }
        }
        1
    }

    pub fn public_suffix(&self, host: &str) -> Option<String> {
        let host = host.trim_end_matches('.').to_lowercase();
        let labels: Vec<&str> = host.split('.').collect();
        if labels.iter().any(|l| l.is_empty()) {
            return None;
        }
        let k = self.suffix_labels(&labels);
        Some(labels[labels.len() - k..].join("."))
    }

    /// The suffix plus one label, e.g. `bbc.co.uk` for `news.bbc.co.uk`.
    /// `None` when the host is itself a public suffix.
    pub fn registrable_domain(&self, host: &str) -> Option<String> {
        let host = host.trim_end_matches('.').to_lowercase();
        let labels: Vec<&str> = host.split('.').collect();
        if labels.iter().any(|l| l.is_empty()) {
            return None;
        }
        let k = self.suffix_labels(&labels);
        (labels.len() > k).then(|| labels[labels.len() - k - 1..].join("."))
    }
}

/// Host of a URL; bare hosts such as `example.org/page` are accepted.
/// IP literals have no domain and yield `None`.
pub fn url_host(raw: &str) -> Option<String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    let parsed = url::Url::parse(raw)
        .ok()
        .filter(|u| u.host().is_some())
        .or_else(|| url::Url::parse(&format!("http://{raw}")).ok())?;
    match parsed.host()? {
        url::Host::Domain(d) => Some(d.to_lowercase()),
        _ => None,
    }
}

pub fn source_domain(record: &Record) -> Option<String> {
    SuffixList::bundled().registrable_domain(&url_host(record.url()?)?)
}

static CCTLDS: LazyLock<HashMap<String, String>> = LazyLock::new(|| {
    CCTLD_TABLE
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('\t'))
        .map(|(t, n)| (t.trim().to_lowercase(), n.trim().to_owned()))
        .collect()
});

/// Country or region for a domain's TLD, `unattributed` for generic TLDs.
pub fn country_of(domain: &str) -> &str {
    let tld = domain.rsplit('.').next().unwrap_or("");
    CCTLDS.get(tld).map_or(UNATTRIBUTED, String::as_str)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DomainStats {
    pub domain: String,
    pub records: u64,
    pub tokens: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourcesAcc {
    domains: BTreeMap<String, (u64, u64)>,
    missing_records: u64,
    missing_tokens: u64,
}

impl SourcesAcc {
    pub fn observe(&mut self, obs: &Observed) {
        let tokens = obs.tokens.len() as u64;
        match source_domain(&obs.record) {
            Some(d) => {
                let e = self.domains.entry(d).or_default();
                e.0 += 1;
                e.1 += tokens;
            }
            None => {
                self.missing_records += 1;
                self.missing_tokens += tokens;
            }
        }
    }

    pub fn finish(self, k: usize) -> TopSources {
        let mut ranked: Vec<DomainStats> = self
            .domains
            .into_iter()
            .map(|(domain, (records, tokens))| DomainStats {
                domain,
                records,
                tokens,
            })
            .collect();
        let domains_total = ranked.len();
        let tokens_attributed = ranked.iter().map(|d| d.tokens).sum();
        ranked.sort_by(|a, b| b.tokens.cmp(&a.tokens).then_with(|| a.domain.cmp(&b.domain)));
        ranked.truncate(k);
        TopSources {
            ranked,
            domains_total,
            tokens_attributed,
            missing_records: self.missing_records,
            missing_tokens: self.missing_tokens,
        }
    }
}

impl Mergeable for SourcesAcc {
    fn merge(&mut self, other: Self) {
        for (d, (r, t)) in other.domains {
            let e = self.domains.entry(d).or_default();
            e.0 += r;
            e.1 += t;
        }
        self.missing_records += other.missing_records;
        self.missing_tokens += other.missing_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopSources {
    /// Highest token counts first, ties by domain.
    pub ranked: Vec<DomainStats>,
    pub domains_total: usize,
    pub tokens_attributed: u64,
    /// Records without a usable URL.
    pub missing_records: u64,
    pub missing_tokens: u64,
}

pub fn top_sources<'a>(corpus: impl IntoIterator<Item = &'a Observed>, k: usize) -> TopSources {
    let mut acc = SourcesAcc::default();
    for obs in corpus {
        acc.observe(obs);
    }
    acc.finish(k)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeographyAcc {
    records: Counts<String>,
    tokens: Counts<String>,
}

impl GeographyAcc {
    pub fn observe(&mut self, obs: &Observed) {
        let label = match source_domain(&obs.record) {
            Some(d) => country_of(&d).to_owned(),
            None => UNKNOWN.to_owned(),
        };
        self.tokens.add(label.clone(), obs.tokens.len() as u64);
        self.records.bump(label);
    }

    pub fn finish(self) -> GeographicSpread {
        GeographicSpread {
            records: Distribution::from_counts(self.records.0),
            tokens: Distribution::from_counts(self.tokens.0),
        }
    }
}

impl Mergeable for GeographyAcc {
    fn merge(&mut self, other: Self) {
        self.records.merge(other.records);
        self.tokens.merge(other.tokens);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeographicSpread {
    /// Records per country; `unattributed` for generic TLDs and `unknown`
    /// when there is no usable URL.
    pub records: Distribution,
    /// Same buckets weighted by token count.
    pub tokens: Distribution,
}

pub fn geographic_spread<'a>(corpus: impl IntoIterator<Item = &'a Observed>) -> GeographicSpread {
    let mut acc = GeographyAcc::default();
    for obs in corpus {
        acc.observe(obs);
    }
    acc.finish()
}

/// Year of an ISO-8601 date or date-time.
pub fn timestamp_year(ts: &str) -> Option<i32> {
    let ts = ts.trim();
    if let Ok(d) = NaiveDate::parse_from_str(ts, "%Y-%m-%d") {
        return Some(d.year());
    }
    if let Ok(d) = DateTime::parse_from_rfc3339(ts) {
        return Some(d.year());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(ts, f).ok())
        .map(|d| d.year())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PublicationAcc {
    years: Counts<i32>,
    missing: u64,
}

impl PublicationAcc {
    pub fn observe(&mut self, obs: &Observed) {
        match obs.record.timestamp().and_then(timestamp_year) {
            Some(y) => self.years.bump(y),
            None => self.missing += 1,
        }
    }

    pub fn finish(self) -> PublicationHistogram {
        PublicationHistogram {
            years: self.years.0,
            missing: self.missing,
        }
    }
}

impl Mergeable for PublicationAcc {
    fn merge(&mut self, other: Self) {
        self.years.merge(other.years);
        self.missing += other.missing;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublicationHistogram {
    pub years: BTreeMap<i32, u64>,
    /// Records with an absent or unparseable timestamp.
    pub missing: u64,
}

pub fn publication_histogram<'a>(corpus: impl IntoIterator<Item = &'a Observed>) -> PublicationHistogram {
    let mut acc = PublicationAcc::default();
    for obs in corpus {
        acc.observe(obs);
    }
    acc.finish()
}
