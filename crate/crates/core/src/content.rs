//! What is in the data: histograms, categorical distributions and
//! proportions over inferred signals.

use serde::Serialize;

use crate::aggregate::{Counts, Mergeable, Observed};
use crate::error::{Error, Result};
use crate::human::Distribution;
use crate::signals::{SignalKind, SignalPayload};

/// `numerator / denominator`, undefined when nothing was assessed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub numerator: u64,
    pub denominator: u64,
    pub value: Option<f64>,
    /// Records excluded from the denominator for lack of a signal.
    pub n_missing: u64,
}

impl Proportion {
    pub fn new(numerator: u64, denominator: u64, n_missing: u64) -> Self {
        Proportion {
            numerator,
            denominator,
            value: (denominator > 0).then(|| numerator as f64 / denominator as f64),
            n_missing,
        }
    }
}

/// `n` equal-width bins over [0, 1].
pub fn uniform_edges(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

pub fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::InvalidParameter("histogram needs at least two edges".into()));
    }
    if edges[0] != 0.0 || edges[edges.len() - 1] != 1.0 {
        return Err(Error::InvalidParameter(
            "histogram edges must start at 0 and end at 1".into(),
        ));
    }
    if edges
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(Error::InvalidParameter(
            "histogram edges must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Bin of `score`: bins are `[a, b)` except the last, which is closed.
pub fn bin_index(edges: &[f64], score: f64) -> usize {
    let bins = edges.len() - 1;
    edges.partition_point(|e| *e <= score).saturating_sub(1).min(bins - 1)
}

/// Label of a bin as written on cards, e.g. `[0.2,0.3)`.
pub fn bin_label(edges: &[f64], i: usize) -> String {
    let close = if i + 1 == edges.len() - 1 { ']' } else { ')' };
    format!("[{},{}{close}", edges[i], edges[i + 1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_missing: u64,
}

impl Histogram {
    pub fn scored(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Share of scored records at or above `edge`, which must be a bin edge.
    pub fn share_from(&self, edge: f64) -> Option<f64> {
        let scored = self.scored();
        let start = self.edges.iter().position(|e| *e >= edge)?;
        (scored > 0).then(|| self.counts[start.min(self.counts.len())..].iter().sum::<u64>() as f64 / scored as f64)
    }
}

fn kind_mismatch(signal: &str, expected: SignalKind, actual: SignalKind) -> Error {
    Error::SignalKind {
        signal: signal.to_owned(),
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistogramAcc {
    counts: Vec<u64>,
    missing: u64,
}

impl HistogramAcc {
    pub fn observe(&mut self, obs: &Observed, signal: &str, edges: &[f64]) {
        if self.counts.is_empty() {
            self.counts = vec![0; edges.len() - 1];
        }
        match obs.signals.get(signal).and_then(SignalPayload::score) {
            Some(score) => self.counts[bin_index(edges, score)] += 1,
            None => self.missing += 1,
        }
    }

    pub fn finish(mut self, edges: &[f64]) -> Histogram {
        self.counts.resize(edges.len() - 1, 0);
        Histogram {
            edges: edges.to_vec(),
            counts: self.counts,
            n_missing: self.missing,
        }
    }
}

impl Mergeable for HistogramAcc {
    fn merge(&mut self, other: Self) {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.missing += other.missing;
    }
}

pub fn scalar_histogram<'a>(
    corpus: impl IntoIterator<Item = &'a Observed>,
    signal: &str,
    kind: SignalKind,
    edges: &[f64],
) -> Result<Histogram> {
    if kind != SignalKind::Scalar01 {
        return Err(kind_mismatch(signal, SignalKind::Scalar01, kind));
    }
    validate_edges(edges)?;
    let mut acc = HistogramAcc::default();
    for obs in corpus {
        acc.observe(obs, signal, edges);
    }
    Ok(acc.finish(edges))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CategoricalAcc {
    labels: Counts<String>,
    missing: u64,
}

impl CategoricalAcc {
    pub fn observe(&mut self, obs: &Observed, signal: &str) {
        match obs.signals.get(signal).and_then(SignalPayload::label) {
            Some(label) => self.labels.bump(label.to_owned()),
            None => self.missing += 1,
        }
    }

    pub fn finish(self) -> CategoricalDistribution {
        CategoricalDistribution {
            distribution: Distribution::from_counts(self.labels.0),
            n_missing: self.missing,
        }
    }
}

impl Mergeable for CategoricalAcc {
    fn merge(&mut self, other: Self) {
        self.labels.merge(other.labels);
        self.missing += other.missing;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoricalDistribution {
    pub distribution: Distribution,
    pub n_missing: u64,
}

pub fn categorical_distribution<'a>(
    corpus: impl IntoIterator<Item = &'a Observed>,
    signal: &str,
    kind: SignalKind,
) -> Result<CategoricalDistribution> {
    if kind != SignalKind::Categorical {
        return Err(kind_mismatch(signal, SignalKind::Categorical, kind));
    }
    let mut acc = CategoricalAcc::default();
    for obs in corpus {
        acc.observe(obs, signal);
    }
    Ok(acc.finish())
}

/// How a signal value becomes a yes/no answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BoolRule {
    Flag,
    AtLeast { threshold: f64 },
    Positive,
}

impl BoolRule {
    pub fn for_kind(signal: &str, kind: SignalKind, threshold: Option<f64>) -> Result<Self> {
        match (kind, threshold) {
            (SignalKind::Boolean, None) => Ok(BoolRule::Flag),
            (SignalKind::Boolean, Some(_)) => Err(Error::InvalidParameter(format!(
                "threshold given for boolean signal `{signal}`"
            ))),
            (SignalKind::Scalar01, Some(t)) if (0.0..=1.0).contains(&t) => Ok(BoolRule::AtLeast { threshold: t }),
            (SignalKind::Scalar01, Some(t)) => Err(Error::InvalidParameter(format!("threshold {t} outside [0, 1]"))),
            (SignalKind::Scalar01, None) => Err(Error::InvalidParameter(format!(
                "scalar signal `{signal}` needs a threshold"
            ))),
            (SignalKind::Count, None) => Ok(BoolRule::Positive),
            (SignalKind::Count, Some(_)) => Err(Error::InvalidParameter(format!(
                "threshold given for count signal `{signal}`"
            ))),
            (other, _) => Err(kind_mismatch(signal, SignalKind::Boolean, other)),
        }
    }

    pub fn apply(&self, payload: &SignalPayload) -> Option<bool> {
        match (self, payload) {
            (BoolRule::Flag, SignalPayload::Boolean { flag }) => Some(*flag),
            (BoolRule::AtLeast { threshold }, SignalPayload::Scalar01 { score }) => Some(*score >= *threshold),
            (BoolRule::Positive, SignalPayload::Count { count }) => Some(*count > 0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProportionAcc {
    yes: u64,
    assessed: u64,
    missing: u64,
}

impl ProportionAcc {
    pub fn observe(&mut self, obs: &Observed, signal: &str, rule: &BoolRule) {
        match obs.signals.get(signal).and_then(|p| rule.apply(p)) {
            Some(v) => {
                self.assessed += 1;
                self.yes += u64::from(v);
            }
            None => self.missing += 1,
        }
    }

    pub fn finish(self) -> Proportion {
        Proportion::new(self.yes, self.assessed, self.missing)
    }
}

impl Mergeable for ProportionAcc {
    fn merge(&mut self, other: Self) {
        self.yes += other.yes;
        self.assessed += other.assessed;
        self.missing += other.missing;
    }
}

pub fn boolean_proportion<'a>(
    corpus: impl IntoIterator<Item = &'a Observed>,
    signal: &str,
    kind: SignalKind,
    threshold: Option<f64>,
) -> Result<Proportion> {
    let rule = BoolRule::for_kind(signal, kind, threshold)?;
    let mut acc = ProportionAcc::default();
    for obs in corpus {
        acc.observe(obs, signal, &rule);
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Record;
    use crate::signals::SignalSet;

    fn with(signal: &str, payloads: Vec<Option<SignalPayload>>) -> Vec<Observed> {
        payloads
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut s = SignalSet::default();
                if let Some(p) = p {
                    s.insert(signal, p);
                }
                Observed::new(Record::text(format!("r{i}"), "x"), None, s)
            })
            .collect()
    }

    fn scores(v: &[f64]) -> Vec<Option<SignalPayload>> {
        v.iter().map(|s| Some(SignalPayload::Scalar01 { score: *s })).collect()
    }

    #[test]
    fn histogram_examples() {
        let h = scalar_histogram(
            &with("tox", scores(&[0.1, 0.1, 0.9])),
            "tox",
            SignalKind::Scalar01,
            &[0.0, 0.5, 1.0],
        )
        .unwrap();
        assert_eq!(h.counts, vec![2, 1]);
        let h = scalar_histogram(
            &with("tox", scores(&[0.5, 1.0, 0.0])),
            "tox",
            SignalKind::Scalar01,
            &[0.0, 0.5, 1.0],
        )
        .unwrap();
        assert_eq!(h.counts, vec![1, 2]);
        let h = scalar_histogram(&[], "tox", SignalKind::Scalar01, &uniform_edges(10)).unwrap();
        assert_eq!(h.counts, vec![0; 10]);
        assert!(scalar_histogram(&[], "tox", SignalKind::Categorical, &[0.0, 1.0]).is_err());
        assert!(scalar_histogram(&[], "tox", SignalKind::Scalar01, &[0.0, 0.7, 0.5, 1.0]).is_err());
    }

    #[test]
    fn uniform_edges_land_scores_correctly() {
        let e = uniform_edges(10);
        assert_eq!(bin_index(&e, 0.3), 3);
        assert_eq!(bin_index(&e, 0.29999), 2);
        assert_eq!(bin_index(&e, 1.0), 9);
        assert_eq!(bin_label(&e, 9), "[0.9,1]");
    }

    #[test]
    fn categorical_examples() {
        let cat = |l: &str| {
            Some(SignalPayload::Categorical {
                label: l.into(),
                confidence: None,
            })
        };
        let d = categorical_distribution(
            &with("topic", vec![cat("news"), cat("news"), cat("sport")]),
            "topic",
            SignalKind::Categorical,
        )
        .unwrap();
        assert_eq!(d.distribution.count("news"), 2);
        assert_eq!(d.distribution.count("sport"), 1);
        let d = categorical_distribution(&with("topic", vec![None, None]), "topic", SignalKind::Categorical).unwrap();
        assert!(d.distribution.is_empty());
        assert_eq!(d.n_missing, 2);
        let d = categorical_distribution(
            &with("topic", vec![cat("News"), cat("news")]),
            "topic",
            SignalKind::Categorical,
        )
        .unwrap();
        assert_eq!(d.distribution.categories().len(), 2);
    }

    #[test]
    fn proportion_examples() {
        let flags = [true, false, false, true]
            .map(|f| Some(SignalPayload::Boolean { flag: f }))
            .to_vec();
        let p = boolean_proportion(&with("s", flags), "s", SignalKind::Boolean, None).unwrap();
        assert_eq!(p.value, Some(0.5));
        let p = boolean_proportion(&with("s", scores(&[0.6, 0.4])), "s", SignalKind::Scalar01, Some(0.5)).unwrap();
        assert_eq!(p.value, Some(0.5));
        let p = boolean_proportion(&with("s", vec![None, None, None]), "s", SignalKind::Boolean, None).unwrap();
        assert_eq!((p.value, p.n_missing), (None, 3));
        assert!(boolean_proportion(&[], "s", SignalKind::Boolean, Some(0.5)).is_err());
        assert!(boolean_proportion(&[], "s", SignalKind::Scalar01, None).is_err());
        let faces = [0, 2, 1].map(|c| Some(SignalPayload::Count { count: c })).to_vec();
        let p = boolean_proportion(&with("faces", faces), "faces", SignalKind::Count, None).unwrap();
        assert_eq!((p.numerator, p.denominator), (2, 3));
    }
}
