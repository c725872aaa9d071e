//! Executes a validated plan: one fused pass over the dataset, sharded over a
//! worker pool, followed by card assembly.
//!
//! Each shard feeds every planned analysis's accumulator; shard results are
//! merged in shard order, so reports do not depend on the thread count.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::aggregate::{Mergeable, Observed};
use crate::associations::{association_lift, group_triggers, CooccurrenceAcc, TableAcc};
use crate::content::{CategoricalAcc, HistogramAcc, ProportionAcc};
use crate::corpus::{
    open_dataset, parse_line, sample_records, tokenize, DatasetHandle, LineReader, Record, SkipReport,
};
use crate::error::{Error, Result};
use crate::human::{pii_detections, Distribution, IdentityAcc, KindOccurrenceAcc, PiiAcc};
use crate::lexicon::LexiconKind;
use crate::plan::{AuditPlan, Operation, PlannedAnalysis};
use crate::provenance::{DuplicateAcc, GeographyAcc, OverlapAcc, OverlapIndex, PublicationAcc, SourcesAcc};
use crate::report::{
    apply_mitigation, make_card, read_id_list, render_report, target_deficits, AnalysisCard, AssociationTable,
    CardInputs, CardOutput, CardProvenance, DistributionPayload, HistogramPayload, MitigationManifest, MitigationMode,
    ProportionPayload, RankedListPayload, ReportContext, ReportFormat, SampleInfo, SelectionSpec, TablePayload,
    TargetDeficit,
};
use crate::signals::{query_provider, Provider, SignalPayload, SignalSet};

/// Records per provider request batch within a shard.
const CHUNK: usize = 256;

/// File names written by [`write_reports`].
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MARKDOWN: &str = "report.md";

/// Counters gathered alongside a scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanStats {
    pub records: u64,
    pub skip: SkipReport,
    /// Records lacking each requested signal.
    pub missing: BTreeMap<String, u64>,
}

#[derive(Default)]
struct ShardStats {
    stats: ScanStats,
    ids: Vec<(String, u64)>,
}

/// Providers and tokenization shared by all shards of a scan.
struct Runtime<'a> {
    plan: &'a AuditPlan,
    providers: Vec<(Provider, Vec<String>)>,
    signals: Vec<String>,
}

impl<'a> Runtime<'a> {
    fn new(plan: &'a AuditPlan, signals: &BTreeSet<String>) -> Result<Self> {
        let mut providers = Vec::new();
        for cfg in &plan.providers {
            let served: Vec<String> = cfg
                .supported_signals()
                .into_iter()
                .map(|d| d.name)
                .filter(|n| signals.contains(n))
                .collect();
            if served.is_empty() {
                continue;
            }
            providers.push((Provider::from_config(cfg)?, served));
        }
        Ok(Runtime {
            plan,
            providers,
            signals: signals.iter().cloned().collect(),
        })
    }

    fn observe(&self, record: Record, signals: SignalSet) -> Observed {
        match self.plan.matcher.as_deref() {
            Some(m) => Observed::new(record, Some(m), signals),
            None => {
                let tokens = tokenize(record.text_or_empty(), &self.plan.policy);
                Observed {
                    record,
                    tokens,
                    hits: Vec::new(),
                    signals,
                }
            }
        }
    }

    /// Queries providers for a chunk and feeds each observed record to `visit`.
    fn process<S>(
        &self,
        chunk: Vec<Record>,
        state: &mut S,
        stats: &mut ScanStats,
        visit: &(impl Fn(&mut S, &Observed) + Sync),
    ) -> Result<()> {
        let mut sets: Vec<SignalSet> = vec![SignalSet::default(); chunk.len()];
        if !self.providers.is_empty() {
            let index: HashMap<&str, usize> = chunk.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
            for (provider, signals) in &self.providers {
                let resp = query_provider(provider, &chunk, signals)?;
                for v in resp.values {
                    if let Some(&i) = index.get(v.record_id.as_str()) {
                        sets[i].insert(v.signal, v.payload);
                    }
                }
                for m in resp.missing {
                    log::debug!("record `{}`: signal `{}` missing: {}", m.record_id, m.signal, m.reason);
                }
            }
        }
        for (record, set) in chunk.into_iter().zip(sets) {
            for s in &self.signals {
                if set.get(s).is_none() {
                    *stats.missing.entry(s.clone()).or_default() += 1;
                }
            }
            stats.records += 1;
            let obs = self.observe(record, set);
            visit(state, &obs);
        }
        Ok(())
    }
}

fn merge_stats(into: &mut ScanStats, other: ScanStats) {
    into.records += other.records;
    into.skip.merge(other.skip);
    for (k, v) in other.missing {
        *into.missing.entry(k).or_default() += v;
    }
}

/// Scans `handle` with `threads` shards (or over a reservoir sample) and
/// returns the merged state.
fn scan<S: Send>(
    rt: &Runtime<'_>,
    handle: &DatasetHandle,
    sample: Option<(usize, u64)>,
    init: impl Fn() -> S + Sync,
    visit: impl Fn(&mut S, &Observed) + Sync,
    merge: impl Fn(&mut S, S),
) -> Result<(S, ScanStats)> {
    let threads = rt.plan.threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;

    let parts: Vec<Result<(S, ShardStats)>> = match sample {
        Some((size, seed)) => {
            let mut stream = open_dataset(handle)?;
            let mut failure = None;
            let records = sample_records(
                (&mut stream).map_while(|r| match r {
                    Ok(r) => Some(r),
                    Err(e) => {
                        failure = Some(e);
                        None
                    }
                }),
                size,
                seed,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            let skip = stream.skip_report().clone();
            let per = records.len().div_ceil(threads).max(1);
            let mut chunks: Vec<Vec<Record>> = Vec::new();
            let mut it = records.into_iter().peekable();
            while it.peek().is_some() {
                chunks.push(it.by_ref().take(per).collect());
            }
            let mut parts: Vec<Result<(S, ShardStats)>> = pool.install(|| {
                chunks
                    .into_par_iter()
                    .map(|records| {
                        let mut state = init();
                        let mut shard = ShardStats::default();
                        for c in records.chunks(CHUNK) {
                            rt.process(c.to_vec(), &mut state, &mut shard.stats, &visit)?;
                        }
                        Ok((state, shard))
                    })
                    .collect()
            });
            // Skipped-line accounting covers the whole file.
            match parts.first_mut() {
                Some(Ok((_, shard))) => shard.stats.skip = skip,
                Some(Err(_)) => {}
                None => parts.push(Ok((
                    init(),
                    ShardStats {
                        stats: ScanStats {
                            skip,
                            ..Default::default()
                        },
                        ids: Vec::new(),
                    },
                ))),
            }
            parts
        }
        None => {
            let ranges = handle.shards(threads)?;
            pool.install(|| {
                ranges
                    .into_par_iter()
                    .map(|range| {
                        let mut state = init();
                        let mut shard = ShardStats::default();
                        let mut buf = Vec::with_capacity(CHUNK);
                        for item in LineReader::range(&handle.path, range)? {
                            let item = item?;
                            shard.stats.skip.note_line();
                            match parse_line(handle.format, item.line, &item.bytes) {
                                Ok(record) => {
                                    shard.ids.push((record.id.clone(), item.line));
                                    buf.push(record);
                                    if buf.len() == CHUNK {
                                        rt.process(std::mem::take(&mut buf), &mut state, &mut shard.stats, &visit)?;
                                    }
                                }
                                Err(reason) => {
                                    log::debug!("{}:{}: skipped: {reason}", handle.path.display(), item.line);
                                    shard.stats.skip.note_skip(item.line, reason);
                                }
                            }
                        }
                        if !buf.is_empty() {
                            rt.process(buf, &mut state, &mut shard.stats, &visit)?;
                        }
                        Ok((state, shard))
                    })
                    .collect()
            })
        }
    };

    let mut merged: Option<S> = None;
    let mut stats = ScanStats::default();
    let mut ids: Vec<(String, u64)> = Vec::new();
    for part in parts {
        let (state, shard) = part?;
        merge_stats(&mut stats, shard.stats);
        ids.extend(shard.ids);
        match &mut merged {
            None => merged = Some(state),
            Some(m) => merge(m, state),
        }
    }
    stats.skip.check(&handle.path)?;
    ids.sort_by_key(|(_, line)| *line);
    let mut seen = HashSet::with_capacity(ids.len());
    for (id, line) in ids {
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateRecordId { id, line });
        }
    }
    Ok((merged.unwrap_or_else(init), stats))
}

/// Per-analysis accumulator in the fused scan.
enum State {
    Pii(PiiAcc),
    Identity(IdentityAcc),
    Kind(KindOccurrenceAcc),
    Proportion(ProportionAcc),
    Categories(CategoricalAcc),
    Histogram(HistogramAcc),
    Sources(SourcesAcc),
    Geography(GeographyAcc),
    Publication(PublicationAcc),
    Duplicates(DuplicateAcc),
    Overlap(OverlapAcc),
    Cooccurrence(Vec<CooccurrenceAcc>),
    Table(Vec<TableAcc>),
    Nothing,
}

impl State {
    fn new(op: &Operation) -> State {
        match op {
            Operation::Pii(cfg) => State::Pii(PiiAcc::new(cfg)),
            Operation::Identity { .. } => State::Identity(IdentityAcc::default()),
            Operation::Pronouns { .. } | Operation::Hateful => State::Kind(KindOccurrenceAcc::default()),
            Operation::Proportion { .. } => State::Proportion(ProportionAcc::default()),
            Operation::Categories { .. } => State::Categories(CategoricalAcc::default()),
            Operation::Histogram { .. } => State::Histogram(HistogramAcc::default()),
            Operation::TopSources { .. } => State::Sources(SourcesAcc::default()),
            Operation::Geography { .. } => State::Geography(GeographyAcc::default()),
            Operation::Publication => State::Publication(PublicationAcc::default()),
            Operation::Duplicates(_) => State::Duplicates(DuplicateAcc::default()),
            Operation::Overlap { .. } => State::Overlap(OverlapAcc::default()),
            Operation::Cooccurrence(cfgs) => {
                State::Cooccurrence(cfgs.iter().map(|_| CooccurrenceAcc::default()).collect())
            }
            Operation::Table { pairs, .. } => State::Table(pairs.iter().map(|_| TableAcc::default()).collect()),
            Operation::Unsupported => State::Nothing,
        }
    }

    fn merge(&mut self, other: State) {
        match (self, other) {
            (State::Pii(a), State::Pii(b)) => a.merge(b),
            (State::Identity(a), State::Identity(b)) => a.merge(b),
            (State::Kind(a), State::Kind(b)) => a.merge(b),
            (State::Proportion(a), State::Proportion(b)) => a.merge(b),
            (State::Categories(a), State::Categories(b)) => a.merge(b),
            (State::Histogram(a), State::Histogram(b)) => a.merge(b),
            (State::Sources(a), State::Sources(b)) => a.merge(b),
            (State::Geography(a), State::Geography(b)) => a.merge(b),
            (State::Publication(a), State::Publication(b)) => a.merge(b),
            (State::Duplicates(a), State::Duplicates(b)) => a.merge(b),
            (State::Overlap(a), State::Overlap(b)) => a.merge(b),
            (State::Cooccurrence(a), State::Cooccurrence(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    x.merge(y);
                }
            }
            (State::Table(a), State::Table(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    x.merge(y);
                }
            }
            (State::Nothing, State::Nothing) => {}
            _ => unreachable!("fused states are built from the same plan"),
        }
    }
}

/// Plan-derived data needed while observing records.
struct Prepared<'a> {
    plan: &'a AuditPlan,
    triggers: Vec<Vec<BTreeMap<String, BTreeSet<String>>>>,
    overlap: Option<OverlapIndex>,
}

impl Prepared<'_> {
    fn observe(&self, states: &mut [State], obs: &Observed) {
        let policy = &self.plan.policy;
        for (i, (analysis, state)) in self.plan.analyses.iter().zip(states.iter_mut()).enumerate() {
            match (&analysis.operation, state) {
                (Operation::Pii(cfg), State::Pii(acc)) => acc.observe(obs, cfg),
                (Operation::Identity { config, .. }, State::Identity(acc)) => acc.observe(obs, config),
                (Operation::Pronouns { .. }, State::Kind(acc)) => acc.observe(obs, LexiconKind::Pronoun),
                (Operation::Hateful, State::Kind(acc)) => acc.observe(obs, LexiconKind::Hateful),
                (Operation::Proportion { signal, rule }, State::Proportion(acc)) => acc.observe(obs, signal, rule),
                (Operation::Categories { signal, .. }, State::Categories(acc)) => acc.observe(obs, signal),
                (Operation::Histogram { signal, edges, .. }, State::Histogram(acc)) => acc.observe(obs, signal, edges),
                (Operation::TopSources { .. }, State::Sources(acc)) => acc.observe(obs),
                (Operation::Geography { .. }, State::Geography(acc)) => acc.observe(obs),
                (Operation::Publication, State::Publication(acc)) => acc.observe(obs),
                (Operation::Duplicates(params), State::Duplicates(acc)) => acc.observe(obs, params, policy),
                (Operation::Overlap { mode, n }, State::Overlap(acc)) => {
                    let index = self.overlap.as_ref().expect("overlap index is built before the scan");
                    acc.observe(obs, index, *mode, *n, policy)
                }
                (Operation::Cooccurrence(cfgs), State::Cooccurrence(accs)) => {
                    for (j, (cfg, acc)) in cfgs.iter().zip(accs.iter_mut()).enumerate() {
                        acc.observe(obs, cfg, &self.triggers[i][j]);
                    }
                }
                (Operation::Table { pairs, .. }, State::Table(accs)) => {
                    for ((human, content), acc) in pairs.iter().zip(accs.iter_mut()) {
                        acc.observe(obs, human, content);
                    }
                }
                (Operation::Unsupported, State::Nothing) => {}
                _ => unreachable!("state matches its operation"),
            }
        }
    }
}

/// Everything a run produces before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub cards: Vec<AnalysisCard>,
    pub context: ReportContext,
    pub stats: ScanStats,
}

/// Provenance timestamp: the plan's `report_timestamp`, else
/// `SOURCE_DATE_EPOCH`, else the current time, as RFC 3339 UTC.
pub fn report_timestamp(plan: &AuditPlan) -> String {
    if let Some(t) = &plan.report_timestamp {
        return t.clone();
    }
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs() as i64)
        });
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn consumed_signals(plan: &AuditPlan) -> BTreeSet<String> {
    plan.analyses.iter().flat_map(|a| a.signals.iter().cloned()).collect()
}

/// Runs every planned analysis and assembles the cards.
pub fn run_plan(plan: &AuditPlan) -> Result<RunOutput> {
    let signals = consumed_signals(plan);
    let rt = Runtime::new(plan, &signals)?;
    let timestamp = report_timestamp(plan);
    let sample = plan.sample.map(|s| (s.size, s.seed));

    let overlap = match plan.analyses.iter().find_map(|a| match a.operation {
        Operation::Overlap { mode, n } => Some((mode, n)),
        _ => None,
    }) {
        Some((mode, n)) => {
            let comparison = plan
                .comparison
                .as_ref()
                .ok_or_else(|| Error::InvalidPlan(vec!["dataset_overlap requires a comparison dataset".into()]))?;
            let bare = Runtime {
                plan,
                providers: Vec::new(),
                signals: Vec::new(),
            };
            let (index, _) = scan(
                &bare,
                comparison,
                None,
                OverlapIndex::default,
                |idx, obs| idx.observe(obs, mode, n, &plan.policy),
                |a, b| a.merge(b),
            )?;
            log::info!("indexed {} records of `{}`", index.records(), comparison.label);
            Some(index)
        }
        None => None,
    };

    let prepared = Prepared {
        plan,
        triggers: plan
            .analyses
            .iter()
            .map(|a| match &a.operation {
                Operation::Cooccurrence(cfgs) => cfgs
                    .iter()
                    .map(|c| group_triggers(&c.source, plan.matcher.as_deref()))
                    .collect(),
                _ => Vec::new(),
            })
            .collect(),
        overlap,
    };
    let (states, stats) = scan(
        &rt,
        &plan.dataset,
        sample,
        || {
            plan.analyses
                .iter()
                .map(|a| State::new(&a.operation))
                .collect::<Vec<_>>()
        },
        |states, obs| prepared.observe(states, obs),
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        },
    )?;
    log::info!(
        "scanned {} records of `{}` ({} lines skipped)",
        stats.records,
        plan.dataset.label,
        stats.skip.skipped_count
    );

    let mut cards = Vec::with_capacity(plan.analyses.len());
    for (analysis, state) in plan.analyses.iter().zip(states) {
        let (output, deficits, notes) = finish(plan, analysis, state, prepared.overlap.as_ref())?;
        let provenance = CardProvenance {
            dataset: plan.dataset.label.clone(),
            records_scanned: stats.records,
            skipped_lines: stats.skip.skipped_count,
            n_missing: analysis
                .signals
                .iter()
                .map(|s| (s.clone(), stats.missing.get(s).copied().unwrap_or(0)))
                .collect(),
            config_digest: plan.config_digest.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: timestamp.clone(),
            sample: plan.sample.map(|s| SampleInfo {
                size: s.size,
                seed: s.seed,
            }),
        };
        let inputs = CardInputs {
            provenance,
            resolved: analysis.resolved.clone(),
            parameters: analysis.parameters.clone(),
            notes,
            target_deficits: deficits,
        };
        cards.push(make_card(
            analysis.spec.id,
            output,
            inputs,
            &plan.context,
            &plan.limits,
        )?);
    }
    Ok(RunOutput {
        cards,
        context: ReportContext {
            dataset: plan.dataset.label.clone(),
            comparison_dataset: plan.comparison.as_ref().map(|c| c.label.clone()),
            plan: plan.context,
            config_digest: plan.config_digest.clone(),
            timestamp,
        },
        stats,
    })
}

fn deficits_of(d: &Distribution, target: &Option<BTreeMap<String, f64>>) -> Vec<TargetDeficit> {
    match target {
        Some(t) => {
            let counts: BTreeMap<String, u64> = d.categories().iter().cloned().collect();
            target_deficits(&counts, d.total(), t)
        }
        None => Vec::new(),
    }
}

fn provider_of(plan: &AuditPlan, signal: &str) -> String {
    plan.signals.get(signal).map(|s| s.provider.clone()).unwrap_or_default()
}

fn finish(
    plan: &AuditPlan,
    analysis: &PlannedAnalysis,
    state: State,
    overlap: Option<&OverlapIndex>,
) -> Result<(CardOutput, Vec<TargetDeficit>, Vec<String>)> {
    let matcher = plan.matcher.as_deref();
    let mut deficits = Vec::new();
    let mut notes = Vec::new();
    let output = match (&analysis.operation, state) {
        (Operation::Pii(_), State::Pii(acc)) => CardOutput::Proportion(ProportionPayload::Pii(acc.finish())),
        (Operation::Identity { config, target }, State::Identity(acc)) => {
            let m = matcher.ok_or(Error::MissingLexicon("identity"))?;
            let stats = acc.finish(m, config);
            if let Some(t) = target {
                // Targets name groups as `axis:group`; shares are within the axis.
                for (axis, d) in &stats.axes {
                    let prefix = format!("{axis}:");
                    let axis_target: BTreeMap<String, f64> = t
                        .iter()
                        .filter_map(|(k, v)| k.strip_prefix(&prefix).map(|g| (g.to_owned(), *v)))
                        .collect();
                    if axis_target.is_empty() {
                        continue;
                    }
                    for mut def in deficits_of(d, &Some(axis_target)) {
                        def.label = format!("{axis}:{}", def.label);
                        deficits.push(def);
                    }
                }
            }
            CardOutput::Distribution(DistributionPayload::IdentityTerms(stats))
        }
        (Operation::Pronouns { target }, State::Kind(acc)) => {
            let m = matcher.ok_or(Error::MissingLexicon("pronoun"))?;
            let distribution = acc.finish_pronouns(m);
            deficits = deficits_of(&distribution, target);
            CardOutput::Distribution(DistributionPayload::Pronouns { distribution })
        }
        (Operation::Hateful, State::Kind(acc)) => {
            CardOutput::Distribution(DistributionPayload::HatefulTerms(acc.finish_hateful()))
        }
        (Operation::Proportion { signal, rule }, State::Proportion(acc)) => {
            CardOutput::Proportion(ProportionPayload::Signal {
                signal: signal.clone(),
                provider: provider_of(plan, signal),
                rule: *rule,
                proportion: acc.finish(),
            })
        }
        (Operation::Categories { signal, target }, State::Categories(acc)) => {
            let distribution = acc.finish();
            deficits = deficits_of(&distribution.distribution, target);
            if provider_of(plan, signal) == crate::plan::AUTO_LANGUAGE_PROVIDER {
                notes.push(format!(
                    "Language labels come from the built-in trigram identifier; `und` marks text that is too short or not recognized (confidence below {}).",
                    crate::signals::CONFIDENCE_FLOOR
                ));
            }
            CardOutput::Distribution(DistributionPayload::SignalLabels {
                signal: signal.clone(),
                provider: provider_of(plan, signal),
                distribution,
            })
        }
        (Operation::Histogram { signal, edges, high }, State::Histogram(acc)) => {
            let histogram = acc.finish(edges);
            let high_share = histogram.share_from(*high);
            if signal == "toxicity" {
                notes.push("Toxicity scores measure toxic language, which is not the same as offensive speech.".into());
            }
            CardOutput::Histogram(HistogramPayload::Scores {
                signal: signal.clone(),
                provider: provider_of(plan, signal),
                histogram,
                high_threshold: *high,
                high_share,
            })
        }
        (Operation::TopSources { k }, State::Sources(acc)) => {
            CardOutput::RankedList(RankedListPayload::Sources(acc.finish(*k)))
        }
        (Operation::Geography { target }, State::Geography(acc)) => {
            let spread = acc.finish();
            deficits = deficits_of(&spread.records, target);
            notes.push(
                "Countries are inferred from country-code top-level domains; other domains are unattributed.".into(),
            );
            CardOutput::Distribution(DistributionPayload::Geography(spread))
        }
        (Operation::Publication, State::Publication(acc)) => {
            notes.push("Years come from each record's `timestamp` metadata, whatever date it carries.".into());
            CardOutput::Histogram(HistogramPayload::Years(acc.finish()))
        }
        (Operation::Duplicates(params), State::Duplicates(acc)) => CardOutput::DuplicateReport(acc.finish(params)),
        (Operation::Overlap { mode, n }, State::Overlap(acc)) => {
            let index = overlap.expect("overlap index is built before the scan");
            let comparison = plan.comparison.as_ref().map(|c| c.label.clone()).unwrap_or_default();
            CardOutput::OverlapReport(acc.finish((plan.dataset.label.clone(), comparison), *mode, *n, index))
        }
        (Operation::Cooccurrence(cfgs), State::Cooccurrence(accs)) => {
            CardOutput::RankedList(RankedListPayload::Cooccurrences {
                lists: cfgs.iter().zip(accs).map(|(cfg, acc)| acc.finish(cfg)).collect(),
            })
        }
        (Operation::Table { pairs, lift, support }, State::Table(accs)) => {
            let tables = pairs
                .iter()
                .zip(accs)
                .map(|((human, content), acc)| {
                    let table = acc.finish(human, content);
                    let associations = association_lift(&table, *lift, *support);
                    AssociationTable { table, associations }
                })
                .collect();
            CardOutput::DisaggregatedTable(TablePayload {
                tables,
                lift_threshold: *lift,
                min_support: *support,
            })
        }
        (Operation::Unsupported, State::Nothing) => CardOutput::Unsupported { reason: String::new() },
        _ => unreachable!("state matches its operation"),
    };
    Ok((output, deficits, notes))
}

/// Writes `report.json` and `report.md` into `dir`. Nothing is written if
/// rendering fails.
pub fn write_reports(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let json = render_report(&out.cards, &out.context, ReportFormat::Structured)?;
    let md = render_report(&out.cards, &out.context, ReportFormat::HumanReadable)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, body) in [(REPORT_JSON, json), (REPORT_MARKDOWN, md)] {
        let path = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Ids of the full dataset matched by `selection`. Sampling is ignored.
pub fn select_ids(plan: &AuditPlan, selection: &SelectionSpec) -> Result<BTreeSet<String>> {
    if let Some(required) = selection.required_analysis() {
        if plan.analysis(required).is_none() {
            return Err(Error::SelectionNotRun {
                selection: selection.to_string(),
                analysis: required.to_owned(),
            });
        }
    }
    let merge_sets = |a: &mut BTreeSet<String>, b: BTreeSet<String>| a.extend(b);
    match selection {
        SelectionSpec::Ids(path) => read_id_list(path),
        SelectionSpec::Pii => {
            let Some(Operation::Pii(cfg)) = plan.analysis("pii").map(|a| &a.operation) else {
                unreachable!("pii analysis has a pii operation")
            };
            let signals: BTreeSet<String> = cfg.signal.iter().cloned().collect();
            let rt = Runtime::new(plan, &signals)?;
            let (ids, _) = scan(
                &rt,
                &plan.dataset,
                None,
                BTreeSet::new,
                |ids, obs| {
                    if pii_detections(obs, cfg).is_some_and(|d| !d.is_empty()) {
                        ids.insert(obs.record.id.clone());
                    }
                },
                merge_sets,
            )?;
            Ok(ids)
        }
        SelectionSpec::Hateful => {
            let rt = Runtime::new(plan, &BTreeSet::new())?;
            let (ids, _) = scan(
                &rt,
                &plan.dataset,
                None,
                BTreeSet::new,
                |ids, obs| {
                    if obs.hits.iter().any(|h| h.kind == LexiconKind::Hateful) {
                        ids.insert(obs.record.id.clone());
                    }
                },
                merge_sets,
            )?;
            Ok(ids)
        }
        SelectionSpec::Duplicates => {
            let Some(Operation::Duplicates(params)) = plan.analysis("data_duplication").map(|a| &a.operation) else {
                unreachable!("duplication analysis has a duplicates operation")
            };
            let rt = Runtime::new(plan, &BTreeSet::new())?;
            let (acc, _) = scan(
                &rt,
                &plan.dataset,
                None,
                DuplicateAcc::default,
                |acc, obs| acc.observe(obs, params, &plan.policy),
                |a, b| a.merge(b),
            )?;
            Ok(acc.finish(params).removable_ids().map(str::to_owned).collect())
        }
        SelectionSpec::Signal { name, threshold } => {
            let source = plan
                .signals
                .get(name)
                .ok_or_else(|| Error::UnknownSignal(name.clone()))?;
            use crate::signals::SignalKind;
            if !matches!(
                source.kind,
                SignalKind::Scalar01 | SignalKind::Count | SignalKind::Boolean
            ) {
                return Err(Error::SignalKind {
                    signal: name.clone(),
                    expected: "scalar01, count or boolean".into(),
                    actual: source.kind.to_string(),
                });
            }
            let rt = Runtime::new(plan, &BTreeSet::from([name.clone()]))?;
            let t = *threshold;
            let (ids, _) = scan(
                &rt,
                &plan.dataset,
                None,
                BTreeSet::new,
                |ids, obs| {
                    let hit = match obs.signals.get(name) {
                        Some(SignalPayload::Scalar01 { score }) => *score >= t,
                        Some(SignalPayload::Count { count }) => *count as f64 >= t,
                        Some(SignalPayload::Boolean { flag }) => *flag,
                        _ => false,
                    };
                    if hit {
                        ids.insert(obs.record.id.clone());
                    }
                },
                merge_sets,
            )?;
            Ok(ids)
        }
    }
}

/// Resolves `selection` over the plan's dataset and writes the mitigated
/// copy to `output` and its manifest next to it.
pub fn mitigate(
    plan: &AuditPlan,
    selection: &SelectionSpec,
    mode: MitigationMode,
    output: &Path,
) -> Result<(MitigationManifest, PathBuf)> {
    let ids = select_ids(plan, selection)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let manifest = apply_mitigation(&plan.dataset, selection, &ids, mode, output, &plan.config_digest)?;
    let manifest_path = output.with_extension("manifest.json");
    let body = crate::report::canonical_json(&serde_json::to_value(&manifest)?);
    std::fs::write(&manifest_path, body).map_err(|e| Error::io(&manifest_path, e))?;
    Ok((manifest, manifest_path))
}
