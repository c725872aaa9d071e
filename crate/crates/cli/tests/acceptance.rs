//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use daf_core::aggregate::Observed;
use daf_core::associations::{
    association_lift, disaggregate, top_cooccurrences, ContentSource, CooccurrenceConfig, GroupKey, GroupSource,
};
use daf_core::content::{boolean_proportion, scalar_histogram, uniform_edges};
use daf_core::corpus::{Record, TokenizationPolicy};
use daf_core::engine::{mitigate, run_plan, write_reports, RunOutput, REPORT_JSON};
use daf_core::human::{identity_term_stats, IdentityConfig};
use daf_core::lexicon::{compile_matcher, IdentityLexicon, LexiconKind, TermMatcher};
use daf_core::plan::{validate_plan_str, AuditPlan};
use daf_core::provenance::{source_domain, SuffixList};
use daf_core::registry::registry;
use daf_core::report::{
    legal_actions, recommend_actions, ActionThresholds, AnalysisCard, AuditPlanContext, CardOutput,
    DistributionPayload, Goal, HistogramPayload, MitigationMode, Phase, RankedListPayload, SelectionSpec,
    TargetDeficit,
};
use daf_core::signals::{SignalKind, SignalPayload, SignalSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

fn write_jsonl(path: &Path, rows: &[Value]) {
    let body: String = rows.iter().map(|r| r.to_string() + "\n").collect();
    std::fs::write(path, body).unwrap();
}

fn load(dir: &Path, plan: &Value) -> Result<AuditPlan, String> {
    validate_plan_str(&plan.to_string(), dir).map_err(|e| format!("plan rejected: {e}"))
}

fn run(dir: &Path, plan: &Value) -> Result<RunOutput, String> {
    run_plan(&load(dir, plan)?).map_err(|e| format!("run failed: {e}"))
}

fn card<'a>(out: &'a RunOutput, id: &str) -> Result<&'a AnalysisCard, String> {
    out.cards
        .iter()
        .find(|c| c.analysis_id == id)
        .ok_or_else(|| format!("no `{id}` card"))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

/// Random words `w0`..`w9999`, long enough that unrelated documents never
/// share a 5-gram in practice.
fn random_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| format!("w{}", rng.gen_range(0..10_000))).collect()
}

// ---------------------------------------------------------------------------
// Planted corpus (criteria 1, 3, 7, 8)

const AGE: &[(&str, &[&str])] = &[("old", &["elderly", "seniors"]), ("young", &["teenagers", "youth"])];
const GENDER: &[(&str, &[&str])] = &[("woman", &["woman", "women"]), ("man", &["man", "men"])];
const PRONOUNS: &[(&str, &[&str])] = &[
    ("she/her", &["she", "her"]),
    ("he/him", &["he", "him"]),
    ("they/them", &["they", "them"]),
];
const HATEFUL: &[&str] = &["zorbo", "grunk"];
const FILLER: &[&str] = &[
    "river", "market", "doctor", "hospital", "game", "team", "bread", "sunny", "quiet", "city", "report", "garden",
    "train", "window", "music", "paper",
];
const URLS: &[&str] = &[
    "https://news.bbc.co.uk/a",
    "https://www.spiegel.de/b",
    "https://myjoyonline.com.gh/c",
    "https://example.com/d",
];

#[derive(Default)]
struct Planted {
    records: usize,
    terms: BTreeMap<&'static str, u64>,
    groups: BTreeMap<(&'static str, &'static str), u64>,
    intersections: BTreeMap<(&'static str, &'static str), u64>,
    pronouns: BTreeMap<&'static str, u64>,
    hateful: u64,
}

struct Fixture {
    dir: tempfile::TempDir,
    planted: Planted,
}

fn pick_group(
    rng: &mut ChaCha8Rng,
    set: &'static [(&'static str, &'static [&'static str])],
    p: &[f64],
) -> Option<usize> {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate().take(set.len()) {
        acc += pi;
        if x < acc {
            return Some(i);
        }
    }
    None
}

fn planted_fixture(n: usize, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Planted {
        records: n,
        ..Planted::default()
    };
    let mut rows = Vec::new();
    let mut manifest = Vec::new();
    for i in 0..n {
        let mut words: Vec<&str> = (0..rng.gen_range(5..13))
            .map(|_| *FILLER.choose(&mut rng).unwrap())
            .collect();
        let mut present: BTreeMap<&str, &str> = BTreeMap::new();
        for (axis, set, probs) in [("age", AGE, [0.3, 0.2]), ("gender", GENDER, [0.35, 0.3])] {
            if let Some(g) = pick_group(&mut rng, set, &probs) {
                let (group, terms) = set[g];
                for _ in 0..rng.gen_range(1..3) {
                    let t = *terms.choose(&mut rng).unwrap();
                    words.push(t);
                    *p.terms.entry(t).or_default() += 1;
                }
                *p.groups.entry((axis, group)).or_default() += 1;
                present.insert(axis, group);
            }
        }
        if let (Some(a), Some(g)) = (present.get("age"), present.get("gender")) {
            *p.intersections.entry((a, g)).or_default() += 1;
        }
        for _ in 0..rng.gen_range(0..4) {
            let (group, terms) = *PRONOUNS.choose(&mut rng).unwrap();
            words.push(terms.choose(&mut rng).unwrap());
            *p.pronouns.entry(group).or_default() += 1;
        }
        if rng.gen_bool(0.05) {
            words.push(HATEFUL.choose(&mut rng).unwrap());
            p.hateful += 1;
        }
        words.shuffle(&mut rng);
        let id = format!("p{i:04}");
        rows.push(json!({
            "id": id,
            "text": words.join(" "),
            "image": format!("img/{i}.jpg"),
            "meta": {"url": URLS[i % URLS.len()], "timestamp": format!("{}-06-01", 2010 + i % 12)},
        }));
        let spans = vec![(0, 4, ["dog", "car", "cup"][i % 3])];
        manifest.push(json!({"id": id, "values": [
            {"signal": "perceived_identity", "kind": "categorical", "label": (["feminine", "masculine", "unclear"][rng.gen_range(0..3)])},
            {"signal": "dialect", "kind": "categorical", "label": (["dialect-a", "dialect-b"][rng.gen_range(0..2)])},
            {"signal": "sexual_image", "kind": "scalar01", "score": rng.gen_range(0..100) as f64 / 100.0},
            {"signal": "violent_image", "kind": "scalar01", "score": rng.gen_range(0..100) as f64 / 100.0},
            {"signal": "face_count", "kind": "count", "count": rng.gen_range(0..3)},
            {"signal": "image_objects", "kind": "spans", "spans": spans},
        ]}));
    }
    write_jsonl(&d.join("corpus.jsonl"), &rows);
    write_jsonl(&d.join("signals.jsonl"), &manifest);
    let benchmark: Vec<Value> = rows
        .iter()
        .step_by(20)
        .map(|r| json!({"id": format!("b-{}", r["id"].as_str().unwrap()), "text": r["text"]}))
        .collect();
    write_jsonl(&d.join("benchmark.jsonl"), &benchmark);
    let lexicon = |name: &str, axis: &str, kind: &str, groups: Value| {
        std::fs::write(
            d.join(name),
            json!({"axis": axis, "kind": kind, "locale": "en", "groups": groups}).to_string(),
        )
        .unwrap();
    };
    let groups = |set: &[(&str, &[&str])]| -> Value {
        set.iter()
            .map(|(g, ts)| (g.to_string(), json!(ts)))
            .collect::<serde_json::Map<_, _>>()
            .into()
    };
    lexicon("age.json", "age", "identity", groups(AGE));
    lexicon("gender.json", "gender", "identity", groups(GENDER));
    lexicon("pronouns.json", "pronoun", "pronoun", groups(PRONOUNS));
    lexicon("hateful.json", "hateful", "hateful", json!({"slur": HATEFUL}));
    std::fs::write(
        d.join("topics.json"),
        json!({"health": ["doctor", "hospital"], "sport": ["game", "team"], "food": ["bread"]}).to_string(),
    )
    .unwrap();
    std::fs::write(
        d.join("toxicity.json"),
        json!({"zorbo": 0.9, "grunk": 0.7, "quiet": 0.1}).to_string(),
    )
    .unwrap();
    Fixture { dir, planted: p }
}

/// A plan listing every registry analysis over the planted corpus.
fn planted_plan(threads: usize, sample: Option<(usize, u64)>) -> Value {
    let analyses: Vec<Value> = registry()
        .iter()
        .map(|s| match s.id {
            "social_identity_terms" => json!({"id": s.id, "params": {"intersections": [["age", "gender"]]}}),
            _ => json!({"id": s.id}),
        })
        .collect();
    let mut plan = json!({
        "dataset": {"path": "corpus.jsonl", "format": "jsonl", "label": "planted"},
        "comparison_dataset": {"path": "benchmark.jsonl", "format": "jsonl", "label": "benchmark"},
        "lexicons": ["age.json", "gender.json", "pronouns.json", "hateful.json"],
        "providers": [
            {"id": "manifest", "transport": "builtin", "builtin": {"name": "manifest", "path": "signals.jsonl"},
             "signals": [
                {"name": "perceived_identity", "kind": "categorical"},
                {"name": "dialect", "kind": "categorical"},
                {"name": "sexual_image", "kind": "scalar01"},
                {"name": "violent_image", "kind": "scalar01"},
                {"name": "face_count", "kind": "count"},
                {"name": "image_objects", "kind": "spans"}
             ]},
            {"id": "topics", "transport": "builtin", "builtin": {"name": "keyword-topic", "keywords": "topics.json"}},
            {"id": "toxicity", "transport": "builtin", "builtin": {"name": "lexicon-toxicity", "weights": "toxicity.json"}}
        ],
        "analyses": analyses,
        "context": {"goal": "auditing", "phase": "data-collection-processing", "mutable": true, "release_planned": false},
        "threads": threads,
        "report_timestamp": "2024-01-01T00:00:00Z"
    });
    if let Some((size, seed)) = sample {
        plan["sample"] = json!({"size": size, "seed": seed});
    }
    plan
}

fn criterion_1() -> Check {
    let fx = planted_fixture(1000, 1);
    let p = &fx.planted;
    let started = Instant::now();
    let out = run(fx.dir.path(), &planted_plan(1, None))?;
    let elapsed = started.elapsed();
    ensure!(
        elapsed < Duration::from_secs(10),
        "single-threaded run took {elapsed:?}"
    );
    ensure!(
        out.stats.records == p.records as u64,
        "scanned {} records",
        out.stats.records
    );

    let CardOutput::Distribution(DistributionPayload::IdentityTerms(stats)) =
        &card(&out, "social_identity_terms")?.output
    else {
        return Err("identity card has the wrong output".into());
    };
    for (&(axis, group), &want) in &p.groups {
        ensure!(
            stats.group_records(axis, group) == want,
            "{axis}:{group} records {} != {want}",
            stats.group_records(axis, group)
        );
    }
    for (&term, &want) in &p.terms {
        ensure!(
            stats.terms.count(term) == want,
            "term {term} {} != {want}",
            stats.terms.count(term)
        );
    }
    for (a, _) in AGE {
        for (g, _) in GENDER {
            let want = p.intersections.get(&(*a, *g)).copied().unwrap_or(0);
            let got = stats.intersection(("age", a), ("gender", g));
            ensure!(got == Some(want), "intersection {a}x{g} {got:?} != {want}");
        }
    }
    let CardOutput::Distribution(DistributionPayload::Pronouns { distribution }) = &card(&out, "pronouns")?.output
    else {
        return Err("pronoun card has the wrong output".into());
    };
    for (group, _) in PRONOUNS {
        let want = p.pronouns.get(group).copied().unwrap_or(0);
        ensure!(
            distribution.count(group) == want,
            "pronoun {group} {} != {want}",
            distribution.count(group)
        );
    }
    let CardOutput::Distribution(DistributionPayload::HatefulTerms(h)) = &card(&out, "hateful_terms")?.output else {
        return Err("hateful card has the wrong output".into());
    };
    ensure!(h.total() == p.hateful, "hateful {} != {}", h.total(), p.hateful);
    println!(
        "    planted counts exact; full run of {} analyses in {elapsed:.2?}",
        out.cards.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Random corpora against brute force (criteria 2, 3)

const R_AGE: &[(&str, &[&str])] = &[("old", &["elderly", "seniors"]), ("young", &["teen", "youth"])];
const R_GENDER: &[(&str, &[&str])] = &[("man", &["man", "men"]), ("woman", &["woman", "women"])];
const R_FILLER: &[&str] = &["the", "cat", "doctor", "park", "blue", "ran", "apple", "sky"];
const R_TOPICS: &[&str] = &["health", "sport", "tech"];

struct Doc {
    words: Vec<&'static str>,
    topic: Option<&'static str>,
    /// Score in thousandths.
    score: Option<u32>,
}

fn random_matcher() -> TermMatcher {
    let lex = |axis: &str, set: &[(&str, &[&str])]| {
        let g = set
            .iter()
            .map(|(g, ts)| (g.to_string(), ts.iter().map(|t| t.to_string()).collect()))
            .collect();
        IdentityLexicon::new(axis, LexiconKind::Identity, "en", g).unwrap()
    };
    compile_matcher(
        &[lex("age", R_AGE), lex("gender", R_GENDER)],
        TokenizationPolicy::default(),
    )
    .unwrap()
}

fn random_corpus(seed: u64, always_topic: bool) -> Vec<Doc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vocab: Vec<&'static str> = R_FILLER.to_vec();
    for set in [R_AGE, R_GENDER] {
        for (_, ts) in set {
            vocab.extend(ts.iter());
        }
    }
    (0..rng.gen_range(0..=100))
        .map(|_| Doc {
            words: (0..rng.gen_range(0..12))
                .map(|_| *vocab.choose(&mut rng).unwrap())
                .collect(),
            topic: (always_topic || rng.gen_bool(0.9)).then(|| *R_TOPICS.choose(&mut rng).unwrap()),
            score: rng.gen_bool(0.85).then(|| rng.gen_range(0..=1000)),
        })
        .collect()
}

fn observe(docs: &[Doc], m: &TermMatcher) -> Vec<Observed> {
    docs.iter()
        .enumerate()
        .map(|(i, d)| {
            let mut s = SignalSet::default();
            if let Some(t) = d.topic {
                s.insert(
                    "topic",
                    SignalPayload::Categorical {
                        label: t.into(),
                        confidence: None,
                    },
                );
            }
            if let Some(k) = d.score {
                s.insert(
                    "toxicity",
                    SignalPayload::Scalar01 {
                        score: k as f64 / 1000.0,
                    },
                );
            }
            Observed::new(Record::text(format!("r{i}"), d.words.join(" ")), Some(m), s)
        })
        .collect()
}

fn groups_in(set: &[(&'static str, &[&'static str])], d: &Doc) -> BTreeSet<&'static str> {
    d.words
        .iter()
        .filter_map(|w| set.iter().find(|(_, ts)| ts.contains(w)).map(|(g, _)| *g))
        .collect()
}

fn kinds(name: &str) -> Option<SignalKind> {
    match name {
        "topic" => Some(SignalKind::Categorical),
        "toxicity" => Some(SignalKind::Scalar01),
        _ => None,
    }
}

fn oracle_check(docs: &[Doc]) -> Check {
    let m = random_matcher();
    let obs = observe(docs, &m);
    let n = docs.len() as u64;

    // Identity stats.
    let cfg = IdentityConfig {
        intersections: vec![("age".into(), "gender".into())],
        window: None,
    };
    let stats = identity_term_stats(&obs, &m, &cfg).map_err(|e| e.to_string())?;
    for (axis, set) in [("age", R_AGE), ("gender", R_GENDER)] {
        for (g, ts) in set {
            let want = docs.iter().filter(|d| groups_in(set, d).contains(g)).count() as u64;
            ensure!(stats.group_records(axis, g) == want, "identity {axis}:{g}");
            for t in *ts {
                let want: u64 = docs
                    .iter()
                    .map(|d| d.words.iter().filter(|w| *w == t).count() as u64)
                    .sum();
                ensure!(stats.terms.count(t) == want, "term {t}");
            }
        }
    }
    for (a, _) in R_AGE {
        for (b, _) in R_GENDER {
            let want = docs
                .iter()
                .filter(|d| groups_in(R_AGE, d).contains(a) && groups_in(R_GENDER, d).contains(b))
                .count() as u64;
            ensure!(
                stats.intersection(("age", a), ("gender", b)) == Some(want),
                "intersection {a}x{b}"
            );
        }
    }

    // Co-occurrence counts and PMI.
    let mut cc = CooccurrenceConfig::new(GroupSource::TermAxis { axis: "age".into() });
    cc.k = 1000;
    let co = top_cooccurrences(&obs, Some(&m), kinds, &cc).map_err(|e| e.to_string())?;
    for (g, own) in R_AGE {
        let with_g: Vec<&Doc> = docs.iter().filter(|d| groups_in(R_AGE, d).contains(g)).collect();
        let Some(entry) = co.groups.get(*g) else {
            ensure!(with_g.is_empty(), "missing co-occurrence group {g}");
            continue;
        };
        let mut want: BTreeMap<&str, u64> = BTreeMap::new();
        for d in &with_g {
            for w in d
                .words
                .iter()
                .copied()
                .filter(|w| !own.contains(w))
                .collect::<BTreeSet<_>>()
            {
                *want.entry(w).or_default() += 1;
            }
        }
        ensure!(entry.tokens.len() == want.len(), "co-occurrence token set for {g}");
        for ts in &entry.tokens {
            let joint = want[ts.token.as_str()];
            ensure!(ts.count == joint, "co-occurrence count {g}/{}", ts.token);
            let df = docs.iter().filter(|d| d.words.contains(&ts.token.as_str())).count() as u64;
            let pmi = ((joint * n) as f64 / (with_g.len() as u64 * df) as f64).log2();
            ensure!(close(ts.pmi, pmi), "pmi {g}/{}: {} vs {pmi}", ts.token, ts.pmi);
        }
    }

    // Lift.
    let human = GroupSource::TermAxis { axis: "age".into() };
    let table = disaggregate(
        &obs,
        Some(&m),
        kinds,
        &human,
        &ContentSource::Categorical { signal: "topic".into() },
    )
    .map_err(|e| e.to_string())?;
    let tab: Vec<&Doc> = docs
        .iter()
        .filter(|d| !groups_in(R_AGE, d).is_empty() && d.topic.is_some())
        .collect();
    let flags = association_lift(&table, 2.0, 5);
    for (g, _) in R_AGE {
        let row = tab.iter().filter(|d| groups_in(R_AGE, d).contains(g)).count() as u64;
        for t in R_TOPICS {
            let col = tab.iter().filter(|d| d.topic == Some(t)).count() as u64;
            let cell = tab
                .iter()
                .filter(|d| groups_in(R_AGE, d).contains(g) && d.topic == Some(t))
                .count() as u64;
            ensure!(table.cell(&GroupKey::term("age", g), t) == cell, "cell {g}/{t}");
            if cell > 0 {
                let lift = (cell as f64 / row as f64) / (col as f64 / tab.len() as f64);
                let f = flags
                    .iter()
                    .find(|f| f.group.value == *g && f.category == *t)
                    .ok_or("missing lift")?;
                ensure!(
                    close(f.lift, lift) && f.support == cell,
                    "lift {g}/{t}: {} vs {lift}",
                    f.lift
                );
            }
        }
    }

    // Histogram and proportion.
    let h = scalar_histogram(&obs, "toxicity", SignalKind::Scalar01, &uniform_edges(10)).map_err(|e| e.to_string())?;
    let mut want = vec![0u64; 10];
    for k in docs.iter().filter_map(|d| d.score) {
        want[((k / 100) as usize).min(9)] += 1;
    }
    ensure!(h.counts == want, "histogram {:?} vs {want:?}", h.counts);
    let scored: Vec<u32> = docs.iter().filter_map(|d| d.score).collect();
    let pr = boolean_proportion(&obs, "toxicity", SignalKind::Scalar01, Some(0.5)).map_err(|e| e.to_string())?;
    let yes = scored.iter().filter(|k| **k >= 500).count() as u64;
    ensure!(
        pr.numerator == yes && pr.denominator == scored.len() as u64,
        "proportion counts"
    );
    match pr.value {
        Some(v) => ensure!(close(v, yes as f64 / scored.len() as f64), "proportion value"),
        None => ensure!(scored.is_empty(), "proportion value missing"),
    }
    Ok(())
}

fn criterion_2() -> Check {
    for seed in 0..30 {
        oracle_check(&random_corpus(seed, false)).map_err(|e| format!("corpus {seed}: {e}"))?;
    }
    Ok(())
}

fn table_rows_match(docs: &[Doc]) -> Check {
    let m = random_matcher();
    let obs = observe(docs, &m);
    let stats = identity_term_stats(&obs, &m, &IdentityConfig::default()).map_err(|e| e.to_string())?;
    for axis in ["age", "gender"] {
        let table = disaggregate(
            &obs,
            Some(&m),
            kinds,
            &GroupSource::TermAxis { axis: axis.into() },
            &ContentSource::Categorical { signal: "topic".into() },
        )
        .map_err(|e| e.to_string())?;
        for (i, row) in table.rows.iter().enumerate() {
            let want = stats.group_records(axis, &row.value);
            ensure!(
                table.row_totals[i] == want,
                "{axis}:{} row {} != {want}",
                row.value,
                table.row_totals[i]
            );
            ensure!(table.cells[i].iter().sum::<u64>() == want, "{axis}:{} cells", row.value);
        }
    }
    Ok(())
}

fn criterion_3() -> Check {
    for seed in 100..130 {
        table_rows_match(&random_corpus(seed, true)).map_err(|e| format!("corpus {seed}: {e}"))?;
    }
    // End to end on the planted corpus: topics are single-valued on every record.
    let fx = planted_fixture(1000, 1);
    let out = run(fx.dir.path(), &planted_plan(2, None))?;
    let CardOutput::DisaggregatedTable(tables) = &card(&out, "sit_x_topic")?.output else {
        return Err("sit_x_topic has the wrong output".into());
    };
    ensure!(tables.tables.len() == 2, "expected one table per identity axis");
    for t in &tables.tables {
        let GroupSource::TermAxis { axis } = &t.table.human else {
            return Err("unexpected human side".into());
        };
        for (i, row) in t.table.rows.iter().enumerate() {
            let want = fx
                .planted
                .groups
                .iter()
                .find(|((a, g), _)| a == axis && *g == row.value)
                .map_or(0, |(_, n)| *n);
            ensure!(
                t.table.row_totals[i] == want,
                "{axis}:{} row {} != {want}",
                row.value,
                t.table.row_totals[i]
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Deduplication and mitigation (criteria 4, 9)

fn exact_dup_fixture(dir: &Path) -> Vec<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows: Vec<Value> = (0..950)
        .map(|i| json!({"id": format!("d{i:04}"), "text": random_words(&mut rng, 12).join(" ")}))
        .collect();
    for j in 0..50 {
        let text = rows[j * 19]["text"].clone();
        rows.push(json!({"id": format!("d{:04}", 950 + j), "text": text}));
    }
    write_jsonl(&dir.join("exact.jsonl"), &rows);
    rows
}

fn dedup_plan(dataset: &str, params: Value) -> Value {
    json!({
        "dataset": {"path": dataset, "format": "jsonl"},
        "analyses": [{"id": "data_duplication", "params": params}],
        "report_timestamp": "2024-01-01T00:00:00Z"
    })
}

fn shingles(words: &[String], w: usize) -> BTreeSet<&[String]> {
    words.windows(w).collect()
}

fn criterion_4() -> Check {
    let dir = tempfile::tempdir().unwrap();
    exact_dup_fixture(dir.path());
    let out = run(dir.path(), &dedup_plan("exact.jsonl", json!({"mode": "exact"})))?;
    let CardOutput::DuplicateReport(r) = &card(&out, "data_duplication")?.output else {
        return Err("wrong output".into());
    };
    ensure!(r.proportion == Some(0.05), "exact proportion {:?}", r.proportion);
    ensure!(
        r.duplicates == 50 && r.clusters.len() == 50,
        "{} duplicates in {} clusters",
        r.duplicates,
        r.clusters.len()
    );

    // Near duplicates: 50 planted pairs with one substituted token, 100 decoys.
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut min_jaccard = 1.0f64;
    for i in 0..50 {
        let base = random_words(&mut rng, 60);
        let mut copy = base.clone();
        let at = rng.gen_range(0..60);
        copy[at] = format!("edit{i}");
        let (a, b) = (shingles(&base, 5), shingles(&copy, 5));
        let jaccard = a.intersection(&b).count() as f64 / a.union(&b).count() as f64;
        min_jaccard = min_jaccard.min(jaccard);
        ensure!(jaccard >= 0.8, "planted pair {i} has Jaccard {jaccard}");
        let (x, y) = (format!("n{i:03}a"), format!("n{i:03}b"));
        rows.push(json!({"id": x, "text": base.join(" ")}));
        rows.push(json!({"id": y, "text": copy.join(" ")}));
        pairs.push((x, y));
    }
    let decoys: BTreeSet<String> = (0..100).map(|i| format!("z{i:03}")).collect();
    for id in &decoys {
        rows.push(json!({"id": id, "text": random_words(&mut rng, 60).join(" ")}));
    }
    rows.shuffle(&mut rng);
    write_jsonl(&dir.path().join("near.jsonl"), &rows);
    let params = json!({"mode": "near", "shingle_width": 5, "permutations": 128, "seed": 7});
    let out = run(dir.path(), &dedup_plan("near.jsonl", params))?;
    let CardOutput::DuplicateReport(r) = &card(&out, "data_duplication")?.output else {
        return Err("wrong output".into());
    };
    let found = pairs
        .iter()
        .filter(|(x, y)| r.clusters.iter().any(|c| c.contains(x) && c.contains(y)))
        .count();
    let false_clusters = r
        .clusters
        .iter()
        .filter(|c| c.iter().any(|id| decoys.contains(id)) || c.len() != 2)
        .count();
    ensure!(found >= 48, "only {found}/50 planted pairs clustered");
    ensure!(false_clusters == 0, "{false_clusters} false clusters");
    println!("    exact proportion 0.050; near-dup {found}/50 pairs (min Jaccard {min_jaccard:.3}), 0 false clusters");
    Ok(())
}

fn criterion_9() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let rows = exact_dup_fixture(dir.path());
    let plan = load(dir.path(), &dedup_plan("exact.jsonl", json!({"mode": "exact"})))?;
    let out = dir.path().join("removed.jsonl");
    let (m, _) =
        mitigate(&plan, &SelectionSpec::Duplicates, MitigationMode::Remove, &out).map_err(|e| e.to_string())?;
    let kept: Vec<Value> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    ensure!(
        m.records_in == m.records_out + m.affected,
        "{} != {} + {}",
        m.records_in,
        m.records_out,
        m.affected
    );
    ensure!(
        m.records_in == 1000 && kept.len() as u64 == m.records_out,
        "output has {} lines",
        kept.len()
    );
    // Exactly one member per cluster survives, and it is the lowest id.
    let mut by_text: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in &rows {
        by_text
            .entry(r["text"].as_str().unwrap())
            .or_default()
            .push(r["id"].as_str().unwrap());
    }
    let kept_ids: BTreeSet<&str> = kept.iter().map(|r| r["id"].as_str().unwrap()).collect();
    for ids in by_text.values() {
        let survivors: Vec<&&str> = ids.iter().filter(|id| kept_ids.contains(**id)).collect();
        ensure!(survivors.len() == 1, "{} survivors for {ids:?}", survivors.len());
        ensure!(
            *survivors[0] == *ids.iter().min().unwrap(),
            "kept {} not the lowest of {ids:?}",
            survivors[0]
        );
    }

    let tagged = dir.path().join("tagged.jsonl");
    let (m, _) =
        mitigate(&plan, &SelectionSpec::Duplicates, MitigationMode::Tag, &tagged).map_err(|e| e.to_string())?;
    ensure!(
        m.records_in == m.records_out && m.affected == 50,
        "tag counts {} {} {}",
        m.records_in,
        m.records_out,
        m.affected
    );
    let before = std::fs::read_to_string(dir.path().join("exact.jsonl")).unwrap();
    let after = std::fs::read_to_string(&tagged).unwrap();
    ensure!(
        before.lines().count() == after.lines().count(),
        "tag mode changed the record count"
    );
    let selected: BTreeSet<&str> = m.ids.iter().map(String::as_str).collect();
    for (a, b) in before.lines().zip(after.lines()) {
        let id = serde_json::from_str::<Value>(a).unwrap()["id"]
            .as_str()
            .unwrap()
            .to_owned();
        if selected.contains(id.as_str()) {
            let v: Value = serde_json::from_str(b).unwrap();
            ensure!(v["meta"]["daf_tags"] == "duplicate", "{id} not tagged");
        } else {
            ensure!(a == b, "{id} changed");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Overlap and provenance (criteria 5, 6)

fn criterion_5() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<String> = (0..1000).map(|_| random_words(&mut rng, 20).join(" ")).collect();
    let rows: Vec<Value> = a
        .iter()
        .enumerate()
        .map(|(i, t)| json!({"id": format!("a{i:04}"), "text": t}))
        .collect();
    write_jsonl(&dir.path().join("a.jsonl"), &rows);
    let mut b = Vec::new();
    for i in (0..1000).step_by(10) {
        b.push(json!({"id": format!("copy{i}"), "text": a[i]}));
    }
    for i in [3, 205, 407, 609, 811] {
        b.push(json!({"id": format!("contain{i}"), "text": format!("prefix words here {} and a suffix", a[i])}));
    }
    for i in 0..200 {
        b.push(json!({"id": format!("other{i}"), "text": random_words(&mut rng, 20).join(" ")}));
    }
    write_jsonl(&dir.path().join("b.jsonl"), &b);
    let plan = |mode: &str| {
        json!({
            "dataset": {"path": "a.jsonl", "format": "jsonl", "label": "A"},
            "comparison_dataset": {"path": "b.jsonl", "format": "jsonl", "label": "B"},
            "analyses": [{"id": "dataset_overlap", "params": {"mode": mode}}],
            "report_timestamp": "2024-01-01T00:00:00Z"
        })
    };
    let report = |mode: &str| -> Result<daf_core::provenance::OverlapReport, String> {
        let out = run(dir.path(), &plan(mode))?;
        match &card(&out, "dataset_overlap")?.output {
            CardOutput::OverlapReport(r) => Ok(r.clone()),
            _ => Err("wrong output".into()),
        }
    };
    let exact = report("exact-text")?;
    ensure!(
        exact.matched == 100 && exact.percent == Some(10.0),
        "exact {} ({:?}%)",
        exact.matched,
        exact.percent
    );
    let ngram = report("ngram-containment")?;
    ensure!(ngram.matched == 105, "n-gram mode matched {}", ngram.matched);
    Ok(())
}

fn criterion_6() -> Check {
    ensure!(
        SuffixList::bundled().registrable_domain("news.bbc.co.uk").as_deref() == Some("bbc.co.uk"),
        "suffix-aware registrable domain"
    );
    let r = Record::text("x", "t").with_meta("url", "https://news.bbc.co.uk/story");
    ensure!(
        source_domain(&r).as_deref() == Some("bbc.co.uk"),
        "source domain of news.bbc.co.uk"
    );

    let dir = tempfile::tempdir().unwrap();
    let planted_urls = [
        ("https://news.bbc.co.uk/a", "United Kingdom", 7u64),
        ("https://www.spiegel.de/b", "Germany", 5),
        ("https://myjoyonline.com.gh/c", "Ghana", 3),
        ("https://example.com/d", "unattributed", 4),
    ];
    let planted_years = [(2014, 6u64), (2017, 9), (2020, 4)];
    let mut rows = Vec::new();
    let mut years = planted_years
        .iter()
        .flat_map(|(y, n)| std::iter::repeat_n(*y, *n as usize));
    for (url, _, n) in planted_urls {
        for _ in 0..n {
            let mut meta = json!({"url": url});
            if let Some(y) = years.next() {
                meta["timestamp"] = json!(format!("{y}-02-03T04:05:06Z"));
            }
            rows.push(json!({"id": format!("g{}", rows.len()), "text": "some words here", "meta": meta}));
        }
    }
    rows.push(json!({"id": "nourl", "text": "no provenance", "meta": {"timestamp": "not-a-date"}}));
    write_jsonl(&dir.path().join("web.jsonl"), &rows);
    let plan = json!({
        "dataset": {"path": "web.jsonl", "format": "jsonl"},
        "analyses": [{"id": "source_geography"}, {"id": "top_sources"}, {"id": "publication_time"}],
        "report_timestamp": "2024-01-01T00:00:00Z"
    });
    let out = run(dir.path(), &plan)?;
    let CardOutput::Distribution(DistributionPayload::Geography(g)) = &card(&out, "source_geography")?.output else {
        return Err("geography card has the wrong output".into());
    };
    for (_, country, n) in planted_urls {
        ensure!(
            g.records.count(country) == n,
            "{country}: {} != {n}",
            g.records.count(country)
        );
    }
    let CardOutput::RankedList(RankedListPayload::Sources(s)) = &card(&out, "top_sources")?.output else {
        return Err("sources card has the wrong output".into());
    };
    ensure!(
        s.ranked.iter().any(|d| d.domain == "bbc.co.uk" && d.records == 7),
        "bbc.co.uk not ranked with 7 records"
    );
    let CardOutput::Histogram(HistogramPayload::Years(h)) = &card(&out, "publication_time")?.output else {
        return Err("publication card has the wrong output".into());
    };
    let want: BTreeMap<i32, u64> = planted_years.iter().copied().collect();
    ensure!(h.years == want, "years {:?} != {want:?}", h.years);
    ensure!(h.missing == 1, "missing {}", h.missing);
    Ok(())
}

// ---------------------------------------------------------------------------
// Determinism, schema, demos (criteria 7, 8, 10)

fn report_bytes(dir: &Path, plan: &Value, out: &str) -> Result<Vec<u8>, String> {
    let result = run(dir, plan)?;
    let target = dir.join(out);
    write_reports(&result, &target).map_err(|e| e.to_string())?;
    Ok(std::fs::read(target.join(REPORT_JSON)).unwrap())
}

fn criterion_7() -> Check {
    let fx = planted_fixture(1000, 7);
    let d = fx.dir.path();
    let plan = load(d, &planted_plan(8, None))?;
    let shards = plan.dataset.shards(8).map_err(|e| e.to_string())?.len();
    ensure!(shards == 8, "dataset split into {shards} shards, expected 8");
    let one = report_bytes(d, &planted_plan(1, None), "t1")?;
    let two = report_bytes(d, &planted_plan(2, None), "t2")?;
    let eight = report_bytes(d, &planted_plan(8, None), "t8")?;
    ensure!(one == two && one == eight, "reports differ across 1/2/8 shards");
    let again = report_bytes(d, &planted_plan(8, None), "t8b")?;
    ensure!(one == again, "repeated run differs");
    let s1 = report_bytes(d, &planted_plan(1, Some((300, 11))), "s1")?;
    let s8 = report_bytes(d, &planted_plan(8, Some((300, 11))), "s8")?;
    let s1b = report_bytes(d, &planted_plan(1, Some((300, 11))), "s1b")?;
    ensure!(s1 == s8 && s1 == s1b, "sampled reports differ");
    Ok(())
}

fn criterion_8() -> Check {
    let fx = planted_fixture(300, 8);
    let d = fx.dir.path();
    let result = run(d, &planted_plan(2, None))?;
    write_reports(&result, &d.join("report")).map_err(|e| e.to_string())?;
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report").join(REPORT_JSON)).unwrap()).unwrap();
    let cards = report["cards"].as_array().ok_or("no cards")?;
    ensure!(
        cards.len() == registry().len(),
        "{} cards for {} registry entries",
        cards.len(),
        registry().len()
    );
    for c in cards {
        let id = c["analysis_id"].as_str().unwrap_or("?");
        ensure!(c["task"].as_str().is_some_and(|s| !s.is_empty()), "{id}: task");
        ensure!(
            c["analysis_object"].as_array().is_some_and(|a| !a.is_empty()),
            "{id}: analysis_object"
        );
        ensure!(c["effort"].is_string() && c["effort_label"].is_string(), "{id}: effort");
        ensure!(
            c["dependencies"]
                .as_array()
                .is_some_and(|a| a.iter().all(|x| x["requirement"].is_string())),
            "{id}: dependencies"
        );
        ensure!(c["output"]["type"].is_string(), "{id}: output");
        ensure!(c["action"].as_array().is_some_and(|a| !a.is_empty()), "{id}: action");
        for key in [
            "config_digest",
            "dataset",
            "records_scanned",
            "timestamp",
            "tool_version",
        ] {
            ensure!(!c["provenance"][key].is_null(), "{id}: provenance.{key}");
        }
    }

    let listing = Command::new(env!("CARGO_BIN_EXE_daf"))
        .arg("list-analyses")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(listing.status.success(), "list-analyses failed");
    let text = String::from_utf8_lossy(&listing.stdout).into_owned();
    let listed: BTreeSet<&str> = text.lines().skip(1).filter_map(|l| l.split('\t').next()).collect();
    let registered: BTreeSet<&str> = registry().iter().map(|s| s.id).collect();
    ensure!(listed == registered, "list-analyses ids differ from the registry");
    ensure!(listed.len() >= 28, "only {} analyses listed", listed.len());
    ensure!(
        listed.contains("hateful_symbols") && listed.contains("psi_x_hateful_symbols"),
        "hateful-symbol cards missing"
    );
    for id in ["hateful_symbols", "psi_x_hateful_symbols"] {
        ensure!(
            matches!(card(&result, id)?.output, CardOutput::Unsupported { .. }),
            "{id} is not Unsupported"
        );
    }

    let deficit = TargetDeficit {
        label: "old".into(),
        observed: 1,
        target_share: 0.5,
        additional_records: 10,
    };
    let mut sweeps = 0u64;
    for base in &result.cards {
        for with_deficit in [false, true] {
            let mut c = base.clone();
            if with_deficit {
                c.target_deficits = vec![deficit.clone()];
            }
            for limit in [0.0, 0.05, 1.0] {
                for goal in Goal::ALL {
                    for phase in Phase::ALL {
                        for mutable in [false, true] {
                            for release_planned in [false, true] {
                                let ctx = AuditPlanContext {
                                    goal,
                                    phase,
                                    mutable,
                                    release_planned,
                                };
                                for r in recommend_actions(
                                    &c,
                                    &ctx,
                                    &ActionThresholds {
                                        proportion_limit: limit,
                                    },
                                ) {
                                    ensure!(
                                        legal_actions(r.phase).contains(&r.action),
                                        "{}: {:?} in {:?}",
                                        c.analysis_id,
                                        r.action,
                                        r.phase
                                    );
                                }
                                sweeps += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    println!(
        "    {} cards, {} listed analyses, {sweeps} action sweeps",
        cards.len(),
        listed.len()
    );
    Ok(())
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn criterion_10() -> Check {
    let root = workspace_root();
    let out_root = tempfile::tempdir().unwrap();
    for (demo, want) in [
        ("age-in-c4-style-text", Some(("sit_x_topic", "old_age", "medical"))),
        ("queer-representation-in-caption-pairs", None),
    ] {
        let out = out_root.path().join(demo);
        let status = Command::new(env!("CARGO_BIN_EXE_daf"))
            .current_dir(&root)
            .args(["run", &format!("demos/{demo}/plan.json"), "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            status.status.code() == Some(0),
            "{demo} exited with {:?}: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        );
        let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join(REPORT_JSON)).unwrap()).unwrap();
        let mut flagged = Vec::new();
        for c in report["cards"].as_array().unwrap() {
            if c["output"]["type"] == "DisaggregatedTable" {
                for t in c["output"]["tables"].as_array().unwrap() {
                    for a in t["associations"].as_array().unwrap() {
                        if a["flagged"] == true {
                            flagged.push((c["analysis_id"].as_str().unwrap().to_owned(), a.clone()));
                        }
                    }
                }
            }
        }
        ensure!(!flagged.is_empty(), "{demo}: no flagged associations");
        if let Some((id, group, category)) = want {
            let hit = flagged
                .iter()
                .find(|(c, a)| c == id && a["group"]["value"] == group && a["category"] == category);
            let (_, a) = hit.ok_or_else(|| format!("{demo}: {group} x {category} not flagged"))?;
            ensure!(a["lift"].as_f64().unwrap() > 2.0, "{demo}: lift {}", a["lift"]);
            println!(
                "    {demo}: {group} x {category} lift {} support {}",
                a["lift"], a["support"]
            );
        } else {
            println!("    {demo}: {} flagged associations", flagged.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("planted counts and single-threaded run time", criterion_1),
        ("oracle equivalence on 30 random corpora", criterion_2),
        ("table rows equal unitary group counts", criterion_3),
        ("exact and near duplicate detection", criterion_4),
        ("exact-text and n-gram overlap", criterion_5),
        ("ccTLDs, registrable domains and publication years", criterion_6),
        ("identical reports across 1, 2 and 8 shards", criterion_7),
        ("card schema, registry listing and action legality", criterion_8),
        ("mitigation count arithmetic and byte preservation", criterion_9),
        ("demo plans run and flag planted skews", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(()) => println!("criterion {}: PASS {name}", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {e}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
