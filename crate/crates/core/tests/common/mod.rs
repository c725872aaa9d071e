//! A self-contained fixture exercising every registry analysis.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use daf_core::plan::{validate_plan, AuditPlan};
use daf_core::registry::registry;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const WORDS: &[&str] = &[
    "the", "river", "market", "doctor", "hospital", "game", "team", "bread", "sunny", "quiet", "city", "report",
];
const IDENTITY: &[&str] = &[
    "elderly",
    "seniors",
    "teenagers",
    "youth",
    "woman",
    "women",
    "man",
    "men",
];
const PRONOUNS: &[&str] = &["she", "he", "they", "her", "him"];
const URLS: &[&str] = &[
    "https://news.bbc.co.uk/a",
    "https://www.spiegel.de/b",
    "https://myjoyonline.com.gh/c",
    "https://example.com/d",
    "https://blog.example.org/e",
];
const PERCEIVED: &[&str] = &["feminine-presenting", "masculine-presenting", "unclear"];
const DIALECTS: &[&str] = &["dialect-a", "dialect-b"];
const OBJECTS: &[&str] = &["dog", "car", "cup"];

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub plan: PathBuf,
    pub dataset: PathBuf,
    pub records: usize,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn load(&self) -> AuditPlan {
        validate_plan(&self.plan).unwrap()
    }

    /// Rewrites the plan with `edit` applied to its JSON.
    pub fn edit_plan(&self, edit: impl FnOnce(&mut Value)) {
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&self.plan).unwrap()).unwrap();
        edit(&mut v);
        std::fs::write(&self.plan, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    }
}

fn write(dir: &Path, name: &str, body: impl AsRef<[u8]>) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// Writes a corpus of `n` records, a comparison corpus, lexicons, provider
/// resources and a plan listing every registered analysis.
pub fn kitchen_sink(n: usize, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = String::new();
    let mut manifest = String::new();
    let mut texts: Vec<String> = Vec::new();
    for i in 0..n {
        let mut words: Vec<String> = (0..rng.gen_range(3..14))
            .map(|_| WORDS.choose(&mut rng).unwrap().to_string())
            .collect();
        if rng.gen_bool(0.5) {
            words.push(IDENTITY.choose(&mut rng).unwrap().to_string());
        }
        if rng.gen_bool(0.3) {
            words.push(IDENTITY.choose(&mut rng).unwrap().to_string());
        }
        if rng.gen_bool(0.5) {
            words.push(PRONOUNS.choose(&mut rng).unwrap().to_string());
        }
        if rng.gen_bool(0.05) {
            words.push("zorbo".into());
        }
        if rng.gen_bool(0.1) {
            words.push("idiot".into());
        }
        words.shuffle(&mut rng);
        let mut text = words.join(" ");
        if rng.gen_bool(0.05) {
            text.push_str(" write to someone@example.com");
        }
        if i % 17 == 16 {
            text = texts[i - 3].clone();
        }
        texts.push(text.clone());
        let id = format!("rec-{i:04}");
        let year = rng.gen_range(2010..2022);
        corpus.push_str(
            &json!({
                "id": id,
                "text": text,
                "image": format!("img/{i}.jpg"),
                "meta": {"url": URLS.choose(&mut rng).unwrap(), "timestamp": format!("{year}-05-01")},
            })
            .to_string(),
        );
        corpus.push('\n');
        let spans: Vec<(usize, usize, &str)> = vec![(0, 10, OBJECTS.choose(&mut rng).unwrap())];
        manifest.push_str(
            &json!({
                "id": id,
                "values": [
                    {"signal": "perceived_identity", "kind": "categorical", "label": PERCEIVED.choose(&mut rng).unwrap()},
                    {"signal": "dialect", "kind": "categorical", "label": DIALECTS.choose(&mut rng).unwrap()},
                    {"signal": "sexual_image", "kind": "scalar01", "score": rng.gen_range(0..100) as f64 / 100.0},
                    {"signal": "violent_image", "kind": "scalar01", "score": rng.gen_range(0..100) as f64 / 100.0},
                    {"signal": "face_count", "kind": "count", "count": rng.gen_range(0..3)},
                    {"signal": "image_objects", "kind": "spans", "spans": spans},
                ],
            })
            .to_string(),
        );
        manifest.push('\n');
    }
    let dataset = write(d, "corpus.jsonl", corpus);
    write(d, "signals.jsonl", manifest);
    // A comparison corpus holding copies of every tenth record.
    let mut other = String::new();
    for (i, t) in texts.iter().enumerate().step_by(10) {
        other.push_str(&json!({"id": format!("b-{i}"), "text": t}).to_string());
        other.push('\n');
    }
    other.push_str(&json!({"id": "b-extra", "text": "an unrelated benchmark sentence"}).to_string());
    other.push('\n');
    write(d, "benchmark.jsonl", other);

    write(
        d,
        "age.json",
        json!({"axis": "age", "kind": "identity", "locale": "en",
               "groups": {"old": ["elderly", "seniors"], "young": ["teenagers", "youth"]}})
        .to_string(),
    );
    write(
        d,
        "gender.json",
        json!({"axis": "gender", "kind": "identity", "locale": "en",
               "groups": {"woman": ["woman", "women"], "man": ["man", "men"]}})
        .to_string(),
    );
    write(
        d,
        "pronouns.json",
        json!({"axis": "pronoun", "kind": "pronoun", "locale": "en",
               "groups": {"she/her": ["she", "her"], "he/him": ["he", "him"], "they/them": ["they"]}})
        .to_string(),
    );
    write(
        d,
        "hateful.json",
        json!({"axis": "hateful", "kind": "hateful", "locale": "en", "groups": {"old": ["zorbo"]}}).to_string(),
    );
    write(
        d,
        "topics.json",
        json!({"health": ["doctor", "hospital"], "sport": ["game", "team"], "food": ["bread"]}).to_string(),
    );
    write(d, "toxicity.json", json!({"idiot": 0.8, "quiet": 0.1}).to_string());

    let analyses: Vec<Value> = registry()
        .iter()
        .map(|s| match s.id {
            "social_identity_terms" => json!({"id": s.id, "params": {"intersections": [["age", "gender"]]}}),
            _ => json!({"id": s.id}),
        })
        .collect();
    let plan = json!({
        "dataset": {"path": "corpus.jsonl", "format": "jsonl", "label": "fixture"},
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
        "output_dir": "out",
        "report_timestamp": "2024-01-01T00:00:00Z"
    });
    let plan_path = write(d, "plan.json", serde_json::to_string_pretty(&plan).unwrap());
    Fixture {
        dir,
        plan: plan_path,
        dataset,
        records: n,
    }
}
