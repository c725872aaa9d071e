//! Regenerates the synthetic corpora under `demos/`.
//!
//! ```text
//! cargo run -p daf-core --example gen_demo_fixtures -- demos
//! ```
//!
//! Both corpora are seeded, so the output is identical on every run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const TOPIC_SENTENCES: &[(&str, &[&str])] = &[
    (
        "medical",
        &[
            "the doctor adjusted the medication after a long visit to the hospital",
            "the clinic offers care for dementia and other chronic illness",
            "a nurse at the hospital explained the new medication schedule",
            "the doctor said regular care can slow the illness",
        ],
    ),
    (
        "sports",
        &[
            "the team won the match after a late goal in the second half",
            "fans filled the stadium to watch the football final",
            "the coach praised the team for a strong season",
        ],
    ),
    (
        "technology",
        &[
            "the new phone ships with a faster chip and a larger screen",
            "developers released a software update for the laptop",
            "the startup built an app that runs on every phone",
        ],
    ),
    (
        "finance",
        &[
            "the bank raised interest rates for the third time this year",
            "investors moved money into bonds as the market fell",
            "the budget includes new tax rules for small business",
        ],
    ),
    (
        "food",
        &[
            "the recipe calls for fresh basil and a slow simmered sauce",
            "the bakery on the corner sells bread every morning",
            "the restaurant added a vegetarian dish to the menu",
        ],
    ),
];

const AGE_GROUPS: &[(&str, &[&str], &[&str])] = &[
    (
        "old_age",
        &["elderly", "seniors", "old people", "retirees"],
        &[
            "many {} live on a pension after retirement",
            "{} in the town often need support at home",
        ],
    ),
    (
        "young",
        &["teenagers", "young people", "youth"],
        &[
            "{} spend evenings at the community center",
            "the program helps {} find summer work",
        ],
    ),
    (
        "middle_aged",
        &["middle-aged adults", "middle aged workers"],
        &["{} balance careers and family", "surveys of {} show long commutes"],
    ),
];

const PRONOUN_SENTENCES: &[&str] = &[
    "she said the results were encouraging",
    "he told reporters the plan was on schedule",
    "they said more details would follow",
    "her family thanked the volunteers",
    "his office declined to comment",
];

const TOXIC_SENTENCES: &[&str] = &[
    "one commenter called the decision stupid",
    "another reader wrote that the idea was garbage",
    "a reply said only an idiot would agree",
];

const FOREIGN_TEXTS: &[&str] = &[
    "el ayuntamiento aprobó un nuevo presupuesto para las escuelas de la ciudad y los vecinos celebraron la decisión",
    "die stadt hat einen neuen haushalt für die schulen beschlossen und die bürger begrüßen die entscheidung",
];

const PLACES: &[&str] = &[
    "the harbour district",
    "the north side",
    "a village nearby",
    "the old town",
    "the river valley",
    "the city center",
];

const FILLER: &[&str] = &[
    "amid",
    "rain",
    "early",
    "monday",
    "tuesday",
    "friday",
    "crowds",
    "quiet",
    "streets",
    "morning",
    "evening",
    "local",
    "officials",
    "residents",
    "noted",
    "briefly",
    "later",
    "again",
    "nearby",
    "weather",
    "traffic",
    "market",
    "square",
    "bridge",
    "station",
    "windy",
    "sunny",
    "busy",
    "calm",
    "week",
    "season",
    "spring",
    "autumn",
    "winter",
    "summer",
];

const HOSTS: &[&str] = &[
    "https://news.bbc.co.uk/",
    "https://www.theguardian.co.uk/",
    "https://www.spiegel.de/",
    "https://www.myjoyonline.com.gh/",
    "https://www.abc.net.au/",
    "https://www.lemonde.fr/",
    "https://blog.example.com/",
    "https://www.example.org/",
    "https://forum.example.net/",
    "https://www.cbc.ca/",
];

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    xs.choose(rng).expect("non-empty")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn sentences_text(parts: &[String]) -> String {
    parts
        .iter()
        .map(|p| format!("{}.", capitalize(p)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// News-style text where old-age terms co-occur with medical topics.
fn age_corpus(dir: &Path) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
    let mut out = String::new();
    let mut lines: Vec<String> = Vec::new();
    for i in 0..985 {
        let age_draw: f64 = rng.gen();
        let age = match age_draw {
            x if x < 0.15 => Some(0),
            x if x < 0.30 => Some(1),
            x if x < 0.40 => Some(2),
            _ => None,
        };
        let topic = if (age == Some(0) && rng.gen_bool(0.8)) || rng.gen_bool(0.06) {
            0
        } else {
            rng.gen_range(1..TOPIC_SENTENCES.len())
        };
        let mut parts = vec![pick(&mut rng, TOPIC_SENTENCES[topic].1).to_string()];
        if let Some(a) = age {
            let (_, terms, templates) = AGE_GROUPS[a];
            let t = pick(&mut rng, templates).replace("{}", pick(&mut rng, terms));
            parts.push(t);
        }
        if rng.gen_bool(0.6) {
            parts.push(pick(&mut rng, PRONOUN_SENTENCES).to_string());
        }
        if rng.gen_bool(0.05) {
            parts.push(pick(&mut rng, TOXIC_SENTENCES).to_string());
        }
        let filler: Vec<&str> = (0..rng.gen_range(6..10)).map(|_| *pick(&mut rng, FILLER)).collect();
        parts.push(format!(
            "reporting from {} {}",
            pick(&mut rng, PLACES),
            filler.join(" ")
        ));
        parts.shuffle(&mut rng);
        let mut text = sentences_text(&parts);
        if rng.gen_bool(0.02) {
            text = pick(&mut rng, FOREIGN_TEXTS).to_string();
        }
        if rng.gen_bool(0.02) {
            write!(text, " Contact the newsroom at tips{i}@example.com.").unwrap();
        }
        let year = rng.gen_range(2015..=2021);
        let month = rng.gen_range(1..=12);
        let day = rng.gen_range(1..=28);
        let url = format!("{}article/{i}", pick(&mut rng, HOSTS));
        lines.push(
            json!({
                "id": format!("doc-{i:04}"),
                "text": text,
                "meta": {"url": url, "timestamp": format!("{year}-{month:02}-{day:02}")},
            })
            .to_string(),
        );
    }
    // Exact reposts of earlier articles under new ids.
    for j in 0..15 {
        let src: serde_json::Value = serde_json::from_str(&lines[j * 7]).unwrap();
        let mut copy = src.clone();
        copy["id"] = json!(format!("doc-{:04}", 985 + j));
        lines.push(copy.to_string());
    }
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    std::fs::write(dir.join("corpus.jsonl"), out)
}

const ORIENTATION_TERMS: &[(&str, &[&str])] = &[
    ("lesbian", &["lesbian", "lesbians"]),
    ("gay", &["gay"]),
    ("bisexual", &["bisexual"]),
    ("straight", &["straight", "heterosexual"]),
];

const SUBJECTS: &[&str] = &[
    "a woman",
    "a man",
    "two women",
    "two men",
    "a couple",
    "a person",
    "friends",
];
const SCENES: &[&str] = &[
    "walking a dog in the park",
    "sitting at a cafe table",
    "posing at a wedding",
    "holding hands on the beach",
    "riding bicycles downtown",
    "cooking in a small kitchen",
    "dancing at a festival",
];
const OBJECTS: &[&str] = &["dog", "bicycle", "table", "cup", "flower", "car", "umbrella"];
const PERCEIVED: &[&str] = &["feminine-presenting", "masculine-presenting", "unclear"];

/// Image-caption pairs where captions with queer identity terms co-occur with
/// images scored as sexual.
fn caption_corpus(dir: &Path) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_502);
    let mut corpus = String::new();
    let mut manifest = String::new();
    for i in 0..1000 {
        let draw: f64 = rng.gen();
        let orientation = match draw {
            x if x < 0.035 => Some(0),
            x if x < 0.07 => Some(1),
            x if x < 0.085 => Some(2),
            x if x < 0.25 => Some(3),
            _ => None,
        };
        let scene = pick(&mut rng, SCENES);
        let (subject, caption) = match orientation {
            Some(o) => {
                let term = pick(&mut rng, ORIENTATION_TERMS[o].1);
                let subject = match o {
                    0 => "two women",
                    1 => "two men",
                    _ => *pick(&mut rng, &["a woman", "a man"]),
                };
                let caption = match o {
                    0 => format!("{term} couple, two women {scene}"),
                    1 => format!("{term} couple, two men {scene}"),
                    _ => format!("{term} {} {scene}", &subject[2..]),
                };
                (subject, capitalize(&caption))
            }
            None => {
                let subject = *pick(&mut rng, SUBJECTS);
                (subject, capitalize(&format!("{subject} {scene}")))
            }
        };
        let queer = matches!(orientation, Some(0..=2));
        let sexual = if queer && rng.gen_bool(0.6) || !queer && rng.gen_bool(0.04) {
            rng.gen_range(0.6..0.99)
        } else {
            rng.gen_range(0.0..0.3)
        };
        let violent = if rng.gen_bool(0.03) {
            rng.gen_range(0.6..0.95)
        } else {
            rng.gen_range(0.0..0.2)
        };
        let perceived = if subject.contains("woman") || subject.contains("women") {
            PERCEIVED[0]
        } else if subject.contains("man") || subject.contains("men") {
            PERCEIVED[1]
        } else {
            *pick(&mut rng, PERCEIVED)
        };
        let faces: u64 = if subject.starts_with("two") || subject == "a couple" || subject == "friends" {
            2
        } else {
            1
        };
        let n_obj = rng.gen_range(1..=3);
        let objects: Vec<(usize, usize, String)> = OBJECTS
            .choose_multiple(&mut rng, n_obj)
            .enumerate()
            .map(|(k, o)| (k * 100, k * 100 + 64, o.to_string()))
            .collect();
        let image = format!("images/{i:05}.jpg");
        corpus.push_str(&json!({"id": format!("pair-{i:04}"), "text": caption, "image": image}).to_string());
        corpus.push('\n');
        manifest.push_str(
            &json!({
                "image": image,
                "values": [
                    {"signal": "perceived_identity", "kind": "categorical", "label": perceived},
                    {"signal": "sexual_image", "kind": "scalar01", "score": (sexual * 1000.0_f64).round() / 1000.0},
                    {"signal": "violent_image", "kind": "scalar01", "score": (violent * 1000.0_f64).round() / 1000.0},
                    {"signal": "face_count", "kind": "count", "count": faces},
                    {"signal": "image_objects", "kind": "spans", "spans": objects},
                ],
            })
            .to_string(),
        );
        manifest.push('\n');
    }
    std::fs::write(dir.join("pairs.jsonl"), corpus)?;
    std::fs::write(dir.join("image_signals.jsonl"), manifest)
}

fn main() -> std::io::Result<()> {
    let root: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "demos".into()).into();
    let age = root.join("age-in-c4-style-text");
    let captions = root.join("queer-representation-in-caption-pairs");
    std::fs::create_dir_all(&age)?;
    std::fs::create_dir_all(&captions)?;
    age_corpus(&age)?;
    caption_corpus(&captions)?;
    println!("wrote fixtures under {}", root.display());
    Ok(())
}
