//! External provider transports against stub servers: a Python process on
//! stdio and an HTTP endpoint on a local socket.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;

use daf_core::corpus::Record;
use daf_core::engine::run_plan;
use daf_core::plan::validate_plan_str;
use daf_core::report::{CardOutput, HistogramPayload};
use daf_core::signals::{endpoint_override_var, query_provider, Provider, ProviderConfig};
use daf_core::signals::{SignalPayload, SignalValue};
use daf_core::Error;
use serde_json::{json, Value};

const STUB: &str = r#"
import json, sys

mode = sys.argv[1]
header = sys.stdin.readline()
if mode == "badheader":
    print(json.dumps({"daf_protocol": 2}), flush=True)
    sys.exit(0)
print(json.dumps({"daf_protocol": 1}), flush=True)
if mode == "exit":
    sys.exit(0)
for line in sys.stdin:
    req = json.loads(line)
    text = req["text"] or ""
    if "bad" in req["id"]:
        out = {"id": req["id"], "error": "cannot score"}
    elif mode == "wrongkind":
        out = {"id": req["id"], "values": [{"signal": "toxicity", "kind": "categorical", "label": "x"}]}
    else:
        values = []
        for s in req["signals"]:
            if s == "toxicity":
                values.append({"signal": s, "kind": "scalar01", "score": (len(text) % 10) / 10})
            elif s == "topic":
                values.append({"signal": s, "kind": "categorical", "label": text.split(" ")[0], "score": 0.5})
            elif s == "objects":
                values.append({"signal": s, "kind": "spans", "spans": [[0, 1, "cat"]]})
        out = {"id": req["id"], "values": values, "ignored": True}
    print(json.dumps(out), flush=True)
"#;

fn stub_script(dir: &std::path::Path) -> PathBuf {
    let p = dir.join("stub.py");
    std::fs::write(&p, STUB).unwrap();
    p
}

fn signals() -> Value {
    json!([
        {"name": "toxicity", "kind": "scalar01"},
        {"name": "topic", "kind": "categorical"},
        {"name": "objects", "kind": "spans"}
    ])
}

fn subprocess(dir: &std::path::Path, mode: &str, required: bool) -> Provider {
    let cfg: ProviderConfig = serde_json::from_value(json!({
        "id": "stub",
        "transport": "subprocess-lines",
        "command": ["python3", stub_script(dir).to_str().unwrap(), mode],
        "signals": signals(),
        "batch_size": 4,
        "timeout_ms": 5000,
        "retries": 1,
        "required": required,
    }))
    .unwrap();
    Provider::from_config(&cfg).unwrap()
}

fn records(n: usize) -> Vec<Record> {
    (0..n)
        .map(|i| Record::text(format!("r{i}"), format!("word{} {}", i % 3, "x".repeat(i))))
        .collect()
}

fn expected_toxicity(r: &Record) -> f64 {
    (r.text.as_ref().unwrap().chars().count() % 10) as f64 / 10.0
}

fn value<'a>(values: &'a [SignalValue], id: &str, signal: &str) -> &'a SignalPayload {
    &values
        .iter()
        .find(|v| v.record_id == id && v.signal == signal)
        .unwrap()
        .payload
}

#[test]
fn stdio_values_are_kind_checked_and_matched_by_id() {
    let dir = tempfile::tempdir().unwrap();
    let p = subprocess(dir.path(), "good", false);
    let batch = records(10);
    let sigs = vec!["toxicity".to_owned(), "topic".to_owned(), "objects".to_owned()];
    let resp = query_provider(&p, &batch, &sigs).unwrap();
    assert!(resp.missing.is_empty(), "{:?}", resp.missing);
    assert_eq!(resp.values.len(), 30);
    for r in &batch {
        assert_eq!(
            value(&resp.values, &r.id, "toxicity"),
            &SignalPayload::Scalar01 {
                score: expected_toxicity(r)
            }
        );
        let first = r.text.as_ref().unwrap().split(' ').next().unwrap();
        assert_eq!(
            value(&resp.values, &r.id, "topic"),
            &SignalPayload::Categorical {
                label: first.into(),
                confidence: Some(0.5)
            }
        );
        assert_eq!(value(&resp.values, &r.id, "objects").kind().as_str(), "spans");
    }
    // The same connection serves later batches.
    let again = query_provider(&p, &records(3), &sigs[..1]).unwrap();
    assert_eq!(again.values.len(), 3);
}

#[test]
fn per_record_errors_become_missing_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = subprocess(dir.path(), "good", true);
    let batch = vec![Record::text("ok", "fine text"), Record::text("bad-1", "anything")];
    let resp = query_provider(&p, &batch, &["toxicity".to_owned()]).unwrap();
    assert_eq!(resp.values.len(), 1);
    assert_eq!(resp.missing.len(), 1);
    assert_eq!(resp.missing[0].record_id, "bad-1");
    assert_eq!(resp.missing[0].reason, "cannot score");
}

#[test]
fn wrong_kind_degrades_unless_required() {
    let dir = tempfile::tempdir().unwrap();
    let batch = records(5);
    let sigs = ["toxicity".to_owned()];
    let resp = query_provider(&subprocess(dir.path(), "wrongkind", false), &batch, &sigs).unwrap();
    assert!(resp.values.is_empty());
    assert_eq!(resp.missing.len(), 5);
    let err = query_provider(&subprocess(dir.path(), "wrongkind", true), &batch, &sigs).unwrap_err();
    assert!(matches!(err, Error::Protocol { .. }), "{err}");
}

#[test]
fn transport_failures_degrade_unless_required() {
    let dir = tempfile::tempdir().unwrap();
    let batch = records(3);
    let sigs = ["toxicity".to_owned()];
    for mode in ["exit", "badheader"] {
        let resp = query_provider(&subprocess(dir.path(), mode, false), &batch, &sigs).unwrap();
        assert_eq!(resp.missing.len(), 3, "{mode}");
        assert!(resp.missing.iter().all(|m| m.reason.starts_with("transport failure")));
        let err = query_provider(&subprocess(dir.path(), mode, true), &batch, &sigs).unwrap_err();
        assert!(matches!(err, Error::Transport { .. }), "{mode}: {err}");
    }
}

#[test]
fn undeclared_signals_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = query_provider(
        &subprocess(dir.path(), "good", false),
        &records(1),
        &["sentiment".to_owned()],
    )
    .unwrap_err();
    assert!(matches!(err, Error::UnsupportedSignal { .. }));
}

enum HttpMode {
    Reversed,
    UnknownId,
}

/// Serves `requests` HTTP exchanges, answering each batch in reverse order.
fn http_stub(mode: HttpMode, requests: usize) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/signals", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut bodies = Vec::new();
        for _ in 0..requests {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let body = String::from_utf8(body).unwrap();
            let mut lines = body.lines();
            assert_eq!(
                serde_json::from_str::<Value>(lines.next().unwrap()).unwrap(),
                json!({"daf_protocol": 1})
            );
            let mut out = vec![json!({"daf_protocol": 1}).to_string()];
            let reqs: Vec<Value> = lines.map(|l| serde_json::from_str(l).unwrap()).collect();
            for req in reqs.iter().rev() {
                let id = match mode {
                    HttpMode::Reversed => req["id"].as_str().unwrap().to_owned(),
                    HttpMode::UnknownId => "nobody".to_owned(),
                };
                let text = req["text"].as_str().unwrap_or("");
                out.push(
                    json!({"id": id, "values": [{"signal": "toxicity", "kind": "scalar01", "score": (text.chars().count() % 10) as f64 / 10.0}]})
                        .to_string(),
                );
            }
            let payload = out.join("\n") + "\n";
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/x-ndjson\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                payload.len(),
                payload
            )
            .unwrap();
            bodies.push(body);
        }
        bodies
    });
    (url, handle)
}

fn http(id: &str, url: &str, required: bool) -> Provider {
    let cfg: ProviderConfig = serde_json::from_value(json!({
        "id": id,
        "transport": "http",
        "url": url,
        "signals": [{"name": "toxicity", "kind": "scalar01"}],
        "batch_size": 8,
        "timeout_ms": 5000,
        "retries": 0,
        "required": required,
    }))
    .unwrap();
    Provider::from_config(&cfg).unwrap()
}

#[test]
fn http_answers_are_matched_by_id() {
    let (url, server) = http_stub(HttpMode::Reversed, 2);
    let p = http("web", &url, true);
    let batch = records(12);
    let resp = query_provider(&p, &batch, &["toxicity".to_owned()]).unwrap();
    assert!(resp.missing.is_empty());
    for r in &batch {
        assert_eq!(
            value(&resp.values, &r.id, "toxicity"),
            &SignalPayload::Scalar01 {
                score: expected_toxicity(r)
            }
        );
    }
    let bodies = server.join().unwrap();
    assert_eq!(
        bodies.iter().map(|b| b.lines().count() - 1).collect::<Vec<_>>(),
        vec![8, 4]
    );
}

#[test]
fn http_unknown_ids_are_protocol_errors() {
    let (url, server) = http_stub(HttpMode::UnknownId, 2);
    let resp = query_provider(&http("web", &url, false), &records(2), &["toxicity".to_owned()]).unwrap();
    assert_eq!(resp.missing.len(), 2);
    let err = query_provider(&http("web", &url, true), &records(2), &["toxicity".to_owned()]).unwrap_err();
    assert!(matches!(err, Error::Protocol { .. }));
    server.join().unwrap();
}

#[test]
fn http_unreachable_endpoint() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    drop(listener);
    let resp = query_provider(&http("web", &url, false), &records(2), &["toxicity".to_owned()]).unwrap();
    assert_eq!(resp.missing.len(), 2);
    let err = query_provider(&http("web", &url, true), &records(2), &["toxicity".to_owned()]).unwrap_err();
    assert!(matches!(err, Error::Transport { .. }));
}

#[test]
fn environment_overrides_the_http_url() {
    let (url, server) = http_stub(HttpMode::Reversed, 1);
    let id = "override-me";
    assert_eq!(endpoint_override_var(id), "DAF_PROVIDER_URL_OVERRIDE_ME");
    std::env::set_var(endpoint_override_var(id), &url);
    let p = http(id, "http://127.0.0.1:9/never", true);
    std::env::remove_var(endpoint_override_var(id));
    let resp = query_provider(&p, &records(3), &["toxicity".to_owned()]).unwrap();
    assert_eq!(resp.values.len(), 3);
    server.join().unwrap();
}

#[test]
fn plan_with_a_subprocess_provider() {
    let dir = tempfile::tempdir().unwrap();
    let script = stub_script(dir.path());
    let mut corpus = String::new();
    let mut want = [0u64; 10];
    for i in 0..40 {
        let id = if i % 10 == 9 {
            format!("bad-{i}")
        } else {
            format!("r{i}")
        };
        let text = "y".repeat(i + 1);
        if !id.starts_with("bad") {
            want[(text.len() % 10).min(9)] += 1;
        }
        corpus.push_str(&json!({"id": id, "text": text}).to_string());
        corpus.push('\n');
    }
    std::fs::write(dir.path().join("corpus.jsonl"), corpus).unwrap();
    let plan = json!({
        "dataset": {"path": "corpus.jsonl", "format": "jsonl"},
        "providers": [{
            "id": "stub",
            "transport": "subprocess-lines",
            "command": ["python3", script.to_str().unwrap(), "good"],
            "signals": [{"name": "toxicity", "kind": "scalar01"}],
            "batch_size": 7
        }],
        "analyses": [{"id": "offensive_speech"}],
        "report_timestamp": "2024-01-01T00:00:00Z"
    });
    let plan = validate_plan_str(&plan.to_string(), dir.path()).unwrap();
    let out = run_plan(&plan).unwrap();
    assert_eq!(out.stats.missing.get("toxicity").copied(), Some(4));
    match &out.cards[0].output {
        CardOutput::Histogram(HistogramPayload::Scores { histogram, .. }) => {
            assert_eq!(histogram.counts, want.to_vec());
            assert_eq!(histogram.n_missing, 4);
        }
        other => panic!("{other:?}"),
    }
}
