//! Provider wire protocol, version 1.
//!
//! Both transports carry UTF-8, LF-terminated lines. The client first sends
//! the header `{"daf_protocol": 1}` and the provider answers with the same
//! header. Then each record is one request line
//!
//! ```text
//! {"id": "r1", "text": "...", "image_path": null, "signals": ["toxicity"]}
//! ```
//!
//! and the provider answers each with one line, in any order:
//!
//! ```text
//! {"id": "r1", "values": [{"signal": "toxicity", "kind": "scalar01", "score": 0.12}]}
//! {"id": "r2", "error": "image not found"}
//! ```
//!
//! A value carries the field matching its kind: `score` (scalar01), `label`
//! plus optional `score` as confidence (categorical), `flag` (boolean),
//! `count` (count) or `spans` as `[start, end, label]` triples (spans).
//! Unknown fields are ignored.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use super::{LabeledSpan, SignalKind, SignalPayload};
use crate::corpus::{Record, Span};

pub const PROTOCOL_VERSION: u64 = 1;
pub const HEADER_LINE: &str = "{\"daf_protocol\": 1}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub text: Option<String>,
    pub image_path: Option<String>,
    pub signals: Vec<String>,
}

impl Request {
    pub fn for_record(record: &Record, signals: &[String]) -> Self {
        Request {
            id: record.id.clone(),
            text: record.text.clone(),
            image_path: record.image.as_ref().map(|i| i.location().to_owned()),
            signals: signals.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireValue {
    pub signal: String,
    pub kind: SignalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<(usize, usize, String)>>,
}

impl WireValue {
    pub fn from_payload(signal: &str, payload: &SignalPayload) -> Self {
        let mut v = WireValue {
            signal: signal.to_owned(),
            kind: payload.kind(),
            score: None,
            label: None,
            flag: None,
            count: None,
            spans: None,
        };
        match payload {
            SignalPayload::Scalar01 { score } => v.score = Some(*score),
            SignalPayload::Categorical { label, confidence } => {
                v.label = Some(label.clone());
                v.score = *confidence;
            }
            SignalPayload::Boolean { flag } => v.flag = Some(*flag),
            SignalPayload::Count { count } => v.count = Some(*count),
            SignalPayload::Spans { spans } => {
                v.spans = Some(
                    spans
                        .iter()
                        .map(|s| (s.span.start, s.span.end, s.label.clone()))
                        .collect(),
                )
            }
        }
        v
    }

    /// Converts to a payload of `expected` kind.
    pub fn into_payload(self, expected: SignalKind) -> Result<SignalPayload, String> {
        if self.kind != expected {
            return Err(format!(
                "signal `{}` has kind {}, expected {expected}",
                self.signal, self.kind
            ));
        }
        let missing = |field: &str| format!("signal `{}` ({}) lacks `{field}`", self.signal, self.kind);
        let payload = match self.kind {
            SignalKind::Scalar01 => SignalPayload::Scalar01 {
                score: self.score.ok_or_else(|| missing("score"))?,
            },
            SignalKind::Categorical => SignalPayload::Categorical {
                label: self.label.clone().ok_or_else(|| missing("label"))?,
                confidence: self.score,
            },
            SignalKind::Boolean => SignalPayload::Boolean {
                flag: self.flag.ok_or_else(|| missing("flag"))?,
            },
            SignalKind::Count => SignalPayload::Count {
                count: self.count.ok_or_else(|| missing("count"))?,
            },
            SignalKind::Spans => SignalPayload::Spans {
                spans: self
                    .spans
                    .clone()
                    .ok_or_else(|| missing("spans"))?
                    .into_iter()
                    .map(|(start, end, label)| LabeledSpan {
                        span: Span { start, end },
                        label,
                    })
                    .collect(),
            },
        };
        payload
            .validate()
            .map_err(|e| format!("signal `{}`: {e}", self.signal))?;
        Ok(payload)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Values { id: String, values: Vec<WireValue> },
    Error { id: String, error: String },
}

impl Response {
    pub fn id(&self) -> &str {
        match self {
            Response::Values { id, .. } | Response::Error { id, .. } => id,
        }
    }
}

#[derive(Deserialize)]
struct Header {
    daf_protocol: u64,
}

/// Validates a header line.
pub fn check_header(line: &str) -> Result<(), String> {
    let h: Header = serde_json::from_str(line).map_err(|e| format!("bad protocol header `{line}`: {e}"))?;
    if h.daf_protocol != PROTOCOL_VERSION {
        return Err(format!("unsupported protocol version {}", h.daf_protocol));
    }
    Ok(())
}

/// JSON formatter writing `": "` after keys and `", "` between elements,
/// matching the documented line layout.
struct SpacedFormatter;

impl Formatter for SpacedFormatter {
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            writer.write_all(b", ")
        }
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            writer.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        writer.write_all(b": ")
    }
}

/// Serializes one protocol line (without the trailing LF).
pub fn encode_line<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SpacedFormatter);
    value.serialize(&mut ser).expect("protocol values always serialize");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn decode_response(line: &str) -> Result<Response, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

pub fn decode_request(line: &str) -> Result<Request, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}
