use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::builtin::{BuiltinProvider, BuiltinSpec};
use super::protocol::{self, Request, Response, HEADER_LINE};
use super::{MissingSignal, ProviderResponse, SignalDescriptor, SignalKind, SignalValue};
use crate::corpus::Record;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "kebab-case")]
pub enum TransportConfig {
    Builtin { builtin: BuiltinSpec },
    SubprocessLines { command: Vec<String> },
    Http { url: String },
}

fn default_batch_size() -> usize {
    64
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_retries() -> u32 {
    2
}

/// Provider entry of an audit plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub id: String,
    #[serde(flatten)]
    pub transport: TransportConfig,
    /// Signals served. Required for external and manifest providers; fixed
    /// for the other built-ins.
    #[serde(default)]
    pub signals: Vec<SignalDescriptor>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Abort the run instead of counting missing values when the provider
    /// fails.
    #[serde(default)]
    pub required: bool,
}

impl ProviderConfig {
    pub fn builtin(id: impl Into<String>, spec: BuiltinSpec) -> Self {
        ProviderConfig {
            id: id.into(),
            transport: TransportConfig::Builtin { builtin: spec },
            signals: Vec::new(),
            batch_size: default_batch_size(),
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            required: false,
        }
    }

    /// Signals this provider will serve, with the provider id filled in.
    pub fn supported_signals(&self) -> Vec<SignalDescriptor> {
        let pairs: Vec<(String, SignalKind)> = match &self.transport {
            TransportConfig::Builtin { builtin } => BuiltinProvider::signals(builtin, &self.signals),
            _ => self.signals.iter().map(|d| (d.name.clone(), d.kind)).collect(),
        };
        pairs
            .into_iter()
            .map(|(name, kind)| SignalDescriptor::new(name, kind, self.id.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    Builtin,
    SubprocessLines,
    Http,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderHandle {
    pub id: String,
    pub transport: TransportKind,
    pub signals: Vec<SignalDescriptor>,
    pub batch_size: usize,
    pub timeout: Duration,
    pub retries: u32,
    pub required: bool,
}

impl ProviderHandle {
    pub fn kind_of(&self, signal: &str) -> Option<SignalKind> {
        self.signals.iter().find(|d| d.name == signal).map(|d| d.kind)
    }
}

/// Environment variable that overrides the URL of an HTTP provider:
/// `DAF_PROVIDER_URL_<ID>` with the id upper-cased and non-alphanumerics
/// replaced by `_`.
pub fn endpoint_override_var(provider_id: &str) -> String {
    let id: String = provider_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_uppercase()
            } else {
                '_'
            }
        })
        .collect();
    format!("DAF_PROVIDER_URL_{id}")
}

enum Backend {
    Builtin(BuiltinProvider),
    Subprocess {
        command: Vec<String>,
        conn: Mutex<Option<Connection>>,
    },
    Http {
        url: String,
        agent: ureq::Agent,
    },
}

/// A ready-to-query provider.
pub struct Provider {
    handle: ProviderHandle,
    backend: Backend,
}

impl std::fmt::Debug for Provider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Provider").field("handle", &self.handle).finish()
    }
}

impl Provider {
    pub fn from_config(cfg: &ProviderConfig) -> Result<Self> {
        let signals = cfg.supported_signals();
        if signals.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "provider `{}` declares no signals",
                cfg.id
            )));
        }
        if cfg.batch_size == 0 {
            return Err(Error::InvalidParameter(format!(
                "provider `{}` has batch_size 0",
                cfg.id
            )));
        }
        let timeout = Duration::from_millis(cfg.timeout_ms);
        let (transport, backend) = match &cfg.transport {
            TransportConfig::Builtin { builtin } => (
                TransportKind::Builtin,
                Backend::Builtin(BuiltinProvider::load(builtin, &signals)?),
            ),
            TransportConfig::SubprocessLines { command } => {
                if command.is_empty() {
                    return Err(Error::InvalidParameter(format!(
                        "provider `{}` has an empty command",
                        cfg.id
                    )));
                }
                (
                    TransportKind::SubprocessLines,
                    Backend::Subprocess {
                        command: command.clone(),
                        conn: Mutex::new(None),
                    },
                )
            }
            TransportConfig::Http { url } => {
                let url = std::env::var(endpoint_override_var(&cfg.id)).unwrap_or_else(|_| url.clone());
                let agent = ureq::AgentBuilder::new().timeout(timeout).build();
                (TransportKind::Http, Backend::Http { url, agent })
            }
        };
        Ok(Provider {
            handle: ProviderHandle {
                id: cfg.id.clone(),
                transport,
                signals,
                batch_size: cfg.batch_size,
                timeout,
                retries: cfg.retries,
                required: cfg.required,
            },
            backend,
        })
    }

    pub fn handle(&self) -> &ProviderHandle {
        &self.handle
    }

    fn protocol_error(&self, message: String) -> Error {
        Error::Protocol {
            provider: self.handle.id.clone(),
            message,
        }
    }

    /// One request/response exchange over an external transport. `Err` is a
    /// transport failure (retryable); protocol problems surface later when
    /// the lines are decoded.
    fn exchange(&self, requests: &[String]) -> std::result::Result<Vec<String>, String> {
        match &self.backend {
            Backend::Builtin(_) => unreachable!("builtin providers do not exchange lines"),
            Backend::Subprocess { command, conn } => {
                let mut guard = conn.lock().unwrap_or_else(|e| e.into_inner());
                if guard.is_none() {
                    *guard = Some(Connection::spawn(command, self.handle.timeout)?);
                }
                let c = guard.as_mut().expect("just connected");
                match c.exchange(requests, self.handle.timeout) {
                    Ok(lines) => Ok(lines),
                    Err(e) => {
                        // Drop the connection; the next attempt respawns.
                        *guard = None;
                        Err(e)
                    }
                }
            }
            Backend::Http { url, agent } => {
                let mut body = String::from(HEADER_LINE);
                body.push('\n');
                for r in requests {
                    body.push_str(r);
                    body.push('\n');
                }
                let resp = agent
                    .post(url)
                    .set("Content-Type", "application/x-ndjson")
                    .send_string(&body)
                    .map_err(|e| e.to_string())?;
                let text = resp.into_string().map_err(|e| e.to_string())?;
                let mut lines = text.lines();
                let header = lines.next().ok_or("empty response body")?;
                protocol::check_header(header)?;
                Ok(lines.filter(|l| !l.is_empty()).map(str::to_owned).collect())
            }
        }
    }

    fn decode(&self, batch: &[Record], signals: &[String], lines: Vec<String>) -> Result<ProviderResponse> {
        let pending: HashSet<&str> = batch.iter().map(|r| r.id.as_str()).collect();
        let mut answered: HashSet<String> = HashSet::new();
        let kinds: HashMap<&str, SignalKind> = signals
            .iter()
            .map(|s| (s.as_str(), self.handle.kind_of(s).expect("checked by caller")))
            .collect();
        let mut out = ProviderResponse::default();
        for (i, line) in lines.iter().enumerate() {
            let n = i + 1;
            let resp = protocol::decode_response(line)
                .map_err(|e| self.protocol_error(format!("response line {n}: {e}: `{line}`")))?;
            let id = resp.id().to_owned();
            if !pending.contains(id.as_str()) {
                return Err(self.protocol_error(format!("response line {n}: unknown id `{id}`")));
            }
            if !answered.insert(id.clone()) {
                return Err(self.protocol_error(format!("response line {n}: duplicate response for `{id}`")));
            }
            match resp {
                Response::Error { error, .. } => {
                    for s in signals {
                        out.missing.push(MissingSignal {
                            record_id: id.clone(),
                            signal: s.clone(),
                            reason: error.clone(),
                        });
                    }
                }
                Response::Values { values, .. } => {
                    let mut by_signal: HashMap<String, _> = HashMap::new();
                    for v in values {
                        if kinds.contains_key(v.signal.as_str()) {
                            by_signal.insert(v.signal.clone(), v);
                        }
                    }
                    for s in signals {
                        match by_signal.remove(s) {
                            Some(v) => {
                                let payload = v
                                    .into_payload(kinds[s.as_str()])
                                    .map_err(|e| self.protocol_error(format!("response line {n}: {e}")))?;
                                out.values.push(SignalValue {
                                    record_id: id.clone(),
                                    signal: s.clone(),
                                    payload,
                                });
                            }
                            None => out.missing.push(MissingSignal {
                                record_id: id.clone(),
                                signal: s.clone(),
                                reason: "not returned".into(),
                            }),
                        }
                    }
                }
            }
        }
        if let Some(id) = batch.iter().find(|r| !answered.contains(&r.id)) {
            return Err(self.protocol_error(format!("no response for id `{}`", id.id)));
        }
        Ok(out)
    }
}

/// Queries `provider` for `signals` of every record in `batch`.
///
/// Each `(record, signal)` pair lands either in `values` or in `missing`.
/// Transport failures are retried `retries` times, after which the affected
/// records are reported missing. Malformed or inconsistent responses are
/// protocol errors. Either failure is returned as an error instead when the
/// provider is marked required.
pub fn query_provider(provider: &Provider, batch: &[Record], signals: &[String]) -> Result<ProviderResponse> {
    if let Some(s) = signals.iter().find(|s| provider.handle.kind_of(s).is_none()) {
        return Err(Error::UnsupportedSignal {
            provider: provider.handle.id.clone(),
            signal: s.clone(),
        });
    }
    let mut out = ProviderResponse::default();
    if batch.is_empty() || signals.is_empty() {
        return Ok(out);
    }
    for chunk in batch.chunks(provider.handle.batch_size) {
        if let Backend::Builtin(b) = &provider.backend {
            out.extend(b.query(chunk, signals));
            continue;
        }
        let requests: Vec<String> = chunk
            .iter()
            .map(|r| protocol::encode_line(&Request::for_record(r, signals)))
            .collect();
        let mut last_err = String::new();
        let mut lines = None;
        for attempt in 0..=provider.handle.retries {
            match provider.exchange(&requests) {
                Ok(l) => {
                    lines = Some(l);
                    break;
                }
                Err(e) => {
                    log::warn!("provider `{}` attempt {}: {e}", provider.handle.id, attempt + 1);
                    last_err = e;
                }
            }
        }
        match lines {
            Some(lines) => match provider.decode(chunk, signals, lines) {
                Ok(resp) => out.extend(resp),
                Err(e) if !provider.handle.required => {
                    log::warn!("{e}");
                    out.extend(ProviderResponse::all_missing(
                        chunk.iter().map(|r| r.id.as_str()),
                        signals,
                        &e.to_string(),
                    ));
                }
                Err(e) => return Err(e),
            },
            None => {
                if provider.handle.required {
                    return Err(Error::Transport {
                        provider: provider.handle.id.clone(),
                        message: last_err,
                    });
                }
                out.extend(ProviderResponse::all_missing(
                    chunk.iter().map(|r| r.id.as_str()),
                    signals,
                    &format!("transport failure: {last_err}"),
                ));
            }
        }
    }
    Ok(out)
}

/// A running subprocess speaking the line protocol on stdin/stdout.
struct Connection {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Connection {
    fn spawn(command: &[String], timeout: Duration) -> std::result::Result<Self, String> {
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| format!("cannot spawn `{}`: {e}", command[0]))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut conn = Connection {
            child,
            stdin,
            lines: rx,
        };
        conn.send(&[HEADER_LINE.to_owned()])?;
        let header = conn.recv(Instant::now() + timeout)?;
        protocol::check_header(&header)?;
        Ok(conn)
    }

    fn send(&mut self, lines: &[String]) -> std::result::Result<(), String> {
        let mut buf = String::new();
        for l in lines {
            buf.push_str(l);
            buf.push('\n');
        }
        self.stdin
            .write_all(buf.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| format!("write failed: {e}"))
    }

    fn recv(&mut self, deadline: Instant) -> std::result::Result<String, String> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(wait) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(format!("read failed: {e}")),
            Err(RecvTimeoutError::Timeout) => Err("timed out".into()),
            Err(RecvTimeoutError::Disconnected) => Err("provider closed its output".into()),
        }
    }

    fn exchange(&mut self, requests: &[String], timeout: Duration) -> std::result::Result<Vec<String>, String> {
        self.send(requests)?;
        let deadline = Instant::now() + timeout;
        let mut out = Vec::with_capacity(requests.len());
        while out.len() < requests.len() {
            let line = self.recv(deadline)?;
            if !line.is_empty() {
                out.push(line);
            }
        }
        Ok(out)
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
