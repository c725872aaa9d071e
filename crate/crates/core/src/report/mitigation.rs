//! Remove or tag selected records, writing a manifest of what changed.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::{parse_line, DatasetFormat, DatasetHandle, LineReader};
use crate::error::{Error, Result};

/// Metadata key carrying tags in tag mode.
pub const TAG_KEY: &str = "daf_tags";

/// Which records a mitigation applies to.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionSpec {
    /// Records with at least one PII detection.
    Pii,
    /// Records with a hateful lexicon hit.
    Hateful,
    /// Records whose signal value is at least the threshold (scalar scores
    /// and counts) or true (booleans).
    Signal { name: String, threshold: f64 },
    /// Every duplicate-cluster member except the lowest id.
    Duplicates,
    /// Ids listed one per line in a file.
    Ids(PathBuf),
}

impl SelectionSpec {
    /// Analysis whose run produces the selection, if any.
    pub fn required_analysis(&self) -> Option<&'static str> {
        match self {
            SelectionSpec::Pii => Some("pii"),
            SelectionSpec::Hateful => Some("hateful_terms"),
            SelectionSpec::Duplicates => Some("data_duplication"),
            SelectionSpec::Signal { .. } | SelectionSpec::Ids(_) => None,
        }
    }

    /// Tag written in tag mode.
    pub fn tag(&self) -> String {
        match self {
            SelectionSpec::Pii => "pii".into(),
            SelectionSpec::Hateful => "hateful".into(),
            SelectionSpec::Signal { name, .. } => format!("signal:{name}"),
            SelectionSpec::Duplicates => "duplicate".into(),
            SelectionSpec::Ids(_) => "id-list".into(),
        }
    }
}

impl std::fmt::Display for SelectionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectionSpec::Pii => f.write_str("pii"),
            SelectionSpec::Hateful => f.write_str("hateful"),
            SelectionSpec::Signal { name, threshold } => write!(f, "signal:{name}>={threshold}"),
            SelectionSpec::Duplicates => f.write_str("duplicates"),
            SelectionSpec::Ids(p) => write!(f, "ids:{}", p.display()),
        }
    }
}

impl FromStr for SelectionSpec {
    type Err = Error;

    /// `pii`, `hateful`, `duplicates`, `signal:<name>>=<t>` or `ids:<file>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSelection(s.to_owned());
        Ok(match s {
            "pii" => SelectionSpec::Pii,
            "hateful" => SelectionSpec::Hateful,
            "duplicates" => SelectionSpec::Duplicates,
            _ => {
                if let Some(rest) = s.strip_prefix("signal:") {
                    let (name, t) = rest.split_once(">=").ok_or_else(bad)?;
                    let threshold: f64 = t.trim().parse().map_err(|_| bad())?;
                    if name.trim().is_empty() || !threshold.is_finite() {
                        return Err(bad());
                    }
                    SelectionSpec::Signal {
                        name: name.trim().to_owned(),
                        threshold,
                    }
                } else if let Some(path) = s.strip_prefix("ids:") {
                    if path.is_empty() {
                        return Err(bad());
                    }
                    SelectionSpec::Ids(PathBuf::from(path))
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

/// Reads an id list: one id per line, blank lines ignored.
pub fn read_id_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MitigationMode {
    Remove,
    Tag,
}

impl FromStr for MitigationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "remove" => Ok(MitigationMode::Remove),
            "tag" => Ok(MitigationMode::Tag),
            other => Err(Error::InvalidParameter(format!("unknown mitigation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MitigationManifest {
    pub selection: String,
    pub mode: MitigationMode,
    pub input: String,
    pub output: String,
    /// Records read, excluding malformed lines.
    pub records_in: u64,
    pub records_out: u64,
    /// Ids removed or tagged, sorted.
    pub ids: Vec<String>,
    pub affected: u64,
    pub malformed_dropped: u64,
    pub config_digest: String,
    pub tool_version: String,
}

/// Streams `input` to `output`, removing or tagging records whose id is in
/// `selected`. Records not selected are copied byte for byte; malformed
/// lines are dropped and counted.
pub fn apply_mitigation(
    input: &DatasetHandle,
    selection: &SelectionSpec,
    selected: &BTreeSet<String>,
    mode: MitigationMode,
    output: &Path,
    config_digest: &str,
) -> Result<MitigationManifest> {
    if mode == MitigationMode::Tag && input.format != DatasetFormat::Jsonl {
        return Err(Error::InvalidParameter(format!(
            "tag mode needs jsonl input, `{}` is {}",
            input.path.display(),
            input.format.as_str()
        )));
    }
    let lines = LineReader::open(&input.path)?;
    let file = File::create(output).map_err(|e| Error::io(output, e))?;
    let mut w = BufWriter::new(file);
    let write_err = |e| Error::io(output, e);
    let tag = selection.tag();
    let mut records_in = 0u64;
    let mut records_out = 0u64;
    let mut malformed = 0u64;
    let mut ids = Vec::new();
    for item in lines {
        let item = item?;
        let record = match parse_line(input.format, item.line, &item.bytes) {
            Ok(r) => r,
            Err(reason) => {
                log::debug!("{}:{}: dropped: {reason}", input.path.display(), item.line);
                malformed += 1;
                continue;
            }
        };
        records_in += 1;
        let hit = selected.contains(&record.id);
        if hit {
            ids.push(record.id.clone());
        }
        match (mode, hit) {
            (MitigationMode::Remove, true) => continue,
            (MitigationMode::Tag, true) => {
                let tagged = tag_line(&item.bytes, &tag)?;
                w.write_all(tagged.as_bytes()).map_err(write_err)?;
            }
            (_, false) => w.write_all(&item.bytes).map_err(write_err)?,
        }
        if item.terminated || hit {
            w.write_all(b"\n").map_err(write_err)?;
        }
        records_out += 1;
    }
    w.flush().map_err(write_err)?;
    ids.sort();
    Ok(MitigationManifest {
        selection: selection.to_string(),
        mode,
        input: input.path.display().to_string(),
        output: output.display().to_string(),
        records_in,
        records_out,
        affected: ids.len() as u64,
        ids,
        malformed_dropped: malformed,
        config_digest: config_digest.to_owned(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
    })
}

/// Adds `tag` to the record's `meta.daf_tags` (comma separated).
fn tag_line(bytes: &[u8], tag: &str) -> Result<String> {
    let mut value: serde_json::Value = serde_json::from_slice(bytes)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::InvalidParameter("record line is not an object".into()))?;
    let meta = obj
        .entry("meta")
        .or_insert_with(|| serde_json::Value::Object(Default::default()));
    let meta = meta
        .as_object_mut()
        .ok_or_else(|| Error::InvalidParameter("record meta is not an object".into()))?;
    let tags = match meta.get(TAG_KEY).and_then(|v| v.as_str()) {
        Some(existing) if existing.split(',').any(|t| t == tag) => existing.to_owned(),
        Some(existing) if !existing.is_empty() => format!("{existing},{tag}"),
        _ => tag.to_owned(),
    };
    meta.insert(TAG_KEY.into(), serde_json::Value::String(tags));
    Ok(serde_json::to_string(&value)?)
}
