use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ImageRef, Record};
use crate::error::{Error, Result};

/// Number of skipped-line entries kept verbatim in a [`SkipReport`].
const SKIP_DETAIL_CAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetFormat {
    #[serde(rename = "jsonl")]
    Jsonl,
    #[serde(rename = "tsv-pairs")]
    TsvPairs,
    #[serde(rename = "plain-text-per-line")]
    PlainTextPerLine,
}

impl DatasetFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetFormat::Jsonl => "jsonl",
            DatasetFormat::TsvPairs => "tsv-pairs",
            DatasetFormat::PlainTextPerLine => "plain-text-per-line",
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "tsv-pairs" => Ok(DatasetFormat::TsvPairs),
            "plain-text-per-line" => Ok(DatasetFormat::PlainTextPerLine),
            other => Err(Error::UnknownFormat(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHandle {
    pub path: PathBuf,
    pub format: DatasetFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_count: Option<u64>,
    pub label: String,
}

impl DatasetHandle {
    pub fn new(path: impl Into<PathBuf>, format: DatasetFormat, label: impl Into<String>) -> Self {
        DatasetHandle {
            path: path.into(),
            format,
            record_count: None,
            label: label.into(),
        }
    }

    /// Splits the file into at most `n` byte ranges aligned to line starts.
    ///
    /// The ranges partition the file, so scanning each range with
    /// [`LineReader::range`] visits every line exactly once.
    pub fn shards(&self, n: usize) -> Result<Vec<ShardRange>> {
        let n = n.max(1);
        let mut file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        let len = file.metadata().map_err(|e| Error::io(&self.path, e))?.len();
        let mut cuts = vec![0u64];
        for i in 1..n as u64 {
            let target = len * i / n as u64;
            let prev = *cuts.last().unwrap();
            if target <= prev {
                continue;
            }
            // Advance to the byte after the next newline at or after target-1.
            file.seek(SeekFrom::Start(target - 1))
                .map_err(|e| Error::io(&self.path, e))?;
            let mut reader = BufReader::new(&mut file);
            let mut skipped = Vec::new();
            let read = reader
                .read_until(b'\n', &mut skipped)
                .map_err(|e| Error::io(&self.path, e))?;
            let cut = target - 1 + read as u64;
            if cut > prev && cut < len {
                cuts.push(cut);
            }
        }
        cuts.push(len);
        cuts.dedup();

        // First line number of each shard: count newlines before each cut.
        let mut ranges = Vec::with_capacity(cuts.len());
        let mut file = BufReader::new(File::open(&self.path).map_err(|e| Error::io(&self.path, e))?);
        let mut line = 1u64;
        let mut pos = 0u64;
        let mut buf = vec![0u8; 1 << 16];
        for w in cuts.windows(2) {
            let (start, end) = (w[0], w[1]);
            debug_assert_eq!(pos, start);
            ranges.push(ShardRange {
                start,
                end,
                first_line: line,
            });
            let mut remaining = end - start;
            while remaining > 0 {
                let want = remaining.min(buf.len() as u64) as usize;
                file.read_exact(&mut buf[..want])
                    .map_err(|e| Error::io(&self.path, e))?;
                line += buf[..want].iter().filter(|&&b| b == b'\n').count() as u64;
                remaining -= want as u64;
            }
            pos = end;
        }
        if ranges.is_empty() {
            ranges.push(ShardRange {
                start: 0,
                end: 0,
                first_line: 1,
            });
        }
        Ok(ranges)
    }
}

/// A line-aligned byte range of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardRange {
    pub start: u64,
    pub end: u64,
    /// 1-based number of the first line in the range.
    pub first_line: u64,
}

/// One raw input line, without its terminating LF.
#[derive(Debug, Clone)]
pub struct LineItem {
    pub line: u64,
    pub bytes: Vec<u8>,
    /// Whether the line was LF-terminated in the input.
    pub terminated: bool,
}

/// Reads LF-delimited lines from a file or a byte range of it.
pub struct LineReader {
    path: PathBuf,
    reader: std::io::Take<BufReader<File>>,
    next_line: u64,
}

impl LineReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(LineReader {
            path: path.to_owned(),
            reader: BufReader::new(file).take(u64::MAX),
            next_line: 1,
        })
    }

    pub fn range(path: &Path, range: ShardRange) -> Result<Self> {
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        file.seek(SeekFrom::Start(range.start))
            .map_err(|e| Error::io(path, e))?;
        Ok(LineReader {
            path: path.to_owned(),
            reader: BufReader::new(file).take(range.end - range.start),
            next_line: range.first_line,
        })
    }
}

impl Iterator for LineReader {
    type Item = Result<LineItem>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut bytes = Vec::new();
        match self.reader.read_until(b'\n', &mut bytes) {
            Ok(0) => None,
            Ok(_) => {
                let terminated = bytes.last() == Some(&b'\n');
                if terminated {
                    bytes.pop();
                }
                let line = self.next_line;
                self.next_line += 1;
                Some(Ok(LineItem {
                    line,
                    bytes,
                    terminated,
                }))
            }
            Err(e) => Some(Err(Error::io(&self.path, e))),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    image: Option<ImageRef>,
    #[serde(default)]
    meta: std::collections::BTreeMap<String, String>,
}

/// Parses one line of `format`. The error string describes why the line is
/// malformed.
pub fn parse_line(format: DatasetFormat, line: u64, bytes: &[u8]) -> Result<Record, String> {
    let s = std::str::from_utf8(bytes).map_err(|e| format!("invalid UTF-8: {e}"))?;
    if s.trim().is_empty() {
        return Err("blank line".into());
    }
    let record = match format {
        DatasetFormat::Jsonl => {
            let r: JsonRecord = serde_json::from_str(s).map_err(|e| format!("invalid JSON: {e}"))?;
            Record {
                id: r.id,
                text: r.text,
                image: r.image,
                meta: r.meta,
            }
        }
        DatasetFormat::TsvPairs => {
            let fields: Vec<&str> = s.split('\t').collect();
            if fields.len() != 3 {
                return Err(format!("expected 3 tab-separated fields, found {}", fields.len()));
            }
            let non_empty = |f: &str| (!f.is_empty()).then(|| f.to_owned());
            Record {
                id: fields[0].to_owned(),
                text: non_empty(fields[1]),
                image: non_empty(fields[2]).map(ImageRef::Location),
                meta: Default::default(),
            }
        }
        DatasetFormat::PlainTextPerLine => Record::text(format!("line-{line}"), s),
    };
    record.validate()?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedLine {
    pub line: u64,
    pub reason: String,
}

/// Accounting of lines that did not yield a record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SkipReport {
    pub lines: u64,
    pub skipped_count: u64,
    /// First skipped lines in line order (capped).
    pub skipped: Vec<SkippedLine>,
}

impl SkipReport {
    pub fn records(&self) -> u64 {
        self.lines - self.skipped_count
    }

    pub(crate) fn note_line(&mut self) {
        self.lines += 1;
    }

    pub(crate) fn note_skip(&mut self, line: u64, reason: String) {
        self.skipped_count += 1;
        self.skipped.push(SkippedLine { line, reason });
        if self.skipped.len() > SKIP_DETAIL_CAP {
            self.skipped.sort_by_key(|s| s.line);
            self.skipped.truncate(SKIP_DETAIL_CAP);
        }
    }

    pub fn merge(&mut self, other: SkipReport) {
        self.lines += other.lines;
        self.skipped_count += other.skipped_count;
        self.skipped.extend(other.skipped);
        self.skipped.sort_by_key(|s| s.line);
        self.skipped.truncate(SKIP_DETAIL_CAP);
    }

    /// More than half of the lines malformed.
    pub fn is_fatal(&self) -> bool {
        self.skipped_count * 2 > self.lines
    }

    pub fn check(&self, path: &Path) -> Result<()> {
        if self.is_fatal() {
            return Err(Error::CorpusFormat {
                path: path.to_owned(),
                skipped: self.skipped_count,
                lines: self.lines,
            });
        }
        Ok(())
    }
}

/// Records of a dataset in file order.
///
/// Malformed lines are skipped and recorded in [`RecordStream::skip_report`].
/// When the stream is exhausted it checks the malformed fraction and yields a
/// final [`Error::CorpusFormat`] if more than half the lines were bad. A
/// repeated record id is an error.
pub struct RecordStream {
    handle: DatasetHandle,
    lines: LineReader,
    report: SkipReport,
    seen: HashSet<String>,
    done: bool,
}

impl RecordStream {
    pub fn skip_report(&self) -> &SkipReport {
        &self.report
    }

    pub fn handle(&self) -> &DatasetHandle {
        &self.handle
    }
}

impl Iterator for RecordStream {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let item = match self.lines.next() {
                Some(Ok(item)) => item,
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                None => {
                    self.done = true;
                    return self.report.check(&self.handle.path).err().map(Err);
                }
            };
            self.report.note_line();
            match parse_line(self.handle.format, item.line, &item.bytes) {
                Ok(record) => {
                    if !self.seen.insert(record.id.clone()) {
                        self.done = true;
                        return Some(Err(Error::DuplicateRecordId {
                            id: record.id,
                            line: item.line,
                        }));
                    }
                    return Some(Ok(record));
                }
                Err(reason) => {
                    log::debug!("{}:{}: skipped: {reason}", self.handle.path.display(), item.line);
                    self.report.note_skip(item.line, reason);
                }
            }
        }
    }
}

pub fn open_dataset(handle: &DatasetHandle) -> Result<RecordStream> {
    let lines = LineReader::open(&handle.path)?;
    Ok(RecordStream {
        handle: handle.clone(),
        lines,
        report: SkipReport::default(),
        seen: HashSet::new(),
        done: false,
    })
}
