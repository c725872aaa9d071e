//! Dataset ingestion, the record model, sampling and tokenization.
//!
//! Every analysis in the crate reads records through this module, and every
//! token count goes through [`tokenize`], so counting rules are defined once.

mod reader;
mod record;
mod sample;
mod text;

pub use reader::{
    open_dataset, parse_line, DatasetFormat, DatasetHandle, LineItem, LineReader, RecordStream, ShardRange, SkipReport,
    SkippedLine,
};
pub use record::{ImageRef, Record, Span, META_NSFW_TAG, META_SOURCE, META_TIMESTAMP, META_URL};
pub use sample::sample_records;
pub use text::{normalize_text, tokenize, Token, TokenizationPolicy, UnicodeNormalization};
