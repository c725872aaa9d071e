use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const META_URL: &str = "url";
pub const META_TIMESTAMP: &str = "timestamp";
pub const META_SOURCE: &str = "source";
pub const META_NSFW_TAG: &str = "nsfw_tag";

/// Half-open byte range `[start, end)` into a source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", from = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

impl From<[usize; 2]> for Span {
    fn from(a: [usize; 2]) -> Self {
        Span { start: a[0], end: a[1] }
    }
}

/// Reference to an image: a path or URL plus optional pixel dimensions.
///
/// Serialized as a bare string when no dimensions are known, otherwise as
/// `{"src": ..., "width": ..., "height": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImageRef {
    Location(String),
    Sized {
        src: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        height: Option<u32>,
    },
}

impl ImageRef {
    pub fn location(&self) -> &str {
        match self {
            ImageRef::Location(s) => s,
            ImageRef::Sized { src, .. } => src,
        }
    }

    pub fn dimensions(&self) -> Option<(u32, u32)> {
        match self {
            ImageRef::Sized {
                width: Some(w),
                height: Some(h),
                ..
            } => Some((*w, *h)),
            _ => None,
        }
    }
}

/// One corpus item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Record {
    pub fn text(id: impl Into<String>, text: impl Into<String>) -> Self {
        Record {
            id: id.into(),
            text: Some(text.into()),
            image: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn with_image(mut self, location: impl Into<String>) -> Self {
        self.image = Some(ImageRef::Location(location.into()));
        self
    }

    pub fn text_or_empty(&self) -> &str {
        self.text.as_deref().unwrap_or("")
    }

    pub fn url(&self) -> Option<&str> {
        self.meta.get(META_URL).map(String::as_str)
    }

    pub fn timestamp(&self) -> Option<&str> {
        self.meta.get(META_TIMESTAMP).map(String::as_str)
    }

    /// Checks the record-level invariants (non-empty id, some content).
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.text.is_none() && self.image.is_none() {
            return Err("record has neither text nor image".into());
        }
        Ok(())
    }
}
