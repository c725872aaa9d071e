//! Corpus auditing for human representation in text and image-caption
//! datasets.
//!
//! Analyses stream over line-oriented datasets, produce mergeable partial
//! results per shard, and are packaged as analysis cards with recommended
//! actions. See the workspace README for the plan format and CLI.

pub mod aggregate;
pub mod associations;
pub mod content;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod human;
pub mod lexicon;
pub mod plan;
pub mod provenance;
pub mod registry;
pub mod report;
pub mod signals;

pub use error::{Error, Result};
