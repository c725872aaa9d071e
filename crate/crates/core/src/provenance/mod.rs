//! Provenance analyses: sources, geography, recency, duplication and
//! overlap with other datasets.

mod dedup;
mod domains;
mod overlap;

pub use dedup::{
    content_digest, duplicate_report, jaccard, shingles, DuplicateAcc, DuplicateMode, DuplicateParams, DuplicateReport,
    MinHasher, NearDetails,
};
pub use domains::{
    country_of, geographic_spread, publication_histogram, source_domain, timestamp_year, top_sources, url_host,
    DomainStats, GeographicSpread, GeographyAcc, PublicationAcc, PublicationHistogram, SourcesAcc, SuffixList,
    TopSources, UNATTRIBUTED, UNKNOWN,
};
pub use overlap::{dataset_overlap, OverlapAcc, OverlapIndex, OverlapMode, OverlapReport, DEFAULT_NGRAM};
