//! The catalog of analysis cards and the engine operation each one runs.

use serde::{Deserialize, Serialize};

use crate::lexicon::LexiconKind;
use crate::signals::SignalKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnalysisObject {
    Text,
    Image,
    Metadata,
    InferredTextSignals,
    InferredImageSignals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Effort {
    Low,
    Medium,
    High,
    NotYetPossible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Section {
    Who,
    What,
    Associations,
}

impl Section {
    pub fn heading(&self) -> &'static str {
        match self {
            Section::Who => "Who is in the data",
            Section::What => "What is in the data",
            Section::Associations => "Human and content associations",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputKind {
    Distribution,
    Histogram,
    Proportion,
    RankedList,
    DisaggregatedTable,
    DuplicateReport,
    OverlapReport,
    Unsupported,
}

impl OutputKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutputKind::Distribution => "Distribution",
            OutputKind::Histogram => "Histogram",
            OutputKind::Proportion => "Proportion",
            OutputKind::RankedList => "RankedList",
            OutputKind::DisaggregatedTable => "DisaggregatedTable",
            OutputKind::DuplicateReport => "DuplicateReport",
            OutputKind::OverlapReport => "OverlapReport",
            OutputKind::Unsupported => "Unsupported",
        }
    }
}

/// Human side of an association card.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HumanSide {
    /// Identity lexicon axes.
    Terms,
    /// A categorical perceived-identity signal.
    Signal(&'static str),
}

/// Content side of an association card.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContentSide {
    Categorical(&'static str),
    BinnedScalar(&'static str),
    Boolean(&'static str),
    SpanLabels(&'static str),
}

impl ContentSide {
    pub fn signal(&self) -> &'static str {
        match self {
            ContentSide::Categorical(s)
            | ContentSide::BinnedScalar(s)
            | ContentSide::Boolean(s)
            | ContentSide::SpanLabels(s) => s,
        }
    }

    pub fn kinds(&self) -> &'static [SignalKind] {
        match self {
            ContentSide::Categorical(_) => &[SignalKind::Categorical],
            ContentSide::BinnedScalar(_) => &[SignalKind::Scalar01],
            ContentSide::Boolean(_) => &[SignalKind::Boolean, SignalKind::Scalar01, SignalKind::Count],
            ContentSide::SpanLabels(_) => &[SignalKind::Spans],
        }
    }
}

/// Engine operation behind a card, with default signal names.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binding {
    Pii,
    IdentityTerms,
    Pronouns,
    HatefulTerms,
    SignalProportion(&'static str),
    SignalCategories(&'static str),
    SignalHistogram(&'static str),
    TopSources,
    Geography,
    PublicationTime,
    Duplication,
    Overlap,
    TermCooccurrence,
    SignalCooccurrence(&'static str),
    Table(HumanSide, ContentSide),
    Unsupported,
}

/// Signal kinds accepted for a proportion card.
pub const PROPORTION_KINDS: &[SignalKind] = &[SignalKind::Boolean, SignalKind::Scalar01, SignalKind::Count];

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    pub id: &'static str,
    pub title: &'static str,
    pub section: Section,
    pub task: &'static str,
    pub objects: &'static [AnalysisObject],
    pub effort: Effort,
    /// Effort wording for cards whose effort is not a plain level.
    pub effort_note: Option<&'static str>,
    /// Resources the analysis needs, as shown on cards and listings.
    pub dependencies: &'static [&'static str],
    pub output: OutputKind,
    pub binding: Binding,
    /// Suggested follow-up shown with the recommended actions.
    pub action_hint: &'static str,
}

impl AnalysisSpec {
    pub fn effort_label(&self) -> &'static str {
        self.effort_note.unwrap_or(match self.effort {
            Effort::Low => "Low",
            Effort::Medium => "Medium",
            Effort::High => "High",
            Effort::NotYetPossible => "NotYetPossible",
        })
    }

    /// Lexicon kinds the analysis needs.
    pub fn lexicons(&self) -> Vec<LexiconKind> {
        match self.binding {
            Binding::IdentityTerms | Binding::TermCooccurrence | Binding::Table(HumanSide::Terms, _) => {
                vec![LexiconKind::Identity]
            }
            Binding::Pronouns => vec![LexiconKind::Pronoun],
            Binding::HatefulTerms => vec![LexiconKind::Hateful],
            _ => Vec::new(),
        }
    }
}

use AnalysisObject::*;

const NOT_YET: &str = "Not yet possible by automated methods";
const NOT_CURRENTLY: &str = "Not currently possible";

static REGISTRY: &[AnalysisSpec] = &[
    AnalysisSpec {
        id: "pii",
        title: "Personally Identifiable Information",
        section: Section::Who,
        task: "Find records that contain personal information such as email addresses, phone numbers, IP addresses or ID-number patterns",
        objects: &[Text, InferredTextSignals],
        effort: Effort::Medium,
        effort_note: None,
        dependencies: &["PII detection (built-in patterns, optional provider spans)"],
        output: OutputKind::Proportion,
        binding: Binding::Pii,
        action_hint: "Review flagged records for privacy exposure before training or publication",
    },
    AnalysisSpec {
        id: "people_in_images",
        title: "People in Images",
        section: Section::Who,
        task: "Measure the share of images showing people, using a face or person count signal",
        objects: &[InferredImageSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal face_count (face detection)"],
        output: OutputKind::Proportion,
        binding: Binding::SignalProportion("face_count"),
        action_hint: "Flag images of people",
    },
    AnalysisSpec {
        id: "social_identity_terms",
        title: "Social Identity Terms",
        section: Section::Who,
        task: "Measure how often records mention each social identity group, alone and in combination across axes",
        objects: &[Text],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["identity lexicon"],
        output: OutputKind::Distribution,
        binding: Binding::IdentityTerms,
        action_hint: "Flag the identity representation observed",
    },
    AnalysisSpec {
        id: "pronouns",
        title: "Pronoun Distribution",
        section: Section::Who,
        task: "Count occurrences of each pronoun group",
        objects: &[Text],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["pronoun lexicon"],
        output: OutputKind::Distribution,
        binding: Binding::Pronouns,
        action_hint: "Flag the pronoun distribution",
    },
    AnalysisSpec {
        id: "hateful_terms",
        title: "Hateful Terms in Text",
        section: Section::Who,
        task: "Count occurrences of hateful terms and record which group each one targets",
        objects: &[Text],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["hateful term lexicon"],
        output: OutputKind::Distribution,
        binding: Binding::HatefulTerms,
        action_hint: "Flag hateful terms",
    },
    AnalysisSpec {
        id: "dialect",
        title: "Dialect",
        section: Section::Who,
        task: "Measure the share of records in each dialect the downstream application should support",
        objects: &[InferredTextSignals],
        effort: Effort::High,
        effort_note: None,
        dependencies: &["signal dialect (dialect classifier provider)"],
        output: OutputKind::Distribution,
        binding: Binding::SignalCategories("dialect"),
        action_hint: "Flag dialect coverage; consider rebalancing or qualifying model capabilities for under-covered dialects",
    },
    AnalysisSpec {
        id: "perceived_identity_images",
        title: "Social Identity in Images",
        section: Section::Who,
        task: "Measure the share of images by perceived social identity label",
        objects: &[InferredImageSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal perceived_identity (perceived identity classifier)"],
        output: OutputKind::Distribution,
        binding: Binding::SignalCategories("perceived_identity"),
        action_hint: "Flag the identity representation observed",
    },
    AnalysisSpec {
        id: "hateful_symbols",
        title: "Hateful Symbols in Images",
        section: Section::Who,
        task: "Measure the share of images showing known hateful symbols or text",
        objects: &[InferredImageSignals],
        effort: Effort::NotYetPossible,
        effort_note: Some(NOT_YET),
        dependencies: &["hateful symbol classifier"],
        output: OutputKind::Unsupported,
        binding: Binding::Unsupported,
        action_hint: "Document that hateful imagery was not assessed",
    },
    AnalysisSpec {
        id: "offensive_speech",
        title: "Offensive Speech Distribution",
        section: Section::What,
        task: "Histogram of per-record toxicity scores",
        objects: &[InferredTextSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal toxicity (toxicity classifier)"],
        output: OutputKind::Histogram,
        binding: Binding::SignalHistogram("toxicity"),
        action_hint: "Flag toxic content",
    },
    AnalysisSpec {
        id: "topics",
        title: "Topic Distribution",
        section: Section::What,
        task: "Distribution of records over topic categories",
        objects: &[InferredTextSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal topic (topic classifier)"],
        output: OutputKind::Distribution,
        binding: Binding::SignalCategories("topic"),
        action_hint: "Flag dominant topics",
    },
    AnalysisSpec {
        id: "sexual_imagery",
        title: "Sexual Imagery",
        section: Section::What,
        task: "Measure the share of images classified as sexual content",
        objects: &[InferredImageSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal sexual_image (visual content classifier)"],
        output: OutputKind::Proportion,
        binding: Binding::SignalProportion("sexual_image"),
        action_hint: "Flag sexual imagery; consider filtering it for the intended downstream tasks",
    },
    AnalysisSpec {
        id: "violent_imagery",
        title: "Violent Imagery",
        section: Section::What,
        task: "Measure the share of images classified as violent content",
        objects: &[InferredImageSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal violent_image (visual content classifier)"],
        output: OutputKind::Proportion,
        binding: Binding::SignalProportion("violent_image"),
        action_hint: "Flag violent imagery; consider filtering it for the intended downstream tasks",
    },
    AnalysisSpec {
        id: "top_sources",
        title: "Top Sources",
        section: Section::What,
        task: "Rank source domains by the number of tokens they contribute",
        objects: &[Metadata],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &[],
        output: OutputKind::RankedList,
        binding: Binding::TopSources,
        action_hint: "Flag the dominant sources",
    },
    AnalysisSpec {
        id: "source_geography",
        title: "Source Geographic Spread",
        section: Section::What,
        task: "Share of records and tokens per country, inferred from country-code top-level domains",
        objects: &[Metadata],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &[],
        output: OutputKind::Distribution,
        binding: Binding::Geography,
        action_hint: "Flag the geographic spread; consider rebalancing toward regions the application must serve",
    },
    AnalysisSpec {
        id: "publication_time",
        title: "Source Data Publication Time",
        section: Section::What,
        task: "Histogram of records per publication year, from the timestamp metadata",
        objects: &[Metadata],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &[],
        output: OutputKind::Histogram,
        binding: Binding::PublicationTime,
        action_hint: "Flag the publication time range; consider rebalancing for time-sensitive tasks",
    },
    AnalysisSpec {
        id: "language",
        title: "Language",
        section: Section::What,
        task: "Distribution of records over detected languages",
        objects: &[Text, InferredTextSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal language (built-in trigram identifier or provider)"],
        output: OutputKind::Distribution,
        binding: Binding::SignalCategories("language"),
        action_hint: "Flag language coverage; consider rebalancing or qualifying model capabilities for under-covered languages",
    },
    AnalysisSpec {
        id: "data_duplication",
        title: "Data Duplication",
        section: Section::What,
        task: "Measure the share of records that duplicate another record, exactly or approximately",
        objects: &[Text, Image],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &[],
        output: OutputKind::DuplicateReport,
        binding: Binding::Duplication,
        action_hint: "Remove duplicates to reduce memorization and privacy risk",
    },
    AnalysisSpec {
        id: "dataset_overlap",
        title: "Dataset Overlap",
        section: Section::What,
        task: "Measure the share of records that also appear in a comparison dataset such as a benchmark",
        objects: &[Text, Image],
        effort: Effort::Medium,
        effort_note: None,
        dependencies: &["comparison dataset"],
        output: OutputKind::OverlapReport,
        binding: Binding::Overlap,
        action_hint: "Remove overlapping records to keep benchmark results valid",
    },
    AnalysisSpec {
        id: "sit_x_top_tokens",
        title: "Social Identity Terms X Top Tokens",
        section: Section::Associations,
        task: "For each identity group, rank the tokens that co-occur with its terms",
        objects: &[Text],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["identity lexicon", "stopword list"],
        output: OutputKind::RankedList,
        binding: Binding::TermCooccurrence,
        action_hint: "Flag associations; consider rebalancing harmful associations seen in model evaluations",
    },
    AnalysisSpec {
        id: "sit_x_topic",
        title: "Social Identity Terms X Topic",
        section: Section::Associations,
        task: "Topic distribution broken down by identity group",
        objects: &[InferredTextSignals, Text],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["identity lexicon", "signal topic (topic classifier)"],
        output: OutputKind::DisaggregatedTable,
        binding: Binding::Table(HumanSide::Terms, ContentSide::Categorical("topic")),
        action_hint: "Flag groups disproportionately tied to stereotypical or sensitive topics",
    },
    AnalysisSpec {
        id: "sit_x_offensive",
        title: "Social Identity Terms X Offensive Speech",
        section: Section::Associations,
        task: "Toxicity distribution broken down by identity group",
        objects: &[InferredTextSignals, Text],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["identity lexicon", "signal toxicity (toxicity classifier)"],
        output: OutputKind::DisaggregatedTable,
        binding: Binding::Table(HumanSide::Terms, ContentSide::BinnedScalar("toxicity")),
        action_hint: "Flag high toxicity; consider rebalancing harmful associations seen in model evaluations",
    },
    AnalysisSpec {
        id: "psi_x_image_features",
        title: "Perceived Social Identity Features X Top Image Features",
        section: Section::Associations,
        task: "Co-occurrence of perceived identity labels with detected image objects",
        objects: &[InferredImageSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal perceived_identity", "signal image_objects (object detector)"],
        output: OutputKind::DisaggregatedTable,
        binding: Binding::Table(HumanSide::Signal("perceived_identity"), ContentSide::SpanLabels("image_objects")),
        action_hint: "Flag stereotypical associations; consider rebalancing harmful associations seen in model evaluations",
    },
    AnalysisSpec {
        id: "psi_x_sexual",
        title: "Perceived Social Identity Features X Sexual Imagery",
        section: Section::Associations,
        task: "Share of sexual imagery broken down by perceived identity label",
        objects: &[InferredImageSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal perceived_identity", "signal sexual_image (visual content classifier)"],
        output: OutputKind::DisaggregatedTable,
        binding: Binding::Table(HumanSide::Signal("perceived_identity"), ContentSide::Boolean("sexual_image")),
        action_hint: "Flag sexual content; consider filtering it for the intended downstream tasks",
    },
    AnalysisSpec {
        id: "psi_x_violent",
        title: "Perceived Social Identity Features X Violent Imagery",
        section: Section::Associations,
        task: "Share of violent imagery broken down by perceived identity label",
        objects: &[InferredImageSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal perceived_identity", "signal violent_image (visual content classifier)"],
        output: OutputKind::DisaggregatedTable,
        binding: Binding::Table(HumanSide::Signal("perceived_identity"), ContentSide::Boolean("violent_image")),
        action_hint: "Flag violent content; consider filtering it for the intended downstream tasks",
    },
    AnalysisSpec {
        id: "psi_x_hateful_symbols",
        title: "Perceived Social Identity Features X Hateful Symbols",
        section: Section::Associations,
        task: "Co-occurrence of perceived identity labels with hateful symbols in images",
        objects: &[InferredImageSignals],
        effort: Effort::NotYetPossible,
        effort_note: Some(NOT_CURRENTLY),
        dependencies: &["hateful symbol classifier"],
        output: OutputKind::Unsupported,
        binding: Binding::Unsupported,
        action_hint: "Document that hateful imagery was not assessed",
    },
    AnalysisSpec {
        id: "sit_x_sexual",
        title: "Social Identity Terms X Sexual Imagery",
        section: Section::Associations,
        task: "Share of sexual imagery broken down by identity group mentioned in the caption",
        objects: &[Text, InferredImageSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["identity lexicon", "signal sexual_image (visual content classifier)"],
        output: OutputKind::DisaggregatedTable,
        binding: Binding::Table(HumanSide::Terms, ContentSide::Boolean("sexual_image")),
        action_hint: "Flag associations; consider rebalancing harmful associations seen in model evaluations",
    },
    AnalysisSpec {
        id: "sit_x_violent",
        title: "Social Identity Terms X Violent Imagery",
        section: Section::Associations,
        task: "Share of violent imagery broken down by identity group mentioned in the caption",
        objects: &[Text, InferredImageSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["identity lexicon", "signal violent_image (visual content classifier)"],
        output: OutputKind::DisaggregatedTable,
        binding: Binding::Table(HumanSide::Terms, ContentSide::Boolean("violent_image")),
        action_hint: "Flag associations; consider rebalancing harmful associations seen in model evaluations",
    },
    AnalysisSpec {
        id: "psi_x_top_tokens",
        title: "Perceived Social Identity Features X Top Text Tokens",
        section: Section::Associations,
        task: "For each perceived identity label, rank the caption tokens that co-occur with it",
        objects: &[InferredImageSignals, Text],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal perceived_identity", "stopword list"],
        output: OutputKind::RankedList,
        binding: Binding::SignalCooccurrence("perceived_identity"),
        action_hint: "Flag associations; consider rebalancing harmful associations seen in model evaluations",
    },
    AnalysisSpec {
        id: "psi_x_offensive",
        title: "Perceived Social Identity Features X Offensive Speech",
        section: Section::Associations,
        task: "Toxicity of the associated text broken down by perceived identity label",
        objects: &[InferredImageSignals, InferredTextSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal perceived_identity", "signal toxicity (toxicity classifier)"],
        output: OutputKind::DisaggregatedTable,
        binding: Binding::Table(HumanSide::Signal("perceived_identity"), ContentSide::BinnedScalar("toxicity")),
        action_hint: "Flag high toxicity; consider rebalancing harmful associations seen in model evaluations",
    },
    AnalysisSpec {
        id: "psi_x_topic",
        title: "Perceived Social Identity Features X Topic",
        section: Section::Associations,
        task: "Topic distribution of the associated text broken down by perceived identity label",
        objects: &[InferredImageSignals, InferredTextSignals],
        effort: Effort::Low,
        effort_note: None,
        dependencies: &["signal perceived_identity", "signal topic (topic classifier)"],
        output: OutputKind::DisaggregatedTable,
        binding: Binding::Table(HumanSide::Signal("perceived_identity"), ContentSide::Categorical("topic")),
        action_hint: "Flag groups disproportionately tied to stereotypical or sensitive topics",
    },
];

/// All registered analyses in listing order.
pub fn registry() -> &'static [AnalysisSpec] {
    REGISTRY
}

pub fn lookup(id: &str) -> Option<&'static AnalysisSpec> {
    REGISTRY.iter().find(|s| s.id == id)
}

/// Registered ids closest to `id`, best first.
pub fn nearest_ids(id: &str, n: usize) -> Vec<&'static str> {
    let mut scored: Vec<(f64, &'static str)> = REGISTRY
        .iter()
        .map(|s| (strsim::jaro_winkler(id, s.id), s.id))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(n).map(|(_, id)| id).collect()
}
