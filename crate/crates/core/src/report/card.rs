//! Analysis cards: registry metadata, the result payload, recommended
//! actions and provenance.

use std::collections::BTreeMap;

use serde::Serialize;

use super::actions::{recommend_actions, ActionRecommendation, ActionThresholds, AuditPlanContext};
use crate::associations::{AssociationFlag, Cooccurrences, DisaggregatedTable};
use crate::content::{BoolRule, CategoricalDistribution, Histogram, Proportion};
use crate::error::{Error, Result};
use crate::human::{Distribution, HatefulStats, IdentityStats, PiiPresence};
use crate::provenance::{DuplicateReport, GeographicSpread, OverlapReport, PublicationHistogram, TopSources};
use crate::registry::{lookup, AnalysisObject, Effort, OutputKind, Section};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "of", rename_all = "kebab-case")]
pub enum DistributionPayload {
    IdentityTerms(IdentityStats),
    Pronouns {
        distribution: Distribution,
    },
    HatefulTerms(HatefulStats),
    SignalLabels {
        signal: String,
        provider: String,
        #[serde(flatten)]
        distribution: CategoricalDistribution,
    },
    Geography(GeographicSpread),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "of", rename_all = "kebab-case")]
pub enum HistogramPayload {
    Scores {
        signal: String,
        provider: String,
        histogram: Histogram,
        /// Scores at or above this count as high.
        high_threshold: f64,
        high_share: Option<f64>,
    },
    Years(PublicationHistogram),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "of", rename_all = "kebab-case")]
pub enum ProportionPayload {
    Pii(PiiPresence),
    Signal {
        signal: String,
        provider: String,
        rule: BoolRule,
        proportion: Proportion,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "of", rename_all = "kebab-case")]
pub enum RankedListPayload {
    Sources(TopSources),
    Cooccurrences { lists: Vec<Cooccurrences> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationTable {
    pub table: DisaggregatedTable,
    pub associations: Vec<AssociationFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TablePayload {
    pub tables: Vec<AssociationTable>,
    pub lift_threshold: f64,
    pub min_support: u64,
}

impl TablePayload {
    pub fn flagged(&self) -> impl Iterator<Item = &AssociationFlag> {
        self.tables
            .iter()
            .flat_map(|t| t.associations.iter().filter(|f| f.flagged))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type")]
pub enum CardOutput {
    Distribution(DistributionPayload),
    Histogram(HistogramPayload),
    Proportion(ProportionPayload),
    RankedList(RankedListPayload),
    DisaggregatedTable(TablePayload),
    DuplicateReport(DuplicateReport),
    OverlapReport(OverlapReport),
    Unsupported { reason: String },
}

impl CardOutput {
    pub fn kind(&self) -> OutputKind {
        match self {
            CardOutput::Distribution(_) => OutputKind::Distribution,
            CardOutput::Histogram(_) => OutputKind::Histogram,
            CardOutput::Proportion(_) => OutputKind::Proportion,
            CardOutput::RankedList(_) => OutputKind::RankedList,
            CardOutput::DisaggregatedTable(_) => OutputKind::DisaggregatedTable,
            CardOutput::DuplicateReport(_) => OutputKind::DuplicateReport,
            CardOutput::OverlapReport(_) => OutputKind::OverlapReport,
            CardOutput::Unsupported { .. } => OutputKind::Unsupported,
        }
    }
}

/// A declared dependency and what satisfied it in this run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dependency {
    pub requirement: String,
    pub resolved: Option<String>,
}

/// Records needed to reach a target share for one label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetDeficit {
    pub label: String,
    pub observed: u64,
    pub target_share: f64,
    pub additional_records: u64,
}

/// Labels whose count is below `target` share of `total`, with the number
/// of records to add: the smallest `x` such that `(c + x) / (total + x) >= t`.
pub fn target_deficits(
    counts: &BTreeMap<String, u64>,
    total: u64,
    target: &BTreeMap<String, f64>,
) -> Vec<TargetDeficit> {
    let mut out = Vec::new();
    for (label, &t) in target {
        let c = counts.get(label).copied().unwrap_or(0);
        if t <= 0.0 || (total > 0 && c as f64 >= t * total as f64) {
            continue;
        }
        if t >= 1.0 {
            continue;
        }
        let x = ((t * total as f64 - c as f64) / (1.0 - t)).ceil().max(0.0) as u64;
        // Guard against floating error at the boundary.
        let x = (x.saturating_sub(1)..=x + 1)
            .find(|&x| (c + x) as f64 >= t * (total + x) as f64 - 1e-12)
            .unwrap_or(x);
        if x > 0 {
            out.push(TargetDeficit {
                label: label.clone(),
                observed: c,
                target_share: t,
                additional_records: x,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleInfo {
    pub size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CardProvenance {
    pub dataset: String,
    pub records_scanned: u64,
    pub skipped_lines: u64,
    /// Records lacking each consumed signal.
    pub n_missing: BTreeMap<String, u64>,
    pub config_digest: String,
    pub tool_version: String,
    pub timestamp: String,
    pub sample: Option<SampleInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisCard {
    pub analysis_id: String,
    pub title: String,
    pub section: Section,
    pub task: String,
    pub analysis_object: Vec<AnalysisObject>,
    pub effort: Effort,
    pub effort_label: String,
    pub dependencies: Vec<Dependency>,
    pub output: CardOutput,
    pub action: Vec<ActionRecommendation>,
    pub action_hint: String,
    pub target_deficits: Vec<TargetDeficit>,
    pub parameters: serde_json::Value,
    pub notes: Vec<String>,
    pub provenance: CardProvenance,
}

/// Run-specific card inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CardInputs {
    pub provenance: CardProvenance,
    /// Resolution per registry dependency, in registry order. Missing
    /// entries are shown unresolved.
    pub resolved: Vec<Option<String>>,
    pub parameters: serde_json::Value,
    pub notes: Vec<String>,
    pub target_deficits: Vec<TargetDeficit>,
}

impl CardInputs {
    pub fn new(provenance: CardProvenance) -> Self {
        CardInputs {
            provenance,
            resolved: Vec::new(),
            parameters: serde_json::Value::Object(Default::default()),
            notes: Vec::new(),
            target_deficits: Vec::new(),
        }
    }
}

/// Assembles a card for a registered analysis and fills in its actions.
pub fn make_card(
    analysis_id: &str,
    output: CardOutput,
    inputs: CardInputs,
    ctx: &AuditPlanContext,
    limits: &ActionThresholds,
) -> Result<AnalysisCard> {
    let spec = lookup(analysis_id).ok_or_else(|| Error::UnregisteredAnalysis(analysis_id.to_owned()))?;
    if output.kind() != spec.output {
        return Err(Error::PayloadMismatch {
            id: analysis_id.to_owned(),
            expected: spec.output.as_str().to_owned(),
            actual: output.kind().as_str().to_owned(),
        });
    }
    let output = if spec.effort == Effort::NotYetPossible {
        CardOutput::Unsupported {
            reason: format!(
                "{}: no reliable automated method exists for this analysis (needs: {})",
                spec.effort_label(),
                spec.dependencies.join(", ")
            ),
        }
    } else {
        output
    };
    let dependencies = spec
        .dependencies
        .iter()
        .enumerate()
        .map(|(i, d)| Dependency {
            requirement: (*d).to_owned(),
            resolved: inputs.resolved.get(i).cloned().flatten(),
        })
        .collect();
    let mut card = AnalysisCard {
        analysis_id: spec.id.to_owned(),
        title: spec.title.to_owned(),
        section: spec.section,
        task: spec.task.to_owned(),
        analysis_object: spec.objects.to_vec(),
        effort: spec.effort,
        effort_label: spec.effort_label().to_owned(),
        dependencies,
        output,
        action: Vec::new(),
        action_hint: spec.action_hint.to_owned(),
        target_deficits: inputs.target_deficits,
        parameters: inputs.parameters,
        notes: inputs.notes,
        provenance: inputs.provenance,
    };
    card.action = recommend_actions(&card, ctx, limits);
    Ok(card)
}

#[cfg(test)]
pub(crate) fn test_provenance() -> CardProvenance {
    CardProvenance {
        dataset: "fixture".into(),
        records_scanned: 3,
        skipped_lines: 0,
        n_missing: BTreeMap::new(),
        config_digest: "0".repeat(64),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp: "2024-01-01T00:00:00Z".into(),
        sample: None,
    }
}
