//! Rule table mapping card findings to development-phase actions.

use serde::{Deserialize, Serialize};

use super::card::{AnalysisCard, CardOutput, DistributionPayload, HistogramPayload, ProportionPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    DataCollectionProcessing,
    ModelEvaluation,
    Documentation,
    PackagingRelease,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::DataCollectionProcessing,
        Phase::ModelEvaluation,
        Phase::Documentation,
        Phase::PackagingRelease,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Addition,
    Removal,
    Augmentation,
    Flagging,
    NonUse,
    AdditionalBenchmarking,
    BenchmarkCreation,
    Warning,
    Licensing,
    Access,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Goal {
    DatasetDevelopment,
    UseDecisions,
    ModelUnderstanding,
    Auditing,
}

impl Goal {
    pub const ALL: [Goal; 4] = [
        Goal::DatasetDevelopment,
        Goal::UseDecisions,
        Goal::ModelUnderstanding,
        Goal::Auditing,
    ];
}

/// Actions available in each development phase.
pub fn legal_actions(phase: Phase) -> &'static [Action] {
    match phase {
        Phase::DataCollectionProcessing => &[
            Action::Addition,
            Action::Removal,
            Action::Augmentation,
            Action::Flagging,
            Action::NonUse,
        ],
        Phase::ModelEvaluation => &[Action::AdditionalBenchmarking, Action::BenchmarkCreation],
        Phase::Documentation => &[Action::Warning, Action::NonUse],
        Phase::PackagingRelease => &[Action::Licensing, Action::Access],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditPlanContext {
    pub goal: Goal,
    pub phase: Phase,
    pub mutable: bool,
    #[serde(default)]
    pub release_planned: bool,
}

impl Default for AuditPlanContext {
    fn default() -> Self {
        AuditPlanContext {
            goal: Goal::Auditing,
            phase: Phase::DataCollectionProcessing,
            mutable: true,
            release_planned: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionRecommendation {
    pub phase: Phase,
    pub action: Action,
    pub rationale: String,
}

/// Limits above which a card counts as a finding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionThresholds {
    /// Share of affected records above which proportions are findings.
    pub proportion_limit: f64,
}

impl Default for ActionThresholds {
    fn default() -> Self {
        ActionThresholds { proportion_limit: 0.05 }
    }
}

/// Reasons a card's result calls for action beyond flagging.
pub fn findings(card: &AnalysisCard, limits: &ActionThresholds) -> Vec<String> {
    let limit = limits.proportion_limit;
    let above = |share: Option<f64>| share.is_some_and(|s| s > limit);
    let mut out = Vec::new();
    match &card.output {
        CardOutput::DisaggregatedTable(t) => {
            let n: usize = t
                .tables
                .iter()
                .map(|a| a.associations.iter().filter(|f| f.flagged).count())
                .sum();
            if n > 0 {
                out.push(format!(
                    "{n} group-content association(s) with lift >= {} and support >= {}",
                    t.lift_threshold, t.min_support
                ));
            }
        }
        CardOutput::Proportion(ProportionPayload::Pii(p)) => {
            if above(p.proportion.value) {
                out.push(format!(
                    "{} records contain PII, above the {limit} limit",
                    p.proportion.numerator
                ));
            }
        }
        CardOutput::Proportion(ProportionPayload::Signal { signal, proportion, .. }) => {
            // People in images measures presence, not a harm.
            if card.analysis_id != "people_in_images" && above(proportion.value) {
                out.push(format!("share of records with `{signal}` exceeds the {limit} limit"));
            }
        }
        CardOutput::Histogram(HistogramPayload::Scores {
            signal,
            high_threshold,
            high_share,
            ..
        }) => {
            if above(*high_share) {
                out.push(format!(
                    "share of records with `{signal}` >= {high_threshold} exceeds the {limit} limit"
                ));
            }
        }
        CardOutput::Distribution(DistributionPayload::HatefulTerms(h)) => {
            if h.total() > 0 {
                out.push(format!("{} hateful term occurrence(s)", h.total()));
            }
        }
        CardOutput::DuplicateReport(d) => {
            if above(d.proportion) {
                out.push(format!("{} duplicate records, above the {limit} limit", d.duplicates));
            }
        }
        CardOutput::OverlapReport(o) if above(o.percent.map(|p| p / 100.0)) => {
            out.push(format!("{} records also appear in `{}`", o.matched, o.datasets.1));
        }
        _ => {}
    }
    if !card.target_deficits.is_empty() {
        let list: Vec<String> = card
            .target_deficits
            .iter()
            .map(|d| format!("{} (+{})", d.label, d.additional_records))
            .collect();
        out.push(format!("below target distribution: {}", list.join(", ")));
    }
    out
}

/// Advisory actions for a card under a plan context. Every returned action
/// is legal for its phase.
pub fn recommend_actions(
    card: &AnalysisCard,
    ctx: &AuditPlanContext,
    limits: &ActionThresholds,
) -> Vec<ActionRecommendation> {
    let mut out: Vec<ActionRecommendation> = Vec::new();
    let mut push = |phase: Phase, action: Action, rationale: String| {
        if !out.iter().any(|r| r.phase == phase && r.action == action) {
            out.push(ActionRecommendation {
                phase,
                action,
                rationale,
            });
        }
    };
    push(
        Phase::DataCollectionProcessing,
        Action::Flagging,
        format!(
            "Record the {} result for downstream evaluation and documentation",
            card.title
        ),
    );
    if let CardOutput::Unsupported { reason } = &card.output {
        push(
            Phase::Documentation,
            Action::Warning,
            format!("Document that this analysis was not performed: {reason}"),
        );
        return out;
    }
    let found = findings(card, limits);
    if found.is_empty() {
        return out;
    }
    let summary = found.join("; ");
    let has_flags = matches!(&card.output, CardOutput::DisaggregatedTable(_));
    let is_overlap = matches!(&card.output, CardOutput::OverlapReport(_));
    match ctx.phase {
        Phase::DataCollectionProcessing if ctx.mutable => {
            if !card.target_deficits.is_empty() {
                let list: Vec<String> = card
                    .target_deficits
                    .iter()
                    .map(|d| format!("{} more `{}` records", d.additional_records, d.label))
                    .collect();
                push(
                    Phase::DataCollectionProcessing,
                    Action::Addition,
                    format!("Rebalance toward the target distribution: add {}", list.join(", ")),
                );
            }
            if found.len() > usize::from(!card.target_deficits.is_empty()) {
                push(
                    Phase::DataCollectionProcessing,
                    Action::Removal,
                    format!("Filter the affected records ({summary})"),
                );
                push(
                    Phase::DataCollectionProcessing,
                    Action::Augmentation,
                    format!("Tag the affected records so their influence can be controlled downstream ({summary})"),
                );
            }
        }
        Phase::ModelEvaluation => {
            push(
                Phase::ModelEvaluation,
                Action::AdditionalBenchmarking,
                format!("Select benchmarks that probe this finding ({summary})"),
            );
            if has_flags || is_overlap {
                push(
                    Phase::ModelEvaluation,
                    Action::BenchmarkCreation,
                    format!("Build an evaluation targeting the finding, since existing benchmarks may not cover it ({summary})"),
                );
            }
        }
        _ => {}
    }
    let dataset_fixed = !ctx.mutable || ctx.phase != Phase::DataCollectionProcessing;
    if dataset_fixed {
        push(
            Phase::Documentation,
            Action::Warning,
            format!("Document this limitation for dataset users ({summary})"),
        );
    }
    if ctx.goal == Goal::UseDecisions {
        push(
            Phase::DataCollectionProcessing,
            Action::NonUse,
            format!("Weigh this finding when choosing between candidate datasets ({summary})"),
        );
        push(
            Phase::Documentation,
            Action::NonUse,
            format!("Document uses for which the dataset is unsuitable ({summary})"),
        );
    }
    if ctx.release_planned || ctx.phase == Phase::PackagingRelease {
        push(
            Phase::PackagingRelease,
            Action::Licensing,
            format!("Restrict uses affected by this finding through terms of use ({summary})"),
        );
        push(
            Phase::PackagingRelease,
            Action::Access,
            format!("Consider limited access for the released data ({summary})"),
        );
    }
    out
}
