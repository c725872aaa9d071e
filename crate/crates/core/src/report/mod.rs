//! Analysis cards, recommended actions, report rendering and mitigations.

mod actions;
mod card;
mod mitigation;
mod render;

pub use actions::{
    findings, legal_actions, recommend_actions, Action, ActionRecommendation, ActionThresholds, AuditPlanContext, Goal,
    Phase,
};
pub use card::{
    make_card, target_deficits, AnalysisCard, AssociationTable, CardInputs, CardOutput, CardProvenance, Dependency,
    DistributionPayload, HistogramPayload, ProportionPayload, RankedListPayload, SampleInfo, TablePayload,
    TargetDeficit,
};
pub use mitigation::{apply_mitigation, read_id_list, MitigationManifest, MitigationMode, SelectionSpec, TAG_KEY};
pub use render::{
    canonical_json, canonical_number, render_report, Environment, ReportContext, ReportDocument, ReportFormat,
    SCHEMA_VERSION,
};
