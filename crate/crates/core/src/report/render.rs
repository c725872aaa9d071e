//! Structured (canonical JSON) and human-readable (Markdown) reports.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use super::actions::AuditPlanContext;
use super::card::{
    AnalysisCard, CardOutput, DistributionPayload, HistogramPayload, ProportionPayload, RankedListPayload,
};
use crate::content::bin_label;
use crate::error::{Error, Result};
use crate::human::Distribution;
use crate::registry::Section;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Structured,
    HumanReadable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Environment {
    pub tool: String,
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            tool: "daf".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

/// Plan-level context shown at the top of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportContext {
    pub dataset: String,
    pub comparison_dataset: Option<String>,
    pub plan: AuditPlanContext,
    pub config_digest: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument<'a> {
    pub schema_version: u32,
    pub context: &'a ReportContext,
    pub cards: &'a [AnalysisCard],
    pub environment: Environment,
}

pub fn render_report(cards: &[AnalysisCard], context: &ReportContext, format: ReportFormat) -> Result<String> {
    if cards.is_empty() {
        return Err(Error::EmptyReport);
    }
    Ok(match format {
        ReportFormat::Structured => {
            let doc = ReportDocument {
                schema_version: SCHEMA_VERSION,
                context,
                cards,
                environment: Environment::current(),
            };
            canonical_json(&serde_json::to_value(&doc)?)
        }
        ReportFormat::HumanReadable => markdown(cards, context),
    })
}

/// Formats a finite float with 9 significant digits and no trailing zeros.
pub fn canonical_number(x: f64) -> Option<String> {
    if !x.is_finite() {
        return None;
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    Some(format!("{rounded}"))
}

/// Pretty-printed JSON with sorted keys and canonical numbers, newline
/// terminated. Equal values always produce equal bytes.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                match n.as_f64().and_then(canonical_number) {
                    Some(s) => out.push_str(&s),
                    None => out.push_str("null"),
                }
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, indent + 1);
                write_value(out, item, indent + 1);
            }
            newline(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, indent + 1);
                out.push_str(&serde_json::to_string(k).expect("strings serialize"));
                out.push_str(": ");
                write_value(out, &map[*k], indent + 1);
            }
            newline(out, indent);
            out.push('}');
        }
    }
}

fn newline(out: &mut String, indent: usize) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn fmt_share(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.2}%", v * 100.0),
        None => "undefined".into(),
    }
}

fn fmt_f(x: f64) -> String {
    canonical_number(x).unwrap_or_else(|| "n/a".into())
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn distribution_table(out: &mut String, header: &str, d: &Distribution, limit: usize) {
    let _ = writeln!(out, "| {header} | count | share |\n|---|---:|---:|");
    for (label, count) in d.categories().iter().take(limit) {
        let _ = writeln!(
            out,
            "| {} | {count} | {} |",
            cell(label),
            fmt_share(d.proportion(label))
        );
    }
    if d.categories().len() > limit {
        let _ = writeln!(out, "| ({} more) | | |", d.categories().len() - limit);
    }
    let _ = writeln!(out, "\nTotal: {}\n", d.total());
}

const ROWS: usize = 20;

fn output_section(out: &mut String, output: &CardOutput) {
    match output {
        CardOutput::Distribution(DistributionPayload::IdentityTerms(s)) => {
            let _ = writeln!(out, "Records scanned: {}\n", s.records_scanned);
            for (axis, d) in &s.axes {
                let _ = writeln!(out, "Axis `{axis}` (records per group):\n");
                distribution_table(out, "group", d, ROWS);
            }
            if !s.intersections.is_empty() {
                let _ = writeln!(out, "| intersection | records |\n|---|---:|");
                for i in &s.intersections {
                    let names: Vec<String> = i.groups.iter().map(|g| format!("{}:{}", g.axis, g.group)).collect();
                    let _ = writeln!(out, "| {} | {} |", cell(&names.join(" + ")), i.count);
                }
                out.push('\n');
            }
            let _ = writeln!(out, "Term occurrences:\n");
            distribution_table(out, "term", &s.terms, ROWS);
        }
        CardOutput::Distribution(DistributionPayload::Pronouns { distribution }) => {
            distribution_table(out, "pronoun group", distribution, ROWS)
        }
        CardOutput::Distribution(DistributionPayload::HatefulTerms(h)) => {
            let _ = writeln!(out, "| term | referenced group | occurrences |\n|---|---|---:|");
            for d in &h.detail {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} |",
                    cell(&d.term),
                    cell(&d.referenced_group),
                    d.count
                );
            }
            let _ = writeln!(out, "\nTotal occurrences: {}\n", h.total());
        }
        CardOutput::Distribution(DistributionPayload::SignalLabels {
            signal,
            provider,
            distribution,
        }) => {
            let _ = writeln!(
                out,
                "Signal `{signal}` from `{provider}`; records without the signal: {}\n",
                distribution.n_missing
            );
            distribution_table(out, "label", &distribution.distribution, ROWS);
        }
        CardOutput::Distribution(DistributionPayload::Geography(g)) => {
            let _ = writeln!(out, "Records per country:\n");
            distribution_table(out, "country", &g.records, ROWS);
            let _ = writeln!(out, "Tokens per country:\n");
            distribution_table(out, "country", &g.tokens, ROWS);
        }
        CardOutput::Histogram(HistogramPayload::Scores {
            signal,
            histogram,
            high_threshold,
            high_share,
            ..
        }) => {
            let _ = writeln!(out, "Signal `{signal}`:\n\n| bin | records |\n|---|---:|");
            for (i, c) in histogram.counts.iter().enumerate() {
                let _ = writeln!(out, "| {} | {c} |", bin_label(&histogram.edges, i));
            }
            let _ = writeln!(
                out,
                "\nScored: {}; missing: {}; share >= {}: {}\n",
                histogram.scored(),
                histogram.n_missing,
                fmt_f(*high_threshold),
                fmt_share(*high_share)
            );
        }
        CardOutput::Histogram(HistogramPayload::Years(y)) => {
            let _ = writeln!(out, "| year | records |\n|---|---:|");
            for (year, c) in &y.years {
                let _ = writeln!(out, "| {year} | {c} |");
            }
            let _ = writeln!(out, "\nWithout a usable timestamp: {}\n", y.missing);
        }
        CardOutput::Proportion(ProportionPayload::Pii(p)) => {
            let _ = writeln!(
                out,
                "Records with PII: {} of {} ({}); missing: {}\n",
                p.proportion.numerator,
                p.proportion.denominator,
                fmt_share(p.proportion.value),
                p.proportion.n_missing
            );
            for (label, n) in &p.labels {
                let _ = writeln!(out, "- {label}: {n}");
            }
            if !p.ids.is_empty() {
                let _ = writeln!(
                    out,
                    "\nFirst ids: {}",
                    p.ids.iter().take(10).cloned().collect::<Vec<_>>().join(", ")
                );
            }
            out.push('\n');
        }
        CardOutput::Proportion(ProportionPayload::Signal {
            signal,
            provider,
            proportion,
            ..
        }) => {
            let _ = writeln!(
                out,
                "Signal `{signal}` from `{provider}`: {} of {} records ({}); missing: {}\n",
                proportion.numerator,
                proportion.denominator,
                fmt_share(proportion.value),
                proportion.n_missing
            );
        }
        CardOutput::RankedList(RankedListPayload::Sources(s)) => {
            let _ = writeln!(out, "| domain | records | tokens |\n|---|---:|---:|");
            for d in &s.ranked {
                let _ = writeln!(out, "| {} | {} | {} |", cell(&d.domain), d.records, d.tokens);
            }
            let _ = writeln!(
                out,
                "\nDistinct domains: {}; records without a source: {}\n",
                s.domains_total, s.missing_records
            );
        }
        CardOutput::RankedList(RankedListPayload::Cooccurrences { lists }) => {
            for list in lists {
                let _ = writeln!(out, "Groups from {}:\n", list.source.describe());
                for g in list.groups.values() {
                    let tokens: Vec<String> = g
                        .tokens
                        .iter()
                        .take(10)
                        .map(|t| format!("{} ({})", t.token, t.count))
                        .collect();
                    let _ = writeln!(
                        out,
                        "- **{}** ({} records): {}",
                        g.key.value,
                        g.records,
                        tokens.join(", ")
                    );
                }
                out.push('\n');
            }
        }
        CardOutput::DisaggregatedTable(t) => {
            for at in &t.tables {
                let table = &at.table;
                let _ = writeln!(out, "{} by {}:\n", table.content.describe(), table.human.describe());
                let _ = write!(out, "| group |");
                for c in &table.columns {
                    let _ = write!(out, " {} |", cell(c));
                }
                let _ = write!(out, " total |\n|---|");
                for _ in 0..=table.columns.len() {
                    out.push_str("---:|");
                }
                out.push('\n');
                for (i, r) in table.rows.iter().enumerate() {
                    let _ = write!(out, "| {} |", cell(&r.value));
                    for v in &table.cells[i] {
                        let _ = write!(out, " {v} |");
                    }
                    let _ = writeln!(out, " {} |", table.row_totals[i]);
                }
                out.push('\n');
                let flagged: Vec<String> = at
                    .associations
                    .iter()
                    .filter(|f| f.flagged)
                    .map(|f| {
                        format!(
                            "{} x {} (lift {}, support {})",
                            f.group.value,
                            f.category,
                            fmt_f(f.lift),
                            f.support
                        )
                    })
                    .collect();
                if flagged.is_empty() {
                    let _ = writeln!(out, "No flagged associations.\n");
                } else {
                    let _ = writeln!(out, "Flagged associations:\n");
                    for f in flagged {
                        let _ = writeln!(out, "- {f}");
                    }
                    out.push('\n');
                }
            }
            let _ = writeln!(
                out,
                "Lift threshold {}, minimum support {}.\n",
                fmt_f(t.lift_threshold),
                t.min_support
            );
        }
        CardOutput::DuplicateReport(d) => {
            let _ = writeln!(
                out,
                "Mode: {:?}; duplicates: {} of {} records ({}); clusters: {}\n",
                d.mode,
                d.duplicates,
                d.records_scanned,
                fmt_share(d.proportion),
                d.clusters.len()
            );
        }
        CardOutput::OverlapReport(o) => {
            let _ = writeln!(
                out,
                "{} records of `{}` also in `{}` ({}); {} records compared against {}.\n",
                o.matched,
                o.datasets.0,
                o.datasets.1,
                o.percent.map_or("undefined".into(), |p| format!("{p:.2}%")),
                o.records_a,
                o.records_b
            );
        }
        CardOutput::Unsupported { reason } => {
            let _ = writeln!(out, "Not run: {reason}\n");
        }
    }
}

fn markdown(cards: &[AnalysisCard], ctx: &ReportContext) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Dataset analysis: {}\n", ctx.dataset);
    let _ = writeln!(
        out,
        "- Goal: {:?}\n- Phase: {:?}\n- Dataset mutable: {}\n- Release planned: {}\n- Config digest: `{}`\n- Generated: {}\n",
        ctx.plan.goal, ctx.plan.phase, ctx.plan.mutable, ctx.plan.release_planned, ctx.config_digest, ctx.timestamp
    );
    if let Some(c) = &ctx.comparison_dataset {
        let _ = writeln!(out, "Comparison dataset: {c}\n");
    }
    for section in [Section::Who, Section::What, Section::Associations] {
        let in_section: Vec<&AnalysisCard> = cards.iter().filter(|c| c.section == section).collect();
        if in_section.is_empty() {
            continue;
        }
        let _ = writeln!(out, "## {}\n", section.heading());
        for card in in_section {
            let _ = writeln!(out, "### {} (`{}`)\n", card.title, card.analysis_id);
            let objects: Vec<String> = card.analysis_object.iter().map(|o| format!("{o:?}")).collect();
            let deps: Vec<String> = card
                .dependencies
                .iter()
                .map(|d| match &d.resolved {
                    Some(r) => format!("{} ({r})", d.requirement),
                    None => d.requirement.clone(),
                })
                .collect();
            let _ = writeln!(
                out,
                "- Task: {}\n- Analysis object: {}\n- Effort: {}\n- Dependencies: {}\n- Output: {}\n",
                card.task,
                objects.join(", "),
                card.effort_label,
                if deps.is_empty() {
                    "none".into()
                } else {
                    deps.join("; ")
                },
                card.output.kind().as_str()
            );
            output_section(&mut out, &card.output);
            for d in &card.target_deficits {
                let _ = writeln!(
                    out,
                    "- Target deficit `{}`: {} observed, target share {}, add {} records",
                    d.label,
                    d.observed,
                    fmt_f(d.target_share),
                    d.additional_records
                );
            }
            let _ = writeln!(out, "Actions:\n");
            for a in &card.action {
                let _ = writeln!(out, "- {:?} / {:?}: {}", a.phase, a.action, a.rationale);
            }
            let _ = writeln!(out, "\nSuggested follow-up: {}\n", card.action_hint);
            for n in &card.notes {
                let _ = writeln!(out, "> {n}\n");
            }
            let p = &card.provenance;
            let missing: Vec<String> = p.n_missing.iter().map(|(s, n)| format!("{s}={n}")).collect();
            let _ = writeln!(
                out,
                "_Dataset `{}`; {} records scanned; {} lines skipped; missing signals: {}; tool {}._\n",
                p.dataset,
                p.records_scanned,
                p.skipped_lines,
                if missing.is_empty() {
                    "none".into()
                } else {
                    missing.join(", ")
                },
                p.tool_version
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(canonical_number(0.1 + 0.2).unwrap(), "0.3");
        assert_eq!(canonical_number(2.0).unwrap(), "2");
        assert_eq!(canonical_number(-0.0).unwrap(), "0");
        assert_eq!(canonical_number(1.0 / 3.0).unwrap(), "0.333333333");
        assert_eq!(canonical_number(123456789.4).unwrap(), "123456789");
        assert_eq!(canonical_number(f64::NAN), None);
    }

    #[test]
    fn sorted_and_stable() {
        let v: Value = serde_json::from_str(r#"{"b": [1, 2.50], "a": {"z": null, "y": 0.1}}"#).unwrap();
        let s = canonical_json(&v);
        assert_eq!(
            s,
            "{\n  \"a\": {\n    \"y\": 0.1,\n    \"z\": null\n  },\n  \"b\": [\n    1,\n    2.5\n  ]\n}\n"
        );
        assert_eq!(canonical_json(&v), s);
    }

    #[test]
    fn empty_report_is_an_error() {
        let ctx = ReportContext {
            dataset: "d".into(),
            comparison_dataset: None,
            plan: AuditPlanContext::default(),
            config_digest: String::new(),
            timestamp: String::new(),
        };
        assert!(matches!(
            render_report(&[], &ctx, ReportFormat::Structured),
            Err(Error::EmptyReport)
        ));
    }
}
