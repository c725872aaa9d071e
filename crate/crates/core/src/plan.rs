//! Audit plans: parsing, path resolution and exhaustive validation.
//!
//! A plan is a JSON document. Relative paths inside it resolve against the
//! plan file's directory. [`validate_plan`] checks every analysis against the
//! registry and the resources the plan provides, and reports all problems at
//! once.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::associations::{
    bundled_stopwords, parse_stopwords, ContentSource, CooccurrenceConfig, GroupSource, Ranking,
};
use crate::content::{uniform_edges, validate_edges, BoolRule};
use crate::corpus::{DatasetFormat, DatasetHandle, TokenizationPolicy};
use crate::error::{Error, Result};
use crate::human::{IdentityConfig, PiiConfig};
use crate::lexicon::{compile_matcher, load_lexicon, LexiconKind, TermMatcher};
use crate::provenance::{DuplicateParams, OverlapMode, DEFAULT_NGRAM};
use crate::registry::{lookup, nearest_ids, AnalysisSpec, Binding, ContentSide, HumanSide, PROPORTION_KINDS};
use crate::report::{canonical_json, ActionThresholds, AuditPlanContext};
use crate::signals::{BuiltinSpec, ProviderConfig, SignalKind, TransportConfig};

/// Provider id used when the built-in language identifier is added
/// automatically.
pub const AUTO_LANGUAGE_PROVIDER: &str = "builtin-language";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: DatasetFormat,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisEntry {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub size: usize,
    pub seed: u64,
}

fn default_lift() -> f64 {
    crate::associations::DEFAULT_LIFT
}
fn default_support() -> u64 {
    crate::associations::DEFAULT_SUPPORT
}
fn default_proportion_limit() -> f64 {
    0.05
}
fn default_high() -> f64 {
    0.5
}
fn default_bins() -> usize {
    10
}
fn default_ngram() -> usize {
    DEFAULT_NGRAM
}
fn default_signal_thresholds() -> BTreeMap<String, f64> {
    BTreeMap::from([("sexual_image".to_owned(), 0.5), ("violent_image".to_owned(), 0.5)])
}

/// Plan-wide defaults; analysis parameters override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Minimum lift for a flagged association.
    #[serde(default = "default_lift")]
    pub lift: f64,
    /// Minimum joint count for a flagged association.
    #[serde(default = "default_support")]
    pub support: u64,
    /// Share of affected records above which a card is a finding.
    #[serde(default = "default_proportion_limit")]
    pub proportion_limit: f64,
    /// Score counted as high on score histograms.
    #[serde(default = "default_high")]
    pub toxicity_high: f64,
    /// Uniform bins for score histograms and binned tables.
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Threshold per scalar signal when it is read as a boolean.
    #[serde(default = "default_signal_thresholds")]
    pub signal_thresholds: BTreeMap<String, f64>,
    #[serde(default)]
    pub dedup: DuplicateParams,
    #[serde(default = "default_ngram")]
    pub ngram: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("all fields have defaults")
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("report")
}

/// The plan document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub comparison_dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub lexicons: Vec<PathBuf>,
    /// Stopword list for co-occurrence; the bundled English list if absent.
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default)]
    pub providers: Vec<ProviderConfig>,
    pub analyses: Vec<AnalysisEntry>,
    #[serde(default)]
    pub context: AuditPlanContext,
    #[serde(default)]
    pub sample: Option<SampleSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub tokenization: TokenizationPolicy,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Timestamp written into provenance; see [`report_timestamp`].
    #[serde(default)]
    pub report_timestamp: Option<String>,
}

/// Engine operation of one planned analysis with concrete parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Operation {
    Pii(PiiConfig),
    Identity {
        config: IdentityConfig,
        target: Option<BTreeMap<String, f64>>,
    },
    Pronouns {
        target: Option<BTreeMap<String, f64>>,
    },
    Hateful,
    Proportion {
        signal: String,
        rule: BoolRule,
    },
    Categories {
        signal: String,
        target: Option<BTreeMap<String, f64>>,
    },
    Histogram {
        signal: String,
        edges: Vec<f64>,
        high: f64,
    },
    TopSources {
        k: usize,
    },
    Geography {
        target: Option<BTreeMap<String, f64>>,
    },
    Publication,
    Duplicates(DuplicateParams),
    Overlap {
        mode: OverlapMode,
        n: usize,
    },
    Cooccurrence(Vec<CooccurrenceConfig>),
    Table {
        pairs: Vec<(GroupSource, ContentSource)>,
        lift: f64,
        support: u64,
    },
    Unsupported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedAnalysis {
    pub spec: &'static AnalysisSpec,
    pub operation: Operation,
    /// Signals read from providers.
    pub signals: Vec<String>,
    /// What satisfied each registry dependency.
    pub resolved: Vec<Option<String>>,
    /// Parameters as given in the plan.
    pub parameters: Value,
}

/// A signal available to the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalSource {
    pub kind: SignalKind,
    pub provider: String,
}

/// A validated plan with resources loaded.
#[derive(Debug, Clone)]
pub struct AuditPlan {
    pub base_dir: PathBuf,
    pub dataset: DatasetHandle,
    pub comparison: Option<DatasetHandle>,
    pub matcher: Option<Arc<TermMatcher>>,
    pub lexicon_paths: Vec<PathBuf>,
    pub stopwords: BTreeSet<String>,
    pub providers: Vec<ProviderConfig>,
    pub signals: BTreeMap<String, SignalSource>,
    pub analyses: Vec<PlannedAnalysis>,
    pub context: AuditPlanContext,
    pub limits: ActionThresholds,
    pub thresholds: Thresholds,
    pub sample: Option<SampleSpec>,
    pub output_dir: PathBuf,
    pub policy: TokenizationPolicy,
    pub threads: usize,
    pub report_timestamp: Option<String>,
    /// SHA-256 of the canonical plan, excluding `threads` and `output_dir`.
    pub config_digest: String,
}

impl AuditPlan {
    pub fn signal_kind(&self, name: &str) -> Option<SignalKind> {
        self.signals.get(name).map(|s| s.kind)
    }

    pub fn analysis(&self, id: &str) -> Option<&PlannedAnalysis> {
        self.analyses.iter().find(|a| a.spec.id == id)
    }
}

/// Hex SHA-256 of the canonical form of `plan` without run-only fields.
pub fn config_digest(plan: &Value) -> String {
    let mut v = plan.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.remove("threads");
        obj.remove("output_dir");
    }
    hex::encode(Sha256::digest(canonical_json(&v).as_bytes()))
}

/// Reads and validates a plan file.
pub fn validate_plan(path: &Path) -> Result<AuditPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    validate_plan_str(&text, &base)
}

/// Validates plan text whose relative paths resolve against `base_dir`.
pub fn validate_plan_str(text: &str, base_dir: &Path) -> Result<AuditPlan> {
    let raw: Value =
        serde_json::from_str(text).map_err(|e| Error::InvalidPlan(vec![format!("plan is not valid JSON: {e}")]))?;
    let file: PlanFile =
        serde_json::from_value(raw.clone()).map_err(|e| Error::InvalidPlan(vec![format!("plan schema: {e}")]))?;
    build(file, &raw, base_dir)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

fn resolve_provider(base: &Path, mut cfg: ProviderConfig) -> ProviderConfig {
    if let TransportConfig::Builtin { builtin } = &mut cfg.transport {
        match builtin {
            BuiltinSpec::LexiconToxicity { weights: p }
            | BuiltinSpec::KeywordTopic { keywords: p }
            | BuiltinSpec::Manifest { path: p } => *p = resolve(base, p),
            BuiltinSpec::Pii | BuiltinSpec::Language => {}
        }
    }
    cfg
}

fn handle(base: &Path, spec: &DatasetSpec, default_label: &str) -> DatasetHandle {
    let path = resolve(base, &spec.path);
    let label = spec.label.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| default_label.to_owned())
    });
    DatasetHandle::new(path, spec.format, label)
}

fn build(file: PlanFile, raw: &Value, base: &Path) -> Result<AuditPlan> {
    let mut errors: Vec<String> = Vec::new();
    let th = &file.thresholds;
    if !(th.lift.is_finite() && th.lift > 0.0) {
        errors.push(format!("thresholds.lift must be positive, got {}", th.lift));
    }
    if !(0.0..=1.0).contains(&th.proportion_limit) {
        errors.push("thresholds.proportion_limit must lie in [0,1]".into());
    }
    if !(0.0..=1.0).contains(&th.toxicity_high) {
        errors.push("thresholds.toxicity_high must lie in [0,1]".into());
    }
    if th.bins == 0 {
        errors.push("thresholds.bins must be at least 1".into());
    }
    if th.ngram == 0 {
        errors.push("thresholds.ngram must be at least 1".into());
    }
    if let Err(e) = th.dedup.validate() {
        errors.push(format!("thresholds.dedup: {e}"));
    }
    if file.sample.is_some_and(|s| s.size == 0) {
        errors.push("sample.size must be at least 1".into());
    }
    if file.threads == Some(0) {
        errors.push("threads must be at least 1".into());
    }

    // Lexicons.
    let lexicon_paths: Vec<PathBuf> = file.lexicons.iter().map(|p| resolve(base, p)).collect();
    let mut lexicons = Vec::new();
    for p in &lexicon_paths {
        match load_lexicon(p) {
            Ok(l) => lexicons.push(l),
            Err(e) => errors.push(e.to_string()),
        }
    }
    let matcher = if lexicons.is_empty() {
        None
    } else {
        match compile_matcher(&lexicons, file.tokenization) {
            Ok(m) => Some(Arc::new(m)),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        }
    };
    let lexicon_file = |kind: LexiconKind| -> Option<String> {
        let i = lexicons.iter().position(|l| l.kind == kind)?;
        Some(lexicon_paths[i].display().to_string())
    };

    let stopwords = match &file.stopwords {
        Some(p) => {
            let p = resolve(base, p);
            match std::fs::read_to_string(&p) {
                Ok(t) => parse_stopwords(&t, &file.tokenization),
                Err(e) => {
                    errors.push(Error::io(&p, e).to_string());
                    BTreeSet::new()
                }
            }
        }
        None => bundled_stopwords(&file.tokenization),
    };

    // Providers and the signals they serve.
    let mut providers: Vec<ProviderConfig> = file
        .providers
        .iter()
        .cloned()
        .map(|c| resolve_provider(base, c))
        .collect();
    let needs_language = file.analyses.iter().any(|a| {
        lookup(&a.id).is_some_and(|s| s.binding == Binding::SignalCategories("language"))
            && a.params.get("signal").is_none_or(|v| v == "language")
    });
    let has_language = providers
        .iter()
        .any(|p| p.supported_signals().iter().any(|d| d.name == "language"));
    if needs_language && !has_language {
        providers.push(ProviderConfig::builtin(AUTO_LANGUAGE_PROVIDER, BuiltinSpec::Language));
    }
    let mut ids = BTreeSet::new();
    let mut signals: BTreeMap<String, SignalSource> = BTreeMap::new();
    for p in &providers {
        if !ids.insert(p.id.clone()) {
            errors.push(format!("provider id `{}` is used twice", p.id));
        }
        let served = p.supported_signals();
        if served.is_empty() {
            errors.push(format!("provider `{}` declares no signals", p.id));
        }
        if p.batch_size == 0 {
            errors.push(format!("provider `{}` has batch_size 0", p.id));
        }
        if let TransportConfig::SubprocessLines { command } = &p.transport {
            if command.is_empty() {
                errors.push(format!("provider `{}` has an empty command", p.id));
            }
        }
        if let TransportConfig::Builtin { builtin } = &p.transport {
            let missing = match builtin {
                BuiltinSpec::LexiconToxicity { weights: f }
                | BuiltinSpec::KeywordTopic { keywords: f }
                | BuiltinSpec::Manifest { path: f } => (!f.exists()).then(|| f.clone()),
                _ => None,
            };
            if let Some(f) = missing {
                errors.push(format!("provider `{}`: resource {} not found", p.id, f.display()));
            }
        }
        for d in served {
            if let Some(prev) = signals.get(&d.name) {
                errors.push(format!(
                    "signal `{}` is served by both `{}` and `{}`",
                    d.name, prev.provider, p.id
                ));
                continue;
            }
            signals.insert(
                d.name.clone(),
                SignalSource {
                    kind: d.kind,
                    provider: p.id.clone(),
                },
            );
        }
    }

    let dataset = handle(base, &file.dataset, "dataset");
    let comparison = file.comparison_dataset.as_ref().map(|c| handle(base, c, "comparison"));

    let ctx = Ctx {
        matcher: matcher.as_deref(),
        signals: &signals,
        thresholds: th,
        has_comparison: comparison.is_some(),
        lexicon_file: &lexicon_file,
        stopwords_source: file
            .stopwords
            .as_ref()
            .map(|p| resolve(base, p).display().to_string())
            .unwrap_or_else(|| "bundled English list".into()),
        stopwords: &stopwords,
    };
    let mut analyses = Vec::new();
    let mut seen = BTreeSet::new();
    if file.analyses.is_empty() {
        errors.push("plan lists no analyses".into());
    }
    for entry in &file.analyses {
        let Some(spec) = lookup(&entry.id) else {
            errors.push(format!(
                "unknown analysis `{}`; did you mean: {}",
                entry.id,
                nearest_ids(&entry.id, 3).join(", ")
            ));
            continue;
        };
        if !seen.insert(spec.id) {
            errors.push(format!("analysis `{}` is listed twice", spec.id));
            continue;
        }
        match plan_analysis(spec, &entry.params, &ctx) {
            Ok(a) => analyses.push(a),
            Err(errs) => errors.extend(errs),
        }
    }

    if !errors.is_empty() {
        return Err(Error::InvalidPlan(errors));
    }
    Ok(AuditPlan {
        base_dir: base.to_owned(),
        dataset,
        comparison,
        matcher,
        lexicon_paths,
        stopwords,
        providers,
        signals,
        analyses,
        context: file.context,
        limits: ActionThresholds {
            proportion_limit: th.proportion_limit,
        },
        thresholds: file.thresholds.clone(),
        sample: file.sample,
        output_dir: resolve(base, &file.output_dir),
        policy: file.tokenization,
        threads: file.threads.unwrap_or(1),
        report_timestamp: file.report_timestamp.clone(),
        config_digest: config_digest(raw),
    })
}

struct Ctx<'a> {
    matcher: Option<&'a TermMatcher>,
    signals: &'a BTreeMap<String, SignalSource>,
    thresholds: &'a Thresholds,
    has_comparison: bool,
    lexicon_file: &'a dyn Fn(LexiconKind) -> Option<String>,
    stopwords_source: String,
    stopwords: &'a BTreeSet<String>,
}

impl Ctx<'_> {
    /// Checks that `signal` exists with one of `kinds`.
    fn need_signal(&self, id: &str, signal: &str, kinds: &[SignalKind], errors: &mut Vec<String>) -> Option<String> {
        match self.signals.get(signal) {
            None => {
                errors.push(format!("{id} requires signal {signal}"));
                None
            }
            Some(s) if !kinds.contains(&s.kind) => {
                let want: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
                errors.push(format!(
                    "{id}: signal {signal} is {}, expected {}",
                    s.kind,
                    want.join(" or ")
                ));
                None
            }
            Some(s) => Some(format!("signal `{signal}` from provider `{}`", s.provider)),
        }
    }

    fn need_lexicon(&self, id: &str, kind: LexiconKind, errors: &mut Vec<String>) -> Option<String> {
        match (self.lexicon_file)(kind) {
            Some(f) => Some(f),
            None => {
                errors.push(format!("{id} requires a {kind} lexicon"));
                None
            }
        }
    }

    fn identity_axes(&self, id: &str, requested: Option<Vec<String>>, errors: &mut Vec<String>) -> Vec<String> {
        let known = self.matcher.map(|m| m.axes(LexiconKind::Identity)).unwrap_or_default();
        match requested {
            Some(axes) => {
                for a in &axes {
                    if self.matcher.is_some() && !known.contains(a) {
                        errors.push(format!("{id}: unknown identity axis `{a}`"));
                    }
                }
                axes
            }
            None => known,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PiiParams {
    builtin: Option<bool>,
    signal: Option<String>,
    id_cap: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentityParams {
    #[serde(default)]
    intersections: Vec<(String, String)>,
    window: Option<usize>,
    target: Option<BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetParams {
    target: Option<BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProportionParams {
    signal: Option<String>,
    threshold: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CategoryParams {
    signal: Option<String>,
    target: Option<BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramParams {
    signal: Option<String>,
    bins: Option<usize>,
    edges: Option<Vec<f64>>,
    high: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SourcesParams {
    k: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OverlapParams {
    mode: Option<OverlapMode>,
    n: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CooccurrenceParams {
    axes: Option<Vec<String>>,
    signal: Option<String>,
    k: Option<usize>,
    ranking: Option<Ranking>,
    min_count: Option<u64>,
    window: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableParams {
    axes: Option<Vec<String>>,
    group_signal: Option<String>,
    content_signal: Option<String>,
    threshold: Option<f64>,
    bins: Option<usize>,
    edges: Option<Vec<f64>>,
    lift: Option<f64>,
    support: Option<u64>,
}

fn parse_params<T: DeserializeOwned>(
    id: &str,
    params: &BTreeMap<String, Value>,
) -> std::result::Result<T, Vec<String>> {
    let v = Value::Object(params.clone().into_iter().collect());
    serde_json::from_value(v).map_err(|e| vec![format!("{id}: bad params: {e}")])
}

fn check_target(id: &str, target: &Option<BTreeMap<String, f64>>, errors: &mut Vec<String>) {
    if let Some(t) = target {
        for (label, share) in t {
            if !(share.is_finite() && *share > 0.0 && *share < 1.0) {
                errors.push(format!("{id}: target share for `{label}` must lie in (0,1)"));
            }
        }
    }
}

fn edges_for(
    id: &str,
    bins: Option<usize>,
    edges: Option<Vec<f64>>,
    default_bins: usize,
    errors: &mut Vec<String>,
) -> Vec<f64> {
    match edges {
        Some(e) => {
            if let Err(err) = validate_edges(&e) {
                errors.push(format!("{id}: {err}"));
            }
            e
        }
        None => {
            let n = bins.unwrap_or(default_bins);
            if n == 0 {
                errors.push(format!("{id}: bins must be at least 1"));
                return uniform_edges(1);
            }
            uniform_edges(n)
        }
    }
}

fn plan_analysis(
    spec: &'static AnalysisSpec,
    params: &BTreeMap<String, Value>,
    ctx: &Ctx<'_>,
) -> std::result::Result<PlannedAnalysis, Vec<String>> {
    let id = spec.id;
    let mut errors = Vec::new();
    let mut signals = Vec::new();
    let mut resolved: Vec<Option<String>> = Vec::new();
    let th = ctx.thresholds;

    let operation = match spec.binding {
        Binding::Pii => {
            let p: PiiParams = parse_params(id, params)?;
            let cfg = PiiConfig {
                builtin: p.builtin.unwrap_or(true),
                signal: p.signal.clone(),
                id_cap: p.id_cap.unwrap_or(crate::human::DEFAULT_ID_CAP),
            };
            let mut detectors = Vec::new();
            if cfg.builtin {
                detectors.push("built-in patterns".to_owned());
            }
            if let Some(s) = &cfg.signal {
                if let Some(r) = ctx.need_signal(id, s, &[SignalKind::Spans], &mut errors) {
                    detectors.push(r);
                }
                signals.push(s.clone());
            }
            if !cfg.builtin && cfg.signal.is_none() {
                errors.push(format!("{id}: no PII detector enabled"));
            }
            resolved.push(Some(detectors.join(" + ")));
            Operation::Pii(cfg)
        }
        Binding::IdentityTerms => {
            let p: IdentityParams = parse_params(id, params)?;
            resolved.push(ctx.need_lexicon(id, LexiconKind::Identity, &mut errors));
            let config = IdentityConfig {
                intersections: p.intersections,
                window: p.window,
            };
            if let Some(m) = ctx.matcher {
                if m.has_kind(LexiconKind::Identity) {
                    if let Err(e) = config.validate(m) {
                        errors.push(format!("{id}: {e}"));
                    }
                }
            }
            check_target(id, &p.target, &mut errors);
            Operation::Identity {
                config,
                target: p.target,
            }
        }
        Binding::Pronouns => {
            let p: TargetParams = parse_params(id, params)?;
            resolved.push(ctx.need_lexicon(id, LexiconKind::Pronoun, &mut errors));
            check_target(id, &p.target, &mut errors);
            Operation::Pronouns { target: p.target }
        }
        Binding::HatefulTerms => {
            let _: NoParams = parse_params(id, params)?;
            resolved.push(ctx.need_lexicon(id, LexiconKind::Hateful, &mut errors));
            Operation::Hateful
        }
        Binding::SignalProportion(default) => {
            let p: ProportionParams = parse_params(id, params)?;
            let signal = p.signal.unwrap_or_else(|| default.to_owned());
            resolved.push(ctx.need_signal(id, &signal, PROPORTION_KINDS, &mut errors));
            let threshold = p.threshold.or_else(|| th.signal_thresholds.get(&signal).copied());
            let rule = match ctx.signals.get(&signal) {
                Some(s) if PROPORTION_KINDS.contains(&s.kind) => {
                    // Thresholds only apply to scalar scores; plan-wide
                    // defaults are ignored for other kinds.
                    let t = if s.kind == SignalKind::Scalar01 {
                        threshold
                    } else {
                        p.threshold
                    };
                    match BoolRule::for_kind(&signal, s.kind, t) {
                        Ok(r) => r,
                        Err(e) => {
                            errors.push(format!("{id}: {e}"));
                            BoolRule::Flag
                        }
                    }
                }
                _ => BoolRule::Flag,
            };
            signals.push(signal.clone());
            Operation::Proportion { signal, rule }
        }
        Binding::SignalCategories(default) => {
            let p: CategoryParams = parse_params(id, params)?;
            let signal = p.signal.unwrap_or_else(|| default.to_owned());
            resolved.push(ctx.need_signal(id, &signal, &[SignalKind::Categorical], &mut errors));
            check_target(id, &p.target, &mut errors);
            signals.push(signal.clone());
            Operation::Categories {
                signal,
                target: p.target,
            }
        }
        Binding::SignalHistogram(default) => {
            let p: HistogramParams = parse_params(id, params)?;
            let signal = p.signal.unwrap_or_else(|| default.to_owned());
            resolved.push(ctx.need_signal(id, &signal, &[SignalKind::Scalar01], &mut errors));
            let edges = edges_for(id, p.bins, p.edges, th.bins, &mut errors);
            let high = p.high.unwrap_or(th.toxicity_high);
            if !(0.0..=1.0).contains(&high) {
                errors.push(format!("{id}: high must lie in [0,1]"));
            }
            signals.push(signal.clone());
            Operation::Histogram { signal, edges, high }
        }
        Binding::TopSources => {
            let p: SourcesParams = parse_params(id, params)?;
            let k = p.k.unwrap_or(25);
            if k == 0 {
                errors.push(format!("{id}: k must be at least 1"));
            }
            Operation::TopSources { k }
        }
        Binding::Geography => {
            let p: TargetParams = parse_params(id, params)?;
            check_target(id, &p.target, &mut errors);
            Operation::Geography { target: p.target }
        }
        Binding::PublicationTime => {
            let _: NoParams = parse_params(id, params)?;
            Operation::Publication
        }
        Binding::Duplication => {
            let mut merged = serde_json::to_value(&th.dedup).expect("params serialize");
            let obj = merged.as_object_mut().expect("params are an object");
            for (k, v) in params {
                obj.insert(k.clone(), v.clone());
            }
            let dp: DuplicateParams =
                serde_json::from_value(merged).map_err(|e| vec![format!("{id}: bad params: {e}")])?;
            if let Err(e) = dp.validate() {
                errors.push(format!("{id}: {e}"));
            }
            Operation::Duplicates(dp)
        }
        Binding::Overlap => {
            let p: OverlapParams = parse_params(id, params)?;
            if !ctx.has_comparison {
                errors.push(format!("{id} requires a comparison dataset"));
                resolved.push(None);
            } else {
                resolved.push(Some("comparison_dataset".into()));
            }
            let n = p.n.unwrap_or(th.ngram);
            if n == 0 {
                errors.push(format!("{id}: n must be at least 1"));
            }
            Operation::Overlap {
                mode: p.mode.unwrap_or(OverlapMode::ExactText),
                n,
            }
        }
        Binding::TermCooccurrence | Binding::SignalCooccurrence(_) => {
            let p: CooccurrenceParams = parse_params(id, params)?;
            let sources: Vec<GroupSource> = if let Binding::SignalCooccurrence(default) = spec.binding {
                if p.axes.is_some() || p.window.is_some() {
                    errors.push(format!("{id}: `axes` and `window` apply to term axes only"));
                }
                let signal = p.signal.clone().unwrap_or_else(|| default.to_owned());
                resolved.push(ctx.need_signal(id, &signal, &[SignalKind::Categorical, SignalKind::Spans], &mut errors));
                signals.push(signal.clone());
                vec![GroupSource::Signal { signal }]
            } else {
                if p.signal.is_some() {
                    errors.push(format!("{id}: `signal` is not a parameter of this analysis"));
                }
                resolved.push(ctx.need_lexicon(id, LexiconKind::Identity, &mut errors));
                ctx.identity_axes(id, p.axes.clone(), &mut errors)
                    .into_iter()
                    .map(|axis| GroupSource::TermAxis { axis })
                    .collect()
            };
            resolved.push(Some(ctx.stopwords_source.clone()));
            let k = p.k.unwrap_or(20);
            if k == 0 {
                errors.push(format!("{id}: k must be at least 1"));
            }
            Operation::Cooccurrence(
                sources
                    .into_iter()
                    .map(|source| CooccurrenceConfig {
                        source,
                        k,
                        ranking: p.ranking.unwrap_or_default(),
                        stopwords: ctx.stopwords.clone(),
                        min_count: p.min_count.unwrap_or(1),
                        window: p.window,
                    })
                    .collect(),
            )
        }
        Binding::Table(human, content) => {
            let p: TableParams = parse_params(id, params)?;
            let humans: Vec<GroupSource> = match human {
                HumanSide::Terms => {
                    if p.group_signal.is_some() {
                        errors.push(format!("{id}: `group_signal` does not apply to term-based cards"));
                    }
                    resolved.push(ctx.need_lexicon(id, LexiconKind::Identity, &mut errors));
                    ctx.identity_axes(id, p.axes.clone(), &mut errors)
                        .into_iter()
                        .map(|axis| GroupSource::TermAxis { axis })
                        .collect()
                }
                HumanSide::Signal(default) => {
                    if p.axes.is_some() {
                        errors.push(format!("{id}: `axes` does not apply to signal-based cards"));
                    }
                    let signal = p.group_signal.clone().unwrap_or_else(|| default.to_owned());
                    resolved.push(ctx.need_signal(
                        id,
                        &signal,
                        &[SignalKind::Categorical, SignalKind::Spans],
                        &mut errors,
                    ));
                    signals.push(signal.clone());
                    vec![GroupSource::Signal { signal }]
                }
            };
            let signal = p.content_signal.clone().unwrap_or_else(|| content.signal().to_owned());
            resolved.push(ctx.need_signal(id, &signal, content.kinds(), &mut errors));
            signals.push(signal.clone());
            let content_source = match content {
                ContentSide::Categorical(_) => ContentSource::Categorical { signal },
                ContentSide::BinnedScalar(_) => ContentSource::BinnedScalar {
                    edges: edges_for(id, p.bins, p.edges.clone(), th.bins, &mut errors),
                    signal,
                },
                ContentSide::Boolean(_) => {
                    let kind = ctx.signals.get(&signal).map(|s| s.kind);
                    let threshold = match kind {
                        Some(SignalKind::Scalar01) => {
                            p.threshold.or_else(|| th.signal_thresholds.get(&signal).copied())
                        }
                        _ => p.threshold,
                    };
                    if let Some(k) = kind.filter(|k| content.kinds().contains(k)) {
                        if let Err(e) = BoolRule::for_kind(&signal, k, threshold) {
                            errors.push(format!("{id}: {e}"));
                        }
                    }
                    ContentSource::Boolean { signal, threshold }
                }
                ContentSide::SpanLabels(_) => ContentSource::SpanLabels { signal },
            };
            let lift = p.lift.unwrap_or(th.lift);
            if !(lift.is_finite() && lift > 0.0) {
                errors.push(format!("{id}: lift must be positive"));
            }
            Operation::Table {
                pairs: humans.into_iter().map(|h| (h, content_source.clone())).collect(),
                lift,
                support: p.support.unwrap_or(th.support),
            }
        }
        Binding::Unsupported => Operation::Unsupported,
    };
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(PlannedAnalysis {
        spec,
        operation,
        signals,
        resolved,
        parameters: Value::Object(params.clone().into_iter().collect()),
    })
}
