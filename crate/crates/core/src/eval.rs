//! Scoring sessions against labels: binary and macro-averaged multiclass
//! metrics, tool usage, reason categories and cost.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetEntry, Label, Language};
use crate::engine::{AnalysisSession, INVALID_ACTION};
use crate::tools::ToolKind;
use crate::verdict::{InfoType, KeywordTable, ScamType, SynonymTable};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no session for {} dataset URL(s): {}", urls.len(), urls.join(", "))]
    MissingVerdict { urls: Vec<String> },
}

/// What the agent concluded for one URL. A session without a parseable
/// verdict is a `Failure`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "scam_type")]
pub enum Prediction {
    Scam(ScamType),
    Legitimate,
    Failure,
}

impl Prediction {
    pub fn from_session(session: &AnalysisSession, synonyms: &SynonymTable) -> Self {
        match &session.verdict {
            Some(v) if v.result => Prediction::Scam(synonyms.canonicalize(v.scam_type.as_deref().unwrap_or_default()).canonical),
            Some(_) => Prediction::Legitimate,
            None => Prediction::Failure,
        }
    }

    fn says_scam(self) -> bool {
        matches!(self, Prediction::Scam(_))
    }
}

/// A dataset entry joined with its prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub url: String,
    pub label: Label,
    pub scam_type: Option<ScamType>,
    pub language: Language,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alignment {
    pub rows: Vec<ScoredEntry>,
    pub warnings: Vec<String>,
}

/// Joins retained dataset entries with sessions by URL. Sessions for URLs
/// outside the dataset are ignored with a warning; for repeated URLs the
/// last session wins.
pub fn align(
    dataset: &[DatasetEntry],
    sessions: &[AnalysisSession],
    synonyms: &SynonymTable,
) -> Result<Alignment, EvalError> {
    let mut by_url: HashMap<&str, &AnalysisSession> = HashMap::new();
    let mut warnings = Vec::new();
    for s in sessions {
        if by_url.insert(s.url.as_str(), s).is_some() {
            warnings.push(format!("several sessions for {}; using the last", s.url));
        }
    }
    let retained: Vec<&DatasetEntry> = dataset.iter().filter(|e| !e.is_excluded()).collect();
    let missing: Vec<String> =
        retained.iter().filter(|e| !by_url.contains_key(e.url.as_str())).map(|e| e.url.clone()).collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingVerdict { urls: missing });
    }
    let known: BTreeSet<&str> = retained.iter().map(|e| e.url.as_str()).collect();
    let extras = by_url.keys().filter(|u| !known.contains(*u)).count();
    if extras > 0 {
        warnings.push(format!("{extras} session(s) for URLs not in the dataset were ignored"));
    }
    let rows = retained
        .iter()
        .map(|e| ScoredEntry {
            url: e.url.clone(),
            label: e.label,
            scam_type: e.scam_type,
            language: e.language,
            prediction: Prediction::from_session(by_url[e.url.as_str()], synonyms),
        })
        .collect();
    Ok(Alignment { rows, warnings })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fn_: u64, tn: u64, fp: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Failures count against whichever label they failed on.
    pub fn record(&mut self, label: Label, prediction: Prediction) {
        match (label, prediction.says_scam()) {
            (Label::Scam, true) => self.tp += 1,
            (Label::Scam, false) => self.fn_ += 1,
            (Label::Legitimate, false) if prediction != Prediction::Failure => self.tn += 1,
            (Label::Legitimate, _) => self.fp += 1,
        }
    }
}

pub fn score_binary(rows: &[ScoredEntry]) -> ConfusionCounts {
    let mut counts = ConfusionCounts::default();
    for r in rows {
        counts.record(r.label, r.prediction);
    }
    counts
}

/// Undefined ratios are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: Option<f64>,
    pub tpr_recall: Option<f64>,
    pub tnr: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn harmonic(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    let (p, r) = (p?, r?);
    (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
}

pub fn binary_metrics(c: &ConfusionCounts) -> BinaryMetrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let tpr_recall = ratio(c.tp, c.tp + c.fn_);
    BinaryMetrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        tpr_recall,
        tnr: ratio(c.tn, c.tn + c.fp),
        precision,
        f1: harmonic(precision, tpr_recall),
    }
}

/// Which entries a report covers. `None` means all.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slice {
    pub scam_type: Option<ScamType>,
    pub language: Option<Language>,
}

impl Slice {
    pub fn contains(&self, row: &ScoredEntry) -> bool {
        self.scam_type.is_none_or(|t| row.scam_type == Some(t)) && self.language.is_none_or(|l| row.language == l)
    }

    pub fn describe(&self) -> String {
        match (self.scam_type, self.language) {
            (None, None) => "overall".into(),
            (Some(t), None) => t.as_str().into(),
            (None, Some(l)) => l.as_str().into(),
            (Some(t), Some(l)) => format!("{}/{}", t.as_str(), l.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub slice: Slice,
    pub counts: ConfusionCounts,
    pub metrics: BinaryMetrics,
}

pub fn binary_report(rows: &[ScoredEntry], slice: Slice) -> MetricsReport {
    let picked: Vec<ScoredEntry> = rows.iter().filter(|r| slice.contains(r)).cloned().collect();
    let counts = score_binary(&picked);
    MetricsReport { slice, counts, metrics: binary_metrics(&counts) }
}

/// Overall, then each language, each scam type, and each (type, language)
/// pair that occurs.
pub fn standard_slices(rows: &[ScoredEntry]) -> Vec<Slice> {
    let languages: BTreeSet<Language> = rows.iter().map(|r| r.language).collect();
    let types: BTreeSet<ScamType> = rows.iter().filter_map(|r| r.scam_type).collect();
    let pairs: BTreeSet<(ScamType, Language)> =
        rows.iter().filter_map(|r| r.scam_type.map(|t| (t, r.language))).collect();
    let mut out = vec![Slice::default()];
    out.extend(languages.iter().map(|l| Slice { scam_type: None, language: Some(*l) }));
    out.extend(types.iter().map(|t| Slice { scam_type: Some(*t), language: None }));
    if pairs.len() > 1 {
        out.extend(pairs.iter().map(|(t, l)| Slice { scam_type: Some(*t), language: Some(*l) }));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub scam_type: ScamType,
    pub actual: u64,
    pub predicted: u64,
    pub correct: u64,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassReport {
    pub slice: Slice,
    pub classes: Vec<ClassMetrics>,
    pub macro_recall: Option<f64>,
    pub macro_precision: Option<f64>,
    pub macro_f1: Option<f64>,
}

/// Per-class metrics for every scam type labelled in the slice. A
/// legitimate entry predicted as type T counts toward T's predictions.
/// Macro values average over those classes, an undefined per-class value
/// counting as 0.
pub fn score_multiclass(rows: &[ScoredEntry], slice: Slice) -> MulticlassReport {
    let picked: Vec<&ScoredEntry> = rows.iter().filter(|r| slice.contains(r)).collect();
    let present: BTreeSet<ScamType> =
        picked.iter().filter(|r| r.label == Label::Scam).filter_map(|r| r.scam_type).collect();
    let classes: Vec<ClassMetrics> = present
        .iter()
        .map(|&t| {
            let is_actual = |r: &&&ScoredEntry| r.label == Label::Scam && r.scam_type == Some(t);
            let is_predicted = |r: &&&ScoredEntry| r.prediction == Prediction::Scam(t);
            let actual = picked.iter().filter(is_actual).count() as u64;
            let predicted = picked.iter().filter(is_predicted).count() as u64;
            let correct = picked.iter().filter(|r| is_actual(r) && is_predicted(r)).count() as u64;
            let recall = ratio(correct, actual);
            let precision = ratio(correct, predicted);
            ClassMetrics { scam_type: t, actual, predicted, correct, recall, precision, f1: harmonic(precision, recall) }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> Option<f64>| {
        (!classes.is_empty()).then(|| classes.iter().map(|c| f(c).unwrap_or(0.0)).sum::<f64>() / classes.len() as f64)
    };
    MulticlassReport {
        slice,
        macro_recall: mean(|c| c.recall),
        macro_precision: mean(|c| c.precision),
        macro_f1: mean(|c| c.f1),
        classes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolUsageRow {
    pub tool: String,
    pub selected_count: u64,
    pub sessions_using: u64,
    pub used_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolUsageStats {
    pub sessions: u64,
    pub rows: Vec<ToolUsageRow>,
    /// Steps whose action was not a known tool.
    pub invalid_steps: u64,
}

pub fn tool_usage(sessions: &[AnalysisSession]) -> ToolUsageStats {
    if sessions.is_empty() {
        return ToolUsageStats::default();
    }
    let mut selected: BTreeMap<&str, u64> = BTreeMap::new();
    let mut using: BTreeMap<&str, u64> = BTreeMap::new();
    let mut invalid_steps = 0;
    for s in sessions {
        let mut seen = BTreeSet::new();
        for step in &s.steps {
            if step.action == INVALID_ACTION {
                invalid_steps += 1;
                continue;
            }
            *selected.entry(step.action.as_str()).or_default() += 1;
            seen.insert(step.action.as_str());
        }
        for tool in seen {
            *using.entry(tool).or_default() += 1;
        }
    }
    let n = sessions.len() as u64;
    let mut names: Vec<&str> = ToolKind::ALL.iter().map(|k| k.name()).collect();
    names.extend(selected.keys().filter(|k| !names.contains(k)).copied().collect::<Vec<_>>());
    let rows = names
        .into_iter()
        .map(|tool| {
            let sessions_using = using.get(tool).copied().unwrap_or(0);
            ToolUsageRow {
                tool: tool.to_string(),
                selected_count: selected.get(tool).copied().unwrap_or(0),
                sessions_using,
                used_fraction: sessions_using as f64 / n as f64,
            }
        })
        .collect();
    ToolUsageStats { sessions: n, rows, invalid_steps }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonRow {
    pub info_type: InfoType,
    pub count: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReasonFrequencies {
    pub sessions: u64,
    pub rows: Vec<ReasonRow>,
}

/// Sessions without a verdict have no reason and count toward the total
/// only.
pub fn reason_frequencies(sessions: &[AnalysisSession], keywords: &KeywordTable) -> ReasonFrequencies {
    if sessions.is_empty() {
        return ReasonFrequencies::default();
    }
    let mut counts: BTreeMap<InfoType, u64> = BTreeMap::new();
    for s in sessions {
        if let Some(v) = &s.verdict {
            for t in keywords.categorize(&v.reason).categories {
                *counts.entry(t).or_default() += 1;
            }
        }
    }
    let n = sessions.len() as u64;
    let rows = InfoType::ALL
        .iter()
        .map(|t| {
            let count = counts.get(t).copied().unwrap_or(0);
            ReasonRow { info_type: *t, count, fraction: count as f64 / n as f64 }
        })
        .collect();
    ReasonFrequencies { sessions: n, rows }
}

/// Price per 1,000 tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pricing {
    pub prompt_per_1k: Decimal,
    pub completion_per_1k: Decimal,
}

impl Pricing {
    pub fn new(prompt_per_1k: Decimal, completion_per_1k: Decimal) -> Self {
        Self { prompt_per_1k, completion_per_1k }
    }

    pub fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> Decimal {
        let k = Decimal::from(1000);
        Decimal::from(prompt_tokens) * self.prompt_per_1k / k + Decimal::from(completion_tokens) * self.completion_per_1k / k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub sessions: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_cost: Decimal,
    pub per_url_cost: Option<Decimal>,
    pub total_wall_ms: u64,
    pub per_url_wall_ms: Option<f64>,
    pub llm_time_fraction: Option<f64>,
    pub tool_time_fraction: Option<f64>,
}

pub fn cost_report(sessions: &[AnalysisSession], pricing: &Pricing) -> CostReport {
    let prompt_tokens: u64 = sessions.iter().map(|s| s.token_ledger.prompt_tokens).sum();
    let completion_tokens: u64 = sessions.iter().map(|s| s.token_ledger.completion_tokens).sum();
    let wall: u64 = sessions.iter().map(|s| s.wall_time_ms).sum();
    let llm: u64 = sessions.iter().map(|s| s.llm_time_ms).sum();
    let tool: u64 = sessions.iter().map(|s| s.tool_time_ms).sum();
    let n = sessions.len() as u64;
    let total_cost = pricing.cost(prompt_tokens, completion_tokens);
    CostReport {
        sessions: n,
        prompt_tokens,
        completion_tokens,
        total_cost,
        per_url_cost: (n > 0).then(|| total_cost / Decimal::from(n)),
        total_wall_ms: wall,
        per_url_wall_ms: ratio(wall, n),
        llm_time_fraction: ratio(llm, wall),
        tool_time_fraction: ratio(tool, wall),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub entries: u64,
    pub binary: Vec<MetricsReport>,
    pub multiclass: Vec<MulticlassReport>,
    /// URLs whose session ended without a verdict.
    pub failures: Vec<String>,
    pub tool_usage: ToolUsageStats,
    pub reasons: ReasonFrequencies,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Everything `eval` reports. Tool, reason and cost figures cover the
/// sessions matched to the dataset.
pub fn evaluate(
    dataset: &[DatasetEntry],
    sessions: &[AnalysisSession],
    synonyms: &SynonymTable,
    keywords: &KeywordTable,
    pricing: Option<&Pricing>,
) -> Result<EvalReport, EvalError> {
    let alignment = align(dataset, sessions, synonyms)?;
    let rows = &alignment.rows;
    let urls: BTreeSet<&str> = rows.iter().map(|r| r.url.as_str()).collect();
    let mut matched: BTreeMap<&str, &AnalysisSession> = BTreeMap::new();
    for s in sessions.iter().filter(|s| urls.contains(s.url.as_str())) {
        matched.insert(s.url.as_str(), s);
    }
    let matched: Vec<AnalysisSession> = matched.into_values().cloned().collect();
    let mut multiclass_slices = vec![Slice::default()];
    let languages: BTreeSet<Language> = rows.iter().map(|r| r.language).collect();
    if languages.len() > 1 {
        multiclass_slices.extend(languages.iter().map(|l| Slice { scam_type: None, language: Some(*l) }));
    }
    Ok(EvalReport {
        schema_version: SCHEMA_VERSION,
        entries: rows.len() as u64,
        binary: standard_slices(rows).into_iter().map(|s| binary_report(rows, s)).collect(),
        multiclass: multiclass_slices.into_iter().map(|s| score_multiclass(rows, s)).collect(),
        failures: rows.iter().filter(|r| r.prediction == Prediction::Failure).map(|r| r.url.clone()).collect(),
        tool_usage: tool_usage(&matched),
        reasons: reason_frequencies(&matched, keywords),
        cost: pricing.map(|p| cost_report(&matched, p)),
        warnings: alignment.warnings,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

fn percent(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

/// Plain-text tables.
pub fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Binary classification ({} entries)", report.entries);
    let width = report.binary.iter().map(|r| r.slice.describe().len()).max().unwrap_or(0).max(10);
    let _ = write!(out, "{:<12}", "");
    for r in &report.binary {
        let _ = write!(out, " {:>width$}", r.slice.describe());
    }
    out.push('\n');
    type Getter = fn(&BinaryMetrics) -> Option<f64>;
    let rows: [(&str, Getter); 5] = [
        ("Accuracy", |m| m.accuracy),
        ("TPR/Recall", |m| m.tpr_recall),
        ("TNR", |m| m.tnr),
        ("Precision", |m| m.precision),
        ("F1 score", |m| m.f1),
    ];
    for (name, get) in rows {
        let _ = write!(out, "{name:<12}");
        for r in &report.binary {
            let _ = write!(out, " {:>width$}", cell(get(&r.metrics)));
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<12}", "TP/FN/TN/FP");
    for r in &report.binary {
        let c = r.counts;
        let _ = write!(out, " {:>width$}", format!("{}/{}/{}/{}", c.tp, c.fn_, c.tn, c.fp));
    }
    out.push_str("\n\nMulti-class classification (macro average)\n");
    for m in &report.multiclass {
        let _ = writeln!(
            out,
            "{:<12} recall {}  precision {}  F1 {}",
            m.slice.describe(),
            cell(m.macro_recall),
            cell(m.macro_precision),
            cell(m.macro_f1)
        );
        for c in &m.classes {
            let _ = writeln!(
                out,
                "  {:<20} recall {}  precision {}  F1 {}  ({} labelled, {} predicted)",
                c.scam_type.display_name(),
                cell(c.recall),
                cell(c.precision),
                cell(c.f1),
                c.actual,
                c.predicted
            );
        }
    }
    let _ = writeln!(out, "\nTool usage ({} sessions)", report.tool_usage.sessions);
    let _ = writeln!(out, "{:<22} {:>10} {:>8}", "Tool", "# Selected", "# Used");
    for r in &report.tool_usage.rows {
        let _ = writeln!(out, "{:<22} {:>10} {:>8}", r.tool, r.selected_count, percent(r.used_fraction));
    }
    if report.tool_usage.invalid_steps > 0 {
        let _ = writeln!(out, "{:<22} {:>10}", "(invalid actions)", report.tool_usage.invalid_steps);
    }
    let _ = writeln!(out, "\nInformation in reasons ({} sessions)", report.reasons.sessions);
    for r in &report.reasons.rows {
        let _ = writeln!(out, "{:<24} {:>6} ({})", r.info_type.display_name(), r.count, percent(r.fraction));
    }
    if let Some(c) = &report.cost {
        let _ = writeln!(out, "\nCost");
        let _ = writeln!(out, "tokens: {} prompt, {} completion", c.prompt_tokens, c.completion_tokens);
        let per_url = c.per_url_cost.map_or_else(|| "n/a".to_string(), |d| format!("${}", d.round_dp(4)));
        let _ = writeln!(out, "total: ${} ({per_url} per URL)", c.total_cost.round_dp(4));
        let _ = writeln!(
            out,
            "time: {:.1} s total, LLM {}, tools {}",
            c.total_wall_ms as f64 / 1000.0,
            c.llm_time_fraction.map_or_else(|| "n/a".into(), percent),
            c.tool_time_fraction.map_or_else(|| "n/a".into(), percent)
        );
    }
    if !report.failures.is_empty() {
        let _ = writeln!(out, "\nAnalysis failures ({}):", report.failures.len());
        for u in &report.failures {
            let _ = writeln!(out, "  {u}");
        }
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
