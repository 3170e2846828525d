//! Final-answer parsing, scam-type canonicalization and reason categorization.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

const DEFAULT_KEYWORDS: &str = include_str!("../assets/reason_keywords.csv");
const DEFAULT_SYNONYMS: &str = include_str!("../assets/scam_type_synonyms.csv");

/// Placeholder type recorded when a scam verdict names no type.
pub const UNSPECIFIED_SCAM_TYPE: &str = "unspecified";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerdictError {
    #[error("no JSON object found in final answer")]
    NoJsonFound,
    #[error("invalid or missing `result` field: {0}")]
    InvalidResultField(String),
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot read table {0}: {1}")]
    Io(String, String),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub result: bool,
    pub scam_type: Option<String>,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Parses the first JSON object in a final answer.
///
/// Models wrap the object in prose or code fences and sometimes emit Python
/// literals (`True`, `None`); both are tolerated.
pub fn parse_verdict(final_text: &str) -> Result<Verdict, VerdictError> {
    let mut first_object = None;
    for candidate in json_objects(final_text) {
        if candidate.contains_key("result") {
            return verdict_from_object(&candidate);
        }
        first_object.get_or_insert(candidate);
    }
    match first_object {
        Some(_) => Err(VerdictError::InvalidResultField("missing".into())),
        None => Err(VerdictError::NoJsonFound),
    }
}

fn verdict_from_object(obj: &serde_json::Map<String, Value>) -> Result<Verdict, VerdictError> {
    let result = match obj.get("result") {
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) if s.trim().eq_ignore_ascii_case("true") => true,
        Some(Value::String(s)) if s.trim().eq_ignore_ascii_case("false") => false,
        Some(other) => return Err(VerdictError::InvalidResultField(other.to_string())),
        None => return Err(VerdictError::InvalidResultField("missing".into())),
    };
    let mut warnings = Vec::new();
    let scam_type = match obj.get("scam_type") {
        Some(Value::String(s)) if !is_null_word(s) => Some(s.trim().to_string()),
        Some(Value::Array(items)) if !items.is_empty() => Some(
            items.iter().map(value_text).collect::<Vec<_>>().join(", "),
        ),
        _ => None,
    };
    let scam_type = match (result, scam_type) {
        (true, None) => {
            warnings.push("scam verdict without scam_type".to_string());
            Some(UNSPECIFIED_SCAM_TYPE.to_string())
        }
        (_, t) => t,
    };
    let reason = match obj.get("reason") {
        Some(Value::Array(items)) => items.iter().map(value_text).collect::<Vec<_>>().join(" "),
        Some(Value::Null) | None => String::new(),
        Some(v) => value_text(v),
    };
    let reason = if reason.trim().is_empty() {
        warnings.push("verdict without reason".to_string());
        "(no reason given)".to_string()
    } else {
        reason.trim().to_string()
    };
    Ok(Verdict { result, scam_type, reason, warnings })
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn is_null_word(s: &str) -> bool {
    matches!(
        s.trim().to_ascii_lowercase().as_str(),
        "" | "none" | "null" | "n/a" | "na" | "-" | "not applicable"
    )
}

/// Every parseable JSON object in `text`, outermost first, in order of
/// their opening brace.
fn json_objects(text: &str) -> impl Iterator<Item = serde_json::Map<String, Value>> + '_ {
    text.match_indices('{').filter_map(move |(start, _)| {
        let span = balanced_span(&text[start..])?;
        let parse = |s: &str| match serde_json::from_str::<Value>(s) {
            Ok(Value::Object(map)) => Some(map),
            _ => None,
        };
        parse(span).or_else(|| parse(&python_literals_to_json(span)))
    })
}

/// The shortest prefix of `text` (which starts with `{`) whose braces
/// balance, ignoring braces inside double-quoted strings.
fn balanced_span(text: &str) -> Option<&str> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

fn python_literals_to_json(span: &str) -> String {
    let mut out = String::with_capacity(span.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        out.push_str(match word.as_str() {
            "True" => "true",
            "False" => "false",
            "None" => "null",
            w => w,
        });
        word.clear();
    };
    for c in span.chars() {
        if in_string {
            out.push(c);
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        if c.is_ascii_alphanumeric() || c == '_' {
            word.push(c);
            continue;
        }
        flush(&mut word, &mut out);
        if c == '"' {
            in_string = true;
        }
        out.push(c);
    }
    flush(&mut word, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScamType {
    OnlineShopping,
    TechnicalSupport,
    Cryptocurrency,
    Investment,
    Other,
}

impl ScamType {
    /// The four scam categories a dataset can be labelled with.
    pub const LABELLED: [ScamType; 4] =
        [ScamType::OnlineShopping, ScamType::TechnicalSupport, ScamType::Cryptocurrency, ScamType::Investment];

    pub fn as_str(self) -> &'static str {
        match self {
            ScamType::OnlineShopping => "online_shopping",
            ScamType::TechnicalSupport => "technical_support",
            ScamType::Cryptocurrency => "cryptocurrency",
            ScamType::Investment => "investment",
            ScamType::Other => "other",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ScamType::OnlineShopping => "Online Shopping",
            ScamType::TechnicalSupport => "Technical Support",
            ScamType::Cryptocurrency => "Cryptocurrency",
            ScamType::Investment => "Investment",
            ScamType::Other => "Other",
        }
    }
}

impl fmt::Display for ScamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScamType {
    type Err = String;

    /// Accepts the snake-case id or the display name, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize_phrase(s);
        [ScamType::OnlineShopping, ScamType::TechnicalSupport, ScamType::Cryptocurrency, ScamType::Investment, ScamType::Other]
            .into_iter()
            .find(|t| normalize_phrase(t.as_str()) == key || normalize_phrase(t.display_name()) == key)
            .ok_or_else(|| format!("unknown scam type `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScamTypeCanon {
    pub canonical: ScamType,
    pub raw: String,
}

/// Lowercases and maps every non-alphanumeric run to a single space.
fn normalize_phrase(s: &str) -> String {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Ordered phrase → scam type rules. The first rule whose phrase begins a
/// word of the normalized input wins.
#[derive(Debug, Clone)]
pub struct SynonymTable {
    rules: Vec<(String, ScamType)>,
}

impl SynonymTable {
    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let rules = read_rows(text)?
            .into_iter()
            .map(|(line, phrase, kind)| {
                let kind = ScamType::from_str(&kind).map_err(|message| TableError::Row { line, message })?;
                Ok((normalize_phrase(&phrase), kind))
            })
            .collect::<Result<Vec<_>, TableError>>()?;
        Ok(Self { rules })
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        Self::from_csv(&read_file(path)?)
    }

    pub fn canonicalize(&self, raw: &str) -> ScamTypeCanon {
        let haystack = format!(" {}", normalize_phrase(raw));
        let canonical = ScamType::from_str(raw).ok().unwrap_or_else(|| {
            self.rules
                .iter()
                .find(|(phrase, _)| !phrase.is_empty() && haystack.contains(&format!(" {phrase}")))
                .map(|(_, kind)| *kind)
                .unwrap_or(ScamType::Other)
        });
        ScamTypeCanon { canonical, raw: raw.to_string() }
    }
}

impl Default for SynonymTable {
    fn default() -> Self {
        Self::from_csv(DEFAULT_SYNONYMS).expect("bundled synonym table is valid")
    }
}

pub fn canonicalize_scam_type(raw: &str) -> ScamTypeCanon {
    static TABLE: OnceLock<SynonymTable> = OnceLock::new();
    TABLE.get_or_init(SynonymTable::default).canonicalize(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoType {
    CertificateInformation,
    CompanyInformation,
    ContactInformation,
    DomainName,
    PaymentMethod,
    PrivacyInformation,
    SocialEngineering,
    UnusualPrice,
    UserReview,
    WebsiteStatus,
}

impl InfoType {
    pub const ALL: [InfoType; 10] = [
        InfoType::CertificateInformation,
        InfoType::CompanyInformation,
        InfoType::ContactInformation,
        InfoType::DomainName,
        InfoType::PaymentMethod,
        InfoType::PrivacyInformation,
        InfoType::SocialEngineering,
        InfoType::UnusualPrice,
        InfoType::UserReview,
        InfoType::WebsiteStatus,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            InfoType::CertificateInformation => "Certificate Information",
            InfoType::CompanyInformation => "Company Information",
            InfoType::ContactInformation => "Contact Information",
            InfoType::DomainName => "Domain Name",
            InfoType::PaymentMethod => "Payment Method",
            InfoType::PrivacyInformation => "Privacy Information",
            InfoType::SocialEngineering => "Social Engineering",
            InfoType::UnusualPrice => "Unusual Price",
            InfoType::UserReview => "User Review",
            InfoType::WebsiteStatus => "Website Status",
        }
    }
}

impl FromStr for InfoType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize_phrase(s);
        InfoType::ALL
            .into_iter()
            .find(|t| normalize_phrase(t.display_name()) == key)
            .ok_or_else(|| format!("unknown information type `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordHit {
    pub keyword: String,
    pub category: InfoType,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonProfile {
    pub categories: BTreeSet<InfoType>,
    pub matched_keywords: Vec<KeywordHit>,
}

#[derive(Debug, Clone)]
pub struct KeywordTable {
    rows: Vec<(String, InfoType, Regex)>,
    word_boundary: bool,
}

impl KeywordTable {
    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let rows = read_rows(text)?
            .into_iter()
            .map(|(line, keyword, kind)| {
                let kind = InfoType::from_str(&kind).map_err(|message| TableError::Row { line, message })?;
                let bounded = Regex::new(&format!(r"(?i)\b{}\b", regex::escape(&keyword)))
                    .map_err(|e| TableError::Row { line, message: e.to_string() })?;
                Ok((keyword, kind, bounded))
            })
            .collect::<Result<Vec<_>, TableError>>()?;
        Ok(Self { rows, word_boundary: false })
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        Self::from_csv(&read_file(path)?)
    }

    /// Switches from case-insensitive substring matching to whole-word matching.
    pub fn with_word_boundaries(mut self, on: bool) -> Self {
        self.word_boundary = on;
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn categorize(&self, reason: &str) -> ReasonProfile {
        let lowered = reason.to_lowercase();
        let mut profile = ReasonProfile::default();
        for (keyword, kind, bounded) in &self.rows {
            let hit = if self.word_boundary {
                bounded.is_match(reason)
            } else {
                lowered.contains(&keyword.to_lowercase())
            };
            if hit {
                profile.categories.insert(*kind);
                profile.matched_keywords.push(KeywordHit { keyword: keyword.clone(), category: *kind });
            }
        }
        profile
    }
}

impl Default for KeywordTable {
    fn default() -> Self {
        Self::from_csv(DEFAULT_KEYWORDS).expect("bundled keyword table is valid")
    }
}

pub fn categorize_reason(reason: &str) -> ReasonProfile {
    static TABLE: OnceLock<KeywordTable> = OnceLock::new();
    TABLE.get_or_init(KeywordTable::default).categorize(reason)
}

fn read_file(path: &Path) -> Result<String, TableError> {
    std::fs::read_to_string(path).map_err(|e| TableError::Io(path.display().to_string(), e.to_string()))
}

/// Two-column CSV with a header row; returns (line, first, second).
fn read_rows(text: &str) -> Result<Vec<(usize, String, String)>, TableError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| TableError::Row { line, message: e.to_string() })?;
        match (record.get(0), record.get(1)) {
            (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => rows.push((line, a.to_string(), b.to_string())),
            _ => return Err(TableError::Row { line, message: "expected two non-empty columns".into() }),
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn string_result_and_type() {
        let v = parse_verdict(r#"{"result": "True", "scam_type": "Fake online shopping website", "reason": "cheap"}"#).unwrap();
        assert!(v.result);
        assert_eq!(v.scam_type.as_deref(), Some("Fake online shopping website"));
        assert!(v.warnings.is_empty());
    }

    #[test]
    fn legitimate_needs_no_type() {
        let v = parse_verdict(r#"{"result": false, "reason": "established retailer"}"#).unwrap();
        assert!(!v.result);
        assert_eq!(v.scam_type, None);
        assert_eq!(v.reason, "established retailer");
    }

    #[test]
    fn fenced_json_inside_prose() {
        let text = "Sure! ```json {\"result\": true, \"scam_type\": \"Investment scam\", \"reason\": \"guaranteed returns\"}```";
        let v = parse_verdict(text).unwrap();
        assert!(v.result);
        assert_eq!(v.scam_type.as_deref(), Some("Investment scam"));
        let multiline = "Final verdict below\n```json\n{\n  \"result\": \"false\",\n  \"scam_type\": \"None\",\n  \"reason\": \"old domain {est. 1999}\"\n}\n```";
        let v = parse_verdict(multiline).unwrap();
        assert!(!v.result);
        assert_eq!(v.scam_type, None);
        assert_eq!(v.reason, "old domain {est. 1999}");
    }

    #[test]
    fn python_literals_are_tolerated() {
        let v = parse_verdict(r#"{"result": True, "scam_type": None, "reason": "it says True"}"#).unwrap();
        assert!(v.result);
        assert_eq!(v.scam_type.as_deref(), Some(UNSPECIFIED_SCAM_TYPE));
        assert_eq!(v.reason, "it says True");
        assert_eq!(v.warnings.len(), 1);
    }

    #[test]
    fn scam_without_type_is_unspecified() {
        let v = parse_verdict(r#"{"result": true, "reason": "r"}"#).unwrap();
        assert_eq!(v.scam_type.as_deref(), Some(UNSPECIFIED_SCAM_TYPE));
        assert_eq!(canonicalize_scam_type(UNSPECIFIED_SCAM_TYPE).canonical, ScamType::Other);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_verdict("scam"), Err(VerdictError::NoJsonFound));
        assert_eq!(parse_verdict("{not json"), Err(VerdictError::NoJsonFound));
        assert!(matches!(parse_verdict(r#"{"result": "maybe"}"#), Err(VerdictError::InvalidResultField(_))));
        assert!(matches!(parse_verdict(r#"{"reason": "x"}"#), Err(VerdictError::InvalidResultField(_))));
    }

    #[test]
    fn picks_object_with_result_key() {
        let v = parse_verdict(r#"Observed {"a": 1} then {"result": false, "reason": "fine"}"#).unwrap();
        assert!(!v.result);
    }

    #[test]
    fn canonicalization_examples() {
        assert_eq!(canonicalize_scam_type("Fake financial services site").canonical, ScamType::Investment);
        assert_eq!(canonicalize_scam_type("Fake investment site").canonical, ScamType::Investment);
        assert_eq!(canonicalize_scam_type("fake online shopping website").canonical, ScamType::OnlineShopping);
        assert_eq!(canonicalize_scam_type("crypto wallet phishing platform").canonical, ScamType::Cryptocurrency);
        assert_eq!(canonicalize_scam_type("Tech-support scam with fake virus pop-up").canonical, ScamType::TechnicalSupport);
        assert_eq!(canonicalize_scam_type("Refund scam").canonical, ScamType::Other);
        assert_eq!(canonicalize_scam_type("Romance scam").canonical, ScamType::Other);
        assert_eq!(canonicalize_scam_type("Fake shopping site").raw, "Fake shopping site");
    }

    #[test]
    fn canonicalization_is_idempotent() {
        for t in ScamType::LABELLED.into_iter().chain([ScamType::Other]) {
            assert_eq!(canonicalize_scam_type(t.as_str()).canonical, t);
            assert_eq!(canonicalize_scam_type(t.display_name()).canonical, t);
        }
    }

    #[test]
    fn bundled_keyword_table() {
        let table = KeywordTable::default();
        assert_eq!(table.len(), 55);
        let covered: BTreeSet<_> = table.rows.iter().map(|r| r.1).collect();
        assert_eq!(covered.len(), 10);
    }

    #[test]
    fn reason_examples() {
        let p = categorize_reason("suspicious due to recent domain registration per WHOIS");
        assert_eq!(p.categories, BTreeSet::from([InfoType::DomainName]));
        assert!(p.matched_keywords.iter().any(|h| h.keyword == "WHOIS"));
        assert!(categorize_reason("").categories.is_empty());
        let p = categorize_reason("negative reviews on Reddit and an abnormal price");
        assert_eq!(p.categories, BTreeSet::from([InfoType::UserReview, InfoType::UnusualPrice]));
    }

    #[test]
    fn word_boundary_toggle() {
        let loose = KeywordTable::default();
        let strict = KeywordTable::default().with_word_boundaries(true);
        let text = "The checkout failure page";
        assert!(loose.categorize(text).categories.contains(&InfoType::SocialEngineering));
        assert!(strict.categorize(text).categories.is_empty());
    }

    #[test]
    fn bad_table_rows_are_reported() {
        assert!(matches!(KeywordTable::from_csv("k,t\nfoo,Nonsense\n"), Err(TableError::Row { line: 2, .. })));
        assert!(matches!(SynonymTable::from_csv("p,t\nshop,\n"), Err(TableError::Row { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn parse_verdict_is_total(s in ".{0,200}") {
            let _ = parse_verdict(&s);
        }

        #[test]
        fn parse_verdict_total_on_brace_soup(s in r#"[{}\[\]":,a-z TrueFals]{0,80}"#) {
            let _ = parse_verdict(&s);
        }

        #[test]
        fn categories_are_superadditive(a in "[a-zA-Z ]{0,60}", b in "[a-zA-Z ]{0,60}") {
            let joined = categorize_reason(&format!("{a}{b}")).categories;
            let pa = categorize_reason(&a).categories;
            let pb = categorize_reason(&b).categories;
            prop_assert!(pa.is_subset(&joined));
            prop_assert!(pb.is_subset(&joined));
        }

        #[test]
        fn categories_project_hits(s in "[a-zA-Z ]{0,120}") {
            let p = categorize_reason(&s);
            let projected: BTreeSet<_> = p.matched_keywords.iter().map(|h| h.category).collect();
            prop_assert_eq!(projected, p.categories);
        }
    }
}
