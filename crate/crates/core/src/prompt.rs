//! Agent and single-turn prompt assembly.
//!
//! The wording lives in a template asset with `[[section]]` markers, so it
//! can be swapped without a rebuild. Placeholders are filled in a single
//! pass: substituted text (a URL, page text) is never re-scanned.

use std::collections::HashMap;
use std::fmt::Write;
use std::path::Path;

use thiserror::Error;

use crate::engine::ReactStep;
use crate::tools::ToolSpec;

const DEFAULT_TEMPLATE: &str = include_str!("../assets/prompt_template.txt");
const DEFAULT_FEATURES: &str = include_str!("../assets/scam_features.txt");

/// Sections of the agent prompt, in the order they are emitted.
pub const AGENT_SECTIONS: [&str; 6] =
    ["task_setting", "characteristic_examples", "tool_definitions", "analysis_method", "output_format", "analysis_process"];

const OTHER_SECTIONS: [&str; 2] = ["forced_final", "single_turn"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("no tools to describe")]
    EmptyToolSet,
    #[error("tool '{0}' listed twice")]
    DuplicateTool(String),
    #[error("'{0}' is not a valid URL")]
    InvalidUrl(String),
    #[error("template is missing section [[{0}]]")]
    MissingSection(String),
    #[error("template has unknown section [[{0}]]")]
    UnknownSection(String),
    #[error("template line {0}: text before the first section marker")]
    StrayText(usize),
    #[error("feature list is empty or has a blank entry")]
    InvalidFeatures,
    #[error("cannot read {0}: {1}")]
    Io(String, String),
}

/// Characteristic features of scam sites shown to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScamFeatureList {
    features: Vec<String>,
}

impl Default for ScamFeatureList {
    fn default() -> Self {
        Self::from_lines(DEFAULT_FEATURES).expect("bundled feature list is valid")
    }
}

impl ScamFeatureList {
    pub fn new(features: Vec<String>) -> Result<Self, PromptError> {
        let features: Vec<String> = features.into_iter().map(|f| f.trim().to_string()).collect();
        if features.is_empty() || features.iter().any(String::is_empty) {
            return Err(PromptError::InvalidFeatures);
        }
        Ok(Self { features })
    }

    /// One feature per non-empty line.
    pub fn from_lines(text: &str) -> Result<Self, PromptError> {
        Self::new(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect())
    }

    /// Default list followed by `extra`.
    pub fn extended(extra: &[String]) -> Result<Self, PromptError> {
        let mut features = Self::default().features;
        features.extend(extra.iter().cloned());
        Self::new(features)
    }

    pub fn as_slice(&self) -> &[String] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn numbered(&self) -> String {
        self.features.iter().enumerate().map(|(i, f)| format!("{}. {f}", i + 1)).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    sections: HashMap<String, String>,
    features: ScamFeatureList,
    max_actions: usize,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATE).expect("bundled template is valid")
    }
}

impl PromptTemplate {
    /// Parses template text. Lines before the first marker may only be
    /// blank or `#` comments.
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut sections: HashMap<String, String> = HashMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        let close = |current: Option<(String, Vec<&str>)>, sections: &mut HashMap<String, String>| {
            if let Some((name, lines)) = current {
                sections.insert(name, lines.join("\n").trim_matches('\n').to_string());
            }
        };
        for (i, line) in text.lines().enumerate() {
            if let Some(name) = line.trim().strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
                let name = name.trim().to_string();
                if !AGENT_SECTIONS.contains(&name.as_str()) && !OTHER_SECTIONS.contains(&name.as_str()) {
                    return Err(PromptError::UnknownSection(name));
                }
                close(current.take(), &mut sections);
                current = Some((name, Vec::new()));
            } else if let Some((_, lines)) = current.as_mut() {
                lines.push(line);
            } else if !line.trim().is_empty() && !line.starts_with('#') {
                return Err(PromptError::StrayText(i + 1));
            }
        }
        close(current.take(), &mut sections);
        for name in AGENT_SECTIONS.iter().chain(OTHER_SECTIONS.iter()) {
            if !sections.contains_key(*name) {
                return Err(PromptError::MissingSection(name.to_string()));
            }
        }
        Ok(Self { sections, features: ScamFeatureList::default(), max_actions: 10 })
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::Io(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn with_features(mut self, features: ScamFeatureList) -> Self {
        self.features = features;
        self
    }

    pub fn with_max_actions(mut self, max_actions: usize) -> Self {
        self.max_actions = max_actions;
        self
    }

    pub fn features(&self) -> &ScamFeatureList {
        &self.features
    }

    pub fn max_actions(&self) -> usize {
        self.max_actions
    }

    pub fn section(&self, name: &str) -> Option<&str> {
        self.sections.get(name).map(String::as_str)
    }

    /// The full agent prompt, ending with the question line and a newline.
    pub fn render_agent_prompt(&self, url: &str, tools: &[ToolSpec]) -> Result<String, PromptError> {
        if tools.is_empty() {
            return Err(PromptError::EmptyToolSet);
        }
        for (i, t) in tools.iter().enumerate() {
            if tools[..i].iter().any(|o| o.name == t.name) {
                return Err(PromptError::DuplicateTool(t.name.clone()));
            }
        }
        validate_url(url)?;
        let definitions = tools.iter().map(|t| format!("{}: {}", t.name, t.description)).collect::<Vec<_>>().join("\n");
        let names = tools.iter().map(|t| t.name.as_str()).collect::<Vec<_>>().join(", ");
        let values = self.values(&[
            ("tool_definitions", definitions),
            ("tool_names", names),
            ("url", url.to_string()),
        ]);
        let body =
            AGENT_SECTIONS.iter().map(|s| substitute(&self.sections[*s], &values)).collect::<Vec<_>>().join("\n\n");
        Ok(body + "\n")
    }

    /// Instruction appended to the transcript once the action budget is
    /// spent.
    pub fn render_forced_final(&self) -> String {
        substitute(&self.sections["forced_final"], &self.values(&[])) + "\n"
    }

    /// One-shot prompt: role, features, page text and output format. No
    /// tools and no ReAct block.
    pub fn render_single_turn_prompt(&self, url: &str, page_text: &str) -> String {
        let output_format = self.sections["output_format"].clone();
        let values = self.values(&[
            ("url", url.to_string()),
            ("page_text", page_text.to_string()),
            ("output_format", output_format),
        ]);
        substitute(&self.sections["single_turn"], &values) + "\n"
    }

    fn values(&self, extra: &[(&str, String)]) -> HashMap<String, String> {
        let mut values = HashMap::from([
            ("features".to_string(), self.features.numbered()),
            ("max_actions".to_string(), self.max_actions.to_string()),
        ]);
        for (k, v) in extra {
            values.insert(k.to_string(), v.clone());
        }
        values
    }
}

fn validate_url(url: &str) -> Result<(), PromptError> {
    match url::Url::parse(url.trim()) {
        Ok(u) if u.has_host() => Ok(()),
        _ => Err(PromptError::InvalidUrl(url.to_string())),
    }
}

/// Replaces `{name}` for known names; anything else in braces is kept.
fn substitute(text: &str, values: &HashMap<String, String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if values.contains_key(&after[..close]) => {
                out.push_str(&values[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Appends each step as labelled Thought/Action/Action Input/Observation
/// lines.
pub fn render_transcript(prompt: &str, steps: &[ReactStep]) -> String {
    let mut out = prompt.to_string();
    for step in steps {
        render_step(&mut out, step, &step.observation);
    }
    out
}

pub(crate) fn render_step(out: &mut String, step: &ReactStep, observation: &str) {
    let _ = write!(
        out,
        "Thought: {}\nAction: {}\nAction Input: {}\nObservation: {}\n",
        step.thought, step.action, step.action_input, observation
    );
}
