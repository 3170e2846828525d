//! The ReAct loop: prompt, parse, dispatch, observe, until a final answer
//! or the action budget runs out.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{
    estimate_tokens, ChatBackend, ChatMessage, ChatRequest, ChatResponse, GatewayError, DEFAULT_MAX_CONTEXT_TOKENS,
    DEFAULT_TEMPERATURE,
};
use crate::prompt::{render_step, PromptError, PromptTemplate};
use crate::tools::{Observation, PageStore, ToolError, ToolKind, ToolRegistry};
use crate::verdict::{parse_verdict, Verdict};
use crate::SCHEMA_VERSION;

/// Recorded action for unparseable completions and unknown tools.
pub const INVALID_ACTION: &str = "invalid";
pub const STOP_SEQUENCE: &str = "Observation:";
pub const TRUNCATION_SUFFIX: &str = "…[truncated]";
pub const ELIDED_OBSERVATION: &str = "[observation elided]";
pub const DEFAULT_MAX_ACTIONS: usize = 10;
pub const DEFAULT_MAX_OBSERVATION_CHARS: usize = 8_000;

const MALFORMED_OBSERVATION: &str =
    "Error: could not parse your response. Reply with Thought, Action and Action Input lines, or with a Final Answer.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactStep {
    pub index: usize,
    pub thought: String,
    pub action: String,
    pub action_input: String,
    pub observation: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedStep {
    Step { thought: String, action: String, action_input: String },
    Final { thought: String, final_text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("completion has no Thought/Action/Final Answer structure")]
    MalformedStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Thought,
    Action,
    ActionInput,
    Observation,
    FinalAnswer,
}

const LABELS: [(&str, Label); 5] = [
    ("final answer:", Label::FinalAnswer),
    ("action input:", Label::ActionInput),
    ("action:", Label::Action),
    ("thought:", Label::Thought),
    ("observation:", Label::Observation),
];

/// Label at the start of `line` (after leading whitespace) and the byte
/// offset where its value starts.
fn label_of(line: &str) -> Option<(Label, usize)> {
    let trimmed = line.trim_start();
    let indent = line.len() - trimmed.len();
    LABELS.iter().find_map(|(text, label)| {
        let head = trimmed.get(..text.len())?;
        head.eq_ignore_ascii_case(text).then_some((*label, indent + text.len()))
    })
}

/// Splits a completion into labelled segments. Text before the first label
/// is dropped.
fn segments(completion: &str) -> Vec<(Label, usize, String)> {
    let mut out: Vec<(Label, usize, String)> = Vec::new();
    let mut offset = 0;
    for line in completion.split_inclusive('\n') {
        match label_of(line) {
            Some((label, start)) => out.push((label, offset + start, line[start..].to_string())),
            None => {
                if let Some(last) = out.last_mut() {
                    last.2.push_str(line);
                }
            }
        }
        offset += line.len();
    }
    out
}

/// Parses one model turn. A `Final Answer:` label anywhere at a line start
/// wins; its text runs to the end of the completion. Otherwise the first
/// Thought, Action and Action Input segments form a step, which needs at
/// least an Action.
pub fn parse_step(completion: &str) -> Result<ParsedStep, StepError> {
    let segs = segments(completion);
    let first = |want: Label| segs.iter().find(|(l, _, _)| *l == want);
    if let Some((_, start, _)) = first(Label::FinalAnswer) {
        let thought = segs
            .iter()
            .take_while(|(l, _, _)| *l != Label::FinalAnswer)
            .find(|(l, _, _)| *l == Label::Thought)
            .map(|(_, _, t)| t.trim().to_string())
            .unwrap_or_default();
        return Ok(ParsedStep::Final { thought, final_text: completion[*start..].trim().to_string() });
    }
    let action = first(Label::Action).map(|(_, _, t)| t.lines().next().unwrap_or_default().trim().to_string());
    match action {
        Some(action) if !action.is_empty() => Ok(ParsedStep::Step {
            thought: first(Label::Thought).map(|(_, _, t)| t.trim().to_string()).unwrap_or_default(),
            action,
            action_input: first(Label::ActionInput).map(|(_, _, t)| t.trim().to_string()).unwrap_or_default(),
        }),
        _ => Err(StepError::MalformedStep),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    FinalAnswer,
    BudgetForced,
    ParseFailure,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    React,
    SingleTurn,
}

/// How session times are obtained. `Virtual` sums reported model latency
/// and recorded tool latency instead of reading the clock, so replayed
/// sessions serialize identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    Measured,
    Virtual,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenLedger {
    fn add(&mut self, r: &ChatResponse) {
        self.prompt_tokens += r.prompt_tokens;
        self.completion_tokens += r.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSession {
    pub schema_version: u32,
    pub url: String,
    pub model_id: String,
    pub strategy: Strategy,
    pub steps: Vec<ReactStep>,
    pub final_answer_text: Option<String>,
    pub verdict: Option<Verdict>,
    pub actions_used: usize,
    pub token_ledger: TokenLedger,
    pub wall_time_ms: u64,
    pub llm_time_ms: u64,
    pub tool_time_ms: u64,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AnalysisSession {
    fn new(url: &str, model_id: &str, strategy: Strategy) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            url: url.to_string(),
            model_id: model_id.to_string(),
            strategy,
            steps: Vec::new(),
            final_answer_text: None,
            verdict: None,
            actions_used: 0,
            token_ledger: TokenLedger::default(),
            wall_time_ms: 0,
            llm_time_ms: 0,
            tool_time_ms: 0,
            termination: Termination::Error,
            error: None,
            warnings: Vec::new(),
        }
    }

    /// A session for a URL that could not be analyzed at all.
    pub fn failed(url: &str, model_id: &str, strategy: Strategy, error: impl Into<String>) -> Self {
        let mut s = Self::new(url, model_id, strategy);
        s.error = Some(error.into());
        s
    }
}

#[derive(Debug, Error)]
pub enum SessionFailure {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// An unrecoverable failure, carrying the session up to that point
/// (termination `error`).
#[derive(Debug, Error)]
#[error("analysis of {} failed: {source}", session.url)]
pub struct SessionError {
    pub session: Box<AnalysisSession>,
    pub source: SessionFailure,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub model_id: String,
    pub template: PromptTemplate,
    pub max_actions: usize,
    pub max_observation_chars: usize,
    pub max_context_tokens: usize,
    pub temperature: f64,
    pub forced_final_retries: usize,
    pub timing: TimingMode,
}

impl EngineConfig {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            template: PromptTemplate::default(),
            max_actions: DEFAULT_MAX_ACTIONS,
            max_observation_chars: DEFAULT_MAX_OBSERVATION_CHARS,
            max_context_tokens: DEFAULT_MAX_CONTEXT_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
            forced_final_retries: 2,
            timing: TimingMode::Measured,
        }
    }

    pub fn with_timing(mut self, timing: TimingMode) -> Self {
        self.timing = timing;
        self
    }

    pub fn with_max_actions(mut self, max_actions: usize) -> Self {
        self.max_actions = max_actions;
        self
    }

    fn request(&self, prompt: String) -> ChatRequest {
        ChatRequest::new(self.model_id.clone(), vec![ChatMessage::user(prompt)])
            .with_stop(STOP_SEQUENCE)
            .with_temperature(self.temperature)
            .with_max_context_tokens(self.max_context_tokens)
    }
}

/// Cuts `text` to at most `max_chars` characters, suffix included.
pub fn truncate_observation(text: &str, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        return text.to_string();
    }
    let keep = max_chars.saturating_sub(TRUNCATION_SUFFIX.chars().count());
    let mut out: String = text.chars().take(keep).collect();
    out.push_str(TRUNCATION_SUFFIX);
    out.chars().take(max_chars).collect()
}

/// Prompt plus transcript, eliding the oldest observations until the
/// estimate fits `max_tokens`. Thoughts and actions are never dropped.
pub fn fit_transcript(prompt: &str, steps: &[ReactStep], suffix: &str, max_tokens: usize) -> String {
    let render = |elided: usize| {
        let mut out = prompt.to_string();
        for (i, step) in steps.iter().enumerate() {
            render_step(&mut out, step, if i < elided { ELIDED_OBSERVATION } else { &step.observation });
        }
        out.push_str(suffix);
        out
    };
    let mut elided = 0;
    loop {
        let text = render(elided);
        if estimate_tokens(&text) <= max_tokens || elided >= steps.len() {
            return text;
        }
        elided += 1;
    }
}

struct Clock {
    mode: TimingMode,
    started: Instant,
    llm: Duration,
    tool: Duration,
}

impl Clock {
    fn new(mode: TimingMode) -> Self {
        Self { mode, started: Instant::now(), llm: Duration::ZERO, tool: Duration::ZERO }
    }

    fn finish(&self, session: &mut AnalysisSession) {
        let wall = match self.mode {
            TimingMode::Measured => self.started.elapsed().max(self.llm + self.tool),
            TimingMode::Virtual => self.llm + self.tool,
        };
        session.wall_time_ms = wall.as_millis() as u64;
        session.llm_time_ms = self.llm.as_millis() as u64;
        session.tool_time_ms = self.tool.as_millis() as u64;
        // Millisecond rounding must not break llm + tool <= wall.
        session.wall_time_ms = session.wall_time_ms.max(session.llm_time_ms + session.tool_time_ms);
    }
}

struct Run<'a, B: ChatBackend + ?Sized> {
    backend: &'a B,
    registry: &'a ToolRegistry,
    config: &'a EngineConfig,
    session: AnalysisSession,
    clock: Clock,
}

impl<B: ChatBackend + ?Sized> Run<'_, B> {
    fn complete(&mut self, prompt: String) -> Result<ChatResponse, GatewayError> {
        let started = Instant::now();
        let response = self.backend.complete(&self.config.request(prompt));
        let measured = started.elapsed();
        let response = response?;
        self.clock.llm += match self.clock.mode {
            TimingMode::Measured => measured,
            TimingMode::Virtual => response.latency,
        };
        self.session.token_ledger.add(&response);
        Ok(response)
    }

    fn dispatch(&mut self, action: &str, input: &str, pages: &mut PageStore) -> (String, String) {
        let Some(kind) = self.registry.resolve(action) else {
            let names = self.registry.names().join(", ");
            return (INVALID_ACTION.to_string(), format!("Error: unknown tool '{action}'. Available tools: {names}"));
        };
        let started = Instant::now();
        let result: Result<Observation, ToolError> = self.registry.dispatch(kind.name(), input, pages);
        let measured = started.elapsed();
        self.clock.tool += match (self.clock.mode, &result) {
            (TimingMode::Measured, _) => measured,
            (TimingMode::Virtual, Ok(o)) => o.elapsed,
            (TimingMode::Virtual, Err(_)) => Duration::ZERO,
        };
        let body = match result {
            Ok(o) => o.body,
            Err(e) => format!("Error: {e}"),
        };
        (kind.name().to_string(), truncate_observation(&body, self.config.max_observation_chars))
    }

    fn push_step(&mut self, thought: String, action: String, action_input: String, observation: String) {
        let index = self.session.steps.len() + 1;
        self.session.steps.push(ReactStep { index, thought, action, action_input, observation });
        self.session.actions_used = self.session.steps.len();
    }

    fn conclude(&mut self, final_text: String, termination: Termination) {
        match parse_verdict(&final_text) {
            Ok(verdict) => {
                self.session.verdict = Some(verdict);
                self.session.termination = termination;
            }
            Err(e) => {
                self.session.warnings.push(format!("final answer not parseable: {e}"));
                self.session.termination = Termination::ParseFailure;
            }
        }
        self.session.final_answer_text = Some(final_text);
    }

    fn fail(mut self, source: SessionFailure) -> SessionError {
        self.session.termination = Termination::Error;
        self.session.error = Some(source.to_string());
        self.clock.finish(&mut self.session);
        SessionError { session: Box::new(self.session), source }
    }

    fn loop_until_final(&mut self, prompt: &str) -> Result<(), GatewayError> {
        let mut pages = PageStore::new();
        while self.session.steps.len() < self.config.max_actions {
            let text = fit_transcript(prompt, &self.session.steps, "", self.config.max_context_tokens);
            let response = self.complete(text)?;
            match parse_step(&response.text) {
                Ok(ParsedStep::Final { final_text, .. }) => {
                    self.conclude(final_text, Termination::FinalAnswer);
                    return Ok(());
                }
                Ok(ParsedStep::Step { thought, action, action_input }) => {
                    let (action, observation) = self.dispatch(&action, &action_input, &mut pages);
                    self.push_step(thought, action, action_input, observation);
                }
                Err(StepError::MalformedStep) => {
                    let raw = response.text.trim().to_string();
                    self.push_step(raw, INVALID_ACTION.to_string(), String::new(), MALFORMED_OBSERVATION.to_string());
                }
            }
        }
        self.force_final(prompt)
    }

    /// One forced-answer request, retried on malformed replies.
    fn force_final(&mut self, prompt: &str) -> Result<(), GatewayError> {
        let instruction = self.config.template.render_forced_final();
        for attempt in 0..=self.config.forced_final_retries {
            let text = fit_transcript(prompt, &self.session.steps, &instruction, self.config.max_context_tokens);
            let response = self.complete(text)?;
            if let Ok(ParsedStep::Final { final_text, .. }) = parse_step(&response.text) {
                self.conclude(final_text, Termination::BudgetForced);
                return Ok(());
            }
            self.session.warnings.push(format!("forced final answer attempt {} was malformed", attempt + 1));
        }
        self.session.termination = Termination::ParseFailure;
        Ok(())
    }
}

/// Analyzes `url` with the ReAct loop.
pub fn run_session<B: ChatBackend + ?Sized>(
    url: &str,
    backend: &B,
    registry: &ToolRegistry,
    config: &EngineConfig,
) -> Result<AnalysisSession, SessionError> {
    let mut run = Run {
        backend,
        registry,
        config,
        session: AnalysisSession::new(url, &config.model_id, Strategy::React),
        clock: Clock::new(config.timing),
    };
    let template = config.template.clone().with_max_actions(config.max_actions);
    let prompt = match template.render_agent_prompt(url, &registry.specs()) {
        Ok(p) => p,
        Err(e) => return Err(run.fail(e.into())),
    };
    match run.loop_until_final(&prompt) {
        Ok(()) => {
            run.clock.finish(&mut run.session);
            Ok(run.session)
        }
        Err(e) => Err(run.fail(e.into())),
    }
}

/// Baseline: fetch the top page, extract its text, ask once. The two tool
/// calls are not recorded as agent steps.
pub fn run_single_turn<B: ChatBackend + ?Sized>(
    url: &str,
    backend: &B,
    registry: &ToolRegistry,
    config: &EngineConfig,
) -> Result<AnalysisSession, SessionError> {
    let mut run = Run {
        backend,
        registry,
        config,
        session: AnalysisSession::new(url, &config.model_id, Strategy::SingleTurn),
        clock: Clock::new(config.timing),
    };
    let mut pages = PageStore::new();
    let (_, access) = run.dispatch(ToolKind::AccessUrl.name(), url, &mut pages);
    let page_text = if access.starts_with("Error:") {
        run.session.warnings.push(format!("top page unavailable: {access}"));
        String::new()
    } else {
        let (_, text) = run.dispatch(ToolKind::ExtractText.name(), url, &mut pages);
        if text.starts_with("Error:") {
            run.session.warnings.push(format!("no page text: {text}"));
            String::new()
        } else {
            text
        }
    };
    let prompt = config.template.render_single_turn_prompt(url, &page_text);
    let request = ChatRequest::new(config.model_id.clone(), vec![ChatMessage::user(prompt)])
        .with_temperature(config.temperature)
        .with_max_context_tokens(config.max_context_tokens);
    let started = Instant::now();
    let response = match backend.complete(&request) {
        Ok(r) => r,
        Err(e) => return Err(run.fail(e.into())),
    };
    run.clock.llm += match config.timing {
        TimingMode::Measured => started.elapsed(),
        TimingMode::Virtual => response.latency,
    };
    run.session.token_ledger.add(&response);
    let text = response.text.trim().to_string();
    run.conclude(text, Termination::FinalAnswer);
    run.clock.finish(&mut run.session);
    Ok(run.session)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_tool_step() {
        let p = parse_step("Thought: check whois\nAction: Retrieve WHOIS\nAction Input: example.com").unwrap();
        assert_eq!(
            p,
            ParsedStep::Step {
                thought: "check whois".into(),
                action: "Retrieve WHOIS".into(),
                action_input: "example.com".into()
            }
        );
    }

    #[test]
    fn parses_a_final_answer() {
        let p = parse_step("Thought: I now know the final answer\nFinal Answer: scam").unwrap();
        assert_eq!(p, ParsedStep::Final { thought: "I now know the final answer".into(), final_text: "scam".into() });
    }

    #[test]
    fn final_text_keeps_trailing_json() {
        let text = "Thought: done\nfinal answer: The site is a scam.\n```json\n{\"result\": true}\n```\n";
        let ParsedStep::Final { final_text, .. } = parse_step(text).unwrap() else { panic!() };
        assert_eq!(final_text, "The site is a scam.\n```json\n{\"result\": true}\n```");
    }

    #[test]
    fn unlabelled_text_is_malformed() {
        assert_eq!(parse_step("lorem ipsum"), Err(StepError::MalformedStep));
        assert_eq!(parse_step("Thought: hmm, not sure"), Err(StepError::MalformedStep));
        assert_eq!(parse_step("Action:   \n"), Err(StepError::MalformedStep));
    }

    #[test]
    fn labels_are_case_insensitive_and_multiline() {
        let p = parse_step("  THOUGHT: first line\nsecond line\naction: Search Reddit\nACTION INPUT:  shop review \n").unwrap();
        assert_eq!(
            p,
            ParsedStep::Step {
                thought: "first line\nsecond line".into(),
                action: "Search Reddit".into(),
                action_input: "shop review".into()
            }
        );
    }

    #[test]
    fn label_must_start_a_line() {
        let p = parse_step("Thought: the Action: label here is prose\nAction: Access URL\nAction Input: https://a.example").unwrap();
        let ParsedStep::Step { thought, action, .. } = p else { panic!() };
        assert_eq!(thought, "the Action: label here is prose");
        assert_eq!(action, "Access URL");
    }

    #[test]
    fn truncation_respects_the_limit() {
        assert_eq!(truncate_observation("short", 8000), "short");
        let long = "é".repeat(9000);
        let cut = truncate_observation(&long, 8000);
        assert_eq!(cut.chars().count(), 8000);
        assert!(cut.ends_with(TRUNCATION_SUFFIX));
        assert_eq!(truncate_observation("abcdef", 3).chars().count(), 3);
    }

    #[test]
    fn overflow_elides_oldest_observations_first() {
        let step = |i: usize, obs: &str| ReactStep {
            index: i,
            thought: format!("t{i}"),
            action: "Access URL".into(),
            action_input: "x".into(),
            observation: obs.into(),
        };
        let steps = vec![step(1, &"a".repeat(400)), step(2, &"b".repeat(400)), step(3, "short")];
        let fitted = fit_transcript("P\n", &steps, "", 160);
        assert!(fitted.contains("Observation: [observation elided]\nThought: t2"));
        assert!(fitted.contains(&"b".repeat(400)));
        assert!(fitted.contains("Thought: t1") && fitted.contains("Thought: t3"));
        let all = fit_transcript("P\n", &steps, "", 10);
        assert_eq!(all.matches(ELIDED_OBSERVATION).count(), 3);
    }
}
