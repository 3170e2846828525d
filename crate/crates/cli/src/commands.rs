use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use scam_agent::dataset::{self, DatasetEntry};
use scam_agent::engine::{AnalysisSession, Strategy};
use scam_agent::eval::{self, Pricing};
use scam_agent::tools::FixtureStore;
use scam_agent::tools::{canonical_url, Payload};

use crate::config::RunConfig;
use crate::runtime::{self, Runtime};
use crate::{Cli, CliError, Command, DatasetCommand, FixturesCommand, StrategyArg, EXIT_FAILURE, EXIT_OK};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::React => Strategy::React,
            StrategyArg::SingleTurn => Strategy::SingleTurn,
        }
    }
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

fn input_error(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let config = RunConfig::resolve(&cli.flags)?;
    match cli.command {
        Command::Analyze { url, strategy } => analyze(&config, &url, strategy.into(), stdout),
        Command::Batch { dataset, strategy } => batch(&config, &dataset, strategy.into()),
        Command::Eval { dataset, sessions } => evaluate(&config, &dataset, &sessions, stdout),
        Command::Dataset(cmd) => dataset_command(&config, cmd),
        Command::Fixtures(FixturesCommand::List) => list_fixtures(&config, stdout),
    }
}

/// Exit 0 when the session produced a verdict, 1 otherwise.
pub fn analyze(config: &RunConfig, url: &str, strategy: Strategy, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let url = canonical_url(url).map_err(input_error)?;
    let runtime = Runtime::new(config)?;
    let session = runtime.analyze(url.as_str(), strategy);
    let json = serde_json::to_string_pretty(&session).map_err(failure)?;
    writeln!(stdout, "{json}").map_err(failure)?;
    if let Some(e) = &session.error {
        eprintln!("analysis failed: {e}");
    }
    Ok(if session.verdict.is_some() { EXIT_OK } else { EXIT_FAILURE })
}

/// URLs already present in a session file. A torn last line is dropped
/// and the file rewritten without it.
fn completed_urls(path: &Path) -> Result<HashSet<String>, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashSet::new()),
        Err(e) => return Err(failure(format!("{}: {e}", path.display()))),
    };
    let mut urls = HashSet::new();
    let mut kept = String::new();
    let mut dropped = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str::<AnalysisSession>(line) {
            Ok(s) => {
                urls.insert(s.url);
                kept.push_str(line);
                kept.push('\n');
            }
            Err(_) => dropped += 1,
        }
    }
    if dropped > 0 {
        eprintln!("warning: dropping {dropped} unreadable line(s) from {}", path.display());
        fs::write(path, kept).map_err(failure)?;
    }
    Ok(urls)
}

/// Sessions are written in dataset order as soon as every earlier one is
/// done, so a rerun skips exactly what was finished.
pub fn batch(config: &RunConfig, dataset_path: &Path, strategy: Strategy) -> Result<i32, CliError> {
    let out_path = config.output_path()?;
    let entries = dataset::read_dataset(dataset_path).map_err(input_error)?;
    let done = completed_urls(out_path)?;
    let mut seen = HashSet::new();
    let todo: Vec<String> = entries
        .iter()
        .filter(|e| !e.is_excluded())
        .map(|e| e.url.clone())
        .filter(|u| !done.contains(u) && seen.insert(u.clone()))
        .collect();
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(failure)?;
    }
    let file = OpenOptions::new().create(true).append(true).open(out_path).map_err(failure)?;
    let mut out = BufWriter::new(file);
    eprintln!("{} to analyze, {} already done", todo.len(), done.len());
    if todo.is_empty() {
        return Ok(EXIT_OK);
    }
    let runtime = Runtime::new(config)?;
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, AnalysisSession)>();
    let write_result = thread::scope(|scope| {
        for _ in 0..config.parallelism.min(todo.len()) {
            let tx = tx.clone();
            let (next, todo, runtime) = (&next, &todo, &runtime);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(url) = todo.get(i) else { break };
                if tx.send((i, runtime.analyze(url, strategy))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending: BTreeMap<usize, AnalysisSession> = BTreeMap::new();
        let mut written = 0;
        for (i, session) in rx {
            pending.insert(i, session);
            while let Some(session) = pending.remove(&written) {
                let line = serde_json::to_string(&session).map_err(failure)?;
                writeln!(out, "{line}").and_then(|_| out.flush()).map_err(failure)?;
                written += 1;
                let outcome = match (&session.verdict, &session.error) {
                    (Some(v), _) => if v.result { "scam" } else { "legitimate" }.to_string(),
                    (None, Some(e)) => format!("error: {e}"),
                    (None, None) => format!("{:?}", session.termination),
                };
                eprintln!("[{written}/{}] {} {outcome}", todo.len(), session.url);
            }
        }
        Ok::<(), CliError>(())
    });
    write_result?;
    Ok(EXIT_OK)
}

fn read_sessions(path: &Path) -> Result<Vec<AnalysisSession>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| input_error(format!("{} line {}: {e}", path.display(), i + 1))))
        .collect()
}

fn pick_pricing<'a>(config: &'a RunConfig, sessions: &[AnalysisSession]) -> (Option<&'a Pricing>, Option<String>) {
    let models: HashSet<&str> = sessions.iter().map(|s| s.model_id.as_str()).collect();
    let model = match models.len() {
        1 => models.into_iter().next().unwrap().to_string(),
        0 => config.model_id.clone(),
        _ => {
            return (None, Some("sessions come from several models; cost report omitted".into()));
        }
    };
    match config.pricing.get(&model) {
        Some(p) => (Some(p), None),
        None => (None, Some(format!("no pricing configured for model {model}; cost report omitted"))),
    }
}

pub fn evaluate(
    config: &RunConfig,
    dataset_path: &Path,
    sessions_path: &Path,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let entries = dataset::read_dataset(dataset_path).map_err(input_error)?;
    let sessions = read_sessions(sessions_path)?;
    let (pricing, pricing_warning) = pick_pricing(config, &sessions);
    let mut report =
        eval::evaluate(&entries, &sessions, &config.synonym_table()?, &config.keyword_table()?, pricing).map_err(failure)?;
    report.warnings.extend(pricing_warning);
    let text = eval::render_text(&report);
    write!(stdout, "{text}").map_err(failure)?;
    if let Some(dir) = &config.output {
        fs::create_dir_all(dir).map_err(failure)?;
        let json = serde_json::to_string_pretty(&report).map_err(failure)?;
        fs::write(dir.join(REPORT_JSON), json + "\n").map_err(failure)?;
        fs::write(dir.join(REPORT_TEXT), &text).map_err(failure)?;
    }
    Ok(EXIT_OK)
}

/// Accepts a dataset JSONL, or raw candidates as CSV or JSONL.
fn load_entries(path: &Path) -> Result<Vec<DatasetEntry>, CliError> {
    dataset::read_dataset(path).or_else(|_| dataset::read_candidates(path)).map_err(input_error)
}

fn summarize(stage: &str, entries: &[DatasetEntry]) {
    let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
    for e in entries {
        if let Some(r) = &e.excluded_reason {
            *reasons.entry(r.as_str()).or_default() += 1;
        }
    }
    let retained = entries.iter().filter(|e| !e.is_excluded()).count();
    eprintln!("{stage}: {retained} of {} retained {reasons:?}", entries.len());
}

fn dataset_command(config: &RunConfig, cmd: DatasetCommand) -> Result<i32, CliError> {
    let out = config.output_path()?;
    let (stage, entries) = match cmd {
        DatasetCommand::Filter { input, toplist, cutoff } => {
            if cutoff == 0 {
                return Err(CliError::Usage("--cutoff must be at least 1".into()));
            }
            let toplist = dataset::TopList::load(&toplist).map_err(input_error)?;
            ("filter", dataset::filter_toplist(load_entries(&input)?, &toplist, cutoff))
        }
        DatasetCommand::Check { input } => {
            let fetcher = runtime::page_fetcher(config)?;
            let limiter = runtime::limiter(config);
            ("check", dataset::check_accessibility(load_entries(&input)?, fetcher.as_ref(), &limiter, config.parallelism))
        }
        DatasetCommand::Merge { input, annotations } => {
            let rows = dataset::read_annotations(&annotations).map_err(input_error)?;
            ("merge", dataset::merge_annotations(load_entries(&input)?, &rows).map_err(failure)?)
        }
        DatasetCommand::Sample { input, per_cell, seed } => {
            if per_cell == 0 {
                return Err(CliError::Usage("--per-cell must be at least 1".into()));
            }
            ("sample", dataset::balanced_sample(&load_entries(&input)?, per_cell, seed).map_err(failure)?)
        }
    };
    summarize(stage, &entries);
    dataset::write_dataset(out, &entries).map_err(failure)?;
    Ok(EXIT_OK)
}

fn list_fixtures(config: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let store = FixtureStore::new(config.fixtures_dir()?);
    let records = store.list().map_err(failure)?;
    let mut buf = Vec::new();
    for r in &records {
        let outcome = match r.outcome() {
            Ok(Payload::Page(p)) => format!("status {}", p.status),
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error: {e}"),
        };
        writeln!(buf, "{}\t{}\t{}\t{}", r.tool, r.input, r.fetched_at.to_rfc3339(), outcome).map_err(failure)?;
    }
    stdout.write_all(&buf).map_err(failure)?;
    eprintln!("{} fixture(s) in {}", records.len(), store.root().display());
    Ok(EXIT_OK)
}
