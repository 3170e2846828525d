//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and fails if any criterion failed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rust_decimal::Decimal;
use scam_agent::dataset::{self, DatasetEntry, Label, Language, TopList};
use scam_agent::engine::{run_session, AnalysisSession, Strategy as RunStrategy, TokenLedger};
use scam_agent::eval::{self, binary_metrics, score_binary, score_multiclass, ConfusionCounts, Prediction, Pricing, ScoredEntry, Slice};
use scam_agent::gateway::ScriptedBackend;
use scam_agent::tools::*;
use scam_agent::verdict::{categorize_reason, InfoType, ScamType};
use scam_agent_cli::demo;
use scam_agent_cli::{run, EXIT_OK};

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn cli(args: &[&str]) -> i32 {
    let mut sink = Vec::new();
    run(std::iter::once("scam-agent").chain(args.iter().copied()), &mut sink)
}

fn close(got: Option<f64>, want: f64, tol: f64) -> bool {
    got.is_some_and(|g| (g - want).abs() <= tol + 1e-12)
}

// 1. Binary metrics reproduce the reference summary rows.
fn table_rows() {
    let started = Instant::now();
    let rows = [
        ((771, 29, 784, 16), [0.972, 0.964, 0.980, 0.980, 0.972]),
        ((593, 7, 598, 2), [0.993, 0.988, 0.997, 0.997, 0.992]),
    ];
    for ((tp, fn_, tn, fp), want) in rows {
        let m = binary_metrics(&ConfusionCounts::new(tp, fn_, tn, fp));
        let got = [m.accuracy, m.tpr_recall, m.tnr, m.precision, m.f1];
        for (g, w) in got.iter().zip(want) {
            assert!(close(*g, w, 0.0005), "({tp},{fn_},{tn},{fp}): {g:?} vs {w}");
        }
        // Independent arithmetic on the same counts.
        let (tp, fn_, tn, fp) = (tp as f64, fn_ as f64, tn as f64, fp as f64);
        let p = tp / (tp + fp);
        let r = tp / (tp + fn_);
        assert!(close(m.accuracy, (tp + tn) / (tp + fn_ + tn + fp), 0.0));
        assert!(close(m.f1, 2.0 * p * r / (p + r), 0.0));
    }
    assert!(started.elapsed() < Duration::from_secs(1));
}

fn adversarial_completion(urls: Vec<String>) -> impl Strategy<Value = String> {
    let url = prop::sample::select(urls);
    let tool = prop::sample::select(ToolKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>());
    prop_oneof![
        (tool, url.clone()).prop_map(|(t, u)| format!("Thought: look\nAction: {t}\nAction Input: {u}")),
        url.clone().prop_map(|u| format!("Thought: t\nAction: Access URL\nAction Input: {u}\nObservation: invented")),
        "[A-Za-z ]{1,20}".prop_map(|t| format!("Thought: x\nAction: {t}\nAction Input: y")),
        Just("Action:\nAction Input:".to_string()),
        Just("Thought: I now know the final answer\nFinal Answer: {\"result\": true, \"scam_type\": \"shop\", \"reason\": \"r\"}".to_string()),
        Just("Final Answer: not json at all".to_string()),
        "[ -~\n]{0,80}",
    ]
}

// 2. No script, however hostile, takes more than ten steps.
fn budget_bound() {
    let started = Instant::now();
    let registry = ToolRegistry::replay(FixtureStore::new(demo_dir().join(demo::FIXTURES_DIR)));
    let config = demo::engine_config();
    let urls: Vec<String> = demo::sites().iter().map(|s| s.url.clone()).collect();
    let mut runner = TestRunner::new(RunnerConfig { cases: 1000, failure_persistence: None, ..RunnerConfig::default() });
    let strategy = (prop::sample::select(urls.clone()), prop::collection::vec(adversarial_completion(urls), 0..24));
    let runs = std::sync::atomic::AtomicUsize::new(0);
    runner
        .run(&strategy, |(url, script)| {
            runs.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            let backend = ScriptedBackend::new(script);
            let session = match run_session(&url, &backend, &registry, &config) {
                Ok(s) => s,
                Err(e) => *e.session,
            };
            prop_assert!(session.steps.len() <= 10);
            prop_assert!(session.actions_used <= 10);
            Ok(())
        })
        .unwrap();
    assert!(runs.into_inner() >= 1000);
    assert_eq!(registry.live_calls(), 0);
    assert!(started.elapsed() < Duration::from_secs(30), "{:?}", started.elapsed());
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap().flatten() {
        let path = entry.path();
        if path.is_dir() {
            out.extend(files_under(&path));
        } else {
            out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
        }
    }
    out
}

// 3. Replay is byte-stable, and replayed observations match what was recorded.
fn replay_determinism() {
    let started = Instant::now();
    let sites = demo::sites();
    assert!(sites.len() >= 20);
    let types: BTreeSet<ScamType> = sites.iter().map(|s| s.scam_type).collect();
    assert!(types.len() >= 4);
    assert!(sites.iter().any(|s| s.label == Label::Legitimate));

    let tmp = tempfile::tempdir().unwrap();
    let config = demo_dir().join(demo::CONFIG_FILE).display().to_string();
    let dataset = demo_dir().join(demo::DATASET_FILE).display().to_string();
    let mut outputs = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = tmp.path().join(name).display().to_string();
        assert_eq!(cli(&["--config", &config, "-o", &out, "batch", &dataset]), EXIT_OK);
        outputs.push(fs::read(&out).unwrap());
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);

    let fixtures = tmp.path().join("recorded");
    let recorded = demo::record_sessions(&fixtures);
    let registry = ToolRegistry::replay(FixtureStore::new(&fixtures));
    let engine = demo::engine_config();
    for (site, rec) in sites.iter().zip(&recorded) {
        let replayed = run_session(&site.url, &ScriptedBackend::new(site.script()), &registry, &engine).unwrap();
        let obs = |s: &AnalysisSession| s.steps.iter().map(|st| st.observation.clone()).collect::<Vec<_>>();
        assert!(!rec.steps.is_empty());
        assert_eq!(obs(rec), obs(&replayed), "{}", site.url);
    }
    assert_eq!(registry.live_calls(), 0);

    // The shipped corpus is exactly what the generator produces.
    let regenerated = tmp.path().join("regenerated");
    demo::write_corpus(&regenerated).unwrap();
    assert!(files_under(&regenerated) == files_under(&demo_dir()), "demo/ is stale; rerun the gen_demo example");
    assert!(started.elapsed() < Duration::from_secs(60));
}

// 4. The demo corpus scores perfectly end to end.
fn demo_accuracy() {
    let tmp = tempfile::tempdir().unwrap();
    let config = demo_dir().join(demo::CONFIG_FILE).display().to_string();
    let dataset = demo_dir().join(demo::DATASET_FILE).display().to_string();
    let sessions = tmp.path().join("s.jsonl").display().to_string();
    let reports = tmp.path().join("reports").display().to_string();
    assert_eq!(cli(&["--config", &config, "-o", &sessions, "batch", &dataset]), EXIT_OK);
    assert_eq!(cli(&["--config", &config, "-o", &reports, "eval", &dataset, &sessions]), EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(Path::new(&reports).join("report.json")).unwrap()).unwrap();
    let overall = &report["binary"][0];
    assert_eq!(overall["slice"], serde_json::json!({"scam_type": null, "language": null}), "first binary row is the overall slice");
    assert_eq!(overall["metrics"]["accuracy"], 1.0);
    assert!(overall["counts"]["tp"].as_u64().unwrap() > 0);
    assert_eq!(report["multiclass"][0]["macro_f1"], 1.0);
    assert_eq!(report["multiclass"][0]["classes"].as_array().unwrap().len(), 4);
}

// 5. Extraction rules on the hand-checked HTML pages.
fn extraction_suite() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/html");
    let cases = scam_agent::testutil::run_html_suite(&dir).unwrap();
    assert!(cases.len() >= 15);
    let failed: Vec<&str> = cases.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert!(cases
        .iter()
        .any(|c| c.actual_links.iter().any(|l| l == "(http://example.com/contact.html, Contact Page)")));
}

struct Flood;

impl SearchProvider for Flood {
    fn search(&self, _: &str) -> Result<Vec<SearchHit>, ProviderError> {
        Ok((1..=25).map(|i| SearchHit { url: format!("https://r{i}.example/"), title: None, summary: format!("hit {i}") }).collect())
    }
}

impl SocialProvider for Flood {
    fn search(&self, _: &str) -> Result<SocialResults, ProviderError> {
        let post = |kind: &str, i: u32| SocialPost {
            timestamp: format!("2024-02-{i:02}T00:00:00Z"),
            title: Some(format!("{kind}{i}")),
            text: format!("{kind} body {i}"),
        };
        Ok(SocialResults { posts: (1..=20).map(|i| post("post", i)).collect(), comments: (1..=20).map(|i| post("comment", i)).collect() })
    }
}

impl CertProvider for Flood {
    fn certificates(&self, domain: &str) -> Result<Vec<CertEntry>, ProviderError> {
        Ok((1..=12)
            .map(|m| CertEntry {
                id: Some(m),
                issuer: "CN=R3".into(),
                not_before: format!("2023-{m:02}-01T00:00:00"),
                not_after: format!("2024-{m:02}-01T00:00:00"),
                sans: vec![domain.to_string()],
            })
            .collect())
    }
}

// 6. Result caps under provider over-supply, live and after replay.
fn tool_caps() {
    let tmp = tempfile::tempdir().unwrap();
    let flood = Arc::new(Flood);
    let offline = Providers::offline();
    let providers = Providers {
        search: flood.clone(),
        x_twitter: flood.clone(),
        reddit: flood.clone(),
        certificates: flood,
        ..offline
    };
    let recorder = ToolRegistry::builder(Mode::Record)
        .providers(providers)
        .fixtures(FixtureStore::new(tmp.path()))
        .rate_limiter(RateLimiter::unlimited())
        .build()
        .unwrap();
    let replayer = ToolRegistry::replay(FixtureStore::new(tmp.path()));
    for registry in [&recorder, &replayer] {
        let mut pages = PageStore::new();
        let mut call = |tool: ToolKind, input: &str| registry.dispatch(tool.name(), input, &mut pages).unwrap().body;
        let search = call(ToolKind::GetSearchResult, "flood query");
        assert_eq!(search.matches("URL: https://r").count(), 10);
        let x = call(ToolKind::SearchXTwitter, "flood query");
        assert_eq!(x.lines().filter(|l| !l.trim().is_empty()).count(), 10, "{x}");
        let reddit = call(ToolKind::SearchReddit, "flood query");
        assert_eq!(reddit.matches("post body").count(), 5, "{reddit}");
        assert_eq!(reddit.matches("comment body").count(), 5, "{reddit}");
        let certs = call(ToolKind::RetrieveCertificate, "flood.example");
        assert_eq!(certs.matches("issuer: ").count(), 5);
    }
    assert_eq!(replayer.live_calls(), 0);
}

fn random_rows() -> impl Strategy<Value = Vec<ScoredEntry>> {
    let prediction = prop_oneof![
        Just(Prediction::Legitimate),
        Just(Prediction::Failure),
        prop::sample::select(vec![
            ScamType::OnlineShopping,
            ScamType::TechnicalSupport,
            ScamType::Cryptocurrency,
            ScamType::Investment,
            ScamType::Other,
        ])
        .prop_map(Prediction::Scam),
    ];
    let entry = (any::<bool>(), prop::sample::select(ScamType::LABELLED.to_vec()), prop::sample::select(vec![Language::En, Language::De, Language::Ja]), prediction);
    prop::collection::vec(entry, 0..=100).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (scam, kind, language, prediction))| ScoredEntry {
                url: format!("https://e{i}.example/"),
                label: if scam { Label::Scam } else { Label::Legitimate },
                scam_type: Some(kind),
                language,
                prediction,
            })
            .collect()
    })
}

// 7. Scoring agrees with a brute-force tally.
fn scoring_oracle() {
    let started = Instant::now();
    let mut runner = TestRunner::new(RunnerConfig { cases: 200, failure_persistence: None, ..RunnerConfig::default() });
    runner
        .run(&random_rows(), |rows| {
            let mut tally = [0u64; 4];
            for r in &rows {
                let flagged = matches!(r.prediction, Prediction::Scam(_));
                let failed = r.prediction == Prediction::Failure;
                let idx = match r.label {
                    Label::Scam if flagged => 0,
                    Label::Scam => 1,
                    Label::Legitimate if flagged || failed => 3,
                    Label::Legitimate => 2,
                };
                tally[idx] += 1;
            }
            prop_assert_eq!(score_binary(&rows), ConfusionCounts::new(tally[0], tally[1], tally[2], tally[3]));

            let report = score_multiclass(&rows, Slice::default());
            let labelled: BTreeSet<ScamType> =
                rows.iter().filter(|r| r.label == Label::Scam).filter_map(|r| r.scam_type).collect();
            prop_assert_eq!(report.classes.len(), labelled.len());
            let (mut rs, mut ps, mut fs_) = (Vec::new(), Vec::new(), Vec::new());
            for class in &labelled {
                let actual = rows.iter().filter(|r| r.label == Label::Scam && r.scam_type == Some(*class)).count() as f64;
                let predicted = rows.iter().filter(|r| r.prediction == Prediction::Scam(*class)).count() as f64;
                let both = rows
                    .iter()
                    .filter(|r| r.label == Label::Scam && r.scam_type == Some(*class) && r.prediction == Prediction::Scam(*class))
                    .count() as f64;
                let recall = both / actual;
                let precision = if predicted > 0.0 { both / predicted } else { 0.0 };
                let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
                rs.push(recall);
                ps.push(precision);
                fs_.push(f1);
            }
            let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            for (got, want) in [(report.macro_recall, mean(&rs)), (report.macro_precision, mean(&ps)), (report.macro_f1, mean(&fs_))] {
                match (got, want) {
                    (Some(g), Some(w)) => prop_assert!((g - w).abs() < 1e-12),
                    (g, w) => prop_assert_eq!(g, w),
                }
            }
            Ok(())
        })
        .unwrap();
    assert!(started.elapsed() < Duration::from_secs(30));
}

fn page_record(url: &str, outcome: Result<u16, FetchErrorKind>) -> FixtureRecord {
    let payload = match outcome {
        Ok(status) => Ok(Payload::Page(FetchedPage {
            requested_url: url.into(),
            final_url: url.into(),
            status,
            html: "<p>x</p>".into(),
        })),
        Err(kind) => Err(ToolError::Fetch(FetchError::new(kind, "no answer"))),
    };
    FixtureRecord::new(ToolKind::AccessUrl, url, DateTime::<Utc>::UNIX_EPOCH, Duration::ZERO, payload)
}

// 8. Sampling, toplist boundary and accessibility.
fn dataset_pipeline() {
    let mut pool = Vec::new();
    for (i, kind) in ScamType::LABELLED.iter().enumerate() {
        for label in [Label::Scam, Label::Legitimate] {
            for j in 0..(5 + i) {
                pool.push(DatasetEntry::new(format!("https://{kind}-{label:?}-{j}.example/").to_lowercase(), label, Some(*kind), Language::En));
            }
        }
    }
    let a = dataset::balanced_sample(&pool, 4, 11).unwrap();
    assert_eq!(a, dataset::balanced_sample(&pool, 4, 11).unwrap());
    let mut per_cell: BTreeMap<String, usize> = BTreeMap::new();
    for e in &a {
        *per_cell.entry(e.cell().to_string()).or_default() += 1;
    }
    assert_eq!(per_cell.len(), 8);
    assert!(per_cell.values().all(|&n| n == 4), "{per_cell:?}");

    let toplist = TopList::new((1..=100_001u32).map(|r| (r, format!("site{r}.example")))).unwrap();
    let entries = vec![
        DatasetEntry::new("https://www.site100000.example/", Label::Legitimate, Some(ScamType::OnlineShopping), Language::En),
        DatasetEntry::new("https://site100001.example/", Label::Legitimate, Some(ScamType::OnlineShopping), Language::En),
    ];
    let filtered = dataset::filter_toplist(entries, &toplist, dataset::DEFAULT_TOPLIST_CUTOFF);
    assert_eq!(filtered[0].excluded_reason.as_deref(), Some("toplist"));
    assert!(filtered[1].excluded_reason.is_none());

    let tmp = tempfile::tempdir().unwrap();
    let store = FixtureStore::new(tmp.path());
    let cases: [(&str, Result<u16, FetchErrorKind>); 6] = [
        ("https://ok.example/", Ok(200)),
        ("https://moved.example/", Ok(301)),
        ("https://forbidden.example/", Ok(403)),
        ("https://gone.example/", Ok(404)),
        ("https://broken.example/", Ok(500)),
        ("https://slow.example/", Err(FetchErrorKind::Timeout)),
    ];
    let mut entries = Vec::new();
    for (url, outcome) in cases {
        store.save(&page_record(url, outcome)).unwrap();
        entries.push(DatasetEntry::new(url, Label::Scam, Some(ScamType::Investment), Language::En));
    }
    let checked = dataset::check_accessibility(entries, &FixturePageFetcher::new(store), &RateLimiter::unlimited(), 3);
    let kept: Vec<&str> = checked.iter().filter(|e| !e.is_excluded()).map(|e| e.url.as_str()).collect();
    assert_eq!(kept, ["https://ok.example/"]);
    assert_eq!(checked[5].excluded_reason.as_deref(), Some("inaccessible:timeout"));
}

// 9. Reason strings map to the expected information types.
fn reason_suite() {
    use InfoType::*;
    let suite: [(&str, &[InfoType]); 30] = [
        ("suspicious due to recent domain registration", &[DomainName]),
        ("The WHOIS record shows the registrant is hidden behind a privacy service.", &[DomainName]),
        ("Only an SSL certificate issued last week protects the site.", &[CertificateInformation]),
        ("The site does not use HTTPS.", &[CertificateInformation]),
        ("No TLS configured.", &[CertificateInformation]),
        ("It lists no company information and no physical address.", &[CompanyInformation]),
        ("The seller appears to be one of several non-existent companies.", &[CompanyInformation]),
        ("The only way to reach them is a free email account.", &[ContactInformation]),
        ("A toll-free number is displayed prominently.", &[ContactInformation]),
        ("There is no phone number or contact information on the page.", &[ContactInformation]),
        ("Payment is accepted only by bank transfer.", &[PaymentMethod]),
        ("Visitors are asked to send Bitcoin to a wallet address.", &[PaymentMethod]),
        ("Nothing stands out on this page.", &[]),
        ("The privacy policy is missing.", &[PrivacyInformation]),
        ("It has no privacy notation at all.", &[PrivacyInformation]),
        ("Countdown timers create urgency.", &[SocialEngineering]),
        ("The offer is unrealistic and designed to lure victims.", &[SocialEngineering]),
        ("This is a common scam tactic with psychological pressure.", &[SocialEngineering]),
        ("Buyers must decide within a short timeframe.", &[SocialEngineering]),
        ("Products are sold at an abnormal price with huge discounts.", &[UnusualPrice]),
        ("The platform promises guaranteed returns and a high return on every deposit.", &[UnusualPrice]),
        ("Free shipping and free items for every visitor.", &[UnusualPrice]),
        ("Users on Reddit and Twitter complain about missing orders.", &[UserReview]),
        ("Several negative reviews describe it as fraud.", &[UserReview]),
        ("A forum discussion warns about the shop.", &[UserReview]),
        ("The site has a low trust score and many reports.", &[UserReview]),
        ("The copyright notice is outdated and there is no recent update.", &[WebsiteStatus]),
        (
            "The domain is new, prices show unrealistic discounts and payment is by Bitcoin only.",
            &[DomainName, PaymentMethod, SocialEngineering, UnusualPrice],
        ),
        (
            "The WHOIS data is hidden, the HTTPS certificate is new and user feedback on social media is negative.",
            &[CertificateInformation, DomainName, UserReview],
        ),
        ("Legitimate store with clear company information and an up-to-date catalog.", &[CompanyInformation, WebsiteStatus]),
    ];
    for (reason, want) in suite {
        let got = categorize_reason(reason).categories;
        let want: BTreeSet<InfoType> = want.iter().copied().collect();
        assert_eq!(got, want, "{reason}");
    }
}

fn ledger_session(i: u64, prompt: u64, completion: u64, wall: u64, llm: u64) -> AnalysisSession {
    let mut s = AnalysisSession::failed(&format!("https://c{i}.example/"), "m", RunStrategy::React, "synthetic");
    s.token_ledger = TokenLedger { prompt_tokens: prompt, completion_tokens: completion };
    s.wall_time_ms = wall;
    s.llm_time_ms = llm;
    s.tool_time_ms = wall - llm;
    s
}

// 10. Cost arithmetic and time shares.
fn cost_report() {
    let pricing = Pricing::new(Decimal::new(3, 2), Decimal::new(6, 2));
    let sessions = [ledger_session(0, 1_234, 567, 1_000, 500), ledger_session(1, 10_000, 250, 3_000, 2_000), ledger_session(2, 1, 1, 1_000, 0)];
    let report = eval::cost_report(&sessions, &pricing);
    // 11235 prompt tokens at 0.03/1k plus 818 completion tokens at 0.06/1k.
    assert_eq!(report.prompt_tokens, 11_235);
    assert_eq!(report.completion_tokens, 818);
    assert_eq!(report.total_cost, Decimal::new(33_705, 5) + Decimal::new(4_908, 5));
    assert_eq!(report.total_cost, Decimal::new(38_613, 5));
    assert_eq!(report.per_url_cost, Some(Decimal::new(12_871, 5)));

    let batch: Vec<AnalysisSession> = (0..40u64)
        .map(|i| {
            let wall = 20_000 + 250 * i;
            ledger_session(i, 2_000, 200, wall, wall * 792 / 1000)
        })
        .collect();
    let report = eval::cost_report(&batch, &pricing);
    assert!(close(report.llm_time_fraction, 0.792, 0.001), "{:?}", report.llm_time_fraction);
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn()); 10] = [
        ("binary metrics reproduce the reference rows within 0.0005", table_rows),
        ("1000 adversarial scripted runs never exceed ten steps", budget_bound),
        ("demo replay is byte-identical and matches recorded observations", replay_determinism),
        ("demo batch and eval give accuracy 1.0 and macro-F1 1.0", demo_accuracy),
        ("HTML extraction suite matches expected output", extraction_suite),
        ("tool result caps hold under over-supply", tool_caps),
        ("200 randomized scoring oracles agree", scoring_oracle),
        ("dataset sampling, toplist boundary and accessibility", dataset_pipeline),
        ("30-string reason categorization suite", reason_suite),
        ("cost totals exact and LLM share 0.792", cost_report),
    ];
    let default_hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut report = String::from("\n");
    let mut failures = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check));
        let elapsed = started.elapsed();
        let status = if outcome.is_ok() { "PASS" } else { "FAIL" };
        let detail = match &outcome {
            Err(e) => e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .map(|m| format!(": {}", m.lines().next().unwrap_or_default()))
                .unwrap_or_default(),
            Ok(()) => String::new(),
        };
        report.push_str(&format!("criterion {:>2} {status} ({:.2}s) {name}{detail}\n", i + 1, elapsed.as_secs_f64()));
        if outcome.is_err() {
            failures.push(i + 1);
        }
    }
    panic::set_hook(default_hook);
    // Written past the test harness's capture so the lines always show.
    let _ = std::io::stderr().write_all(report.as_bytes());
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
