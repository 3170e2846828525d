use std::collections::BTreeSet;

use proptest::prelude::*;
use rust_decimal::Decimal;
use scam_agent::dataset::{DatasetEntry, Label, Language};
use scam_agent::engine::{AnalysisSession, Strategy as RunStrategy, Termination, TokenLedger};
use scam_agent::eval::*;
use scam_agent::verdict::{ScamType, SynonymTable, Verdict};

fn session(url: &str, verdict: Option<(bool, Option<&str>)>) -> AnalysisSession {
    let mut s = AnalysisSession::failed(url, "m", RunStrategy::React, "x");
    s.error = None;
    s.termination = if verdict.is_some() { Termination::FinalAnswer } else { Termination::ParseFailure };
    s.verdict = verdict.map(|(result, kind)| Verdict {
        result,
        scam_type: kind.map(str::to_string),
        reason: "r".into(),
        warnings: vec![],
    });
    s
}

/// 800 scam + 800 legitimate English entries with 29 missed scams and 16
/// flagged legitimate sites.
#[test]
fn reconstructed_english_counts() {
    let mut dataset = Vec::new();
    let mut sessions = Vec::new();
    for i in 0..800 {
        let kind = ScamType::LABELLED[i % 4];
        let url = format!("https://s{i}.example/");
        dataset.push(DatasetEntry::new(&url, Label::Scam, Some(kind), Language::En));
        sessions.push(session(&url, Some((i >= 29, Some(kind.display_name())))));
        let url = format!("https://l{i}.example/");
        dataset.push(DatasetEntry::new(&url, Label::Legitimate, Some(kind), Language::En));
        sessions.push(session(&url, Some((i < 16, Some("fake shopping site")))));
    }
    let rows = align(&dataset, &sessions, &SynonymTable::default()).unwrap().rows;
    let counts = score_binary(&rows);
    assert_eq!(counts, ConfusionCounts::new(771, 29, 784, 16));
    let m = binary_metrics(&counts);
    for (got, want) in [(m.accuracy, 0.972), (m.tpr_recall, 0.964), (m.tnr, 0.980), (m.precision, 0.980), (m.f1, 0.972)] {
        assert!((got.unwrap() - want).abs() <= 0.0005 + 1e-12, "{got:?} vs {want}");
    }
}

#[test]
fn llm_share_of_wall_time() {
    let sessions: Vec<AnalysisSession> = (0..50u64)
        .map(|i| {
            let mut s = session(&format!("https://x{i}.example/"), None);
            s.wall_time_ms = 10_000 + i * 100;
            s.llm_time_ms = s.wall_time_ms * 792 / 1000;
            s.tool_time_ms = s.wall_time_ms - s.llm_time_ms;
            s.token_ledger = TokenLedger { prompt_tokens: 1_000, completion_tokens: 100 };
            s
        })
        .collect();
    let report = cost_report(&sessions, &Pricing::new(Decimal::new(3, 2), Decimal::new(6, 2)));
    assert!((report.llm_time_fraction.unwrap() - 0.792).abs() <= 0.001);
    assert_eq!(report.total_cost, Decimal::new(180, 2));
    assert_eq!(report.per_url_cost, Some(Decimal::new(36, 3)));
}

fn label_type() -> impl Strategy<Value = (bool, ScamType)> {
    (any::<bool>(), prop::sample::select(ScamType::LABELLED.to_vec()))
}

fn prediction() -> impl Strategy<Value = Prediction> {
    prop_oneof![
        Just(Prediction::Legitimate),
        Just(Prediction::Failure),
        prop::sample::select(vec![
            ScamType::OnlineShopping,
            ScamType::TechnicalSupport,
            ScamType::Cryptocurrency,
            ScamType::Investment,
            ScamType::Other
        ])
        .prop_map(Prediction::Scam),
    ]
}

fn rows() -> impl Strategy<Value = Vec<ScoredEntry>> {
    prop::collection::vec((label_type(), prediction()), 0..100).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, ((scam, kind), prediction))| ScoredEntry {
                url: format!("https://e{i}.example/"),
                label: if scam { Label::Scam } else { Label::Legitimate },
                scam_type: Some(kind),
                language: Language::En,
                prediction,
            })
            .collect()
    })
}

/// Per-entry tally written without the library's helpers.
fn brute_binary(rows: &[ScoredEntry]) -> (u64, u64, u64, u64) {
    let (mut tp, mut fn_, mut tn, mut fp) = (0, 0, 0, 0);
    for r in rows {
        let flagged = matches!(r.prediction, Prediction::Scam(_));
        let failed = r.prediction == Prediction::Failure;
        if r.label == Label::Scam {
            if flagged { tp += 1 } else { fn_ += 1 }
        } else if flagged || failed {
            fp += 1
        } else {
            tn += 1
        }
    }
    (tp, fn_, tn, fp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scoring_matches_brute_force(rows in rows()) {
        let (tp, fn_, tn, fp) = brute_binary(&rows);
        prop_assert_eq!(score_binary(&rows), ConfusionCounts::new(tp, fn_, tn, fp));

        let m = binary_metrics(&ConfusionCounts::new(tp, fn_, tn, fp));
        let n = tp + fn_ + tn + fp;
        if n > 0 {
            prop_assert!((m.accuracy.unwrap() - (tp + tn) as f64 / n as f64).abs() < 1e-12);
        }
        if tp + fn_ > 0 {
            prop_assert!((m.tpr_recall.unwrap() + fn_ as f64 / (tp + fn_) as f64 - 1.0).abs() < 1e-12);
        }
        if let (Some(p), Some(r), Some(f)) = (m.precision, m.tpr_recall, m.f1) {
            prop_assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-12);
        }

        let report = score_multiclass(&rows, Slice::default());
        let classes: BTreeSet<ScamType> =
            rows.iter().filter(|r| r.label == Label::Scam).map(|r| r.scam_type.unwrap()).collect();
        prop_assert_eq!(report.classes.len(), classes.len());
        let mut sums = (0.0, 0.0, 0.0);
        for c in &classes {
            let mut actual = 0u64;
            let mut predicted = 0u64;
            let mut both = 0u64;
            for r in &rows {
                let a = r.label == Label::Scam && r.scam_type == Some(*c);
                let p = r.prediction == Prediction::Scam(*c);
                actual += a as u64;
                predicted += p as u64;
                both += (a && p) as u64;
            }
            let recall = both as f64 / actual as f64;
            let precision = if predicted == 0 { 0.0 } else { both as f64 / predicted as f64 };
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            let got = report.classes.iter().find(|x| x.scam_type == *c).unwrap();
            prop_assert_eq!((got.actual, got.predicted, got.correct), (actual, predicted, both));
            prop_assert!((got.recall.unwrap() - recall).abs() < 1e-12);
            sums = (sums.0 + recall, sums.1 + precision, sums.2 + f1);
        }
        if classes.is_empty() {
            prop_assert_eq!(report.macro_f1, None);
        } else {
            let k = classes.len() as f64;
            prop_assert!((report.macro_recall.unwrap() - sums.0 / k).abs() < 1e-12);
            prop_assert!((report.macro_precision.unwrap() - sums.1 / k).abs() < 1e-12);
            prop_assert!((report.macro_f1.unwrap() - sums.2 / k).abs() < 1e-12);
            let mean = report.classes.iter().map(|c| c.f1.unwrap_or(0.0)).sum::<f64>() / k;
            prop_assert!((report.macro_f1.unwrap() - mean).abs() < 1e-12);
        }
    }
}
