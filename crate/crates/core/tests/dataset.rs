use std::collections::{BTreeMap, HashSet};
use std::time::Duration;

use proptest::prelude::*;
use scam_agent::dataset::*;
use scam_agent::testutil::{StubResponse, StubServer};
use scam_agent::tools::live::HttpPageFetcher;
use scam_agent::tools::RateLimiter;
use scam_agent::verdict::ScamType;
use scam_agent::DEFAULT_USER_AGENT;

/// Six cells per label: four scam types in English, shopping in German and
/// Japanese.
fn study_cells() -> Vec<(Option<ScamType>, Language)> {
    let mut cells: Vec<_> = ScamType::LABELLED.iter().map(|t| (Some(*t), Language::En)).collect();
    cells.push((Some(ScamType::OnlineShopping), Language::De));
    cells.push((Some(ScamType::OnlineShopping), Language::Ja));
    cells
}

fn pool(per_cell: usize) -> Vec<DatasetEntry> {
    let mut out = Vec::new();
    for label in [Label::Scam, Label::Legitimate] {
        for (kind, lang) in study_cells() {
            for i in 0..per_cell {
                let host = format!("{}-{}-{}-{i}.example", label, kind.unwrap().as_str(), lang);
                out.push(DatasetEntry::new(format!("https://{host}/"), label, kind, lang));
            }
        }
    }
    out
}

#[test]
fn two_hundred_per_cell_gives_twelve_hundred_each() {
    let sample = balanced_sample(&pool(260), 200, 42).unwrap();
    let scam = sample.iter().filter(|e| e.label == Label::Scam).count();
    let legit = sample.iter().filter(|e| e.label == Label::Legitimate).count();
    assert_eq!((scam, legit), (1200, 1200));
    let urls: HashSet<&str> = sample.iter().map(|e| e.url.as_str()).collect();
    assert_eq!(urls.len(), 2400);
}

#[test]
fn seeds_change_the_draw() {
    let entries = pool(50);
    let a = balanced_sample(&entries, 10, 1).unwrap();
    assert_eq!(a, balanced_sample(&entries, 10, 1).unwrap());
    assert_ne!(a, balanced_sample(&entries, 10, 2).unwrap());
}

#[test]
fn timeout_is_reported_separately() {
    let server = StubServer::new(|req| match req.path.as_str() {
        "/slow" => StubResponse::new(200, "late").delayed(Duration::from_secs(2)),
        "/forbidden" => StubResponse::new(403, "no"),
        _ => StubResponse::new(200, "<p>ok</p>"),
    });
    let entries = ["/", "/slow", "/forbidden"]
        .iter()
        .map(|p| DatasetEntry::new(server.url(p), Label::Scam, Some(ScamType::Investment), Language::En))
        .collect();
    let fetcher = HttpPageFetcher::new(DEFAULT_USER_AGENT, Duration::from_millis(300));
    let out = check_accessibility(entries, &fetcher, &RateLimiter::unlimited(), 2);
    let reasons: Vec<Option<&str>> = out.iter().map(|e| e.excluded_reason.as_deref()).collect();
    assert_eq!(reasons, vec![None, Some("inaccessible:timeout"), Some("inaccessible")]);
    assert!(server.requests().iter().all(|r| r.head.contains(DEFAULT_USER_AGENT)));
}

fn arb_entries() -> impl Strategy<Value = Vec<DatasetEntry>> {
    let kinds = prop_oneof![Just(ScamType::OnlineShopping), Just(ScamType::Investment), Just(ScamType::Cryptocurrency)];
    let langs = prop_oneof![Just(Language::En), Just(Language::Ja)];
    proptest::collection::vec((any::<bool>(), kinds, langs, proptest::option::weighted(0.2, Just("toplist"))), 1..80)
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (scam, kind, lang, excluded))| {
                    let label = if scam { Label::Scam } else { Label::Legitimate };
                    let mut e = DatasetEntry::new(format!("https://e{i}.example/"), label, Some(kind), lang);
                    e.excluded_reason = excluded.map(str::to_string);
                    e
                })
                .collect()
        })
}

proptest! {
    #[test]
    fn sampling_is_balanced_deterministic_and_honest(entries in arb_entries(), per_cell in 1usize..4, seed in any::<u64>()) {
        let mut retained: BTreeMap<Cell, usize> = BTreeMap::new();
        for e in &entries {
            let n = retained.entry(e.cell()).or_default();
            if e.excluded_reason.is_none() {
                *n += 1;
            }
        }
        let result = balanced_sample(&entries, per_cell, seed);
        let shortest = retained.values().min().copied().unwrap_or(0);
        if shortest < per_cell {
            prop_assert!(matches!(result, Err(DatasetError::InsufficientCell { .. })), "expected an insufficient cell error");
        } else {
            let sample = result.unwrap();
            prop_assert_eq!(&sample, &balanced_sample(&entries, per_cell, seed).unwrap());
            let mut counts: BTreeMap<Cell, usize> = BTreeMap::new();
            for e in &sample {
                prop_assert!(e.excluded_reason.is_none());
                prop_assert!(entries.contains(e));
                *counts.entry(e.cell()).or_default() += 1;
            }
            prop_assert_eq!(counts.len(), retained.len());
            prop_assert!(counts.values().all(|n| *n == per_cell));
            let urls: HashSet<&str> = sample.iter().map(|e| e.url.as_str()).collect();
            prop_assert_eq!(urls.len(), sample.len());
        }
    }

    #[test]
    fn stages_never_resurrect(entries in arb_entries()) {
        let toplist = TopList::from_csv("1,e0.example\n2,e3.example\n").unwrap();
        let before: Vec<bool> = entries.iter().map(DatasetEntry::is_excluded).collect();
        let filtered = filter_toplist(entries, &toplist, DEFAULT_TOPLIST_CUTOFF);
        let merged = merge_annotations(filtered.clone(), &[]).unwrap();
        for ((b, f), m) in before.iter().zip(&filtered).zip(&merged) {
            prop_assert!(!b || f.is_excluded());
            prop_assert_eq!(f.is_excluded(), m.is_excluded());
        }
    }
}
