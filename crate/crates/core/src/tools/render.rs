//! Observation bodies rendered from provider payloads, with result caps.

use std::cmp::Reverse;
use std::fmt::Write;
use std::sync::LazyLock;

use chrono::{DateTime, NaiveDateTime, Utc};
use regex::Regex;

use super::providers::{CertEntry, DnsAnswer, DnsRecordType, DnsReport, FetchedPage, Payload, SearchHit, SocialPost, SocialResults, WhoisResponse};

pub const SEARCH_LIMIT: usize = 10;
pub const X_POST_LIMIT: usize = 10;
pub const REDDIT_POST_LIMIT: usize = 5;
pub const REDDIT_COMMENT_LIMIT: usize = 5;
pub const CERTIFICATE_LIMIT: usize = 5;

static HANDLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|[^A-Za-z0-9_.@])@[A-Za-z0-9_]{1,20}").unwrap());

/// Replaces `@handle` mentions with `@user`. E-mail addresses are kept.
pub fn redact_handles(text: &str) -> String {
    HANDLE.replace_all(text, "${1}@user").into_owned()
}

pub fn render_payload(payload: &Payload) -> String {
    match payload {
        Payload::Page(page) => render_page(page),
        Payload::Search { hits } => render_search(hits),
        Payload::XPosts { posts } => render_x(posts),
        Payload::Reddit(results) => render_reddit(results),
        Payload::Whois(w) => render_whois(w),
        Payload::Dns(report) => render_dns(report),
        Payload::Certificates { entries } => render_certificates(entries),
    }
}

fn render_page(page: &FetchedPage) -> String {
    format!(
        "status: {}\nfinal URL: {}\nThe page content is now available to Extract Text and Extract Hyperlink.",
        page.status, page.final_url
    )
}

fn render_search(hits: &[SearchHit]) -> String {
    if hits.is_empty() {
        return "No results found.".to_string();
    }
    let mut out = String::new();
    for (i, hit) in hits.iter().take(SEARCH_LIMIT).enumerate() {
        let _ = writeln!(out, "{}. URL: {}", i + 1, hit.url);
        if let Some(title) = hit.title.as_deref().filter(|t| !t.trim().is_empty()) {
            let _ = writeln!(out, "Title: {}", one_line(title));
        }
        let _ = writeln!(out, "Summary: {}", one_line(&hit.summary));
    }
    out.trim_end().to_string()
}

fn post_time(ts: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(ts.trim()).ok().map(|t| t.with_timezone(&Utc))
}

/// Newest first; posts with unparseable timestamps go last, keeping
/// provider order among equals.
fn render_x(posts: &[SocialPost]) -> String {
    if posts.is_empty() {
        return "No posts found.".to_string();
    }
    let mut sorted: Vec<&SocialPost> = posts.iter().collect();
    sorted.sort_by_key(|p| Reverse(post_time(&p.timestamp)));
    let mut out = String::new();
    for (i, post) in sorted.into_iter().take(X_POST_LIMIT).enumerate() {
        let _ = writeln!(out, "{}. [{}] {}", i + 1, post.timestamp, redact_handles(&one_line(&post.text)));
    }
    out.trim_end().to_string()
}

fn render_reddit(results: &SocialResults) -> String {
    if results.posts.is_empty() && results.comments.is_empty() {
        return "No posts found.".to_string();
    }
    let mut out = String::from("Posts:\n");
    if results.posts.is_empty() {
        out.push_str("(none)\n");
    }
    for (i, post) in results.posts.iter().take(REDDIT_POST_LIMIT).enumerate() {
        let title = post.title.as_deref().map(one_line).unwrap_or_default();
        let text = redact_handles(&one_line(&post.text));
        let _ = match (title.is_empty(), text.is_empty()) {
            (false, false) => writeln!(out, "{}. [{}] {}: {}", i + 1, post.timestamp, redact_handles(&title), text),
            (false, true) => writeln!(out, "{}. [{}] {}", i + 1, post.timestamp, redact_handles(&title)),
            _ => writeln!(out, "{}. [{}] {}", i + 1, post.timestamp, text),
        };
    }
    out.push_str("Comments:\n");
    if results.comments.is_empty() {
        out.push_str("(none)\n");
    }
    for (i, comment) in results.comments.iter().take(REDDIT_COMMENT_LIMIT).enumerate() {
        let _ = writeln!(out, "{}. [{}] {}", i + 1, comment.timestamp, redact_handles(&one_line(&comment.text)));
    }
    out.trim_end().to_string()
}

fn render_whois(w: &WhoisResponse) -> String {
    format!("WHOIS server: {}\n\n{}", w.server, w.text.trim())
}

fn render_dns(report: &DnsReport) -> String {
    let mut out = format!("resolver: {}\n", report.resolver);
    for record_type in DnsRecordType::ALL {
        let _ = writeln!(out, "[{record_type}]");
        let answer = report.sections.iter().find(|s| s.record_type == record_type).map(|s| &s.answer);
        match answer {
            Some(DnsAnswer::Records(records)) if !records.is_empty() => {
                for r in records {
                    let _ = writeln!(out, "{r}");
                }
            }
            Some(DnsAnswer::NxDomain) => out.push_str("NXDOMAIN\n"),
            Some(DnsAnswer::Failed(e)) => {
                let _ = writeln!(out, "query failed: {e}");
            }
            _ => out.push_str("no records\n"),
        }
    }
    out.trim_end().to_string()
}

fn cert_time(ts: &str) -> Option<NaiveDateTime> {
    let ts = ts.trim();
    DateTime::parse_from_rfc3339(ts)
        .map(|t| t.naive_utc())
        .ok()
        .or_else(|| NaiveDateTime::parse_from_str(ts, "%Y-%m-%dT%H:%M:%S%.f").ok())
        .or_else(|| NaiveDateTime::parse_from_str(ts, "%Y-%m-%d %H:%M:%S%.f").ok())
        .or_else(|| chrono::NaiveDate::parse_from_str(ts, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)))
}

fn render_certificates(entries: &[CertEntry]) -> String {
    if entries.is_empty() {
        return "no certificates found".to_string();
    }
    let mut sorted: Vec<&CertEntry> = entries.iter().collect();
    sorted.sort_by_key(|c| Reverse(cert_time(&c.not_before)));
    let mut out = String::new();
    for (i, cert) in sorted.into_iter().take(CERTIFICATE_LIMIT).enumerate() {
        let _ = writeln!(out, "{}. issuer: {}", i + 1, one_line(&cert.issuer));
        let _ = writeln!(out, "not before: {}", cert.not_before);
        let _ = writeln!(out, "not after: {}", cert.not_after);
        let _ = writeln!(out, "SANs: {}", cert.sans.join(", "));
    }
    out.trim_end().to_string()
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn handles_are_redacted_but_emails_kept() {
        assert_eq!(redact_handles("@alice said hi to @bob_2"), "@user said hi to @user");
        assert_eq!(redact_handles("mail help@shop.example"), "mail help@shop.example");
    }

    #[test]
    fn unparseable_post_times_sort_last() {
        let posts = vec![
            SocialPost { timestamp: "garbage".into(), title: None, text: "c".into() },
            SocialPost { timestamp: "2024-01-01T00:00:00Z".into(), title: None, text: "a".into() },
            SocialPost { timestamp: "2024-03-01T00:00:00+09:00".into(), title: None, text: "b".into() },
        ];
        assert_eq!(
            render_x(&posts),
            "1. [2024-03-01T00:00:00+09:00] b\n2. [2024-01-01T00:00:00Z] a\n3. [garbage] c"
        );
    }

    #[test]
    fn dns_sections_are_always_six() {
        let report = DnsReport { resolver: "8.8.8.8:53".into(), sections: vec![] };
        let body = render_dns(&report);
        for t in ["[A]", "[AAAA]", "[NS]", "[SOA]", "[TXT]", "[MX]"] {
            assert_eq!(body.matches(t).count(), 1, "{t}");
        }
    }

    #[test]
    fn crt_sh_timestamp_formats_parse() {
        assert!(cert_time("2024-05-01T12:00:00").is_some());
        assert!(cert_time("2024-05-01T12:00:00.123").is_some());
        assert!(cert_time("2024-05-01").is_some());
    }
}
