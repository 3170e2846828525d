//! Autonomous scam-website analysis.
//!
//! A chat-completion model drives a ReAct loop over nine information-gathering
//! tools (page access and extraction, web and social search, WHOIS, DNS and
//! certificate transparency) and emits a structured verdict. The crate also
//! carries the dataset pipeline and the evaluation harness used to score
//! verdicts against labelled URLs.

pub mod dataset;
pub mod engine;
pub mod eval;
pub mod gateway;
pub mod prompt;
pub mod tools;
pub mod verdict;

/// Version stamped into every serialized session, dataset and report.
pub const SCHEMA_VERSION: u32 = 1;

/// Desktop user agent used for page access and accessibility checks.
pub const DEFAULT_USER_AGENT: &str = "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/122.0.0 Safari/537.36";

#[doc(hidden)]
pub mod testutil;
