//! Regenerates the offline demo corpus.
//!
//! Usage: cargo run -p scam-agent-cli --example gen_demo [-- OUT_DIR]

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demo"));
    let summary = scam_agent_cli::demo::write_corpus(&dir)?;
    println!(
        "{} sites, {} fixtures, {} candidates ({} retained) written to {}",
        summary.sites,
        summary.fixtures,
        summary.candidates,
        summary.retained,
        dir.display()
    );
    Ok(())
}
