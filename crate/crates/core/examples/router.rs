//! Routed retrieval: the query is classified against domain centroids and
//! answered from the winning domain's store only.
//!
//! `cargo run --example router -- "Summarize recent IP law precedents in technology"`

use std::path::Path;

use verticore::{Config, PersonaTag, Runtime};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Summarize recent IP law precedents in technology".into());
    let mut config = Config::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/config.json"))?;
    config.preload = true;
    let rt = Runtime::from_config(&config)?;

    let decision = rt.classify_intent(&text)?;
    println!("chosen: {} ({:.3})", decision.chosen_domain, decision.confidence);
    for alt in &decision.alternatives {
        println!("  {:<12} {:.3}", alt.domain, alt.score);
    }

    let response = rt.answer_routed(&text, "demo", PersonaTag::Professional)?;
    println!("\n{}\n", response.text);
    for d in &response.provenance.documents {
        println!("source {}/{} ({:.3})", d.domain, d.doc_id, d.score);
    }
    Ok(())
}
