//! A lead agent splits a compound request into subtasks, runs specialist
//! agents in parallel and synthesizes one report.

use std::path::Path;

use verticore::orchestrator::agent_for;
use verticore::{Config, PersonaTag, Runtime};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Provide insights on financial performance, customer feedback, and market trends".into());
    let mut config = Config::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/config.json"))?;
    config.preload = true;
    let rt = Runtime::from_config(&config)?;

    for s in rt.plan(&text)? {
        println!("[{}] {:<40} -> {}", s.index, s.description, agent_for(s.capability));
    }

    let response = rt.run_orchestrated(&text, "analyst", PersonaTag::Professional)?;
    println!("\n{}\n", response.text);
    let p = &response.provenance;
    println!("documents: {}", p.documents.len());
    println!("triples:   {}", p.triples.len());
    println!("web:       {}", p.web_results.len());
    println!("risk:      {:?} ({:.2})", p.risk.verdict, p.risk.score);
    Ok(())
}
