//! The static chain: refine the query, retrieve, answer. No routing and no
//! branching, for comparison with the agent patterns.

use std::path::Path;

use verticore::{Config, Runtime};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = Config::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/config.json"))?;
    config.preload = true;
    let rt = Runtime::from_config(&config)?;
    let response = rt.run_workflow_chain("Where is my order and the tracking link?", "chain")?;
    for step in &response.provenance.decision_trail {
        let detail = step.detail.lines().next().unwrap_or("");
        println!("{:<22} {detail}", step.stage);
    }
    println!("\n{}", response.text);
    Ok(())
}
