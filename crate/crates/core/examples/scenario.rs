//! Runs a scripted scenario and prints its step table.
//!
//! `cargo run --example scenario -- expert-review`

use std::path::Path;

use verticore::scenario::{self, ScenarioScript};
use verticore::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = fixtures.join("scenarios");
    let Some(name) = std::env::args().nth(1) else {
        println!("scenarios: {}", scenario::list(&dir)?.join(", "));
        return Ok(());
    };
    let config = Config::load(&fixtures.join("config.json"))?;
    let (script, path) = ScenarioScript::find(&dir, &name)?;
    let report = verticore::cli::run_scenario_with(config, &script, &path, None)?;
    println!("{report}");
    Ok(())
}
