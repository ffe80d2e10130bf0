//! Every state change is an event. Replaying the log rebuilds the same
//! state, and a tampered log is refused.

use std::path::Path;

use verticore::service::{read_log, replay};
use verticore::{Config, PersonaTag, Runtime};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("verticore-replay-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let log = dir.join("events.jsonl");
    let _ = std::fs::remove_file(&log);

    let mut config = Config::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/config.json"))?;
    config.preload = true;
    config.paths.event_log = Some(log.clone());
    let live = {
        let rt = Runtime::from_config(&config)?;
        rt.answer_routed(
            "Summarize recent IP law precedents in technology",
            "r",
            PersonaTag::Professional,
        )?;
        rt.state_digest()
    };

    let records = read_log(&log)?;
    let mut kinds = std::collections::BTreeMap::new();
    for (_, r) in &records {
        *kinds.entry(r.kind.as_str()).or_insert(0) += 1;
    }
    println!("{} events: {kinds:?}", records.len());
    println!("live digest:     {live}");
    println!("replayed digest: {}", replay(&log)?.digest());

    let text = std::fs::read_to_string(&log)?;
    std::fs::write(&log, text.replacen("IP law", "tax law", 1))?;
    match replay(&log) {
        Err(e) => println!("tampered log: {e}"),
        Ok(_) => println!("tampered log unexpectedly accepted"),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
