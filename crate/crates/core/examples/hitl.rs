//! Human review: a draft waits in the queue, an expert modifies it, and the
//! next draft for the same question is shown that feedback.

use std::path::Path;

use verticore::hitl::ReviewStatus;
use verticore::{Config, PersonaTag, Runtime};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = Config::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/config.json"))?;
    config.preload = true;
    let rt = Runtime::from_config(&config)?;
    let question = "What dose of metformin should I take for type 2 diabetes?";

    let item = rt.submit_for_review(question, "clinic", "healthcare", PersonaTag::Professional)?;
    println!("{} pending; draft:\n  {}\n", item.review_id, item.draft);

    rt.decide(
        &item.review_id,
        ReviewStatus::Modified,
        Some("dosing is patient specific".into()),
        Some("Dosage depends on your history; please confirm it with your physician.".into()),
    )?;
    let delivered = rt.finalize(&item.review_id, PersonaTag::Empathetic)?;
    println!("delivered:\n  {}\n", delivered.text);

    let again = rt.submit_for_review(question, "clinic", "healthcare", PersonaTag::Professional)?;
    let feedback = again
        .decision_trail
        .iter()
        .find(|t| t.stage == "feedback")
        .map(|t| t.detail.as_str());
    println!(
        "{} drafted with feedback from {}",
        again.review_id,
        feedback.unwrap_or("none")
    );
    println!("pending: {}", rt.list_pending().len());
    Ok(())
}
