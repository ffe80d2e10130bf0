//! The guardrail skill on its own: flagged spans, score and verdict, both
//! directly and through the skill registry.

use std::sync::Arc;

use verticore::skills::{Guardrail, SkillRegistry, ToxicityLexicon};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let guard = Arc::new(Guardrail::new(ToxicityLexicon::builtin(), 0.5));
    for text in [
        "Your refund was issued today.",
        "This is a scam.",
        "What a stupid scam, you idiot.",
        "Mail the records to ana@example.com please.",
    ] {
        let r = guard.assess_risk(text);
        println!("{:?} {:.2}  {text}", r.verdict, r.score);
        for s in &r.spans {
            println!("    {:?} {}..{} {:?}", s.category, s.start, s.end, s.matched);
        }
    }

    let registry = SkillRegistry::with_builtins(guard);
    for d in registry.find_by_capability("guardrail") {
        println!("\nskill {} v{}", d.name, d.version);
    }
    let out = registry.invoke("guardrail-risk", "1", "call me, idiot: bob@example.org")?;
    println!("{out}");
    Ok(())
}
