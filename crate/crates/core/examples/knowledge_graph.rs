//! Triple store pattern queries with `*` wildcards.

use verticore::tools::{Triple, TriplePattern, TripleStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut kg = TripleStore::new();
    for (s, p, o) in [
        ("acme", "supplies", "widgets"),
        ("acme", "located_in", "ohio"),
        ("globex", "supplies", "widgets"),
        ("globex", "risk", "port strike"),
        ("widgets", "used_by", "assembly"),
    ] {
        kg.add(Triple::new(s, p, o))?;
    }
    // Adding a duplicate is a no-op.
    kg.add(Triple::new("acme", "supplies", "widgets"))?;
    println!("{} triples", kg.len());

    for pattern in [("*", "supplies", "widgets"), ("acme", "*", "*"), ("*", "risk", "*")] {
        println!("\n{pattern:?}");
        for t in kg.query(&TriplePattern::new(pattern.0, pattern.1, pattern.2)) {
            println!("  {} {} {}", t.subject, t.predicate, t.object);
        }
    }
    Ok(())
}
