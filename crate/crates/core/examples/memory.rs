//! Session memory: recency by session and similarity recall across sessions.

use verticore::memory::{MemoryKind, MemoryStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut memory = MemoryStore::new();
    memory.append(
        "alice",
        MemoryKind::Interaction,
        "asked about the refund for a broken blender",
    )?;
    memory.append("alice", MemoryKind::Interaction, "asked where the tracking link is")?;
    memory.append("bob", MemoryKind::Interaction, "asked about quarterly revenue growth")?;
    memory.append("bob", MemoryKind::Interaction, "asked about refund policy for services")?;

    println!("alice, most recent first:");
    for r in memory.recall_session("alice", 5).iter().rev() {
        println!("  {} {}", r.record_id, r.content);
    }

    println!("\nrelevant to \"refund\":");
    for (r, score) in memory.recall_relevant("refund", 3, None)? {
        println!("  {score:.3} {} [{}] {}", r.record_id, r.session_id, r.content);
    }
    Ok(())
}
