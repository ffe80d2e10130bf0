//! The HTTP API on an ephemeral port, driven with the blocking client.

use std::path::Path;
use std::sync::Arc;

use verticore::service::{http, Client, DecisionRequest, QueryRequest};
use verticore::{Config, Runtime};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = Config::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/config.json"))?;
    config.preload = true;
    let runtime = Arc::new(Runtime::from_config(&config)?);

    let server = tokio::runtime::Runtime::new()?;
    let listener = server.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let handle = server.spawn(http::serve_with_shutdown(runtime, listener, async {
        let _ = stopped.await;
    }));
    println!("serving on {addr}");

    let client = Client::remote(&addr.to_string())?;
    println!("health: {:?}", client.health()?);

    let ask = |pattern: &str, text: &str| QueryRequest {
        session_id: "web".into(),
        text: text.into(),
        pattern: pattern.into(),
        persona: None,
        domain: None,
    };
    let routed = client.query(&ask("router", "Summarize recent IP law precedents in technology"))?;
    println!("{} {:?}", routed.query_id, routed.status);

    let pending = client.query(&ask("hitl", "How do I request a refund for a damaged item?"))?;
    let review_id = pending.review_id.clone().unwrap_or_default();
    println!("{} {:?} {review_id}", pending.query_id, pending.status);
    let approve = DecisionRequest {
        status: "approved".into(),
        note: None,
        replacement_text: None,
    };
    client.decide(&review_id, &approve)?;
    match client.decide(&review_id, &approve) {
        Err(e) => println!("second decision: {} {}", e.status, e.error),
        Ok(_) => println!("second decision unexpectedly accepted"),
    }
    let view = client.get_query(&pending.query_id)?;
    println!("{:?}", view.record.status);

    stop.send(()).ok();
    server.block_on(handle)??;
    Ok(())
}
