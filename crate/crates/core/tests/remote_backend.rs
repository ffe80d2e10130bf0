//! The remote completion backend against a scripted local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use verticore::reasoning::{
    CompletionBackend, CompletionRequest, FinishReason, Persona, ReasoningError, RemoteBackend, RemoteSettings,
};
use verticore::PersonaTag;

#[derive(Debug, Clone)]
struct Seen {
    authorization: Option<String>,
    body: Value,
}

/// Serves one canned `(status, body)` per connection, in order, recording
/// each request.
fn mock(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    match k.to_ascii_lowercase().as_str() {
                        "content-length" => len = v.trim().parse().unwrap(),
                        "authorization" => auth = Some(v.trim().to_string()),
                        _ => {}
                    }
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                authorization: auth,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn settings(url: &str, token: Option<&str>, retries: u32) -> RemoteSettings {
    RemoteSettings {
        url: url.into(),
        model: "test-model".into(),
        token: token.map(str::to_string),
        max_retries: retries,
        timeout: Duration::from_secs(5),
        max_in_flight: 2,
    }
}

fn request(prompt: &str) -> CompletionRequest {
    CompletionRequest {
        prompt: prompt.into(),
        persona: Persona::default_for(PersonaTag::Empathetic),
        max_length: 256,
    }
}

fn reply(content: &str, finish: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": finish}]}).to_string()
}

#[test]
fn sends_token_and_wire_body() {
    let (url, seen) = mock(vec![(200, reply("hello there", "stop"))]);
    let backend = RemoteBackend::new(settings(&url, Some("sekret"), 0)).unwrap();
    let out = backend.complete(&request("Question: hi")).unwrap();
    assert_eq!(out.text, "hello there");
    assert_eq!(out.finish_reason, FinishReason::Complete);
    assert_eq!(out.backend_id, url);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sekret"));
    assert_eq!(seen[0].body["model"], "test-model");
    assert_eq!(seen[0].body["max_tokens"], 256);
    assert_eq!(
        seen[0].body["messages"][1],
        json!({"role": "user", "content": "Question: hi"})
    );
    assert_eq!(seen[0].body["messages"][0]["role"], "system");
}

#[test]
fn no_token_means_no_header() {
    let (url, seen) = mock(vec![(200, reply("x", "stop"))]);
    RemoteBackend::new(settings(&url, None, 0))
        .unwrap()
        .complete(&request("p"))
        .unwrap();
    assert_eq!(seen.lock().unwrap()[0].authorization, None);
}

#[test]
fn retries_then_succeeds() {
    let (url, seen) = mock(vec![
        (503, "{}".into()),
        (500, "oops".into()),
        (200, reply("third time", "length")),
    ]);
    let out = RemoteBackend::new(settings(&url, None, 2))
        .unwrap()
        .complete(&request("p"))
        .unwrap();
    assert_eq!(out.text, "third time");
    assert_eq!(out.finish_reason, FinishReason::Truncated);
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn exhausted_retries_are_unavailable() {
    let (url, seen) = mock(vec![(503, "{}".into()), (503, "{}".into())]);
    let err = RemoteBackend::new(settings(&url, None, 1))
        .unwrap()
        .complete(&request("p"))
        .unwrap_err();
    assert!(
        matches!(err, ReasoningError::BackendUnavailable(ref m) if m.contains("503")),
        "{err:?}"
    );
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn refusal_and_bad_payloads() {
    let (url, _) = mock(vec![
        (200, reply("", "content_filter")),
        (200, json!({"choices": []}).to_string()),
    ]);
    let backend = RemoteBackend::new(settings(&url, None, 0)).unwrap();
    assert_eq!(
        backend.complete(&request("p")).unwrap().finish_reason,
        FinishReason::Refused
    );
    assert!(matches!(
        backend.complete(&request("p")),
        Err(ReasoningError::BackendUnavailable(_))
    ));
}

#[test]
fn closed_port_and_empty_prompt() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = RemoteBackend::new(settings(&format!("http://127.0.0.1:{port}/x"), None, 1)).unwrap();
    assert!(matches!(
        backend.complete(&request("p")),
        Err(ReasoningError::BackendUnavailable(_))
    ));
    assert!(matches!(
        backend.complete(&request("  ")),
        Err(ReasoningError::EmptyPrompt)
    ));
}
