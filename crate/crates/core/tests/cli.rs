//! The `verticore` binary end to end.

mod common;

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tempfile::TempDir;

const IP_LAW: &str = "Summarize recent IP law precedents in technology";

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_verticore"));
    cmd.env_remove("VERTICORE_CONFIG")
        .env_remove("VERTICORE_ADDR")
        .env_remove("VERTICORE_LLM_TOKEN");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture_config() -> String {
    common::fixtures().join("config.json").display().to_string()
}

/// Writes the fixture config into `dir` with absolute paths, after `edit`.
fn write_config(dir: &Path, edit: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(fixture_config()).unwrap()).unwrap();
    for (_, p) in v["paths"].as_object_mut().unwrap() {
        *p = json!(common::fixtures().join(p.as_str().unwrap()));
    }
    edit(&mut v);
    let path = dir.join("config.json");
    std::fs::write(&path, v.to_string()).unwrap();
    path.display().to_string()
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

struct Server {
    child: Child,
    addr: String,
}

impl Server {
    fn start(config: &str) -> Self {
        let addr = format!("127.0.0.1:{}", free_port());
        let child = bin()
            .args(["--config", config, "serve", "--listen", &addr])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let deadline = Instant::now() + Duration::from_secs(20);
        let url = format!("http://{addr}/v1/health");
        while reqwest::blocking::get(&url).is_err() {
            assert!(Instant::now() < deadline, "server did not start");
            std::thread::sleep(Duration::from_millis(50));
        }
        Self { child, addr }
    }

    fn run(&self, args: &[&str]) -> Output {
        bin().arg("--addr").arg(&self.addr).args(args).output().unwrap()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn support_corpus() -> String {
    common::fixtures().join("corpus/support.jsonl").display().to_string()
}

#[test]
fn ingest_prints_count_and_is_idempotent() {
    let server = Server::start(&fixture_config());
    let corpus = support_corpus();
    let first = server.run(&["ingest", "--domain", "support", "--path", &corpus]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(stdout(&first), "upserted: 5\n");

    let ask = || {
        let o = server.run(&[
            "ask",
            "--pattern",
            "router",
            "--session",
            "s",
            "How do I get a refund for my order?",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        stdout(&o)
            .lines()
            .filter(|l| !l.starts_with("query:"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let before = ask();
    let again = server.run(&["ingest", "--domain", "support", "--path", &corpus]);
    assert_eq!(stdout(&again), "upserted: 5\n");
    assert_eq!(ask(), before);
    assert!(before.contains("domains: support"));
}

#[test]
fn ingest_names_the_bad_line() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(
        &path,
        "{\"doc_id\":\"a\",\"text\":\"first doc\"}\n{\"doc_id\":\"b\",\"text\":\"second doc\"}\n{\"doc_id\":\n",
    )
    .unwrap();
    let o = run(&[
        "--config",
        &fixture_config(),
        "--local",
        "ingest",
        "--domain",
        "legal",
        "--path",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn ask_router_shows_domain() {
    let o = run(&[
        "--config",
        &fixture_config(),
        "--local",
        "ask",
        "--pattern",
        "router",
        "--session",
        "s",
        IP_LAW,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("pattern: router"));
    assert!(out.contains("domains: legal\n"), "{out}");
    assert!(out.contains("documents: legal/"));
}

#[test]
fn ask_hitl_is_pending() {
    let o = run(&[
        "--config",
        &fixture_config(),
        "--local",
        "ask",
        "--pattern",
        "hitl",
        "--session",
        "s",
        "--domain",
        "support",
        "Can I return a blender?",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("pending-review rev-000001\n"), "{}", stdout(&o));
}

#[test]
fn exit_codes() {
    let cfg = fixture_config();
    let o = run(&[
        "--config",
        &cfg,
        "--local",
        "ask",
        "--pattern",
        "psychic",
        "--session",
        "s",
        "hi",
    ]);
    assert_eq!(o.status.code(), Some(64));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["scenario", "list"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let o = run(&[
        "--config",
        &cfg,
        "--local",
        "ask",
        "--pattern",
        "router",
        "--session",
        "s",
        "zzzz qqqq",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NoConfidentRoute"));

    let o = run(&[
        "--addr",
        &format!("127.0.0.1:{}", free_port()),
        "ask",
        "--pattern",
        "router",
        "--session",
        "s",
        IP_LAW,
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn backend_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), |v| {
        v["backend"] = json!({
            "kind": "remote",
            "url": format!("http://127.0.0.1:{}/v1/chat/completions", free_port()),
            "max_retries": 0,
            "timeout_ms": 2000
        });
    });
    let o = run(&[
        "--config",
        &cfg,
        "--local",
        "ask",
        "--pattern",
        "router",
        "--session",
        "s",
        IP_LAW,
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("BackendUnavailable"), "{}", stderr(&o));
}

#[test]
fn review_commands_against_a_server() {
    let server = Server::start(&fixture_config());
    server.run(&["ingest", "--domain", "support", "--path", &support_corpus()]);
    let o = server.run(&[
        "ask",
        "--pattern",
        "hitl",
        "--session",
        "h",
        "--domain",
        "support",
        "Where is my order?",
    ]);
    assert!(stdout(&o).starts_with("pending-review rev-000001"));
    let list = stdout(&server.run(&["review", "list", "--status", "pending"]));
    assert!(list.starts_with("rev-000001  q-000001  pending"), "{list}");
    let o = server.run(&[
        "review",
        "decide",
        "rev-000001",
        "--status",
        "modified",
        "--replacement-text",
        "It ships Monday.",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("rev-000001 modified\n"));
    assert!(out.contains("It ships Monday."));
    let o = server.run(&["review", "decide", "rev-000001", "--status", "approved"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("AlreadyDecided"));
    assert!(stdout(&server.run(&["review", "list", "--status", "pending"])).is_empty());
}

#[test]
fn scenario_runs_are_identical() {
    let cfg = fixture_config();
    let a = run(&["--config", &cfg, "scenario", "run", "legal-case"]);
    let b = run(&["--config", &cfg, "scenario", "run", "legal-case"]);
    assert_eq!(a.status.code(), Some(0), "{}{}", stdout(&a), stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("result: pass"));
    let listed = stdout(&run(&["--config", &cfg, "scenario", "list"]));
    assert_eq!(listed.lines().collect::<Vec<_>>(), common::scenario_names());
}

#[test]
fn failing_scenario_exits_1() {
    let dir = TempDir::new().unwrap();
    let scenarios = dir.path().join("scenarios");
    std::fs::create_dir(&scenarios).unwrap();
    std::fs::write(
        scenarios.join("broken.json"),
        json!({
            "name": "broken",
            "steps": [
                {"id": "load", "action": "ingest", "domain": "support", "path": support_corpus()},
                {"id": "q", "action": "query", "session": "s", "pattern": "router", "text": "How do I request a refund for a damaged item?"},
                {"id": "check", "action": "assert", "step": "q", "checks": [
                    {"path": "/response/provenance/domains_touched", "equals": ["legal"]}
                ]}
            ]
        })
        .to_string(),
    )
    .unwrap();
    let cfg = write_config(dir.path(), |v| v["paths"]["scenarios"] = json!(scenarios));
    let o = run(&["--config", &cfg, "scenario", "run", "broken"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL"), "{out}");
    assert!(out.contains("result: fail (3 steps, 1 failed)"), "{out}");
    assert_eq!(
        run(&["--config", &cfg, "scenario", "run", "missing"]).status.code(),
        Some(1)
    );
}

fn digest_line(out: &str) -> String {
    out.lines()
        .find(|l| l.starts_with("state digest:"))
        .unwrap()
        .to_string()
}

#[test]
fn replay_matches_and_detects_corruption() {
    let dir = TempDir::new().unwrap();
    let log: PathBuf = dir.path().join("events.jsonl");
    let log_s = log.to_str().unwrap();
    let o = run(&[
        "--config",
        &fixture_config(),
        "scenario",
        "run",
        "expert-review",
        "--log",
        log_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = run(&["replay", "--log", log_s]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    assert_eq!(digest_line(&stdout(&r)), digest_line(&stdout(&o)));

    // A second run refuses to append to the existing log.
    let again = run(&[
        "--config",
        &fixture_config(),
        "scenario",
        "run",
        "expert-review",
        "--log",
        log_s,
    ]);
    assert_eq!(again.status.code(), Some(1));

    let text = std::fs::read_to_string(&log).unwrap();
    let tampered = text.replacen("Can I", "Could I", 1);
    assert_ne!(tampered, text);
    std::fs::write(&log, tampered).unwrap();
    let r = run(&["replay", "--log", log_s]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).to_lowercase().contains("corrupt"), "{}", stderr(&r));
}
