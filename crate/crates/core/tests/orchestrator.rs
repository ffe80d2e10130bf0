//! Orchestrated runs do not depend on the order agents finish in.

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rand::Rng;
use verticore::reasoning::Capability;
use verticore::service::Runtime;
use verticore::{FinalResponse, PersonaTag};

const FIVE: &str = "financial performance, customer feedback, market trends, patient history, and shipment tracking";
const ALL: &[&str] = &["legal", "financial", "healthcare", "logistics", "support"];

fn comparable(r: &FinalResponse) -> serde_json::Value {
    let mut v = serde_json::to_value(r).unwrap();
    v.as_object_mut().unwrap().remove("query_id");
    v
}

#[test]
fn five_subtasks_plan() {
    let rt = common::runtime_with(ALL);
    let plan = rt.plan(FIVE).unwrap();
    let caps: Vec<Capability> = plan.iter().map(|s| s.capability).collect();
    assert_eq!(
        caps,
        vec![
            Capability::VectorSearch,
            Capability::KnowledgeGraph,
            Capability::WebSearch,
            Capability::KnowledgeGraph,
            Capability::WebSearch,
        ]
    );
    assert_eq!(plan.iter().map(|s| s.index).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
}

#[test]
fn hundred_schedules_one_answer() {
    let baseline_rt = common::runtime_with(ALL);
    let baseline = baseline_rt
        .run_orchestrated(FIVE, "j", PersonaTag::Professional)
        .unwrap();
    let baseline_digest = baseline_rt.state_digest();
    let mut rng = common::rng(100);
    for schedule in 0..100 {
        let delays: Vec<u64> = (0..5).map(|_| rng.random_range(0..4)).collect();
        let rt = common::runtime_with(ALL);
        let r = rt
            .run_orchestrated_with_jitter(FIVE, "j", PersonaTag::Professional, |i| {
                Duration::from_millis(delays[i])
            })
            .unwrap();
        assert_eq!(comparable(&r), comparable(&baseline), "schedule {schedule}: {delays:?}");
        assert_eq!(rt.state_digest(), baseline_digest, "schedule {schedule}");
        let order: Vec<usize> = rt.read(|s| {
            s.orchestrations[&r.query_id]
                .results
                .iter()
                .map(|a| a.subtask_index)
                .collect()
        });
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }
}

#[test]
fn concurrency_stays_within_parallelism() {
    for parallelism in [1, 2, 3] {
        let mut config = common::config();
        config.parallelism = parallelism;
        let rt = Runtime::from_config(&config).unwrap();
        let plan = rt.plan(FIVE).unwrap();
        let active = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let results = rt.dispatch_with_jitter(&plan, "c", |_| {
            let now = active.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            active.fetch_sub(1, Ordering::SeqCst);
            Duration::ZERO
        });
        assert_eq!(results.len(), 5);
        assert!(peak.load(Ordering::SeqCst) <= parallelism, "parallelism {parallelism}");
    }
}

#[test]
fn failed_agents_do_not_abort_the_run() {
    // No corpora: vector retrieval finds nothing, the other agents still run.
    let rt = Runtime::from_config(&common::config()).unwrap();
    let kg = std::fs::read_to_string(common::fixtures().join("kg.jsonl")).unwrap();
    rt.add_triples(verticore::tools::parse_triples(&kg).unwrap()).unwrap();
    let r = rt.run_orchestrated(FIVE, "f", PersonaTag::Professional).unwrap();
    let failed: Vec<usize> = rt.read(|s| {
        s.orchestrations[&r.query_id]
            .results
            .iter()
            .filter(|a| a.failure.is_some())
            .map(|a| a.subtask_index)
            .collect()
    });
    assert_eq!(failed, vec![0]);
    assert!(!r.provenance.triples.is_empty());
    assert!(!r.provenance.web_results.is_empty());
}
