#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use verticore::scenario::{self, ScenarioReport, ScenarioScript};
use verticore::service::{Config, Runtime};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn config() -> Config {
    Config::load(&fixtures().join("config.json")).expect("fixture config")
}

/// A runtime from the fixture config with the named corpora and the
/// knowledge graph loaded.
pub fn runtime_with(domains: &[&str]) -> Arc<Runtime> {
    let rt = Runtime::from_config(&config()).expect("runtime");
    for d in domains {
        let body = std::fs::read_to_string(fixtures().join("corpus").join(format!("{d}.jsonl"))).unwrap();
        rt.ingest_jsonl(d, &body).unwrap();
    }
    let kg = std::fs::read_to_string(fixtures().join("kg.jsonl")).unwrap();
    rt.add_triples(verticore::tools::parse_triples(&kg).unwrap()).unwrap();
    Arc::new(rt)
}

pub fn scenario_names() -> Vec<String> {
    scenario::list(&fixtures().join("scenarios")).unwrap()
}

/// Runs a fixture scenario on a fresh runtime, logging to `log` if given.
pub fn run_scenario(name: &str, log: Option<&Path>) -> ScenarioReport {
    let (script, path) = ScenarioScript::find(&fixtures().join("scenarios"), name).unwrap();
    verticore::cli::run_scenario_with(config(), &script, &path, log).unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub const WORDS: &[&str] = &[
    "contract",
    "patent",
    "revenue",
    "margin",
    "patient",
    "dosage",
    "shipment",
    "warehouse",
    "refund",
    "order",
    "court",
    "statute",
    "equity",
    "bond",
    "clinic",
    "supplier",
    "tracking",
    "invoice",
    "policy",
    "claim",
    "risk",
    "market",
    "growth",
    "license",
    "review",
    "delivery",
    "account",
    "balance",
    "audit",
    "trial",
];

pub fn phrase(rng: &mut StdRng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Independent reimplementation of the embedding and cosine used by search.
pub mod oracle {
    pub fn fnv(bytes: &[u8]) -> u64 {
        let mut h: u64 = 14695981039346656037;
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(1099511628211);
        }
        h
    }

    pub fn embed(text: &str) -> Vec<f64> {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let mut v = vec![0.0f64; 64];
        if chars.len() >= 3 {
            for w in chars.windows(3) {
                let s: String = w.iter().collect();
                v[(fnv(s.as_bytes()) % 64) as usize] += 1.0;
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut v {
                *x /= n;
            }
        }
        v
    }

    pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }

    /// Exhaustive top-k over `(doc_id, text)`: score descending, id ascending.
    pub fn top_k<'a>(docs: impl IntoIterator<Item = (&'a str, &'a str)>, query: &str, k: usize) -> Vec<(String, f64)> {
        let q = embed(query);
        let mut scored: Vec<(String, f64)> = docs
            .into_iter()
            .map(|(id, t)| (id.to_string(), cosine(&q, &embed(t))))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }
}
