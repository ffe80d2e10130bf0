//! Library operations checked against small independent reimplementations.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::Rng;
use verticore::memory::{MemoryKind, MemoryStore};
use verticore::reasoning::decompose::{decompose_scripted, split_clauses};
use verticore::reasoning::{Capability, CapabilityLexicon};
use verticore::tools::{embed, Document, Triple, TriplePattern, TripleStore, VectorStores, WILDCARD};

use common::oracle::{cosine as oracle_cosine, embed as oracle_embed, fnv};

#[test]
fn fnv_known_vectors() {
    assert_eq!(fnv(b""), 0xcbf29ce484222325);
    assert_eq!(fnv(b"a"), 0xaf63dc4c8601ec8c);
    assert_eq!(fnv(b"foobar"), 0x85944171f73967e8);
    assert_eq!(verticore::tools::embed::fnv1a64(b"foobar"), 0x85944171f73967e8);
}

#[test]
fn embedding_matches_oracle() {
    let mut rng = common::rng(11);
    let mut texts = vec![
        "".to_string(),
        "ab".to_string(),
        "abc".to_string(),
        "ÉCOLE Straße".to_string(),
        "日本語のテキスト".to_string(),
    ];
    for _ in 0..300 {
        texts.push(common::phrase(&mut rng, 1, 12));
    }
    for t in texts {
        assert_eq!(embed(&t).values(), oracle_embed(&t).as_slice(), "text {t:?}");
    }
}

fn brute_force(docs: &[Document], query: &str, k: usize) -> Vec<(String, f64)> {
    common::oracle::top_k(docs.iter().map(|d| (d.doc_id.as_str(), d.text.as_str())), query, k)
}

#[test]
fn search_matches_brute_force_with_ties() {
    let mut rng = common::rng(3);
    let mut stores = VectorStores::new();
    let mut docs = Vec::new();
    for i in 0..120 {
        // Every fourth document repeats an earlier text under a new id.
        let text = if i % 4 == 3 {
            docs.iter()
                .map(|d: &Document| d.text.clone())
                .nth(rng.random_range(0..docs.len()))
                .unwrap()
        } else {
            common::phrase(&mut rng, 2, 9)
        };
        let doc = Document {
            doc_id: format!("d{:03}", rng.random_range(0..1000)),
            domain_tag: "x".into(),
            text,
            metadata: Default::default(),
        };
        docs.retain(|d| d.doc_id != doc.doc_id);
        docs.push(doc.clone());
        stores.upsert("x", doc).unwrap();
    }
    for _ in 0..40 {
        let q = common::phrase(&mut rng, 1, 5);
        for k in [1, 3, 10, 500] {
            let got: Vec<(String, f64)> = stores
                .search("x", &q, k)
                .unwrap()
                .into_iter()
                .map(|s| (s.document.doc_id, s.score))
                .collect();
            assert_eq!(got, brute_force(&docs, &q, k), "query {q:?} k {k}");
        }
    }
}

#[test]
fn kg_query_matches_scan() {
    let mut rng = common::rng(5);
    let mut store = TripleStore::new();
    let mut all = BTreeSet::new();
    let pick = |rng: &mut rand::rngs::StdRng| common::WORDS[rng.random_range(0..8)].to_string();
    for _ in 0..300 {
        let t = Triple::new(pick(&mut rng), pick(&mut rng), pick(&mut rng));
        store.add(t.clone()).unwrap();
        all.insert(t);
    }
    assert_eq!(store.len(), all.len());
    for _ in 0..200 {
        let field = |rng: &mut rand::rngs::StdRng| {
            if rng.random_bool(0.4) {
                WILDCARD.to_string()
            } else {
                pick(rng)
            }
        };
        let (s, p, o) = (field(&mut rng), field(&mut rng), field(&mut rng));
        let ok = |pat: &str, v: &str| pat == WILDCARD || pat == v;
        let expected: Vec<Triple> = all
            .iter()
            .filter(|t| ok(&s, &t.subject) && ok(&p, &t.predicate) && ok(&o, &t.object))
            .cloned()
            .collect();
        assert_eq!(
            store.query(&TriplePattern::new(s.as_str(), p.as_str(), o.as_str())),
            expected
        );
    }
}

#[test]
fn memory_recall_matches_oracle() {
    let mut rng = common::rng(8);
    let mut store = MemoryStore::new();
    let mut rows: Vec<(String, String, String)> = Vec::new();
    for i in 0..150 {
        let session = format!("s{}", rng.random_range(0..4));
        let content = common::phrase(&mut rng, 1, 6);
        let r = store.append(&session, MemoryKind::Interaction, &content).unwrap();
        assert_eq!(r.record_id, format!("mem-{:08}", i + 1));
        rows.push((r.record_id, session, content));
    }
    for _ in 0..30 {
        let q = common::phrase(&mut rng, 1, 4);
        let session = if rng.random_bool(0.5) { Some("s1") } else { None };
        let qe = oracle_embed(&q);
        let mut expected: Vec<(String, f64)> = rows
            .iter()
            .filter(|(_, s, _)| session.is_none_or(|want| s == want))
            .map(|(id, _, c)| (id.clone(), oracle_cosine(&qe, &oracle_embed(c))))
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        expected.truncate(7);
        let got: Vec<(String, f64)> = store
            .recall_relevant(&q, 7, session)
            .unwrap()
            .into_iter()
            .map(|(r, s)| (r.record_id, s))
            .collect();
        assert_eq!(got, expected);
    }
    let last: Vec<String> = rows.iter().filter(|r| r.1 == "s2").map(|r| r.0.clone()).collect();
    let recent: Vec<String> = store.recall_session("s2", 5).into_iter().map(|r| r.record_id).collect();
    assert_eq!(recent, last[last.len().saturating_sub(5)..]);
}

/// Split on `,` `;` and the standalone word "and", then trim and drop empties.
fn oracle_split(query: &str) -> Vec<String> {
    let mut out = Vec::new();
    for piece in query.split([',', ';']) {
        let mut current: Vec<&str> = Vec::new();
        for word in piece.split(' ') {
            if word.eq_ignore_ascii_case("and") {
                out.push(current.join(" "));
                current.clear();
            } else {
                current.push(word);
            }
        }
        out.push(current.join(" "));
    }
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

#[test]
fn decompose_matches_fragment_oracle() {
    let mut rng = common::rng(21);
    let lexicon = CapabilityLexicon::from_pairs(&[
        ("patient", Capability::KnowledgeGraph),
        ("market", Capability::WebSearch),
    ]);
    for _ in 0..20 {
        let n = rng.random_range(1..6);
        let fragments: Vec<String> = (0..n).map(|_| common::phrase(&mut rng, 1, 4)).collect();
        let mut query = fragments[0].clone();
        for f in &fragments[1..] {
            let sep = [", ", "; ", " and ", ", and "][rng.random_range(0..4)];
            query.push_str(sep);
            query.push_str(f);
        }
        let drafts = decompose_scripted(&query, &lexicon).unwrap();
        let descriptions: Vec<String> = drafts.iter().map(|d| d.description.clone()).collect();
        assert_eq!(descriptions, oracle_split(&query));
        assert_eq!(descriptions, fragments);
        for (i, d) in drafts.iter().enumerate() {
            assert_eq!(d.index, i);
            assert_eq!(d.capability_hint, lexicon.classify(&d.description));
        }
    }
}

#[test]
fn enterprise_request_decomposition() {
    let lexicon: CapabilityLexicon =
        serde_json::from_str(&std::fs::read_to_string(common::fixtures().join("lexicon.json")).unwrap()).unwrap();
    let drafts = decompose_scripted(
        "insights on financial performance, customer feedback, and market trends",
        &lexicon,
    )
    .unwrap();
    let got: Vec<(&str, Capability)> = drafts
        .iter()
        .map(|d| (d.description.as_str(), d.capability_hint))
        .collect();
    assert_eq!(
        got,
        vec![
            ("insights on financial performance", Capability::VectorSearch),
            ("customer feedback", Capability::KnowledgeGraph),
            ("market trends", Capability::WebSearch),
        ]
    );
}

fn strip_separators(s: &str) -> String {
    let mut out = String::new();
    for piece in oracle_split(s) {
        out.push_str(&piece);
    }
    out.chars().filter(|c| !c.is_whitespace()).collect()
}

proptest! {
    #[test]
    fn decompose_indices_and_lossless(words in proptest::collection::vec("[a-z]{1,6}|,|;|and", 1..20)) {
        let query = words.join(" ");
        prop_assume!(!query.trim().is_empty());
        let drafts = decompose_scripted(&query, &CapabilityLexicon::default()).unwrap();
        for (i, d) in drafts.iter().enumerate() {
            prop_assert_eq!(d.index, i);
        }
        let joined: String = drafts.iter().flat_map(|d| d.description.chars()).filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(joined, strip_separators(&query));
        prop_assert_eq!(split_clauses(&query).len(), drafts.len());
    }
}
