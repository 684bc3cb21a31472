#![allow(dead_code)]

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use arena_core::corpus::{ingest_metadata, split_by_song, TrackMetadata};
use arena_core::prompts::{
    default_templates, generate_analysis_queries, generate_creativity_queries, generate_recall_queries,
    AttributePools, EvalQuery,
};
use arena_service::blind::{ViewJudgments, ViewOption};
use arena_service::{router, AppState, ScheduleConfig, Store};

pub const SYSTEMS: [&str; 4] = ["MGB", "MGF", "MTB", "MTF"];

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn train_tracks(corpus: &str, seed: u64) -> Vec<TrackMetadata> {
    let tracks = ingest_metadata(fixture(corpus)).unwrap();
    let split = split_by_song(&tracks, 0.2, seed).unwrap();
    let train: HashSet<&str> = split.train_ids.iter().map(String::as_str).collect();
    tracks.into_iter().filter(|t| train.contains(t.id.as_str())).collect()
}

/// `per_type` queries of each type, ids prefixed with `prefix` so two genres
/// can share a data root.
pub fn genre_queries(corpus: &str, prefix: &str, per_type: usize, seed: u64) -> Vec<EvalQuery> {
    let train = train_tracks(corpus, seed);
    let templates = default_templates();
    let foreign = AttributePools::load(fixture("prompts/foreign_pools.json")).unwrap();
    let mut out = generate_recall_queries(&train, per_type, seed, &templates).unwrap();
    out.extend(generate_analysis_queries(&train, per_type, seed, &templates).unwrap());
    out.extend(generate_creativity_queries(&train, &foreign, per_type, seed, &templates).unwrap());
    for q in &mut out {
        q.id = format!("{prefix}-{}", q.id);
    }
    out
}

fn pairs(list: &[(&str, &str)]) -> Vec<(String, String)> {
    list.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

pub const PHASE1_PAIRS: [(&str, &str); 4] = [("MGB", "MTB"), ("MGB", "MGF"), ("MTB", "MTF"), ("MGF", "MTF")];

pub fn phase1(genre: &str) -> ScheduleConfig {
    ScheduleConfig {
        allowed_pairs: pairs(&PHASE1_PAIRS),
        queries_per_type: 3,
        query_types: arena_core::QueryType::ALL.to_vec(),
        query_offset: 0,
        phase: 1,
        annotators_per_match: 2,
        genre: Some(genre.into()),
    }
}

/// Phase 2 drops the one pair whose gap phase 1 settled, and uses fresh prompts.
pub fn phase2(genre: &str, dropped: (&str, &str)) -> ScheduleConfig {
    let kept: Vec<(&str, &str)> = PHASE1_PAIRS.iter().copied().filter(|&p| p != dropped).collect();
    ScheduleConfig {
        allowed_pairs: pairs(&kept),
        queries_per_type: 7,
        query_types: arena_core::QueryType::ALL.to_vec(),
        query_offset: 3,
        phase: 2,
        annotators_per_match: 1,
        genre: Some(genre.into()),
    }
}

pub fn random_judgments(rng: &mut ChaCha8Rng) -> ViewJudgments {
    let mut pick = || ViewOption::ALL[rng.random_range(0..ViewOption::ALL.len())];
    ViewJudgments { oa: pick(), inst: pick(), mc: pick(), rc: pick(), cr: pick() }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct Server {
    pub base: String,
    pub client: reqwest::Client,
    handle: tokio::task::JoinHandle<()>,
}

impl Drop for Server {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

pub async fn spawn(dir: &Path) -> Server {
    let store = Store::open(dir).unwrap();
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(AppState::new(store), None);
    let handle = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Server { base: format!("http://{addr}/api/v1"), client: reqwest::Client::new(), handle }
}

impl Server {
    pub async fn get(&self, path: &str) -> (u16, String) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status().as_u16(), r.text().await.unwrap())
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let r = self.client.post(format!("{}{path}", self.base)).json(body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    pub async fn schedule(&self, config: &ScheduleConfig, queries: &[EvalQuery], seed: u64) -> Value {
        let body = serde_json::json!({ "config": config, "seed": seed, "queries": queries });
        let (status, v) = self.post("/admin/schedule", &body).await;
        assert_eq!(status, 201, "{v}");
        v
    }

    /// Raw body of `/next` plus the parsed match (if any).
    pub async fn next(&self, annotator: &str) -> (String, Option<Value>) {
        let (status, text) = self.get(&format!("/session/{annotator}/next-match")).await;
        assert_eq!(status, 200, "{text}");
        let v: Value = serde_json::from_str(&text).unwrap();
        let m = v.get("match").filter(|m| !m.is_null()).cloned();
        (text, m)
    }

    pub async fn answer(&self, match_id: &str, annotator: &str, j: &ViewJudgments) -> (u16, Value) {
        let body = serde_json::json!({ "match_id": match_id, "annotator_id": annotator, "judgments": j });
        self.post("/annotations", &body).await
    }

    /// Serves and answers matches round-robin until every annotator is done.
    /// Returns every `/next` body seen.
    pub async fn drain(&self, annotators: &[&str], rng: &mut ChaCha8Rng) -> Vec<String> {
        let mut bodies = Vec::new();
        let mut done = vec![false; annotators.len()];
        while done.iter().any(|d| !d) {
            for (i, a) in annotators.iter().enumerate() {
                if done[i] {
                    continue;
                }
                let (text, m) = self.next(a).await;
                bodies.push(text);
                match m {
                    Some(m) => {
                        let (status, ack) = self.answer(m["match_id"].as_str().unwrap(), a, &random_judgments(rng)).await;
                        assert_eq!(status, 201, "{ack}");
                    }
                    None => done[i] = true,
                }
            }
        }
        bodies
    }
}
