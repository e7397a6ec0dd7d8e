mod common;

use std::net::TcpListener;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use common::Stub;

use serde_json::{json, Value};
use wader_cli::http::{HttpScorer, HttpTranslator, RetryPolicy};
use wader_core::scorer::{ScoreItem, ScorerBackend};
use wader_core::translator::{TranslationBackend, TranslationRequest};
use wader_core::BackendError;

fn fast() -> RetryPolicy {
    RetryPolicy {
        base_delay: Duration::from_millis(1),
        factor: 2,
        max_attempts: 5,
    }
}

/// Echo translator that prefixes the target language and answers in
/// reverse order.
fn echo(_: &str, body: &Value, _: usize) -> (u16, Value) {
    let mut items: Vec<Value> = body["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| json!({"id": i["id"], "text": format!("{}:{}", i["target"].as_str().unwrap(), i["text"].as_str().unwrap())}))
        .collect();
    items.reverse();
    (200, json!({ "items": items }))
}

fn requests(n: usize) -> Vec<TranslationRequest> {
    (0..n)
        .map(|i| TranslationRequest::new(format!("r{i}"), format!("text {i}"), "en", "es").unwrap())
        .collect()
}

#[test]
fn translate_sends_documented_body_and_matches_by_id() {
    let seen = Arc::new(std::sync::Mutex::new(Value::Null));
    let s2 = seen.clone();
    let stub = Stub::start(Duration::ZERO, move |path, body, n| {
        assert_eq!(path, "/translate");
        *s2.lock().unwrap() = body.clone();
        echo(path, body, n)
    });
    let mut t = HttpTranslator::new(&stub.url, fast(), 1);
    let out = t.translate(&requests(3)).unwrap();
    assert_eq!(out, ["es:text 0", "es:text 1", "es:text 2"]);
    assert_eq!(
        seen.lock().unwrap()["items"][0],
        json!({"id": "r0", "text": "text 0", "source": "en", "target": "es"})
    );
}

#[test]
fn unavailable_then_ok_is_retried() {
    for status in [503u16, 429, 500] {
        let stub = Stub::start(Duration::ZERO, move |p, b, n| if n < 2 { (status, json!({})) } else { echo(p, b, n) });
        let mut t = HttpTranslator::new(&stub.url, fast(), 1);
        assert_eq!(t.translate(&requests(1)).unwrap(), ["es:text 0"]);
        assert_eq!(stub.hits(), 3);
    }
}

#[test]
fn bad_request_is_fatal_without_retry() {
    let stub = Stub::start(Duration::ZERO, |_, _, _| (400, json!({"error": "malformed"})));
    let mut t = HttpTranslator::new(&stub.url, fast(), 1);
    let err = t.translate(&requests(1)).unwrap_err();
    assert!(matches!(err, BackendError::Rejected(_)), "{err}");
    assert!(err.is_fatal());
    assert_eq!(stub.hits(), 1);
}

#[test]
fn retries_stop_after_max_attempts() {
    let stub = Stub::start(Duration::ZERO, |_, _, _| (503, json!({})));
    let mut t = HttpTranslator::new(&stub.url, fast(), 1);
    let err = t.translate(&requests(1)).unwrap_err();
    assert!(matches!(err, BackendError::Exhausted { attempts: 5, .. }), "{err}");
    assert_eq!(stub.hits(), 5);
}

#[test]
fn unreachable_server_exhausts_retries() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut t = HttpTranslator::new(&format!("http://127.0.0.1:{port}"), fast(), 1);
    assert!(matches!(t.translate(&requests(1)), Err(BackendError::Exhausted { .. })));
}

#[test]
fn missing_id_in_reply_is_a_protocol_error() {
    let stub = Stub::start(Duration::ZERO, |_, _, _| (200, json!({"items": []})));
    let mut t = HttpTranslator::new(&stub.url, fast(), 1);
    assert!(matches!(t.translate(&requests(1)), Err(BackendError::Protocol(_))));
}

#[test]
fn batches_run_concurrently_and_keep_order() {
    let stub = Stub::start(Duration::from_millis(50), echo);
    let mut t = HttpTranslator::new(&stub.url, fast(), 4);
    let all = requests(16);
    let batches: Vec<&[TranslationRequest]> = all.chunks(2).collect();
    let results = t.translate_batches(&batches);
    let flat: Vec<String> = results.into_iter().flat_map(|r| r.unwrap()).collect();
    let expected: Vec<String> = (0..16).map(|i| format!("es:text {i}")).collect();
    assert_eq!(flat, expected);
    let peak = stub.peak.load(Ordering::SeqCst);
    assert!((2..=4).contains(&peak), "peak in-flight requests {peak}");
}

#[test]
fn scorer_speaks_the_score_protocol() {
    let stub = Stub::start(Duration::ZERO, |path, body, _| {
        assert_eq!(path, "/score");
        let scores: Vec<Value> = body["items"]
            .as_array()
            .unwrap()
            .iter()
            .rev()
            .map(|i| json!({"id": i["id"], "score": i["text"].as_str().unwrap().len() as f64}))
            .collect();
        (200, json!({ "scores": scores }))
    });
    let mut s = HttpScorer::new(&format!("{}/", stub.url), fast());
    let items = vec![ScoreItem::new("a", "xy", "en"), ScoreItem::new("b", "xyz", "hi")];
    assert_eq!(s.score(&items).unwrap(), vec![2.0, 3.0]);
}
