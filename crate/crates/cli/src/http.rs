//! HTTP clients for the translation and scoring wire protocols.
//!
//! Translation: `POST {base}/translate` with
//! `{"items":[{"id","text","source","target"}]}`, answered by
//! `{"items":[{"id","text"}]}`.
//!
//! Scoring: `POST {base}/score` with `{"items":[{"id","text","language"}]}`,
//! answered by `{"scores":[{"id","score"}]}`.
//!
//! A 400 is fatal. 429 and 5xx responses, and transport errors, are retried
//! with exponential backoff.

use std::collections::HashMap;
use std::thread;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use wader_core::scorer::{ScoreItem, ScorerBackend};
use wader_core::translator::{TranslationBackend, TranslationRequest};
use wader_core::BackendError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub factor: u32,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base_delay: Duration::from_millis(500),
            factor: 2,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * self.factor.saturating_pow(retry)
    }
}

fn is_retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// POST `body` as JSON and decode the reply, retrying per `policy`.
fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(
    agent: &ureq::Agent,
    url: &str,
    body: &B,
    policy: &RetryPolicy,
) -> Result<R, BackendError> {
    let mut last = String::new();
    for attempt in 0..policy.max_attempts.max(1) {
        if attempt > 0 {
            thread::sleep(policy.delay(attempt - 1));
        }
        match agent.post(url).send_json(body) {
            Ok(resp) => {
                return resp
                    .into_json::<R>()
                    .map_err(|e| BackendError::Protocol(format!("undecodable response from {url}: {e}")));
            }
            Err(ureq::Error::Status(code, resp)) if is_retryable(code) => {
                last = format!("HTTP {code} from {url}");
                let _ = resp.into_string();
                warn!("{last}; attempt {} of {}", attempt + 1, policy.max_attempts);
            }
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                return Err(BackendError::Rejected(format!("HTTP {code} from {url}: {detail}")));
            }
            Err(ureq::Error::Transport(t)) => {
                last = format!("transport error talking to {url}: {t}");
                warn!("{last}; attempt {} of {}", attempt + 1, policy.max_attempts);
            }
        }
    }
    Err(BackendError::Exhausted {
        attempts: policy.max_attempts.max(1),
        message: last,
    })
}

fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path)
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct TranslateItem {
    pub id: String,
    pub text: String,
    pub source: String,
    pub target: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct TranslateBody {
    pub items: Vec<TranslateItem>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct TranslatedItem {
    pub id: String,
    pub text: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct TranslateReply {
    pub items: Vec<TranslatedItem>,
}

/// Translation backend speaking the `/translate` protocol.
#[derive(Debug, Clone)]
pub struct HttpTranslator {
    agent: ureq::Agent,
    url: String,
    policy: RetryPolicy,
    max_in_flight: usize,
}

impl HttpTranslator {
    pub fn new(base_url: &str, policy: RetryPolicy, max_in_flight: usize) -> Self {
        HttpTranslator {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
            url: endpoint(base_url, "translate"),
            policy,
            max_in_flight: max_in_flight.max(1),
        }
    }

    fn call(&self, batch: &[TranslationRequest]) -> Result<Vec<String>, BackendError> {
        let body = TranslateBody {
            items: batch
                .iter()
                .map(|r| TranslateItem {
                    id: r.id.clone(),
                    text: r.text.clone(),
                    source: r.source.clone(),
                    target: r.target.clone(),
                })
                .collect(),
        };
        let reply: TranslateReply = post_json(&self.agent, &self.url, &body, &self.policy)?;
        let mut by_id: HashMap<String, String> = reply.items.into_iter().map(|i| (i.id, i.text)).collect();
        batch
            .iter()
            .map(|r| {
                by_id
                    .remove(&r.id)
                    .ok_or_else(|| BackendError::Protocol(format!("no translation returned for {:?}", r.id)))
            })
            .collect()
    }
}

impl TranslationBackend for HttpTranslator {
    fn translate(&mut self, batch: &[TranslationRequest]) -> Result<Vec<String>, BackendError> {
        self.call(batch)
    }

    /// Runs up to `max_in_flight` batches at once, wave by wave.
    fn translate_batches(&mut self, batches: &[&[TranslationRequest]]) -> Vec<Result<Vec<String>, BackendError>> {
        let mut out = Vec::with_capacity(batches.len());
        for wave in batches.chunks(self.max_in_flight) {
            let this = &*self;
            let results: Vec<_> = thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|b| s.spawn(move || this.call(b))).collect();
                handles
                    .into_iter()
                    .map(|h| {
                        h.join()
                            .unwrap_or_else(|_| Err(BackendError::Protocol("translation worker panicked".into())))
                    })
                    .collect()
            });
            let fatal = results.iter().any(|r| matches!(r, Err(e) if e.is_fatal()));
            out.extend(results);
            if fatal {
                break;
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ScoreRequestItem {
    pub id: String,
    pub text: String,
    pub language: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ScoreBody {
    pub items: Vec<ScoreRequestItem>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ScoredItem {
    pub id: String,
    pub score: f64,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ScoreReply {
    pub scores: Vec<ScoredItem>,
}

/// Scoring backend speaking the `/score` protocol.
#[derive(Debug, Clone)]
pub struct HttpScorer {
    agent: ureq::Agent,
    url: String,
    policy: RetryPolicy,
}

impl HttpScorer {
    pub fn new(base_url: &str, policy: RetryPolicy) -> Self {
        HttpScorer {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(300)).build(),
            url: endpoint(base_url, "score"),
            policy,
        }
    }
}

impl ScorerBackend for HttpScorer {
    fn score(&mut self, batch: &[ScoreItem]) -> Result<Vec<f64>, BackendError> {
        let body = ScoreBody {
            items: batch
                .iter()
                .map(|i| ScoreRequestItem {
                    id: i.id.clone(),
                    text: i.text.clone(),
                    language: i.language.clone(),
                })
                .collect(),
        };
        let reply: ScoreReply = post_json(&self.agent, &self.url, &body, &self.policy)?;
        let by_id: HashMap<String, f64> = reply.scores.into_iter().map(|s| (s.id, s.score)).collect();
        batch
            .iter()
            .map(|i| {
                by_id
                    .get(&i.id)
                    .copied()
                    .ok_or_else(|| BackendError::Protocol(format!("no score returned for {:?}", i.id)))
            })
            .collect()
    }
}
