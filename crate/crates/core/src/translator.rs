//! The cross-lingual translation scheme.
//!
//! Every candidate in a seen language `Li` is translated into each other
//! seen language `Lk` (cross translation) and each of those is translated
//! back into `Li` (back translation). It is also translated forward into
//! every unseen language. The weak label of each output is the gold label
//! of the candidate it came from.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::batch_ranges;
use crate::corpus::Corpus;
use crate::BackendError;

/// Requests per backend call.
pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("no candidates to translate")]
    NoCandidates,
    #[error("language {0:?} is both seen and unseen")]
    OverlappingLanguages(String),
    #[error("request {0:?} translates a language into itself")]
    SelfTranslation(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationRequest {
    pub id: String,
    pub text: String,
    pub source: String,
    pub target: String,
}

impl TranslationRequest {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Result<Self, PlanError> {
        let req = TranslationRequest {
            id: id.into(),
            text: text.into(),
            source: source.into(),
            target: target.into(),
        };
        if req.source == req.target {
            return Err(PlanError::SelfTranslation(req.id));
        }
        Ok(req)
    }
}

/// Whether a first-hop target is another seen language or an unseen one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopKind {
    Cross,
    Forward,
}

/// How many back translations a candidate receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackMode {
    /// Back-translate through every other seen language.
    #[default]
    EveryPivot,
    /// Back-translate only through the lexicographically first pivot.
    Single,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRequest {
    pub request: TranslationRequest,
    pub source_id: String,
    pub derived_label: f64,
    pub kind: HopKind,
    /// A follow-up translation back into the source language is planned.
    pub back: bool,
}

impl PlannedRequest {
    fn back_request(&self, pivot_text: &str) -> TranslationRequest {
        let r = &self.request;
        TranslationRequest {
            id: back_id(&self.source_id, &r.target, &r.source),
            text: pivot_text.to_string(),
            source: r.target.clone(),
            target: r.source.clone(),
        }
    }
}

fn forward_id(source_id: &str, target: &str) -> String {
    format!("{source_id}>{target}")
}

fn back_id(source_id: &str, pivot: &str, source: &str) -> String {
    format!("{source_id}>{pivot}>{source}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationPlan {
    seen: Vec<String>,
    unseen: Vec<String>,
    mode: BackMode,
    requests: Vec<PlannedRequest>,
}

impl TranslationPlan {
    pub fn seen(&self) -> &[String] {
        &self.seen
    }

    pub fn unseen(&self) -> &[String] {
        &self.unseen
    }

    pub fn mode(&self) -> BackMode {
        self.mode
    }

    pub fn requests(&self) -> &[PlannedRequest] {
        &self.requests
    }

    pub fn cross_count(&self) -> usize {
        self.requests.iter().filter(|r| r.kind == HopKind::Cross).count()
    }

    pub fn forward_count(&self) -> usize {
        self.requests.iter().filter(|r| r.kind == HopKind::Forward).count()
    }

    pub fn back_count(&self) -> usize {
        self.requests.iter().filter(|r| r.back).count()
    }

    /// Number of augmented examples the plan yields when nothing degrades.
    pub fn output_count(&self) -> usize {
        self.requests.len() + self.back_count()
    }
}

/// Plan every translation for `candidates`, taking the seen languages from
/// the candidates themselves.
pub fn build_plan<I, S>(candidates: &Corpus, unseen: I, mode: BackMode) -> Result<TranslationPlan, PlanError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let seen = candidates.seen_languages().iter().cloned().collect::<Vec<_>>();
    build_plan_for(candidates, seen, unseen, mode)
}

/// Plan every translation for `candidates` against an explicit seen set.
///
/// The seen set is widened to include every candidate language. Requests run
/// in candidate order, and for each candidate over its targets in
/// lexicographic order.
pub fn build_plan_for<I, S, J, T>(
    candidates: &Corpus,
    seen: J,
    unseen: I,
    mode: BackMode,
) -> Result<TranslationPlan, PlanError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
    J: IntoIterator<Item = T>,
    T: Into<String>,
{
    if candidates.is_empty() {
        return Err(PlanError::NoCandidates);
    }
    let seen: BTreeSet<String> = seen
        .into_iter()
        .map(Into::into)
        .chain(candidates.seen_languages().iter().cloned())
        .collect();
    let unseen: BTreeSet<String> = unseen
        .into_iter()
        .map(Into::into)
        .chain(candidates.unseen_languages().iter().cloned())
        .collect();
    if let Some(lang) = seen.intersection(&unseen).next() {
        return Err(PlanError::OverlappingLanguages(lang.clone()));
    }
    let targets: BTreeSet<&String> = seen.iter().chain(unseen.iter()).collect();

    let mut requests = Vec::new();
    for item in candidates.items() {
        let mut first_pivot = true;
        for &target in &targets {
            if *target == item.language {
                continue;
            }
            let kind = if seen.contains(target) { HopKind::Cross } else { HopKind::Forward };
            let back = kind == HopKind::Cross && (mode == BackMode::EveryPivot || first_pivot);
            if kind == HopKind::Cross {
                first_pivot = false;
            }
            let request = TranslationRequest::new(
                forward_id(&item.id, target),
                item.text.clone(),
                item.language.clone(),
                target.clone(),
            )?;
            requests.push(PlannedRequest {
                request,
                source_id: item.id.clone(),
                derived_label: item.label,
                kind,
                back,
            });
        }
    }
    Ok(TranslationPlan {
        seen: seen.into_iter().collect(),
        unseen: unseen.into_iter().collect(),
        mode,
        requests,
    })
}

/// A translated text carrying its weak label and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedExample {
    pub id: String,
    pub text: String,
    pub language: String,
    pub derived_label: f64,
    pub source_id: String,
    /// Languages traversed, starting at the gold item's language.
    pub path: Vec<String>,
}

impl AugmentedExample {
    pub fn is_back_translation(&self) -> bool {
        self.path.len() == 3
    }
}

/// Something that turns batches of requests into translated texts.
pub trait TranslationBackend {
    /// Translate one batch. The result has one text per request, in order.
    fn translate(&mut self, batch: &[TranslationRequest]) -> Result<Vec<String>, BackendError>;

    /// Translate several batches. Implementations may run them concurrently
    /// but must return results in input order. The default runs them one by
    /// one and stops after the first fatal error.
    fn translate_batches(&mut self, batches: &[&[TranslationRequest]]) -> Vec<Result<Vec<String>, BackendError>> {
        let mut out = Vec::with_capacity(batches.len());
        for batch in batches {
            let res = self.translate(batch);
            let fatal = matches!(&res, Err(e) if e.is_fatal());
            out.push(res);
            if fatal {
                break;
            }
        }
        out
    }
}

impl<T: TranslationBackend + ?Sized> TranslationBackend for &mut T {
    fn translate(&mut self, batch: &[TranslationRequest]) -> Result<Vec<String>, BackendError> {
        (**self).translate(batch)
    }

    fn translate_batches(&mut self, batches: &[&[TranslationRequest]]) -> Vec<Result<Vec<String>, BackendError>> {
        (**self).translate_batches(batches)
    }
}

/// Returns every text unchanged and keeps a record of what it was asked.
#[derive(Debug, Default)]
pub struct IdentityBackend {
    pub log: Vec<TranslationRequest>,
}

impl TranslationBackend for IdentityBackend {
    fn translate(&mut self, batch: &[TranslationRequest]) -> Result<Vec<String>, BackendError> {
        self.log.extend_from_slice(batch);
        Ok(batch.iter().map(|r| r.text.clone()).collect())
    }
}

/// Drops each whitespace-separated token with probability `q`.
///
/// Tokens are drawn from a single seeded stream in request order, so a run
/// is reproducible as long as requests arrive in the same order.
#[derive(Debug)]
pub struct NoisyBackend {
    drop_probability: f64,
    rng: ChaCha8Rng,
}

impl NoisyBackend {
    /// `q` is clamped into `[0, 1]`.
    pub fn new(q: f64, seed: u64) -> Self {
        let q = if q.is_nan() { 0.0 } else { q.clamp(0.0, 1.0) };
        NoisyBackend {
            drop_probability: q,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn degrade(&mut self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        for token in text.split_whitespace() {
            if self.rng.gen_bool(self.drop_probability) {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(token);
        }
        out
    }
}

impl TranslationBackend for NoisyBackend {
    fn translate(&mut self, batch: &[TranslationRequest]) -> Result<Vec<String>, BackendError> {
        Ok(batch.iter().map(|r| self.degrade(&r.text)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutionOptions {
    pub batch_size: usize,
    /// Abort after this many batches in a row fail with exhausted retries.
    pub max_consecutive_failures: usize,
}

impl Default for ExecutionOptions {
    fn default() -> Self {
        ExecutionOptions {
            batch_size: DEFAULT_BATCH_SIZE,
            max_consecutive_failures: 3,
        }
    }
}

/// A planned output whose translation came back empty.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateOutput {
    pub id: String,
    pub source_id: String,
    pub path: Vec<String>,
}

/// A planned output that could not be produced.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedOutput {
    pub id: String,
    pub source_id: String,
    pub path: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionOutcome {
    pub examples: Vec<AugmentedExample>,
    pub degenerate: Vec<DegenerateOutput>,
    pub failures: Vec<FailedOutput>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("translation aborted after {completed} outputs: {cause}")]
pub struct ExecuteError {
    pub completed: usize,
    pub cause: BackendError,
    pub partial: ExecutionOutcome,
}

enum HopResult {
    Done(String),
    Failed(String),
    Skipped,
}

struct HopRun {
    results: Vec<HopResult>,
    abort: Option<BackendError>,
}

fn run_hop<B: TranslationBackend>(backend: &mut B, requests: &[TranslationRequest], opts: &ExecutionOptions) -> HopRun {
    let ranges = batch_ranges(requests.len(), opts.batch_size);
    let batches: Vec<&[TranslationRequest]> = ranges.iter().map(|r| &requests[r.clone()]).collect();
    let answers = backend.translate_batches(&batches);

    let mut results = Vec::with_capacity(requests.len());
    let mut abort = None;
    let mut consecutive = 0usize;
    for (i, batch) in batches.iter().enumerate() {
        if abort.is_some() {
            results.extend(batch.iter().map(|_| HopResult::Skipped));
            continue;
        }
        let answer = match answers.get(i) {
            Some(Ok(texts)) if texts.len() != batch.len() => Err(BackendError::Protocol(format!(
                "expected {} translations, got {}",
                batch.len(),
                texts.len()
            ))),
            Some(a) => a.clone(),
            None => Err(BackendError::Protocol("batch not attempted".into())),
        };
        match answer {
            Ok(texts) => {
                consecutive = 0;
                results.extend(texts.into_iter().map(HopResult::Done));
            }
            Err(e) if !e.is_fatal() => {
                consecutive += 1;
                let reason = e.to_string();
                results.extend(batch.iter().map(|_| HopResult::Failed(reason.clone())));
                // a hop with fewer batches than the limit aborts when all of them fail
                if consecutive >= opts.max_consecutive_failures.max(1).min(batches.len()) {
                    abort = Some(e);
                }
            }
            Err(e) => {
                results.extend(batch.iter().map(|_| HopResult::Skipped));
                abort = Some(e);
            }
        }
    }
    HopRun { results, abort }
}

fn is_degenerate(text: &str) -> bool {
    text.trim().is_empty()
}

/// Run a plan against a backend.
///
/// First hops run before back translations. Empty outputs are excluded and
/// reported as degenerate; batches whose retries ran out are reported as
/// failures. A fatal backend error, or too many failing batches in a row,
/// aborts the run and hands back everything completed so far.
pub fn execute_plan<B: TranslationBackend>(
    plan: &TranslationPlan,
    mut backend: B,
    opts: &ExecutionOptions,
) -> Result<ExecutionOutcome, ExecuteError> {
    let first: Vec<TranslationRequest> = plan.requests.iter().map(|p| p.request.clone()).collect();
    let first_run = run_hop(&mut backend, &first, opts);

    let mut back_index = Vec::new();
    let mut back_requests = Vec::new();
    if first_run.abort.is_none() {
        for (i, planned) in plan.requests.iter().enumerate() {
            if let (true, HopResult::Done(text)) = (planned.back, &first_run.results[i]) {
                if !is_degenerate(text) {
                    back_index.push(i);
                    back_requests.push(planned.back_request(text));
                }
            }
        }
    }
    let back_run = run_hop(&mut backend, &back_requests, opts);
    let mut back_results: Vec<Option<HopResult>> = (0..plan.requests.len()).map(|_| None).collect();
    for (slot, result) in back_index.into_iter().zip(back_run.results) {
        back_results[slot] = Some(result);
    }

    let mut outcome = ExecutionOutcome::default();
    for (i, planned) in plan.requests.iter().enumerate() {
        let r = &planned.request;
        let path = alloc::vec![r.source.clone(), r.target.clone()];
        let first_ok = record(&mut outcome, planned, r.id.clone(), path, &first_run.results[i]);
        if !planned.back {
            continue;
        }
        let id = back_id(&planned.source_id, &r.target, &r.source);
        let path = alloc::vec![r.source.clone(), r.target.clone(), r.source.clone()];
        match (&back_results[i], first_ok) {
            (Some(result), _) => {
                record(&mut outcome, planned, id, path, result);
            }
            (None, FirstHop::Degenerate) => outcome.degenerate.push(DegenerateOutput {
                id,
                source_id: planned.source_id.clone(),
                path,
            }),
            (None, FirstHop::Failed(reason)) => outcome.failures.push(FailedOutput {
                id,
                source_id: planned.source_id.clone(),
                path,
                reason: format!("pivot translation failed: {reason}"),
            }),
            (None, _) => {}
        }
    }

    match first_run.abort.or(back_run.abort) {
        None => Ok(outcome),
        Some(cause) => Err(ExecuteError {
            completed: outcome.examples.len(),
            cause,
            partial: outcome,
        }),
    }
}

enum FirstHop {
    Ok,
    Degenerate,
    Failed(String),
    Skipped,
}

fn record(
    outcome: &mut ExecutionOutcome,
    planned: &PlannedRequest,
    id: String,
    path: Vec<String>,
    result: &HopResult,
) -> FirstHop {
    match result {
        HopResult::Done(text) if is_degenerate(text) => {
            outcome.degenerate.push(DegenerateOutput {
                id,
                source_id: planned.source_id.clone(),
                path,
            });
            FirstHop::Degenerate
        }
        HopResult::Done(text) => {
            outcome.examples.push(AugmentedExample {
                id,
                text: text.clone(),
                language: path.last().cloned().unwrap_or_default(),
                derived_label: planned.derived_label,
                source_id: planned.source_id.clone(),
                path,
            });
            FirstHop::Ok
        }
        HopResult::Failed(reason) => {
            outcome.failures.push(FailedOutput {
                id,
                source_id: planned.source_id.clone(),
                path,
                reason: reason.clone(),
            });
            FirstHop::Failed(reason.clone())
        }
        HopResult::Skipped => FirstHop::Skipped,
    }
}
