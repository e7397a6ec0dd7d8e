//! Stage-by-stage pipeline with on-disk artifacts and manifests.
//!
//! Each stage writes its files under `{output_dir}/{stage}/` together with a
//! `manifest.json` recording a hash of the configuration the stage depends
//! on and the SHA-256 of every input and output file. A stage whose
//! manifest matches the current configuration and inputs is skipped. A
//! manifest written under a different configuration is an error unless the
//! run is forced, so artifacts from two runs are never mixed silently.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use wader_core::evaluator::{evaluate, split, EvaluationReport, GroupMode};
use wader_core::sampler::{sample_candidates, SamplingConfig};
use wader_core::scorer::{predict, NgramRegressor, ScoreItem, ScorerBackend};
use wader_core::translator::{
    build_plan_for, execute_plan, ExecutionOptions, ExecutionOutcome, IdentityBackend, NoisyBackend,
    TranslationBackend,
};
use wader_core::validator::{
    assemble_training_set, dedup_translations, difference_stats, select_by_difference, validate, ValidatedExample,
    ValidationConfig,
};
use wader_core::{ensemble_mean, Corpus, PredictionFile};

use crate::config::{beta_name, hash_json, PipelineConfig, ScorerBackendKind, TranslationBackendKind};
use crate::error::{CliError, Result};
use crate::formats::{self, FormatError};
use crate::http::{HttpScorer, HttpTranslator};
use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Stats,
    Sample,
    Translate,
    Validate,
    Select,
    Assemble,
    TrainReference,
    Predict,
    Evaluate,
    Ensemble,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Stats,
        Stage::Sample,
        Stage::Translate,
        Stage::Validate,
        Stage::Select,
        Stage::Assemble,
        Stage::TrainReference,
        Stage::Predict,
        Stage::Evaluate,
        Stage::Ensemble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Stats => "stats",
            Stage::Sample => "sample",
            Stage::Translate => "translate",
            Stage::Validate => "validate",
            Stage::Select => "select",
            Stage::Assemble => "assemble",
            Stage::TrainReference => "train-reference",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
            Stage::Ensemble => "ensemble",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Executed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub const MANIFEST: &str = "manifest.json";
const BASELINE: &str = "baseline";

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn write(path: &Path, content: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, content).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    write(path, s)
}

fn artifact_err(path: &Path, e: FormatError) -> CliError {
    CliError::upstream(format!("cannot load artifact {}: {e}", path.display()))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Re-run stages even when their manifest was written under another
    /// configuration.
    pub force: bool,
}

pub struct Pipeline {
    config: PipelineConfig,
    root: PathBuf,
    options: RunOptions,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, options: RunOptions) -> Result<Self> {
        config.validate()?;
        let root = config.output_dir.clone();
        Ok(Pipeline { config, root, options })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.name())
    }

    fn path(&self, stage: Stage, file: &str) -> PathBuf {
        self.stage_dir(stage).join(file)
    }

    fn beta_names(&self) -> Vec<String> {
        self.config.betas.iter().map(|&b| beta_name(b)).collect()
    }

    fn models(&self) -> Vec<String> {
        std::iter::once(BASELINE.to_string()).chain(self.beta_names()).collect()
    }

    fn ensembles(&self) -> Vec<crate::config::EnsembleSpec> {
        if self.config.ensembles.is_empty() {
            vec![crate::config::EnsembleSpec {
                name: "ensemble-betas".into(),
                members: self.beta_names(),
            }]
        } else {
            self.config.ensembles.clone()
        }
    }

    /// Input files of a stage, keyed by a name that does not depend on where
    /// the output directory lives.
    fn inputs(&self, stage: Stage) -> Vec<(String, PathBuf)> {
        let up = |s: Stage, f: &str| (format!("{}/{f}", s.name()), self.path(s, f));
        let betas = self.beta_names();
        match stage {
            Stage::Ingest => vec![("corpus".into(), self.config.corpus_path().to_path_buf())],
            Stage::Stats => vec![up(Stage::Ingest, "corpus.tsv")],
            Stage::Sample => vec![up(Stage::Ingest, "train.tsv")],
            Stage::Translate => vec![up(Stage::Sample, "candidates.tsv"), up(Stage::Ingest, "train.tsv")],
            Stage::Validate => vec![up(Stage::Translate, "augmented.tsv"), up(Stage::Ingest, "train.tsv")],
            Stage::Select => vec![up(Stage::Validate, "validated.tsv")],
            Stage::Assemble => std::iter::once(up(Stage::Ingest, "train.tsv"))
                .chain(betas.iter().map(|b| up(Stage::Select, &format!("{b}.tsv"))))
                .collect(),
            Stage::TrainReference => std::iter::once(up(Stage::Ingest, "train.tsv"))
                .chain(betas.iter().map(|b| up(Stage::Assemble, &format!("{b}.tsv"))))
                .collect(),
            Stage::Predict => std::iter::once(up(Stage::Ingest, "validation.tsv"))
                .chain(self.models().iter().map(|m| up(Stage::TrainReference, &format!("{m}.bin"))))
                .collect(),
            Stage::Evaluate => [up(Stage::Ingest, "validation.tsv"), up(Stage::Ingest, "corpus.tsv")]
                .into_iter()
                .chain(self.models().iter().map(|m| up(Stage::Predict, &format!("{m}.tsv"))))
                .collect(),
            Stage::Ensemble => {
                let members: BTreeSet<String> = self.ensembles().into_iter().flat_map(|e| e.members).collect();
                [up(Stage::Ingest, "validation.tsv"), up(Stage::Ingest, "corpus.tsv")]
                    .into_iter()
                    .chain(members.iter().map(|m| up(Stage::Predict, &format!("{m}.tsv"))))
                    .collect()
            }
        }
    }

    /// The part of the configuration a stage's output depends on.
    fn stage_config(&self, stage: Stage) -> Value {
        let c = &self.config;
        match stage {
            Stage::Ingest => json!({"unseen": c.unseen(), "fraction": c.validation_fraction, "seed": c.seed}),
            Stage::Stats => json!({"bin_width": c.histogram_bin_width}),
            Stage::Sample => json!({"threshold_p": c.threshold_p, "inclusive": c.boundary_inclusive}),
            Stage::Translate => {
                let t = &c.translation;
                json!({
                    "backend": t.backend, "http_url": t.http_url, "noise_q": t.noise_q,
                    "single_back": t.single_back, "batch_size": t.batch_size,
                    "unseen": c.unseen(), "seed": c.seed,
                })
            }
            Stage::Validate => {
                let s = &c.scorer;
                json!({"backend": s.backend, "http_url": s.http_url, "l2": s.l2, "seed": c.seed})
            }
            Stage::Select | Stage::Assemble | Stage::Predict => json!({"betas": c.betas}),
            Stage::TrainReference => json!({"betas": c.betas, "l2": c.scorer.l2, "seed": c.seed}),
            Stage::Evaluate => json!({"betas": c.betas, "group_mode": c.group_mode, "unseen": c.unseen()}),
            Stage::Ensemble => json!({
                "ensembles": self.ensembles(), "group_mode": c.group_mode, "unseen": c.unseen(),
            }),
        }
    }

    fn upstream_of(&self, key: &str) -> &'static str {
        key.split('/').next().and_then(Stage::from_name).map(Stage::name).unwrap_or("ingest")
    }

    fn read_manifest(&self, stage: Stage) -> Result<Option<Manifest>> {
        let path = self.path(stage, MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::upstream(format!("corrupt manifest {}: {e}", path.display())))
    }

    fn outputs_intact(&self, stage: Stage, manifest: &Manifest) -> Result<bool> {
        for (file, hash) in &manifest.outputs {
            let p = self.path(stage, file);
            if !p.exists() || &sha256_file(&p)? != hash {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Run one stage unless its artifacts are already current.
    pub fn run_stage(&self, stage: Stage) -> Result<StageStatus> {
        let mut input_hashes = BTreeMap::new();
        for (key, path) in self.inputs(stage) {
            if !path.exists() {
                let msg = if stage == Stage::Ingest {
                    return Err(CliError::invalid(format!("corpus file {} does not exist", path.display())));
                } else {
                    format!(
                        "stage {stage} needs {} which is missing; run stage {} first",
                        path.display(),
                        self.upstream_of(&key)
                    )
                };
                return Err(CliError::upstream(msg));
            }
            input_hashes.insert(key, sha256_file(&path)?);
        }
        let config_hash = hash_json(&self.stage_config(stage));

        if let Some(m) = self.read_manifest(stage)? {
            if m.config_hash != config_hash && !self.options.force {
                return Err(CliError::upstream(format!(
                    "{} was produced under a different configuration; refusing to mix runs \
                     (use another output directory or --force)",
                    self.stage_dir(stage).display()
                )));
            }
            if m.config_hash == config_hash && m.inputs == input_hashes && self.outputs_intact(stage, &m)? {
                info!("stage {stage}: up to date");
                return Ok(StageStatus::Skipped);
            }
        }

        let dir = self.stage_dir(stage);
        self.clear_stage_dir(&dir)?;
        info!("stage {stage}: running");
        let outputs = self.execute(stage, &input_hashes)?;
        let mut output_hashes = BTreeMap::new();
        for file in outputs {
            output_hashes.insert(file.clone(), sha256_file(&dir.join(&file))?);
        }
        let manifest = Manifest {
            stage: stage.name().into(),
            config_hash,
            inputs: input_hashes,
            outputs: output_hashes,
        };
        write_json(&dir.join(MANIFEST), &serde_json::to_value(&manifest).expect("manifest serializes"))?;
        Ok(StageStatus::Executed)
    }

    /// Run every stage in order.
    pub fn run_all(&self) -> Result<Vec<(Stage, StageStatus)>> {
        Stage::ALL.iter().map(|&s| self.run_stage(s).map(|st| (s, st))).collect()
    }

    // Partial validation results survive a clear so a failed run can resume.
    fn clear_stage_dir(&self, dir: &Path) -> Result<()> {
        if !dir.exists() {
            return fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e));
        }
        for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
            let entry = entry.map_err(|e| CliError::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().to_string();
            if name.starts_with("partial.") {
                continue;
            }
            let p = entry.path();
            let res = if p.is_dir() { fs::remove_dir_all(&p) } else { fs::remove_file(&p) };
            res.map_err(|e| CliError::io(&p, e))?;
        }
        Ok(())
    }

    // Assembled sets hold translations into unseen languages, so only
    // ingest artifacts carry the unseen list.
    fn load_corpus_artifact(&self, stage: Stage, file: &str) -> Result<Corpus> {
        let p = self.path(stage, file);
        let unseen = if stage == Stage::Ingest { self.config.unseen() } else { Vec::new() };
        formats::load_corpus(&p, &unseen).map_err(|e| artifact_err(&p, e))
    }

    fn execute(&self, stage: Stage, inputs: &BTreeMap<String, String>) -> Result<Vec<String>> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Stats => self.stats(),
            Stage::Sample => self.sample(),
            Stage::Translate => self.translate(),
            Stage::Validate => self.validate(inputs),
            Stage::Select => self.select(),
            Stage::Assemble => self.assemble(),
            Stage::TrainReference => self.train_reference(),
            Stage::Predict => self.predict(),
            Stage::Evaluate => self.evaluate(),
            Stage::Ensemble => self.ensemble(),
        }
    }

    fn ingest(&self) -> Result<Vec<String>> {
        let path = self.config.corpus_path();
        let corpus = formats::load_corpus(path, &self.config.unseen())
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let parts = split(&corpus, self.config.validation_fraction, self.config.seed)
            .map_err(|e| CliError::invalid(e.to_string()))?;
        for w in &parts.warnings {
            warn!("{w}");
        }
        write(&self.path(Stage::Ingest, "corpus.tsv"), formats::render_corpus(&corpus, b'\t'))?;
        write(&self.path(Stage::Ingest, "train.tsv"), formats::render_corpus(&parts.train, b'\t'))?;
        write(&self.path(Stage::Ingest, "validation.tsv"), formats::render_corpus(&parts.validation, b'\t'))?;
        write_json(
            &self.path(Stage::Ingest, "split.json"),
            &json!({
                "items": corpus.len(),
                "train": parts.train.len(),
                "validation": parts.validation.len(),
                "warnings": parts.warnings,
            }),
        )?;
        Ok(vec!["corpus.tsv".into(), "train.tsv".into(), "validation.tsv".into(), "split.json".into()])
    }

    fn stats(&self) -> Result<Vec<String>> {
        let corpus = self.load_corpus_artifact(Stage::Ingest, "corpus.tsv")?;
        let stats = corpus.describe().map_err(|e| CliError::invalid(e.to_string()))?;
        let width = self.config.histogram_bin_width;
        let hist = corpus.histogram(width).map_err(|e| CliError::invalid(e.to_string()))?;
        write_json(&self.path(Stage::Stats, "stats.json"), &report::stats_json(&stats, width, &hist))?;
        write(&self.path(Stage::Stats, "stats.txt"), report::stats_table(&stats))?;
        Ok(vec!["stats.json".into(), "stats.txt".into()])
    }

    fn sample(&self) -> Result<Vec<String>> {
        let train = self.load_corpus_artifact(Stage::Ingest, "train.tsv")?;
        let cfg = SamplingConfig::new(self.config.threshold_p, self.config.boundary_inclusive)
            .map_err(|e| CliError::invalid(e.to_string()))?;
        let candidates = sample_candidates(&train, &cfg);
        info!("sampled {} of {} items at p = {}", candidates.len(), train.len(), cfg.threshold_p());
        write(&self.path(Stage::Sample, "candidates.tsv"), formats::render_corpus(&candidates, b'\t'))?;
        Ok(vec!["candidates.tsv".into()])
    }

    fn translation_backend(&self) -> Box<dyn TranslationBackend> {
        let t = &self.config.translation;
        match t.backend {
            TranslationBackendKind::MockIdentity => Box::new(IdentityBackend::default()),
            TranslationBackendKind::MockNoisy => Box::new(NoisyBackend::new(t.noise_q, self.config.seed)),
            TranslationBackendKind::Http => Box::new(HttpTranslator::new(
                t.http_url.as_deref().unwrap_or_default(),
                t.retry.policy(),
                t.max_in_flight,
            )),
        }
    }

    fn translation_report(&self, planned: usize, outcome: &ExecutionOutcome, aborted: Option<&str>) -> Value {
        let degenerate: Vec<Value> = outcome
            .degenerate
            .iter()
            .map(|d| json!({"id": d.id, "source_id": d.source_id, "path": d.path.join(">")}))
            .collect();
        let failures: Vec<Value> = outcome
            .failures
            .iter()
            .map(|f| json!({"id": f.id, "source_id": f.source_id, "path": f.path.join(">"), "reason": f.reason}))
            .collect();
        json!({
            "planned": planned,
            "produced": outcome.examples.len(),
            "degenerate_count": outcome.degenerate.len(),
            "failure_count": outcome.failures.len(),
            "aborted": aborted,
            "degenerate": degenerate,
            "failures": failures,
        })
    }

    fn translate(&self) -> Result<Vec<String>> {
        let candidates = self.load_corpus_artifact(Stage::Sample, "candidates.tsv")?;
        let train = self.load_corpus_artifact(Stage::Ingest, "train.tsv")?;
        let outcome = if candidates.is_empty() {
            warn!("no candidates above the threshold; nothing to translate");
            Ok((0, ExecutionOutcome::default()))
        } else {
            let plan = build_plan_for(
                &candidates,
                train.seen_languages().iter().cloned(),
                self.config.unseen(),
                self.config.translation.back_mode(),
            )
            .map_err(|e| CliError::invalid(e.to_string()))?;
            let opts = ExecutionOptions {
                batch_size: self.config.translation.batch_size,
                ..ExecutionOptions::default()
            };
            info!("translation plan: {} outputs", plan.output_count());
            execute_plan(&plan, &mut *self.translation_backend(), &opts)
                .map(|o| (plan.output_count(), o))
                .map_err(|e| (plan.output_count(), e))
        };
        match outcome {
            Ok((planned, outcome)) => {
                for d in &outcome.degenerate {
                    info!("degenerate translation excluded: {}", d.id);
                }
                write(&self.path(Stage::Translate, "augmented.tsv"), formats::render_augmented(&outcome.examples))?;
                write_json(
                    &self.path(Stage::Translate, "report.json"),
                    &self.translation_report(planned, &outcome, None),
                )?;
                Ok(vec!["augmented.tsv".into(), "report.json".into()])
            }
            Err((planned, e)) => {
                write(
                    &self.path(Stage::Translate, "partial.augmented.tsv"),
                    formats::render_augmented(&e.partial.examples),
                )?;
                let cause = e.cause.to_string();
                write_json(
                    &self.path(Stage::Translate, "partial.report.json"),
                    &self.translation_report(planned, &e.partial, Some(&cause)),
                )?;
                Err(CliError::Backend {
                    context: format!(
                        "translation aborted after {} of {planned} outputs (partial results in {})",
                        e.completed,
                        self.stage_dir(Stage::Translate).display()
                    ),
                    source: e.cause,
                })
            }
        }
    }

    fn validation_scorer(&self) -> Result<(Box<dyn ScorerBackend>, Option<NgramRegressor>)> {
        let s = &self.config.scorer;
        match s.backend {
            ScorerBackendKind::Reference => {
                let train = self.load_corpus_artifact(Stage::Ingest, "train.tsv")?;
                let model = NgramRegressor::train_reference(&train, s.l2, self.config.seed)
                    .map_err(|e| CliError::invalid(format!("cannot train the validation scorer: {e}")))?;
                Ok((Box::new(model.clone()), Some(model)))
            }
            ScorerBackendKind::Http => Ok((
                Box::new(HttpScorer::new(s.http_url.as_deref().unwrap_or_default(), s.retry.policy())),
                None,
            )),
        }
    }

    fn validate(&self, inputs: &BTreeMap<String, String>) -> Result<Vec<String>> {
        let augmented_path = self.path(Stage::Translate, "augmented.tsv");
        let augmented = formats::load_augmented(&augmented_path).map_err(|e| artifact_err(&augmented_path, e))?;
        let (examples, removed) = dedup_translations(augmented);
        if removed > 0 {
            info!("removed {removed} duplicate (text, language) translations");
        }

        // resume from an earlier failed run over the same inputs
        let cursor_path = self.path(Stage::Validate, "partial.cursor.json");
        let partial_path = self.path(Stage::Validate, "partial.validated.tsv");
        let resume_key = hash_json(&json!({"inputs": inputs, "config": self.stage_config(Stage::Validate)}));
        let mut done: Vec<ValidatedExample> = Vec::new();
        if let (Ok(cursor), true) = (fs::read_to_string(&cursor_path), partial_path.exists()) {
            let cursor: Value = serde_json::from_str(&cursor).unwrap_or(Value::Null);
            if cursor["key"] == json!(resume_key) {
                done = formats::load_validated(&partial_path).map_err(|e| artifact_err(&partial_path, e))?;
                info!("resuming validation at example {}", done.len());
            }
        }
        let done_ids: Vec<&str> = done.iter().map(|v| v.example.id.as_str()).collect();
        let resumable = done.len() <= examples.len()
            && examples.iter().zip(&done_ids).all(|(e, id)| e.id == *id);
        if !resumable {
            done.clear();
        }

        let (mut scorer, model) = self.validation_scorer()?;
        let mut outputs = Vec::new();
        if let Some(model) = model {
            write(&self.path(Stage::Validate, "scorer.bin"), model.to_bytes())?;
            outputs.push("scorer.bin".to_string());
        }
        let validated = match validate(&examples[done.len()..], &mut *scorer) {
            Ok(v) => {
                done.extend(v);
                done
            }
            Err(e) => {
                done.extend(e.completed);
                write(&partial_path, formats::render_validated(&done))?;
                write_json(&cursor_path, &json!({"key": resume_key, "cursor": done.len()}))?;
                return Err(CliError::Backend {
                    context: format!(
                        "validation stopped at example {} of {} (progress saved; rerun to resume)",
                        done.len(),
                        examples.len()
                    ),
                    source: e.source.cause,
                });
            }
        };
        let _ = fs::remove_file(&partial_path);
        let _ = fs::remove_file(&cursor_path);

        write(&self.path(Stage::Validate, "validated.tsv"), formats::render_validated(&validated))?;
        let stats = match difference_stats(&validated) {
            Ok(s) => report::difference_json(&s, removed),
            Err(_) => json!({"count": 0, "duplicates_removed": removed}),
        };
        write_json(&self.path(Stage::Validate, "differences.json"), &stats)?;
        outputs.extend(["validated.tsv".to_string(), "differences.json".to_string()]);
        Ok(outputs)
    }

    fn select(&self) -> Result<Vec<String>> {
        let p = self.path(Stage::Validate, "validated.tsv");
        let validated = formats::load_validated(&p).map_err(|e| artifact_err(&p, e))?;
        let mut outputs = Vec::new();
        let mut counts = serde_json::Map::new();
        for &beta in &self.config.betas {
            let cfg = ValidationConfig::new(beta).map_err(|e| CliError::invalid(e.to_string()))?;
            let selected = select_by_difference(&validated, &cfg);
            let name = format!("{}.tsv", beta_name(beta));
            write(&self.path(Stage::Select, &name), formats::render_validated(&selected))?;
            counts.insert(beta_name(beta), json!(selected.len()));
            outputs.push(name);
        }
        write_json(
            &self.path(Stage::Select, "counts.json"),
            &json!({"validated": validated.len(), "selected": counts}),
        )?;
        outputs.push("counts.json".into());
        Ok(outputs)
    }

    fn assemble(&self) -> Result<Vec<String>> {
        let gold = self.load_corpus_artifact(Stage::Ingest, "train.tsv")?;
        let mut outputs = Vec::new();
        for name in self.beta_names() {
            let p = self.path(Stage::Select, &format!("{name}.tsv"));
            let selected = formats::load_validated(&p).map_err(|e| artifact_err(&p, e))?;
            let assembled = assemble_training_set(&gold, &selected)
                .map_err(|e| CliError::upstream(format!("cannot assemble {name}: {e}")))?;
            let file = format!("{name}.tsv");
            write(&self.path(Stage::Assemble, &file), formats::render_corpus(&assembled, b'\t'))?;
            outputs.push(file);
        }
        Ok(outputs)
    }

    fn train_reference(&self) -> Result<Vec<String>> {
        let mut sets = vec![(BASELINE.to_string(), self.load_corpus_artifact(Stage::Ingest, "train.tsv")?)];
        for name in self.beta_names() {
            let corpus = self.load_corpus_artifact(Stage::Assemble, &format!("{name}.tsv"))?;
            sets.push((name, corpus));
        }
        let mut outputs = Vec::new();
        for (name, corpus) in sets {
            let model = NgramRegressor::train_reference(&corpus, self.config.scorer.l2, self.config.seed)
                .map_err(|e| CliError::invalid(format!("cannot train {name}: {e}")))?;
            let file = format!("{name}.bin");
            write(&self.path(Stage::TrainReference, &file), model.to_bytes())?;
            outputs.push(file);
        }
        Ok(outputs)
    }

    fn predict(&self) -> Result<Vec<String>> {
        let validation = self.load_corpus_artifact(Stage::Ingest, "validation.tsv")?;
        let items: Vec<ScoreItem> = validation
            .items()
            .iter()
            .map(|i| ScoreItem::new(i.id.clone(), i.text.clone(), i.language.clone()))
            .collect();
        let mut outputs = Vec::new();
        for name in self.models() {
            let p = self.path(Stage::TrainReference, &format!("{name}.bin"));
            let bytes = fs::read(&p).map_err(|e| CliError::io(&p, e))?;
            let model = NgramRegressor::from_bytes(&bytes)
                .map_err(|e| CliError::upstream(format!("{}: {e}", p.display())))?;
            let preds = predict(model, &items).map_err(|e| CliError::Backend {
                context: format!("prediction with {name} failed"),
                source: e.cause,
            })?;
            let file = format!("{name}.tsv");
            write(&self.path(Stage::Predict, &file), formats::render_predictions(&PredictionFile::from(preds)))?;
            outputs.push(file);
        }
        Ok(outputs)
    }

    fn language_groups(&self) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
        let corpus = self.load_corpus_artifact(Stage::Ingest, "corpus.tsv")?;
        let unseen: BTreeSet<String> = self.config.unseen().into_iter().collect();
        Ok((corpus.seen_languages().clone(), unseen))
    }

    fn score_systems(&self, systems: &[(String, PredictionFile)]) -> Result<Vec<(String, EvaluationReport)>> {
        let gold = self.load_corpus_artifact(Stage::Ingest, "validation.tsv")?;
        let (seen, unseen) = self.language_groups()?;
        let mode: GroupMode = self.config.group_mode.into();
        systems
            .iter()
            .map(|(name, preds)| {
                evaluate(preds, &gold, &seen, &unseen, mode)
                    .map(|r| (name.clone(), r))
                    .map_err(|e| CliError::upstream(format!("cannot evaluate {name}: {e}")))
            })
            .collect()
    }

    fn write_reports(&self, stage: Stage, systems: &[(String, EvaluationReport)]) -> Result<Vec<String>> {
        let (seen, unseen) = self.language_groups()?;
        write_json(&self.path(stage, "report.json"), &report::evaluation_json(systems, &seen, &unseen))?;
        write(&self.path(stage, "report.txt"), report::evaluation_table(systems, &seen, &unseen))?;
        Ok(vec!["report.json".into(), "report.txt".into()])
    }

    fn load_prediction(&self, model: &str) -> Result<PredictionFile> {
        let p = self.path(Stage::Predict, &format!("{model}.tsv"));
        formats::load_predictions(&p).map_err(|e| artifact_err(&p, e))
    }

    fn evaluate(&self) -> Result<Vec<String>> {
        let systems = self
            .models()
            .into_iter()
            .map(|m| self.load_prediction(&m).map(|p| (m, p)))
            .collect::<Result<Vec<_>>>()?;
        let reports = self.score_systems(&systems)?;
        self.write_reports(Stage::Evaluate, &reports)
    }

    fn ensemble(&self) -> Result<Vec<String>> {
        let mut outputs = Vec::new();
        let mut systems = Vec::new();
        for spec in self.ensembles() {
            let members = spec
                .members
                .iter()
                .map(|m| self.load_prediction(m))
                .collect::<Result<Vec<_>>>()?;
            let mean = ensemble_mean(&members).map_err(|e| CliError::upstream(format!("ensemble {}: {e}", spec.name)))?;
            let file = format!("{}.tsv", spec.name);
            write(&self.path(Stage::Ensemble, &file), formats::render_predictions(&mean))?;
            outputs.push(file);
            systems.push((spec.name, mean));
        }
        let reports = self.score_systems(&systems)?;
        outputs.extend(self.write_reports(Stage::Ensemble, &reports)?);
        Ok(outputs)
    }
}
