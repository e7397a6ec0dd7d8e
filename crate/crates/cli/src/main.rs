use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use wader_cli::config::{GroupModeArg, PipelineConfig, ScorerBackendKind, TranslationBackendKind};
use wader_cli::error::{CliError, Result};
use wader_cli::formats::FormatError;
use wader_cli::{formats, report, Pipeline, RunOptions, Stage, StageStatus};
use wader_core::ensembler::EnsembleConfig;
use wader_core::evaluator::evaluate;
use wader_core::ensemble_mean;

#[derive(Parser, Debug)]
#[command(name = "wader", version, about = "Weak-labeled cross-lingual data augmentation for text regression")]
struct Cli {
    /// Print a machine-readable description of every command and exit.
    #[arg(long, global = true)]
    help_json: bool,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load the corpus and split it into train and validation parts.
    Ingest(Common),
    /// Per-language label statistics and histograms.
    Stats(Common),
    /// Select translation candidates from the training split.
    Sample(Common),
    /// Translate candidates into every other language.
    Translate(Common),
    /// Score translations and compute label differences.
    Validate(Common),
    /// Keep translations whose difference is within each β.
    Select(Common),
    /// Combine gold training data with each selected set.
    Assemble(Common),
    /// Train the reference regressor on the baseline and every β set.
    TrainReference(Common),
    /// Predict the validation split with every trained model.
    Predict(Common),
    /// Pearson correlations, overall and per language group.
    Evaluate(EvaluateArgs),
    /// Mean-ensemble prediction files.
    Ensemble(EnsembleArgs),
    /// Run every stage in order, skipping those already up to date.
    Pipeline(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Unseen language codes, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    unseen: Vec<String>,
    #[arg(long)]
    threshold_p: Option<f64>,
    #[arg(long)]
    boundary_inclusive: Option<bool>,
    /// Translation backend.
    #[arg(long, value_enum)]
    backend: Option<TranslationBackendKind>,
    #[arg(long)]
    http_url: Option<String>,
    /// Token drop probability of the mock-noisy backend.
    #[arg(long)]
    noise_q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Back-translate through the first pivot only.
    #[arg(long)]
    single_back: bool,
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Difference threshold; repeat for several.
    #[arg(long = "beta")]
    betas: Vec<f64>,
    #[arg(long, value_enum)]
    scorer_backend: Option<ScorerBackendKind>,
    #[arg(long)]
    scorer_url: Option<String>,
    /// Ridge penalty of the reference regressor.
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long, value_enum)]
    group_mode: Option<GroupModeArg>,
    /// Overwrite stage outputs produced under another configuration.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Prediction file to score directly instead of the pipeline stage; repeatable.
    #[arg(long = "predictions")]
    predictions: Vec<PathBuf>,
    /// Gold corpus for --predictions.
    #[arg(long, requires = "predictions")]
    gold: Option<PathBuf>,
    /// Write the JSON report here as well as printing the table.
    #[arg(long, requires = "predictions")]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[command(flatten)]
    common: Common,
    /// JSON file `{"name": …, "members": [paths]}`; paths are relative to it.
    #[arg(long, conflicts_with = "preset")]
    manifest: Option<PathBuf>,
    /// Standard ensemble `ensemble-1` … `ensemble-6`.
    #[arg(long, requires = "predictions_dir")]
    preset: Option<String>,
    /// Directory holding the preset's member files.
    #[arg(long)]
    predictions_dir: Option<PathBuf>,
    /// Output prediction file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = &c.corpus {
        cfg.corpus_path = Some(v.clone());
    }
    if let Some(v) = &c.output_dir {
        cfg.output_dir = v.clone();
    }
    if !c.unseen.is_empty() {
        cfg.unseen_languages = c.unseen.clone();
    }
    if let Some(v) = c.threshold_p {
        cfg.threshold_p = v;
    }
    if let Some(v) = c.boundary_inclusive {
        cfg.boundary_inclusive = v;
    }
    if let Some(v) = c.backend {
        cfg.translation.backend = v;
    }
    if let Some(v) = &c.http_url {
        cfg.translation.http_url = Some(v.clone());
    }
    if let Some(v) = c.noise_q {
        cfg.translation.noise_q = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if c.single_back {
        cfg.translation.single_back = true;
    }
    if let Some(v) = c.max_in_flight {
        cfg.translation.max_in_flight = v;
    }
    if !c.betas.is_empty() {
        cfg.betas = c.betas.clone();
    }
    if let Some(v) = c.scorer_backend {
        cfg.scorer.backend = v;
    }
    if let Some(v) = &c.scorer_url {
        cfg.scorer.http_url = Some(v.clone());
    }
    if let Some(v) = c.l2 {
        cfg.scorer.l2 = v;
    }
    if let Some(v) = c.group_mode {
        cfg.group_mode = v;
    }
    Ok(cfg)
}

// A closed stdout is not a failure.
fn say(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn input_err(path: &Path, e: FormatError) -> CliError {
    match e {
        FormatError::Io { source, .. } => CliError::io(path, source),
        other => CliError::invalid(format!("{}: {other}", path.display())),
    }
}

fn run_stages(common: &Common, stages: &[Stage]) -> Result<()> {
    let pipeline = Pipeline::new(build_config(common)?, RunOptions { force: common.force })?;
    for &stage in stages {
        let status = pipeline.run_stage(stage)?;
        let word = match status {
            StageStatus::Executed => "done",
            StageStatus::Skipped => "up to date",
        };
        say(&format!("{stage}: {word} ({})\n", pipeline.stage_dir(stage).display()));
    }
    Ok(())
}

fn standalone_evaluate(args: &EvaluateArgs) -> Result<()> {
    let gold_path = args
        .gold
        .as_ref()
        .ok_or_else(|| CliError::invalid("--predictions needs --gold"))?;
    let unseen: Vec<String> = args.common.unseen.iter().map(|l| l.trim().to_ascii_lowercase()).collect();
    let gold = formats::load_corpus(gold_path, &[]).map_err(|e| input_err(gold_path, e))?;
    let unseen: BTreeSet<String> = unseen.into_iter().collect();
    let seen: BTreeSet<String> = gold.seen_languages().iter().filter(|l| !unseen.contains(*l)).cloned().collect();
    let mode = args.common.group_mode.unwrap_or(GroupModeArg::Pooled).into();
    let mut systems = Vec::new();
    for p in &args.predictions {
        let preds = formats::load_predictions(p).map_err(|e| input_err(p, e))?;
        let name = p.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
        let r = evaluate(&preds, &gold, &seen, &unseen, mode).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?;
        systems.push((name, r));
    }
    say(&report::evaluation_table(&systems, &seen, &unseen));
    if let Some(out) = &args.json {
        let v = report::evaluation_json(&systems, &seen, &unseen);
        std::fs::write(out, serde_json::to_string_pretty(&v).expect("json") + "\n").map_err(|e| CliError::io(out, e))?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleManifest {
    name: String,
    members: Vec<PathBuf>,
}

fn standalone_ensemble(args: &EnsembleArgs) -> Result<()> {
    let out = args.out.as_ref().ok_or_else(|| CliError::invalid("--out is required"))?;
    let (name, members): (String, Vec<PathBuf>) = if let Some(m) = &args.manifest {
        let text = std::fs::read_to_string(m).map_err(|e| CliError::io(m, e))?;
        let man: EnsembleManifest =
            serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", m.display())))?;
        let base = m.parent().unwrap_or(Path::new(""));
        (man.name, man.members.iter().map(|p| base.join(p)).collect())
    } else {
        let preset = args.preset.as_deref().unwrap_or_default();
        let cfg = EnsembleConfig::preset(preset).ok_or_else(|| {
            CliError::invalid(format!("unknown preset {preset:?}; expected one of {:?}", EnsembleConfig::PRESETS))
        })?;
        let dir = args.predictions_dir.clone().unwrap_or_default();
        (cfg.name, cfg.members.iter().map(|f| dir.join(f)).collect())
    };
    EnsembleConfig::new(name.clone(), members.iter().map(|p| p.display().to_string()).collect())
        .map_err(|e| CliError::invalid(format!("{name}: {e}")))?;
    let files = members
        .iter()
        .map(|p| formats::load_predictions(p).map_err(|e| input_err(p, e)))
        .collect::<Result<Vec<_>>>()?;
    let mean = ensemble_mean(&files).map_err(|e| CliError::invalid(format!("{name}: {e}")))?;
    std::fs::write(out, formats::render_predictions(&mean)).map_err(|e| CliError::io(out, e))?;
    say(&format!("{name}: {} predictions from {} members -> {}\n", mean.len(), files.len(), out.display()));
    Ok(())
}

fn help_json() -> Value {
    let cmd = Cli::command();
    let describe_args = |c: &clap::Command| -> Vec<Value> {
        c.get_arguments()
            .filter(|a| a.get_id() != "help" && a.get_id() != "version")
            .map(|a| {
                json!({
                    "name": a.get_long().map(|l| format!("--{l}")).unwrap_or_else(|| a.get_id().to_string()),
                    "help": a.get_help().map(|h| h.to_string()),
                    "takes_value": a.get_action().takes_values(),
                    "possible_values": a.get_possible_values().iter().map(|v| v.get_name().to_string()).collect::<Vec<_>>(),
                })
            })
            .collect()
    };
    let commands: Vec<Value> = cmd
        .get_subcommands()
        .map(|s| json!({"name": s.get_name(), "about": s.get_about().map(|a| a.to_string()), "args": describe_args(s)}))
        .collect();
    json!({
        "name": cmd.get_name(),
        "version": cmd.get_version(),
        "exit_codes": {"0": "success", "1": "invalid configuration or data", "2": "missing or inconsistent upstream artifact, or IO failure", "3": "backend unavailable"},
        "commands": commands,
    })
}

fn run(cli: Cli) -> Result<()> {
    let Some(command) = cli.command else {
        Cli::command().print_help().ok();
        return Ok(());
    };
    match command {
        Command::Ingest(c) => run_stages(&c, &[Stage::Ingest]),
        Command::Stats(c) => run_stages(&c, &[Stage::Stats]),
        Command::Sample(c) => run_stages(&c, &[Stage::Sample]),
        Command::Translate(c) => run_stages(&c, &[Stage::Translate]),
        Command::Validate(c) => run_stages(&c, &[Stage::Validate]),
        Command::Select(c) => run_stages(&c, &[Stage::Select]),
        Command::Assemble(c) => run_stages(&c, &[Stage::Assemble]),
        Command::TrainReference(c) => run_stages(&c, &[Stage::TrainReference]),
        Command::Predict(c) => run_stages(&c, &[Stage::Predict]),
        Command::Evaluate(a) if !a.predictions.is_empty() => standalone_evaluate(&a),
        Command::Evaluate(a) => run_stages(&a.common, &[Stage::Evaluate]),
        Command::Ensemble(a) if a.manifest.is_some() || a.preset.is_some() => standalone_ensemble(&a),
        Command::Ensemble(a) => run_stages(&a.common, &[Stage::Ensemble]),
        Command::Pipeline(c) => run_stages(&c, &Stage::ALL),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.help_json {
        say(&(serde_json::to_string_pretty(&help_json()).expect("json") + "\n"));
        return ExitCode::SUCCESS;
    }
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
