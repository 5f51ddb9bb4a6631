//! Experiment runner: sample games from a master seed, run the configured
//! engine, score outputs against independent symbolic ground truth, and
//! persist resumable JSONL run records.

mod summary;

pub use summary::{
    render_summary_text, write_summary_csvs, summarize, ContrastivityRow, DepthRow,
    IterationsRow, Summary, SummaryOptions,
};

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::domain::{literal_truth, parse_utterance, AttributeSchema};
use crate::engine::{
    run_baseline, run_iterative, run_single_pass, ChatBackend, Contrastivity, GenerationResult,
    ProposerBackend, SemanticBackend,
};
use crate::game::{sample_game, ReferenceGame};
use crate::llm::{CacheMode, LlmChat, LlmClient, LlmConfig, LlmEvaluator, LlmProposer, PromptMode};
use crate::oracle::{OracleConfig, OracleEvaluator, OracleProposer};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Iterative,
    SinglePass,
    Baseline,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Iterative => "iterative",
            ModelKind::SinglePass => "single_pass",
            ModelKind::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iterative" | "im" => Ok(ModelKind::Iterative),
            "single_pass" | "single-pass" | "sp" => Ok(ModelKind::SinglePass),
            "baseline" => Ok(ModelKind::Baseline),
            other => Err(Error::InvalidConfig(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Oracle(OracleConfig),
    Llm(LlmBackendConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct LlmBackendConfig {
    #[serde(flatten)]
    pub llm: LlmConfig,
}

impl BackendConfig {
    pub fn name(&self) -> &'static str {
        match self {
            BackendConfig::Oracle(_) => "oracle",
            BackendConfig::Llm(_) => "llm",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub backend: BackendConfig,
    pub n_distractors: usize,
    /// Proposals per call; ignored by the baseline.
    pub n_samples: usize,
    pub n_games: usize,
    pub max_iterations: usize,
    pub master_seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub include_trace: bool,
}

fn default_jobs() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_distractors == 0 {
            return Err(Error::InvalidConfig("n_distractors must be >= 1".into()));
        }
        if self.n_games == 0 {
            return Err(Error::InvalidConfig("n_games must be >= 1".into()));
        }
        if self.model != ModelKind::Baseline && self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
        }
        if self.model == ModelKind::Iterative && self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if self.model == ModelKind::Baseline && matches!(self.backend, BackendConfig::Oracle(_)) {
            return Err(Error::InvalidConfig(
                "the baseline needs a chat backend; use --backend llm".into(),
            ));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be >= 1".into()));
        }
        match &self.backend {
            BackendConfig::Oracle(c) => c.validate(),
            BackendConfig::Llm(c) => c.llm.validate(),
        }
    }
}

/// Ground-truth scoring of one utterance against a game, via the symbolic
/// parser only; never consults the run's backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub contrastivity: Contrastivity,
    pub target_true: bool,
    pub parse_failed: bool,
}

pub fn ground_truth_contrastivity(
    schema: &AttributeSchema,
    utterance_text: &str,
    game: &ReferenceGame,
) -> GroundTruth {
    let n = game.n_distractors();
    match parse_utterance(schema, utterance_text) {
        Err(_) => GroundTruth {
            contrastivity: Contrastivity::new(0, n),
            target_true: false,
            parse_failed: true,
        },
        Ok(features) => {
            let false_of = game
                .distractors
                .iter()
                .filter(|d| !literal_truth(&features, d))
                .count();
            GroundTruth {
                contrastivity: Contrastivity::new(false_of, n),
                target_true: literal_truth(&features, &game.target),
                parse_failed: false,
            }
        }
    }
}

/// One persisted experiment outcome (a JSONL line).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunRecord {
    pub game_id: String,
    pub model: String,
    pub backend: String,
    pub n_distractors: usize,
    pub n_samples: usize,
    pub max_iterations: usize,
    pub master_seed: u64,
    pub game_seed: u64,
    pub final_utterance: String,
    pub gt_contrastivity: f64,
    pub gt_false_of: usize,
    pub gt_denominator: usize,
    pub gt_target_true: bool,
    pub parse_failed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model_contrastivity: Option<f64>,
    pub iterations_used: usize,
    /// Max ground-truth contrastivity among each iteration's candidates.
    pub per_iteration_max_gt: Vec<f64>,
    pub wall_ms: u64,
    pub proposer_calls: usize,
    pub evaluator_calls: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<serde_json::Value>,
}

/// Outcome of [`run_experiment`]: all records (ordered by game index) plus
/// the count of per-game failures.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub failures: usize,
    pub skipped: usize,
}

enum Backends {
    Oracle {
        proposer: OracleProposer,
        evaluator: OracleEvaluator,
    },
    Llm {
        proposer: LlmProposer,
        evaluator: LlmEvaluator,
        chat: LlmChat,
    },
}

fn build_backends(
    schema: &Arc<AttributeSchema>,
    model: ModelKind,
    backend: &BackendConfig,
) -> Result<Backends> {
    match backend {
        BackendConfig::Oracle(config) => Ok(Backends::Oracle {
            proposer: OracleProposer::new(schema.clone(), config.clone())?,
            evaluator: OracleEvaluator::new(schema.clone(), config.clone())?,
        }),
        BackendConfig::Llm(config) => {
            let client = Arc::new(LlmClient::new(config.llm.clone())?);
            let mode = match model {
                ModelKind::SinglePass => PromptMode::LeaveOut,
                _ => PromptMode::SingleDetail,
            };
            Ok(Backends::Llm {
                proposer: LlmProposer::new(client.clone(), mode),
                evaluator: LlmEvaluator::new(client.clone()),
                chat: LlmChat::new(client),
            })
        }
    }
}

fn run_engine(
    schema: &AttributeSchema,
    game: &ReferenceGame,
    config: &ExperimentConfig,
    backends: &Backends,
) -> Result<GenerationResult> {
    let (proposer, evaluator, chat): (
        Option<&dyn ProposerBackend>,
        Option<&dyn SemanticBackend>,
        Option<&dyn ChatBackend>,
    ) = match backends {
        Backends::Oracle {
            proposer,
            evaluator,
        } => (Some(proposer), Some(evaluator), None),
        Backends::Llm {
            proposer,
            evaluator,
            chat,
        } => (Some(proposer), Some(evaluator), Some(chat)),
    };
    match config.model {
        ModelKind::Iterative => run_iterative(
            schema,
            game,
            proposer.unwrap(),
            evaluator.unwrap(),
            config.n_samples,
            config.max_iterations,
        ),
        ModelKind::SinglePass => run_single_pass(
            schema,
            game,
            proposer.unwrap(),
            evaluator.unwrap(),
            config.n_samples,
        ),
        ModelKind::Baseline => {
            let chat = chat.ok_or_else(|| {
                Error::InvalidConfig("the baseline needs a chat backend".into())
            })?;
            run_baseline(schema, game, chat)
        }
    }
}

fn make_record(
    schema: &AttributeSchema,
    config: &ExperimentConfig,
    game: &ReferenceGame,
    game_seed: u64,
    outcome: Result<GenerationResult>,
    wall_ms: u64,
) -> RunRecord {
    let mut record = RunRecord {
        game_id: game.id.clone(),
        model: config.model.as_str().to_string(),
        backend: config.backend.name().to_string(),
        n_distractors: config.n_distractors,
        n_samples: config.n_samples,
        max_iterations: config.max_iterations,
        master_seed: config.master_seed,
        game_seed,
        final_utterance: String::new(),
        gt_contrastivity: 0.0,
        gt_false_of: 0,
        gt_denominator: config.n_distractors,
        gt_target_true: false,
        parse_failed: false,
        model_contrastivity: None,
        iterations_used: 0,
        per_iteration_max_gt: Vec::new(),
        wall_ms,
        proposer_calls: 0,
        evaluator_calls: 0,
        warning: None,
        error: None,
        trace: None,
    };
    match outcome {
        Err(e) => {
            record.error = Some(e.to_string());
        }
        Ok(result) => {
            let gt = ground_truth_contrastivity(schema, &result.final_utterance.text, game);
            record.final_utterance = result.final_utterance.text.clone();
            record.gt_contrastivity = gt.contrastivity.value();
            record.gt_false_of = gt.contrastivity.false_of;
            record.gt_denominator = gt.contrastivity.n_distractors;
            record.gt_target_true = gt.target_true;
            record.parse_failed = gt.parse_failed;
            record.model_contrastivity = result.final_contrastivity.map(|c| c.value());
            record.iterations_used = result.iterations_used;
            record.per_iteration_max_gt = result
                .trace
                .iter()
                .map(|t| {
                    t.candidates
                        .iter()
                        .map(|c| {
                            ground_truth_contrastivity(schema, &c.text, game)
                                .contrastivity
                                .value()
                        })
                        .fold(0.0f64, f64::max)
                })
                .collect();
            record.proposer_calls = result.proposer_calls;
            record.evaluator_calls = result.evaluator_calls;
            record.warning = result.warning.clone();
            if config.include_trace {
                record.trace = Some(trace_json(schema, &result));
            }
        }
    }
    record
}

/// JSON view of a generation result, full trace included.
pub fn trace_json(schema: &AttributeSchema, result: &GenerationResult) -> serde_json::Value {
    let iterations: Vec<serde_json::Value> = result
        .trace
        .iter()
        .map(|t| {
            serde_json::json!({
                "candidates": t.candidates.iter().map(|c| {
                    serde_json::json!({
                        "text": c.text,
                        "features": c.parsed.as_ref().map(|f| f.to_map(schema)),
                    })
                }).collect::<Vec<_>>(),
                "states": t.matrix.states,
                "cells": t.matrix.cells,
                "contrastivity": t.contrastivities.iter().map(|c| c.value()).collect::<Vec<_>>(),
                "survivors": t.survivors,
            })
        })
        .collect();
    serde_json::json!({
        "final_utterance": result.final_utterance.text,
        "final_contrastivity": result.final_contrastivity.map(|c| c.value()),
        "final_target_true": result.final_target_true,
        "iterations_used": result.iterations_used,
        "warning": result.warning,
        "iterations": iterations,
        "transcripts": result.transcripts,
    })
}

/// Game ids already present in a JSONL output (for resuming); unparseable
/// lines are ignored.
fn existing_ids(path: &Path) -> Result<HashSet<String>> {
    let mut ids = HashSet::new();
    if !path.exists() {
        return Ok(ids);
    }
    let file = std::fs::File::open(path)?;
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(record) = serde_json::from_str::<RunRecord>(&line) {
            ids.insert(record.game_id);
        }
    }
    Ok(ids)
}

/// Load all records from a JSONL file, skipping unparseable lines.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(record) = serde_json::from_str::<RunRecord>(&line) {
            records.push(record);
        }
    }
    Ok(records)
}

pub fn game_id(index: usize, seed: u64) -> String {
    format!("g{index:04}-{seed:016x}")
}

/// Run (or resume) an experiment, appending records to `output` as they
/// complete. Per-game failures are recorded and the run continues.
pub fn run_experiment(
    schema: &Arc<AttributeSchema>,
    config: &ExperimentConfig,
    output: Option<&Path>,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let backends = Arc::new(build_backends(schema, config.model, &config.backend)?);

    let done: HashSet<String> = match output {
        Some(path) => existing_ids(path)?,
        None => HashSet::new(),
    };
    let writer: Option<Mutex<std::fs::File>> = match output {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            Some(Mutex::new(
                OpenOptions::new().create(true).append(true).open(path)?,
            ))
        }
        None => None,
    };

    let pending: Vec<(usize, u64)> = (0..config.n_games)
        .map(|i| (i, derive_seed(config.master_seed, i as u64)))
        .filter(|(i, seed)| !done.contains(&game_id(*i, *seed)))
        .collect();
    let skipped = config.n_games - pending.len();

    let results: Mutex<Vec<(usize, RunRecord)>> = Mutex::new(Vec::with_capacity(pending.len()));
    let next = AtomicUsize::new(0);

    let worker = |_worker_id: usize| -> Result<()> {
        loop {
            let slot = next.fetch_add(1, Ordering::SeqCst);
            if slot >= pending.len() {
                return Ok(());
            }
            let (index, seed) = pending[slot];
            let record = run_one_game(schema, config, index, seed, &backends);
            if let Some(writer) = &writer {
                let line = serde_json::to_string(&record)?;
                let mut file = writer.lock().expect("writer lock poisoned");
                writeln!(file, "{line}")?;
            }
            results
                .lock()
                .expect("results lock poisoned")
                .push((index, record));
        }
    };

    if config.jobs <= 1 {
        worker(0)?;
    } else {
        std::thread::scope(|scope| -> Result<()> {
            let mut handles = Vec::new();
            for w in 0..config.jobs {
                handles.push(scope.spawn(move || worker(w)));
            }
            for handle in handles {
                handle
                    .join()
                    .map_err(|_| Error::InvalidConfig("worker thread panicked".into()))??;
            }
            Ok(())
        })?;
    }

    let mut indexed = results.into_inner().expect("results lock poisoned");
    indexed.sort_by_key(|(i, _)| *i);
    let records: Vec<RunRecord> = indexed.into_iter().map(|(_, r)| r).collect();
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    Ok(ExperimentOutcome {
        records,
        failures,
        skipped,
    })
}

fn run_one_game(
    schema: &Arc<AttributeSchema>,
    config: &ExperimentConfig,
    index: usize,
    seed: u64,
    backends: &Backends,
) -> RunRecord {
    let start = Instant::now();
    let game = match sample_game(schema, config.n_distractors, seed) {
        Ok(game) => game.with_id(game_id(index, seed)),
        Err(e) => {
            // Synthesize an error record with a placeholder game identity.
            return RunRecord {
                game_id: game_id(index, seed),
                model: config.model.as_str().to_string(),
                backend: config.backend.name().to_string(),
                n_distractors: config.n_distractors,
                n_samples: config.n_samples,
                max_iterations: config.max_iterations,
                master_seed: config.master_seed,
                game_seed: seed,
                final_utterance: String::new(),
                gt_contrastivity: 0.0,
                gt_false_of: 0,
                gt_denominator: config.n_distractors,
                gt_target_true: false,
                parse_failed: false,
                model_contrastivity: None,
                iterations_used: 0,
                per_iteration_max_gt: Vec::new(),
                wall_ms: start.elapsed().as_millis() as u64,
                proposer_calls: 0,
                evaluator_calls: 0,
                warning: None,
                error: Some(e.to_string()),
                trace: None,
            };
        }
    };
    let outcome = run_engine(schema, &game, config, backends);
    let wall_ms = start.elapsed().as_millis() as u64;
    make_record(schema, config, &game, seed, outcome, wall_ms)
}

/// Write sampled games as JSONL (one per line), for `generate-games`.
pub fn write_games(
    schema: &AttributeSchema,
    n_distractors: usize,
    n_games: usize,
    master_seed: u64,
    out: &mut dyn Write,
) -> Result<()> {
    for i in 0..n_games {
        let seed = derive_seed(master_seed, i as u64);
        let game = sample_game(schema, n_distractors, seed)?.with_id(game_id(i, seed));
        writeln!(out, "{}", crate::game::serialize_game(schema, &game)?)?;
    }
    Ok(())
}

/// Paths involved in a replayed experiment; forces the llm backend into
/// replay mode so no network is touched.
pub fn force_replay(config: &mut ExperimentConfig, cache_file: Option<PathBuf>) -> Result<()> {
    match &mut config.backend {
        BackendConfig::Llm(llm) => {
            llm.llm.cache_mode = CacheMode::Replay;
            if let Some(path) = cache_file {
                llm.llm.cache_file = Some(path);
            }
            if llm.llm.cache_file.is_none() {
                return Err(Error::InvalidConfig(
                    "replay needs a cache file (--cache-file or config)".into(),
                ));
            }
            Ok(())
        }
        BackendConfig::Oracle(_) => Err(Error::InvalidConfig(
            "replay applies to the llm backend only".into(),
        )),
    }
}
