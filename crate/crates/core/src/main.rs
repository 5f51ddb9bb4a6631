//! Command-line experiment runner.
//!
//! Subcommands: `generate-games`, `run`, `summarize`, `compare`, `replay`.
//! Exit codes: 0 success, 1 usage error, 2 backend failure, 3 partial run
//! with per-game errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use refgame::domain::AttributeSchema;
use refgame::harness::{
    self, force_replay, load_records, render_summary_text, run_experiment, summarize,
    write_summary_csvs, BackendConfig, ExperimentConfig, LlmBackendConfig, ModelKind,
    SummaryOptions,
};
use refgame::llm::{CacheMode, LlmConfig};
use refgame::oracle::{OracleConfig, ProposerMode};
use refgame::stats::compare_bootstrap_p;
use refgame::Error;

#[derive(Parser)]
#[command(name = "refgame", version, about = "Contrastive reference game experiments")]
struct Cli {
    /// Load an alternative attribute schema from a JSON file.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample reference games and write them as JSONL.
    GenerateGames(GenerateGamesArgs),
    /// Run an experiment and append run records as JSONL (resumable).
    Run(RunArgs),
    /// Summarize run records into condition tables.
    Summarize(SummarizeArgs),
    /// Compare the mean contrastivity of two run files.
    Compare(CompareArgs),
    /// Re-run a recorded llm experiment offline from its transcript cache.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct GenerateGamesArgs {
    #[arg(long, default_value_t = 4)]
    n_distractors: usize,
    #[arg(long, default_value_t = 100)]
    n_games: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSONL path (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config file mirroring these flags; flags override the file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Engine: iterative, single_pass, or baseline.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Backend: oracle or llm.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    n_distractors: Option<usize>,
    /// Proposals per call (iterative default 8, single-pass default 10).
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    n_games: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Concurrent games.
    #[arg(long)]
    jobs: Option<usize>,
    /// Include the full per-iteration trace in each record.
    #[arg(long)]
    trace: bool,
    /// Output JSONL path for run records.
    #[arg(long)]
    output: Option<PathBuf>,

    // Oracle backend flags.
    /// Oracle noise/proposal seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Probability of flipping an oracle truth verdict.
    #[arg(long)]
    oracle_eval_error: Option<f64>,
    /// single_feature, subsets_le2, or full_random.
    #[arg(long)]
    oracle_proposer_mode: Option<ProposerMode>,
    #[arg(long)]
    oracle_omission_rate: Option<f64>,

    // LLM backend flags.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent to the chat endpoint.
    #[arg(long)]
    llm_model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// off, record, or replay.
    #[arg(long)]
    cache: Option<CacheMode>,
    #[arg(long)]
    cache_file: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Run-record JSONL files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Also write CSV tables into this directory.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    n_boot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CompareArgs {
    /// Run records for condition A.
    #[arg(long)]
    a: PathBuf,
    /// Run records for condition B.
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    n_boot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReplayArgs {
    /// Experiment config JSON (as accepted/emitted by `run --config`).
    #[arg(long)]
    config: PathBuf,
    /// Transcript cache recorded by a previous run.
    #[arg(long)]
    cache_file: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not usage errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidSchema(_) | Error::ZeroDistractors => 1,
        _ => 2,
    }
}

fn load_schema(path: &Option<PathBuf>) -> Result<Arc<AttributeSchema>, Error> {
    match path {
        None => Ok(Arc::new(AttributeSchema::a3ds())),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Ok(Arc::new(AttributeSchema::from_json(&text)?))
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    let schema = load_schema(&cli.schema)?;
    match cli.command {
        Command::GenerateGames(args) => {
            match &args.output {
                Some(path) => {
                    let mut file = std::fs::File::create(path)?;
                    harness::write_games(
                        &schema,
                        args.n_distractors,
                        args.n_games,
                        args.seed,
                        &mut file,
                    )?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    harness::write_games(
                        &schema,
                        args.n_distractors,
                        args.n_games,
                        args.seed,
                        &mut lock,
                    )?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let output = args.output.clone();
            let config = build_experiment_config(&args)?;
            run_and_report(&schema, &config, output.as_deref())
        }
        Command::Summarize(args) => {
            let mut records = Vec::new();
            for input in &args.inputs {
                records.extend(load_records(input)?);
            }
            let summary = summarize(
                &records,
                &SummaryOptions {
                    n_boot: args.n_boot,
                    seed: args.seed,
                    ..SummaryOptions::default()
                },
            )?;
            print!("{}", render_summary_text(&summary));
            if let Some(dir) = &args.csv_dir {
                write_summary_csvs(&summary, dir)?;
                eprintln!("wrote CSV tables to {}", dir.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare(args) => {
            let a: Vec<f64> = load_records(&args.a)?
                .iter()
                .filter(|r| r.error.is_none())
                .map(|r| r.gt_contrastivity)
                .collect();
            let b: Vec<f64> = load_records(&args.b)?
                .iter()
                .filter(|r| r.error.is_none())
                .map(|r| r.gt_contrastivity)
                .collect();
            let cmp = compare_bootstrap_p(&a, &b, args.n_boot, args.seed)?;
            println!(
                "mean(a) = {:.4} (n = {}), mean(b) = {:.4} (n = {})",
                refgame::stats::mean(&a),
                a.len(),
                refgame::stats::mean(&b),
                b.len()
            );
            println!(
                "P(mean a > mean b) = {:.4}  tie fraction = {:.4}  ({} resamples)",
                cmp.p_greater, cmp.tie_fraction, args.n_boot
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay(args) => {
            let text = std::fs::read_to_string(&args.config)?;
            let mut config: ExperimentConfig = serde_json::from_str(&text)?;
            force_replay(&mut config, args.cache_file.clone())?;
            if let Some(jobs) = args.jobs {
                config.jobs = jobs;
            }
            run_and_report(&schema, &config, args.output.as_deref())
        }
    }
}

fn run_and_report(
    schema: &Arc<AttributeSchema>,
    config: &ExperimentConfig,
    output: Option<&std::path::Path>,
) -> Result<ExitCode, Error> {
    let outcome = run_experiment(schema, config, output)?;
    let completed = outcome.records.len();
    eprintln!(
        "{} games run ({} skipped as already present), {} failures",
        completed, outcome.skipped, outcome.failures
    );
    if output.is_none() {
        for record in &outcome.records {
            println!("{}", serde_json::to_string(record)?);
        }
    }
    if outcome.failures > 0 {
        Ok(ExitCode::from(3))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

/// Merge config-file values with CLI overrides into an ExperimentConfig.
fn build_experiment_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    // Partial mirror of ExperimentConfig for the config file, so the file
    // may omit any field that the CLI supplies.
    #[derive(serde::Deserialize, Default)]
    #[serde(default)]
    struct FileConfig {
        model: Option<ModelKind>,
        backend: Option<BackendConfig>,
        n_distractors: Option<usize>,
        n_samples: Option<usize>,
        n_games: Option<usize>,
        max_iterations: Option<usize>,
        master_seed: Option<u64>,
        jobs: Option<usize>,
        include_trace: Option<bool>,
    }

    let file: FileConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => FileConfig::default(),
    };

    let model = args
        .model
        .or(file.model)
        .ok_or_else(|| Error::InvalidConfig("--model is required (or set it in --config)".into()))?;

    // Backend: CLI name wins; otherwise the file's backend block; otherwise
    // the oracle.
    let backend_name = args.backend.clone().or(match &file.backend {
        Some(BackendConfig::Oracle(_)) => Some("oracle".into()),
        Some(BackendConfig::Llm(_)) => Some("llm".into()),
        None => None,
    });
    let backend_name = backend_name.unwrap_or_else(|| "oracle".into());

    let backend = match backend_name.as_str() {
        "oracle" => {
            let mut oracle = match &file.backend {
                Some(BackendConfig::Oracle(c)) => c.clone(),
                _ => OracleConfig::default(),
            };
            if let Some(seed) = args.seed {
                oracle.seed = seed;
            }
            if let Some(rate) = args.oracle_eval_error {
                oracle.eval_error_rate = rate;
            }
            if let Some(mode) = args.oracle_proposer_mode {
                oracle.proposer_mode = mode;
            }
            if let Some(rate) = args.oracle_omission_rate {
                oracle.proposer_omission_rate = rate;
            }
            BackendConfig::Oracle(oracle)
        }
        "llm" => {
            let mut llm = match &file.backend {
                Some(BackendConfig::Llm(c)) => c.llm.clone(),
                _ => LlmConfig::default(),
            };
            if let Some(endpoint) = &args.endpoint {
                llm.endpoint = endpoint.clone();
            }
            if let Some(model_name) = &args.llm_model {
                llm.model = model_name.clone();
            }
            if let Some(temperature) = args.temperature {
                llm.temperature = temperature;
            }
            if let Some(max_tokens) = args.max_tokens {
                llm.max_tokens = max_tokens;
            }
            if let Some(timeout) = args.timeout_secs {
                llm.timeout_secs = timeout;
            }
            if let Some(retries) = args.max_retries {
                llm.max_retries = retries;
            }
            if let Some(in_flight) = args.max_in_flight {
                llm.max_in_flight = in_flight;
            }
            if let Some(cache) = args.cache {
                llm.cache_mode = cache;
            }
            if let Some(cache_file) = &args.cache_file {
                llm.cache_file = Some(cache_file.clone());
            }
            BackendConfig::Llm(LlmBackendConfig { llm })
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown backend {other:?} (expected oracle or llm)"
            )))
        }
    };

    let default_samples = match model {
        ModelKind::SinglePass => 10,
        _ => 8,
    };
    Ok(ExperimentConfig {
        model,
        backend,
        n_distractors: args.n_distractors.or(file.n_distractors).unwrap_or(4),
        n_samples: args.n_samples.or(file.n_samples).unwrap_or(default_samples),
        n_games: args.n_games.or(file.n_games).unwrap_or(100),
        max_iterations: args.max_iterations.or(file.max_iterations).unwrap_or(5),
        master_seed: args.master_seed.or(file.master_seed).unwrap_or(0),
        jobs: args.jobs.or(file.jobs).unwrap_or(1),
        include_trace: args.trace || file.include_trace.unwrap_or(false),
    })
}
