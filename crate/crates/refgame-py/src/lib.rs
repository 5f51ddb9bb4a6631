//! Python bindings: the scene schema, game sampling, generation engines
//! with the oracle backend, ground-truth scoring, and bootstrap statistics.
//!
//! Structured results (runs with traces, games) are returned as JSON
//! strings; simple values map to native Python types.

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use refgame::domain::{
    literal_truth as domain_literal_truth, parse_utterance, render_description, render_features,
    AttributeSchema, FeatureSet, SceneState,
};
use refgame::engine::{
    contrastivity as engine_contrastivity, rsa_speaker as engine_rsa_speaker, run_iterative,
    run_single_pass, TruthMatrix, Utterance,
};
use refgame::game::{feature_diff as game_feature_diff, sample_game, GameRecord, ReferenceGame};
use refgame::harness::{ground_truth_contrastivity, trace_json};
use refgame::oracle::{OracleConfig, OracleEvaluator, OracleProposer, ProposerMode};
use refgame::stats;

fn to_py_err(e: refgame::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// The attribute space: names, lexicons, rendering and parsing.
#[pyclass]
struct Schema {
    inner: Arc<AttributeSchema>,
}

#[pymethods]
impl Schema {
    /// Build the default six-attribute schema, or load one from JSON.
    #[new]
    #[pyo3(signature = (json=None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            None => AttributeSchema::a3ds(),
            Some(text) => AttributeSchema::from_json(text).map_err(to_py_err)?,
        };
        Ok(Schema {
            inner: Arc::new(inner),
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn attribute_names(&self) -> Vec<String> {
        self.inner
            .attributes()
            .iter()
            .map(|a| a.name.clone())
            .collect()
    }

    fn state_count(&self) -> usize {
        self.inner.state_count()
    }

    /// Canonical full description of a complete assignment.
    fn render_description(&self, state: BTreeMap<String, String>) -> PyResult<String> {
        let state = SceneState::from_assignment(&self.inner, &state).map_err(to_py_err)?;
        render_description(&self.inner, &state).map_err(to_py_err)
    }

    /// Template-fragment rendering of a partial assignment.
    fn render_features(&self, features: BTreeMap<String, String>) -> PyResult<String> {
        let features = features_from_map(&self.inner, &features)?;
        render_features(&self.inner, &features).map_err(to_py_err)
    }

    /// Attribute-value mentions found in free text; None marks a parse
    /// failure (conflicting mentions for one attribute).
    fn parse_utterance(&self, text: &str) -> Option<BTreeMap<String, String>> {
        parse_utterance(&self.inner, text)
            .ok()
            .map(|f| f.to_map(&self.inner))
    }

    /// Subset truth of a partial assignment against a complete one.
    fn literal_truth(
        &self,
        features: BTreeMap<String, String>,
        state: BTreeMap<String, String>,
    ) -> PyResult<bool> {
        let features = features_from_map(&self.inner, &features)?;
        let state = SceneState::from_assignment(&self.inner, &state).map_err(to_py_err)?;
        Ok(domain_literal_truth(&features, &state))
    }

    /// Number of attributes two complete assignments disagree on.
    fn feature_diff(
        &self,
        a: BTreeMap<String, String>,
        b: BTreeMap<String, String>,
    ) -> PyResult<usize> {
        let a = SceneState::from_assignment(&self.inner, &a).map_err(to_py_err)?;
        let b = SceneState::from_assignment(&self.inner, &b).map_err(to_py_err)?;
        Ok(game_feature_diff(&a, &b))
    }

    fn __repr__(&self) -> String {
        format!(
            "Schema(attributes={}, states={})",
            self.inner.len(),
            self.inner.state_count()
        )
    }
}

fn features_from_map(
    schema: &AttributeSchema,
    map: &BTreeMap<String, String>,
) -> PyResult<FeatureSet> {
    let pairs: Vec<(&str, &str)> = map.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    FeatureSet::from_pairs(schema, &pairs).map_err(to_py_err)
}

/// One reference game: a target plus distinct distractors.
#[pyclass]
struct Game {
    schema: Arc<AttributeSchema>,
    inner: ReferenceGame,
}

#[pymethods]
impl Game {
    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn n_distractors(&self) -> usize {
        self.inner.n_distractors()
    }

    fn target(&self) -> BTreeMap<String, String> {
        self.inner.target.assignment(&self.schema)
    }

    fn distractors(&self) -> Vec<BTreeMap<String, String>> {
        self.inner
            .distractors
            .iter()
            .map(|d| d.assignment(&self.schema))
            .collect()
    }

    fn target_description(&self) -> PyResult<String> {
        render_description(&self.schema, &self.inner.target).map_err(to_py_err)
    }

    fn distractor_descriptions(&self) -> PyResult<Vec<String>> {
        self.inner
            .distractors
            .iter()
            .map(|d| render_description(&self.schema, d).map_err(to_py_err))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        let record = GameRecord::from_game(&self.schema, &self.inner).map_err(to_py_err)?;
        serde_json::to_string(&record).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Game(id={:?}, n_distractors={})",
            self.inner.id,
            self.inner.n_distractors()
        )
    }
}

/// Sample a game: uniform target, each distractor differing from it in one
/// or two uniformly chosen attributes. Deterministic in the seed.
#[pyfunction]
#[pyo3(name = "sample_game")]
fn sample_game_py(schema: &Schema, n_distractors: usize, seed: u64) -> PyResult<Game> {
    let game = sample_game(&schema.inner, n_distractors, seed).map_err(to_py_err)?;
    Ok(Game {
        schema: schema.inner.clone(),
        inner: game,
    })
}

fn oracle_config(
    seed: u64,
    eval_error_rate: f64,
    proposer_mode: &str,
    proposer_omission_rate: f64,
) -> PyResult<OracleConfig> {
    let proposer_mode: ProposerMode = proposer_mode.parse().map_err(to_py_err)?;
    let config = OracleConfig {
        seed,
        eval_error_rate,
        proposer_mode,
        proposer_omission_rate,
    };
    config.validate().map_err(to_py_err)?;
    Ok(config)
}

/// Run the iterative engine with the symbolic oracle backend; returns the
/// full result (final utterance, per-iteration trace) as a JSON string.
#[pyfunction]
#[pyo3(signature = (game, n_samples=8, max_iterations=5, seed=0, eval_error_rate=0.0,
                    proposer_mode="single_feature", proposer_omission_rate=0.0))]
#[allow(clippy::too_many_arguments)]
fn run_iterative_oracle(
    game: &Game,
    n_samples: usize,
    max_iterations: usize,
    seed: u64,
    eval_error_rate: f64,
    proposer_mode: &str,
    proposer_omission_rate: f64,
) -> PyResult<String> {
    let config = oracle_config(seed, eval_error_rate, proposer_mode, proposer_omission_rate)?;
    let proposer = OracleProposer::new(game.schema.clone(), config.clone()).map_err(to_py_err)?;
    let evaluator = OracleEvaluator::new(game.schema.clone(), config).map_err(to_py_err)?;
    let result = run_iterative(
        &game.schema,
        &game.inner,
        &proposer,
        &evaluator,
        n_samples,
        max_iterations,
    )
    .map_err(to_py_err)?;
    Ok(trace_json(&game.schema, &result).to_string())
}

/// Run the single-pass ablation with the symbolic oracle backend.
#[pyfunction]
#[pyo3(signature = (game, n_samples=10, seed=0, eval_error_rate=0.0,
                    proposer_mode="subsets_le2", proposer_omission_rate=0.0))]
fn run_single_pass_oracle(
    game: &Game,
    n_samples: usize,
    seed: u64,
    eval_error_rate: f64,
    proposer_mode: &str,
    proposer_omission_rate: f64,
) -> PyResult<String> {
    let config = oracle_config(seed, eval_error_rate, proposer_mode, proposer_omission_rate)?;
    let proposer = OracleProposer::new(game.schema.clone(), config.clone()).map_err(to_py_err)?;
    let evaluator = OracleEvaluator::new(game.schema.clone(), config).map_err(to_py_err)?;
    let result = run_single_pass(
        &game.schema,
        &game.inner,
        &proposer,
        &evaluator,
        n_samples,
    )
    .map_err(to_py_err)?;
    Ok(trace_json(&game.schema, &result).to_string())
}

/// Score an utterance against a game with the exact symbolic semantics:
/// (contrastivity, true_of_target, parse_failed).
#[pyfunction]
#[pyo3(name = "ground_truth_contrastivity")]
fn ground_truth_contrastivity_py(game: &Game, utterance: &str) -> (f64, bool, bool) {
    let gt = ground_truth_contrastivity(&game.schema, utterance, &game.inner);
    (gt.contrastivity.value(), gt.target_true, gt.parse_failed)
}

/// Contrastivity of one truth column (target entry first).
#[pyfunction]
#[pyo3(name = "contrastivity")]
fn contrastivity_py(truth_column: Vec<bool>, n_distractors: usize) -> PyResult<f64> {
    engine_contrastivity(&truth_column, n_distractors)
        .map(|c| c.value())
        .map_err(to_py_err)
}

/// Pragmatic speaker distribution over utterances given a truth matrix
/// (rows are states, target first; columns are utterances).
#[pyfunction]
#[pyo3(signature = (cells, alpha=1.0, costs=None))]
fn rsa_speaker(cells: Vec<Vec<bool>>, alpha: f64, costs: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    if cells.is_empty() || cells[0].is_empty() {
        return Err(PyValueError::new_err("cells must be a non-empty matrix"));
    }
    let schema = AttributeSchema::a3ds();
    let n_utts = cells[0].len();
    let matrix = TruthMatrix {
        states: (0..cells.len()).map(|i| format!("state {i}")).collect(),
        utterances: (0..n_utts)
            .map(|i| Utterance::new(&schema, format!("utterance {i}")))
            .collect(),
        cells,
    };
    engine_rsa_speaker(&matrix, alpha, costs.as_deref()).map_err(to_py_err)
}

/// Percentile bootstrap confidence interval for the mean.
#[pyfunction]
#[pyo3(signature = (values, n_boot=10000, level=0.95, seed=0))]
fn bootstrap_ci(values: Vec<f64>, n_boot: usize, level: f64, seed: u64) -> PyResult<(f64, f64)> {
    stats::bootstrap_ci(&values, n_boot, level, seed).map_err(to_py_err)
}

/// Fraction of bootstrap resamples where mean(a) strictly exceeds mean(b);
/// returns (p_greater, tie_fraction).
#[pyfunction]
#[pyo3(signature = (a, b, n_boot=10000, seed=0))]
fn compare_bootstrap_p(
    a: Vec<f64>,
    b: Vec<f64>,
    n_boot: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    stats::compare_bootstrap_p(&a, &b, n_boot, seed)
        .map(|c| (c.p_greater, c.tie_fraction))
        .map_err(to_py_err)
}

#[pymodule]
fn refgame_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Schema>()?;
    m.add_class::<Game>()?;
    m.add_function(wrap_pyfunction!(sample_game_py, m)?)?;
    m.add_function(wrap_pyfunction!(run_iterative_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run_single_pass_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(ground_truth_contrastivity_py, m)?)?;
    m.add_function(wrap_pyfunction!(contrastivity_py, m)?)?;
    m.add_function(wrap_pyfunction!(rsa_speaker, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_ci, m)?)?;
    m.add_function(wrap_pyfunction!(compare_bootstrap_p, m)?)?;
    Ok(())
}
