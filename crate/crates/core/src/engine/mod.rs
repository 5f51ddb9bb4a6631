//! Generation engines: contrastivity computation and selection, the
//! iterative propose-evaluate-select loop, the single-pass ablation, and the
//! one-shot baseline, all parameterized over abstract backends.

mod run;
mod select;

pub use run::{run_baseline, run_iterative, run_single_pass};
pub use select::{
    contrastivity, infomax_select, rsa_speaker, select_most_contrastive, InfomaxChoice,
};

use serde::{Deserialize, Serialize};

use crate::domain::Utterance;
use crate::{Error, Result};

/// Proposes candidate utterances for a target description.
///
/// `propose_initial` asks for single-detail descriptions of the target (or
/// unrestricted sub-descriptions, depending on backend mode);
/// `propose_extension` asks for the partial utterance plus one more detail
/// taken from the full target description. Implementations return between 1
/// and n utterance texts and never return empty strings.
pub trait ProposerBackend: Send + Sync {
    fn propose_initial(&self, target_description: &str, n: usize) -> Result<Vec<String>>;
    fn propose_extension(
        &self,
        partial_utterance: &str,
        target_description: &str,
        n: usize,
    ) -> Result<Vec<String>>;
}

/// Judges whether an utterance is literally true of a state description.
/// Returns the verdict plus a transcript (empty for symbolic backends).
pub trait SemanticBackend: Send + Sync {
    fn evaluate(&self, state_description: &str, utterance: &str) -> Result<(bool, String)>;
}

/// A plain chat call, used by the one-shot baseline.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, prompt: &str) -> Result<String>;
}

/// Exact contrastivity value: the fraction of distractors an utterance is
/// false of, kept as a rational with the distractor count as denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contrastivity {
    pub false_of: usize,
    pub n_distractors: usize,
}

impl Contrastivity {
    pub fn new(false_of: usize, n_distractors: usize) -> Self {
        debug_assert!(false_of <= n_distractors);
        Contrastivity {
            false_of,
            n_distractors,
        }
    }

    pub fn value(&self) -> f64 {
        self.false_of as f64 / self.n_distractors as f64
    }

    /// Fully contrastive: false of every distractor.
    pub fn is_full(&self) -> bool {
        self.false_of == self.n_distractors
    }
}

impl PartialOrd for Contrastivity {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Contrastivity {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Cross-multiplied exact comparison.
        let lhs = self.false_of as u128 * other.n_distractors as u128;
        let rhs = other.false_of as u128 * self.n_distractors as u128;
        lhs.cmp(&rhs)
    }
}

/// Truth values for every (state, utterance) pair of one iteration.
/// Row 0 is the target, rows 1.. are the distractors.
#[derive(Debug, Clone)]
pub struct TruthMatrix {
    pub states: Vec<String>,
    pub utterances: Vec<Utterance>,
    pub cells: Vec<Vec<bool>>,
}

impl TruthMatrix {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_distractors(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Truth column of one utterance, target row first.
    pub fn column(&self, utterance: usize) -> Vec<bool> {
        self.cells.iter().map(|row| row[utterance]).collect()
    }

    pub fn target_true(&self, utterance: usize) -> bool {
        self.cells[0][utterance]
    }

    pub fn target_true_flags(&self) -> Vec<bool> {
        self.cells[0].clone()
    }

    pub fn contrastivities(&self) -> Result<Vec<Contrastivity>> {
        (0..self.utterances.len())
            .map(|u| contrastivity(&self.column(u), self.n_distractors()))
            .collect()
    }

    fn check_rectangular(&self) -> Result<()> {
        for row in &self.cells {
            if row.len() != self.utterances.len() {
                return Err(Error::ColumnLength {
                    len: row.len(),
                    expected: self.utterances.len(),
                });
            }
        }
        Ok(())
    }
}

/// Everything recorded about one engine iteration.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub candidates: Vec<Utterance>,
    pub matrix: TruthMatrix,
    pub contrastivities: Vec<Contrastivity>,
    pub survivors: Vec<usize>,
}

/// Final utterance plus the full per-iteration trace of a run.
#[derive(Debug, Clone)]
pub struct GenerationResult {
    pub final_utterance: Utterance,
    /// Contrastivity as judged by the run's own evaluator; absent for the
    /// baseline, which never evaluates.
    pub final_contrastivity: Option<Contrastivity>,
    pub final_target_true: Option<bool>,
    pub iterations_used: usize,
    pub trace: Vec<IterationTrace>,
    pub transcripts: Vec<String>,
    pub warning: Option<String>,
    pub proposer_calls: usize,
    pub evaluator_calls: usize,
}
