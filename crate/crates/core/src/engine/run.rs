use std::collections::{HashMap, HashSet};

use super::select::{infomax_select, select_most_contrastive};
use super::{
    ChatBackend, GenerationResult, IterationTrace, ProposerBackend, SemanticBackend, TruthMatrix,
};
use crate::domain::{normalize_utterance, render_description, AttributeSchema, Utterance};
use crate::game::ReferenceGame;
use crate::llm::extract_final_utterance;
use crate::{Error, Result};

/// Per-run evaluation context: rendered state descriptions plus a memo of
/// evaluator verdicts keyed by (state index, normalized utterance).
struct EvalContext {
    descriptions: Vec<String>,
    memo: HashMap<(usize, String), (bool, String)>,
    evaluator_calls: usize,
    proposer_calls: usize,
}

impl EvalContext {
    fn new(schema: &AttributeSchema, game: &ReferenceGame) -> Result<Self> {
        let mut descriptions = Vec::with_capacity(game.distractors.len() + 1);
        descriptions.push(render_description(schema, &game.target)?);
        for d in &game.distractors {
            descriptions.push(render_description(schema, d)?);
        }
        Ok(EvalContext {
            descriptions,
            memo: HashMap::new(),
            evaluator_calls: 0,
            proposer_calls: 0,
        })
    }

    fn target_description(&self) -> &str {
        &self.descriptions[0]
    }

    /// Evaluate every candidate against every state, reusing memoized
    /// verdicts, and assemble the iteration's truth matrix.
    fn evaluate_all(
        &mut self,
        evaluator: &dyn SemanticBackend,
        candidates: Vec<Utterance>,
        transcripts: &mut Vec<String>,
    ) -> Result<TruthMatrix> {
        let n_states = self.descriptions.len();
        let mut cells = vec![vec![false; candidates.len()]; n_states];
        for (u, candidate) in candidates.iter().enumerate() {
            let norm = normalize_utterance(&candidate.text);
            for s in 0..n_states {
                let key = (s, norm.clone());
                let verdict = match self.memo.get(&key) {
                    Some(&(v, _)) => v,
                    None => {
                        let (v, transcript) =
                            evaluator.evaluate(&self.descriptions[s], &candidate.text)?;
                        self.evaluator_calls += 1;
                        if !transcript.is_empty() {
                            transcripts.push(format!(
                                "evaluate[state {s}] {:?}: {transcript}",
                                candidate.text
                            ));
                        }
                        self.memo.insert(key, (v, transcript));
                        v
                    }
                };
                cells[s][u] = verdict;
            }
        }
        Ok(TruthMatrix {
            states: self.descriptions.clone(),
            utterances: candidates,
            cells,
        })
    }
}

/// Call a proposer, retrying once if it comes back empty; a second empty
/// response is a proposer-exhausted failure.
fn propose_with_retry(
    ctx: &mut EvalContext,
    mut call: impl FnMut() -> Result<Vec<String>>,
) -> Result<Vec<String>> {
    for attempt in 0..2 {
        ctx.proposer_calls += 1;
        match call() {
            Ok(texts) if texts.iter().any(|t| !t.trim().is_empty()) => return Ok(texts),
            Ok(_) | Err(Error::EmptyProposal) => {
                if attempt == 1 {
                    return Err(Error::ProposerExhausted);
                }
            }
            Err(other) => return Err(other),
        }
    }
    Err(Error::ProposerExhausted)
}

/// Drop blank and duplicate candidate texts (after normalization), keep
/// first occurrences, and cap the pool size.
fn dedup_candidates(schema: &AttributeSchema, texts: Vec<String>, cap: usize) -> Vec<Utterance> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for text in texts {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        let norm = normalize_utterance(trimmed);
        if seen.insert(norm) {
            out.push(Utterance::new(schema, trimmed));
            if out.len() == cap {
                break;
            }
        }
    }
    out
}

/// The iterative engine: propose single-detail utterances from the target
/// description, evaluate them against every state, keep the most contrastive
/// survivors, and extend them one detail at a time until an utterance is
/// fully contrastive or the iteration budget is spent.
pub fn run_iterative(
    schema: &AttributeSchema,
    game: &ReferenceGame,
    proposer: &dyn ProposerBackend,
    evaluator: &dyn SemanticBackend,
    n_samples: usize,
    max_iterations: usize,
) -> Result<GenerationResult> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
    }
    if max_iterations == 0 {
        return Err(Error::InvalidConfig(
            "max_iterations must be at least 1".into(),
        ));
    }

    let mut ctx = EvalContext::new(schema, game)?;
    let mut transcripts = Vec::new();
    let mut trace: Vec<IterationTrace> = Vec::new();
    let mut partials: Vec<Utterance> = Vec::new();

    for iteration in 1..=max_iterations {
        let texts = if iteration == 1 {
            let target = ctx.target_description().to_string();
            propose_with_retry(&mut ctx, || proposer.propose_initial(&target, n_samples))
                .map_err(|e| e.at_iteration(iteration))?
        } else {
            let target = ctx.target_description().to_string();
            let mut pooled = Vec::new();
            for partial in &partials {
                let got = propose_with_retry(&mut ctx, || {
                    proposer.propose_extension(&partial.text, &target, n_samples)
                });
                match got {
                    Ok(texts) => pooled.extend(texts),
                    Err(Error::ProposerExhausted) => {}
                    Err(other) => return Err(other.at_iteration(iteration)),
                }
            }
            if pooled.iter().all(|t| t.trim().is_empty()) {
                return Err(Error::ProposerExhausted.at_iteration(iteration));
            }
            pooled
        };

        let cap = n_samples * partials.len().max(1);
        let candidates = dedup_candidates(schema, texts, cap);
        if candidates.is_empty() {
            return Err(Error::ProposerExhausted.at_iteration(iteration));
        }

        let matrix = ctx
            .evaluate_all(evaluator, candidates, &mut transcripts)
            .map_err(|e| e.at_iteration(iteration))?;
        let contrastivities = matrix.contrastivities()?;
        let target_true = matrix.target_true_flags();
        let survivors = select_most_contrastive(&contrastivities, &target_true);
        let solved = (0..matrix.utterances.len())
            .any(|u| contrastivities[u].is_full() && target_true[u]);

        let final_here = solved || iteration == max_iterations;
        trace.push(IterationTrace {
            candidates: matrix.utterances.clone(),
            matrix: matrix.clone(),
            contrastivities: contrastivities.clone(),
            survivors: survivors.clone(),
        });

        if final_here {
            let choice = infomax_select(&matrix)?;
            let mut warnings = Vec::new();
            if !solved {
                warnings.push("max iterations reached without a fully contrastive utterance");
            }
            if choice.degenerate {
                warnings.push("every candidate was false of the target");
            }
            return Ok(GenerationResult {
                final_utterance: matrix.utterances[choice.index].clone(),
                final_contrastivity: Some(contrastivities[choice.index]),
                final_target_true: Some(target_true[choice.index]),
                iterations_used: iteration,
                trace,
                transcripts,
                warning: if warnings.is_empty() {
                    None
                } else {
                    Some(warnings.join("; "))
                },
                proposer_calls: ctx.proposer_calls,
                evaluator_calls: ctx.evaluator_calls,
            });
        }

        partials = survivors
            .iter()
            .map(|&i| matrix.utterances[i].clone())
            .collect();
    }
    unreachable!("loop returns at or before max_iterations")
}

/// The single-pass ablation: one proposal round, one evaluation, one greedy
/// selection.
pub fn run_single_pass(
    schema: &AttributeSchema,
    game: &ReferenceGame,
    proposer: &dyn ProposerBackend,
    evaluator: &dyn SemanticBackend,
    n_samples: usize,
) -> Result<GenerationResult> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
    }
    let mut ctx = EvalContext::new(schema, game)?;
    let mut transcripts = Vec::new();

    let target = ctx.target_description().to_string();
    let texts = propose_with_retry(&mut ctx, || proposer.propose_initial(&target, n_samples))
        .map_err(|e| e.at_iteration(1))?;
    let candidates = dedup_candidates(schema, texts, n_samples);
    if candidates.is_empty() {
        return Err(Error::ProposerExhausted.at_iteration(1));
    }

    let matrix = ctx
        .evaluate_all(evaluator, candidates, &mut transcripts)
        .map_err(|e| e.at_iteration(1))?;
    let contrastivities = matrix.contrastivities()?;
    let target_true = matrix.target_true_flags();
    let survivors = select_most_contrastive(&contrastivities, &target_true);
    let choice = infomax_select(&matrix)?;

    Ok(GenerationResult {
        final_utterance: matrix.utterances[choice.index].clone(),
        final_contrastivity: Some(contrastivities[choice.index]),
        final_target_true: Some(target_true[choice.index]),
        iterations_used: 1,
        trace: vec![IterationTrace {
            candidates: matrix.utterances.clone(),
            matrix: matrix.clone(),
            contrastivities,
            survivors,
        }],
        transcripts,
        warning: if choice.degenerate {
            Some("every candidate was false of the target".into())
        } else {
            None
        },
        proposer_calls: ctx.proposer_calls,
        evaluator_calls: ctx.evaluator_calls,
    })
}

/// The one-shot baseline: a single chain-of-thought chat call, with the
/// final utterance extracted from the response. The model never evaluates,
/// so no model-side contrastivity is reported.
pub fn run_baseline(
    schema: &AttributeSchema,
    game: &ReferenceGame,
    chat: &dyn ChatBackend,
) -> Result<GenerationResult> {
    let ctx = EvalContext::new(schema, game)?;
    let prompt = crate::llm::baseline_prompt(ctx.target_description(), &ctx.descriptions[1..]);
    let response = chat.chat(&prompt)?;
    let text = extract_final_utterance(&response)?;
    let utterance = Utterance::new(schema, text);

    Ok(GenerationResult {
        final_utterance: utterance.clone(),
        final_contrastivity: None,
        final_target_true: None,
        iterations_used: 1,
        trace: vec![IterationTrace {
            candidates: vec![utterance],
            matrix: TruthMatrix {
                states: ctx.descriptions.clone(),
                utterances: Vec::new(),
                cells: vec![Vec::new(); ctx.descriptions.len()],
            },
            contrastivities: Vec::new(),
            survivors: Vec::new(),
        }],
        transcripts: vec![format!("prompt: {prompt}"), format!("response: {response}")],
        warning: None,
        proposer_calls: 1,
        evaluator_calls: 0,
    })
}
