//! Prompt templates and their placeholder fills. The template texts are
//! checked byte-for-byte by golden-file tests; keep edits in sync.

pub const PROPOSER_INITIAL_TEMPLATE: &str = include_str!("prompts/proposer_initial.txt");
pub const PROPOSER_EXTENSION_TEMPLATE: &str = include_str!("prompts/proposer_extension.txt");
pub const PROPOSER_SINGLE_PASS_TEMPLATE: &str = include_str!("prompts/proposer_single_pass.txt");
pub const SEMANTIC_EVAL_TEMPLATE: &str = include_str!("prompts/semantic_eval.txt");
pub const BASELINE_TEMPLATE: &str = include_str!("prompts/baseline.txt");

/// First-iteration proposer prompt: one detail only.
pub fn proposer_initial_prompt(num_samples: usize, target_state: &str) -> String {
    PROPOSER_INITIAL_TEMPLATE
        .replace("{num_samples}", &num_samples.to_string())
        .replace("{target_state}", target_state)
}

/// Extension prompt: repeat the partial description, add one more detail.
pub fn proposer_extension_prompt(
    num_samples: usize,
    partial_description: &str,
    full_description: &str,
) -> String {
    PROPOSER_EXTENSION_TEMPLATE
        .replace("{num_samples}", &num_samples.to_string())
        .replace("{partial_description}", partial_description)
        .replace("{full_description}", full_description)
}

/// Single-pass proposer prompt: unrestricted sub-descriptions.
pub fn single_pass_prompt(num_samples: usize, target_state: &str) -> String {
    PROPOSER_SINGLE_PASS_TEMPLATE
        .replace("{num_samples}", &num_samples.to_string())
        .replace("{target_state}", target_state)
}

/// Intuitive-entailment prompt for the semantic evaluator.
pub fn semantic_eval_prompt(state: &str, utterance: &str) -> String {
    SEMANTIC_EVAL_TEMPLATE
        .replace("{state}", state)
        .replace("{utterance}", utterance)
}

/// One-shot chain-of-thought baseline prompt.
pub fn baseline_prompt(target_state: &str, distractors: &[String]) -> String {
    let distractor_lines = distractors
        .iter()
        .map(|d| format!("- {d}"))
        .collect::<Vec<_>>()
        .join("\n");
    BASELINE_TEMPLATE
        .replace("{target_state}", target_state)
        .replace("{distractors}", &distractor_lines)
}
