//! LLM-backed proposer, evaluator and baseline chat over any
//! OpenAI-compatible chat-completions endpoint, with the exact prompt
//! templates, response parsing, and a record/replay transcript cache for
//! deterministic offline runs.

mod cache;
mod client;
mod parse;
mod prompts;

pub use cache::{cache_key, CacheMode, Transcript, TranscriptCache};
pub use client::{ChatMessage, LlmClient, LlmConfig, API_KEY_ENV};
pub use parse::{extract_final_utterance, parse_bullet_list, parse_yes_no};
pub use prompts::{
    baseline_prompt, proposer_extension_prompt, proposer_initial_prompt, semantic_eval_prompt,
    single_pass_prompt, BASELINE_TEMPLATE, PROPOSER_EXTENSION_TEMPLATE,
    PROPOSER_INITIAL_TEMPLATE, PROPOSER_SINGLE_PASS_TEMPLATE, SEMANTIC_EVAL_TEMPLATE,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{ChatBackend, ProposerBackend, SemanticBackend};
use crate::Result;

/// Which proposal prompt the LLM proposer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    /// One detail per sentence (the iterative engine's production-cost
    /// pressure).
    #[default]
    SingleDetail,
    /// Leave out some part of the description (the single-pass prompt).
    LeaveOut,
}

pub struct LlmProposer {
    client: Arc<LlmClient>,
    mode: PromptMode,
}

impl LlmProposer {
    pub fn new(client: Arc<LlmClient>, mode: PromptMode) -> Self {
        LlmProposer { client, mode }
    }
}

impl ProposerBackend for LlmProposer {
    fn propose_initial(&self, target_description: &str, n: usize) -> Result<Vec<String>> {
        let prompt = match self.mode {
            PromptMode::SingleDetail => proposer_initial_prompt(n, target_description),
            PromptMode::LeaveOut => single_pass_prompt(n, target_description),
        };
        let response = self.client.chat_complete(&[ChatMessage::user(prompt)])?;
        // Returned verbatim; semantic filtering is the evaluator's job.
        parse_bullet_list(&response, n)
    }

    fn propose_extension(
        &self,
        partial_utterance: &str,
        target_description: &str,
        n: usize,
    ) -> Result<Vec<String>> {
        let prompt = proposer_extension_prompt(n, partial_utterance, target_description);
        let response = self.client.chat_complete(&[ChatMessage::user(prompt)])?;
        parse_bullet_list(&response, n)
    }
}

pub struct LlmEvaluator {
    client: Arc<LlmClient>,
}

impl LlmEvaluator {
    pub fn new(client: Arc<LlmClient>) -> Self {
        LlmEvaluator { client }
    }
}

impl SemanticBackend for LlmEvaluator {
    fn evaluate(&self, state_description: &str, utterance: &str) -> Result<(bool, String)> {
        let prompt = semantic_eval_prompt(state_description, utterance);
        let messages = [ChatMessage::user(prompt)];
        let first = self.client.chat_complete(&messages)?;
        match parse_yes_no(&first) {
            Ok(verdict) => Ok((verdict, first)),
            Err(crate::Error::AmbiguousAnswer(_)) => {
                // One automatic reprompt on a malformed answer.
                let second = self.client.chat_complete(&messages)?;
                let verdict = parse_yes_no(&second)?;
                Ok((verdict, format!("{first}\n--- reprompt ---\n{second}")))
            }
            Err(other) => Err(other),
        }
    }
}

pub struct LlmChat {
    client: Arc<LlmClient>,
}

impl LlmChat {
    pub fn new(client: Arc<LlmClient>) -> Self {
        LlmChat { client }
    }
}

impl ChatBackend for LlmChat {
    fn chat(&self, prompt: &str) -> Result<String> {
        self.client.chat_complete(&[ChatMessage::user(prompt)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use std::io::Write;

    /// Build a replay cache whose entries answer the given prompts. The
    /// tempdir guard must stay alive for as long as the client is used.
    fn replay_client(
        responses: &[(&str, &[&str])],
        config: LlmConfig,
    ) -> (Arc<LlmClient>, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.jsonl");
        let probe = LlmClient::new(LlmConfig {
            cache_mode: CacheMode::Off,
            cache_file: None,
            ..config.clone()
        })
        .unwrap();
        let mut file = std::fs::File::create(&path).unwrap();
        for (prompt, replies) in responses {
            let body = probe.request_body(&[ChatMessage::user(*prompt)]);
            let key = cache_key(&body);
            for reply in *replies {
                let transcript = Transcript {
                    key: key.clone(),
                    request: body.clone(),
                    response: reply.to_string(),
                    timestamp_ms: 0,
                };
                writeln!(file, "{}", serde_json::to_string(&transcript).unwrap()).unwrap();
            }
        }
        drop(file);
        let client = Arc::new(
            LlmClient::new(LlmConfig {
                cache_mode: CacheMode::Replay,
                cache_file: Some(path),
                ..config
            })
            .unwrap(),
        );
        (client, dir)
    }

    #[test]
    fn proposer_replays_bullets_verbatim() {
        let config = LlmConfig::default();
        let target = "The floor is purple, the wall is green, the red small block is in the left corner.";
        let prompt = proposer_initial_prompt(8, target);
        let bullets = "- The floor is purple\n- The wall is green\n- There is a block\n- The block is small\n- The block is red\n- The block is in the left corner\n- The room has a floor\n- The room has a wall";
        let (client, _dir) = replay_client(&[(&prompt, &[bullets])], config);
        let proposer = LlmProposer::new(client, PromptMode::SingleDetail);
        let got = proposer.propose_initial(target, 8).unwrap();
        assert_eq!(got.len(), 8);
        assert_eq!(got[0], "The floor is purple");
        assert_eq!(got[6], "The room has a floor");
    }

    #[test]
    fn extension_replay_is_deterministic() {
        let config = LlmConfig::default();
        let prompt = proposer_extension_prompt(4, "The floor is purple", "full target");
        let (client, _dir) = replay_client(
            &[(&prompt, &["- The floor is purple and the wall is green"])],
            config,
        );
        let proposer = LlmProposer::new(client, PromptMode::SingleDetail);
        let a = proposer
            .propose_extension("The floor is purple", "full target", 4)
            .unwrap();
        let b = proposer
            .propose_extension("The floor is purple", "full target", 4)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, vec!["The floor is purple and the wall is green"]);
    }

    #[test]
    fn evaluator_parses_yes_and_reprompts_on_ambiguity() {
        let config = LlmConfig::default();
        let state = "The floor is purple, the wall is green, the red small block is in the left corner.";
        let prompt = semantic_eval_prompt(state, "The floor is purple");
        let (client, _dir) = replay_client(
            &[(&prompt, &["step by step reasoning\n\nyes"])],
            config.clone(),
        );
        let evaluator = LlmEvaluator::new(client);
        let (verdict, transcript) = evaluator.evaluate(state, "The floor is purple").unwrap();
        assert!(verdict);
        assert!(transcript.contains("reasoning"));

        // First answer ambiguous, reprompt answers cleanly.
        let prompt2 = semantic_eval_prompt(state, "The wall is red");
        let (client, _dir2) = replay_client(&[(&prompt2, &["hmm unclear", "reasoning\n\nNo."])], config);
        let evaluator = LlmEvaluator::new(client);
        let (verdict, transcript) = evaluator.evaluate(state, "The wall is red").unwrap();
        assert!(!verdict);
        assert!(transcript.contains("reprompt"));
    }

    #[test]
    fn evaluator_fails_after_two_ambiguous_answers() {
        let config = LlmConfig::default();
        let prompt = semantic_eval_prompt("state", "utterance");
        let (client, _dir) = replay_client(&[(&prompt, &["mumble", "still mumble"])], config);
        let evaluator = LlmEvaluator::new(client);
        assert!(matches!(
            evaluator.evaluate("state", "utterance"),
            Err(Error::AmbiguousAnswer(_))
        ));
    }

    #[test]
    fn zero_bullet_fixture_surfaces_empty_proposal() {
        let config = LlmConfig::default();
        let prompt = proposer_initial_prompt(4, "target");
        let (client, _dir) = replay_client(&[(&prompt, &["\n\n"])], config);
        let proposer = LlmProposer::new(client, PromptMode::SingleDetail);
        assert!(matches!(
            proposer.propose_initial("target", 4),
            Err(Error::EmptyProposal)
        ));
    }
}
