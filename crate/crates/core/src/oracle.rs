//! Deterministic symbolic proposer and evaluator over the scene grammar,
//! with configurable noise. They exist for exact desk-scale verification of
//! the engines and for noise-matched ablations, not for linguistic realism.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::domain::{
    literal_truth, normalize_utterance, parse_utterance, render_features, AttributeSchema,
    FeatureSet,
};
use crate::engine::{ProposerBackend, SemanticBackend};
use crate::rng::keyed_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposerMode {
    /// One attribute per proposal (the iterative engine's initial pool).
    SingleFeature,
    /// Random sub-descriptions mentioning one or two attributes.
    SubsetsLe2,
    /// Random sub-descriptions of any non-empty size.
    FullRandom,
}

impl std::str::FromStr for ProposerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_feature" => Ok(ProposerMode::SingleFeature),
            "subsets_le2" => Ok(ProposerMode::SubsetsLe2),
            "full_random" => Ok(ProposerMode::FullRandom),
            other => Err(Error::InvalidConfig(format!(
                "unknown proposer mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleConfig {
    pub seed: u64,
    /// Probability of flipping a truth verdict, keyed by (state, utterance).
    pub eval_error_rate: f64,
    pub proposer_mode: ProposerMode,
    /// Probability that an attribute is dropped from the candidate pool
    /// before sampling proposals.
    pub proposer_omission_rate: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            seed: 0,
            eval_error_rate: 0.0,
            proposer_mode: ProposerMode::SingleFeature,
            proposer_omission_rate: 0.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("eval_error_rate", self.eval_error_rate),
            ("proposer_omission_rate", self.proposer_omission_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {rate}"
                )));
            }
        }
        Ok(())
    }
}

pub struct OracleProposer {
    schema: Arc<AttributeSchema>,
    config: OracleConfig,
}

impl OracleProposer {
    pub fn new(schema: Arc<AttributeSchema>, config: OracleConfig) -> Result<Self> {
        config.validate()?;
        Ok(OracleProposer { schema, config })
    }

    fn parse_full_state(&self, description: &str) -> Result<FeatureSet> {
        let features = parse_utterance(&self.schema, description)
            .map_err(|_| Error::UnparseableState(description.to_string()))?;
        if features.len() != self.schema.len() {
            return Err(Error::UnparseableState(description.to_string()));
        }
        Ok(features)
    }

    /// Attribute pool after random omissions.
    fn available_attrs(&self, rng: &mut impl Rng) -> Vec<usize> {
        (0..self.schema.len())
            .filter(|_| {
                self.config.proposer_omission_rate == 0.0
                    || !rng.random_bool(self.config.proposer_omission_rate)
            })
            .collect()
    }
}

impl ProposerBackend for OracleProposer {
    fn propose_initial(&self, target_description: &str, n: usize) -> Result<Vec<String>> {
        let target = self.parse_full_state(target_description)?;
        let mut rng = keyed_rng(
            self.config.seed,
            &["propose_initial", target_description, &n.to_string()],
        );
        let attrs = self.available_attrs(&mut rng);

        let mut pool: Vec<FeatureSet> = Vec::new();
        match self.config.proposer_mode {
            ProposerMode::SingleFeature => {
                for &a in &attrs {
                    pool.push(FeatureSet::empty(&self.schema).with(a, target.get(a).unwrap()));
                }
            }
            ProposerMode::SubsetsLe2 => {
                for (i, &a) in attrs.iter().enumerate() {
                    pool.push(FeatureSet::empty(&self.schema).with(a, target.get(a).unwrap()));
                    for &b in &attrs[i + 1..] {
                        pool.push(
                            FeatureSet::empty(&self.schema)
                                .with(a, target.get(a).unwrap())
                                .with(b, target.get(b).unwrap()),
                        );
                    }
                }
            }
            ProposerMode::FullRandom => {
                // Enumerate all non-empty subsets of the available attributes.
                if attrs.len() > 16 {
                    return Err(Error::InvalidConfig(
                        "full_random proposer supports at most 16 attributes".into(),
                    ));
                }
                for mask in 1u32..(1 << attrs.len()) {
                    let mut features = FeatureSet::empty(&self.schema);
                    for (bit, &a) in attrs.iter().enumerate() {
                        if mask & (1 << bit) != 0 {
                            features = features.with(a, target.get(a).unwrap());
                        }
                    }
                    pool.push(features);
                }
            }
        }

        pool.shuffle(&mut rng);
        pool.truncate(n.max(1));
        pool.iter()
            .map(|f| render_features(&self.schema, f))
            .collect()
    }

    fn propose_extension(
        &self,
        partial_utterance: &str,
        target_description: &str,
        n: usize,
    ) -> Result<Vec<String>> {
        let target = self.parse_full_state(target_description)?;
        let partial = parse_utterance(&self.schema, partial_utterance)
            .map_err(|_| Error::UnparseableState(partial_utterance.to_string()))?;

        let unused: Vec<usize> = (0..self.schema.len())
            .filter(|&a| partial.get(a).is_none())
            .collect();
        if unused.is_empty() {
            // Fixed point: everything is already mentioned.
            return Ok(vec![partial_utterance.to_string()]);
        }

        let mut rng = keyed_rng(
            self.config.seed,
            &[
                "propose_extension",
                &normalize_utterance(partial_utterance),
                target_description,
                &n.to_string(),
            ],
        );
        let mut extended: Vec<FeatureSet> = unused
            .iter()
            .map(|&a| partial.with(a, target.get(a).unwrap()))
            .collect();
        extended.shuffle(&mut rng);
        extended.truncate(n.max(1));
        extended
            .iter()
            .map(|f| render_features(&self.schema, f))
            .collect()
    }
}

pub struct OracleEvaluator {
    schema: Arc<AttributeSchema>,
    config: OracleConfig,
}

impl OracleEvaluator {
    pub fn new(schema: Arc<AttributeSchema>, config: OracleConfig) -> Result<Self> {
        config.validate()?;
        Ok(OracleEvaluator { schema, config })
    }
}

impl SemanticBackend for OracleEvaluator {
    fn evaluate(&self, state_description: &str, utterance: &str) -> Result<(bool, String)> {
        let state_features = parse_utterance(&self.schema, state_description)
            .map_err(|_| Error::UnparseableState(state_description.to_string()))?;
        let state = state_features
            .as_state()
            .ok_or_else(|| Error::UnparseableState(state_description.to_string()))?;

        let parsed = match parse_utterance(&self.schema, utterance) {
            Ok(features) => features,
            Err(e) => {
                // An evaluator that cannot ground the utterance does not
                // certify it.
                return Ok((false, format!("parse warning: {e}; verdict false")));
            }
        };
        let verdict = literal_truth(&parsed, &state);

        let final_verdict = if self.config.eval_error_rate > 0.0 {
            // The flip is keyed by (state, utterance), so repeated queries
            // within and across runs sharing a seed agree.
            let mut rng = keyed_rng(
                self.config.seed,
                &["eval", state_description, &normalize_utterance(utterance)],
            );
            if rng.random_bool(self.config.eval_error_rate) {
                !verdict
            } else {
                verdict
            }
        } else {
            verdict
        };

        let transcript = format!(
            "features={:?} literal={verdict} verdict={final_verdict}",
            parsed.to_map(&self.schema)
        );
        Ok((final_verdict, transcript))
    }
}
