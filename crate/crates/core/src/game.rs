//! Reference game construction: a target plus N distinct distractors, each
//! differing from the target in at most two attributes.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::domain::{render_description, AttributeSchema, SceneState};
use crate::{Error, Result};

/// Resampling budget per distractor before giving up with a capacity error.
const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGame {
    pub id: String,
    pub seed: u64,
    pub target: SceneState,
    pub distractors: Vec<SceneState>,
}

impl ReferenceGame {
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn n_distractors(&self) -> usize {
        self.distractors.len()
    }
}

/// Number of attributes on which two states disagree.
pub fn feature_diff(a: &SceneState, b: &SceneState) -> usize {
    a.values
        .iter()
        .zip(&b.values)
        .filter(|(x, y)| x != y)
        .count()
}

/// Sample a reference game: target uniform over all states, then each
/// distractor built by flipping one or two uniformly chosen attributes to
/// uniformly chosen different values. Duplicates are rejected and resampled.
pub fn sample_game(
    schema: &AttributeSchema,
    n_distractors: usize,
    seed: u64,
) -> Result<ReferenceGame> {
    if n_distractors == 0 {
        return Err(Error::ZeroDistractors);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target_values: Vec<u8> = (0..schema.len())
        .map(|attr| rng.random_range(0..schema.value_count(attr)) as u8)
        .collect();
    let target = SceneState::from_indices(schema, target_values)?;

    let max_diff = 2.min(schema.len());
    let mut distractors: Vec<SceneState> = Vec::with_capacity(n_distractors);
    for _ in 0..n_distractors {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > MAX_REJECTIONS {
                return Err(Error::DistractorCapacity {
                    attempts: MAX_REJECTIONS,
                });
            }
            let diff = rng.random_range(1..=max_diff);
            let attrs = index::sample(&mut rng, schema.len(), diff);
            let mut candidate = target.clone();
            for attr in attrs {
                let count = schema.value_count(attr);
                if count < 2 {
                    continue;
                }
                // Uniform over the values other than the target's.
                let mut v = rng.random_range(0..count - 1) as u8;
                if v >= candidate.value_index(attr) {
                    v += 1;
                }
                candidate = replace_value(&candidate, attr, v);
            }
            if candidate != target && !distractors.contains(&candidate) {
                distractors.push(candidate);
                break;
            }
        }
    }

    Ok(ReferenceGame {
        id: format!("g{seed:016x}"),
        seed,
        target,
        distractors,
    })
}

fn replace_value(state: &SceneState, attr: usize, value: u8) -> SceneState {
    let mut values = state.values.clone();
    values[attr] = value;
    SceneState { values }
}

/// One game as a JSONL line: id, seed, rendered descriptions, raw assignments.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GameRecord {
    pub id: String,
    pub seed: u64,
    pub target_description: String,
    pub distractor_descriptions: Vec<String>,
    pub target: BTreeMap<String, String>,
    pub distractors: Vec<BTreeMap<String, String>>,
}

impl GameRecord {
    pub fn from_game(schema: &AttributeSchema, game: &ReferenceGame) -> Result<Self> {
        Ok(GameRecord {
            id: game.id.clone(),
            seed: game.seed,
            target_description: render_description(schema, &game.target)?,
            distractor_descriptions: game
                .distractors
                .iter()
                .map(|d| render_description(schema, d))
                .collect::<Result<_>>()?,
            target: game.target.assignment(schema),
            distractors: game.distractors.iter().map(|d| d.assignment(schema)).collect(),
        })
    }

    pub fn to_game(&self, schema: &AttributeSchema) -> Result<ReferenceGame> {
        Ok(ReferenceGame {
            id: self.id.clone(),
            seed: self.seed,
            target: SceneState::from_assignment(schema, &self.target)?,
            distractors: self
                .distractors
                .iter()
                .map(|d| SceneState::from_assignment(schema, d))
                .collect::<Result<_>>()?,
        })
    }
}

/// Serialize a game as its canonical JSONL line.
pub fn serialize_game(schema: &AttributeSchema, game: &ReferenceGame) -> Result<String> {
    Ok(serde_json::to_string(&GameRecord::from_game(schema, game)?)?)
}
