//! The scene domain: attribute schema, states, partial feature sets, the
//! canonical description template, and an exact symbolic semantics
//! (template parser plus subset truth evaluation).

mod parse;
mod render;
mod schema;

pub use parse::{normalize_utterance, parse_utterance};
pub use render::{render_description, render_features};
pub use schema::{
    enumerate_states, literal_truth, Attribute, AttributeSchema, FeatureSet, SceneState, Utterance,
};
