//! Contrastive referring expression generation for reference games.
//!
//! A speaker must describe a target scene so that it can be told apart from a
//! set of distractor scenes. This crate couples a small symbolic scene domain
//! (six-attribute rooms with an exact template renderer and parser) with
//! propose-evaluate-select generation engines:
//!
//! - an iterative engine that grows descriptions one detail at a time until
//!   one is fully contrastive,
//! - a single-pass ablation that proposes, evaluates and selects once,
//! - a one-shot chain-of-thought baseline.
//!
//! Engines are parameterized over proposer/evaluator backends. The
//! [`oracle`] backend is deterministic and symbolic (with configurable
//! noise); the [`llm`] backend speaks to any OpenAI-compatible chat endpoint
//! and supports record/replay caching for offline runs. The [`harness`]
//! module runs experiment grids, scores outputs against ground truth, and
//! computes bootstrap statistics.

pub mod domain;
pub mod engine;
mod error;
pub mod game;
pub mod harness;
pub mod llm;
pub mod oracle;
pub(crate) mod rng;
pub mod stats;

pub use error::{Error, Result};
