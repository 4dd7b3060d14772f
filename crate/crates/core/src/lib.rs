//! Programming-by-example for regex-based string transformations.
//!
//! The crate covers the whole pipeline: a small string transformation
//! language ([`dsl`]), a synthetic data generator ([`generator`]), a
//! reverse-mode differentiable substrate ([`nn`]) with the synthesis and
//! induction networks built on it ([`model`]), beam-search decoding with
//! execution-guided pruning ([`search`]), and evaluation metrics
//! ([`metrics`]).

pub mod dsl;
pub mod generator;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod search;
