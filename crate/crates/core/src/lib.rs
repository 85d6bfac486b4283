//! Evolutionary synthesis of programs from input/output examples.
//!
//! A language model acts as the mutation operator inside an island-model
//! search. Visible examples are revealed through a nested curriculum,
//! mutations are steered by a transformation-priority prior, and candidates
//! are scored on execution with complexity and memorization penalties.
//! Hidden examples are touched exactly once per run, by held-out evaluation.

pub mod candidate;
pub mod catalog;
pub mod curriculum;
pub mod diff;
pub mod engine;
pub mod executor;
pub mod harness;
pub mod llm;
pub mod prompt;
pub mod scoring;
pub mod source;
pub mod value;

pub use value::{values_equal, Value};
