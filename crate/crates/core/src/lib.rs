//! Decides which discussion threads refer to a given fully-qualified Java API
//! method by fusing a type-scoping score with a learned relevance score over
//! paragraph/code pair embeddings.

pub mod classifier;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod pipeline;
pub mod runner;
pub mod synth;
pub mod typescope;

pub use corpus::{ApiMethod, Label, Thread};
pub use error::{Error, Result};
