//! Review-corpus refinement, LLM topic labeling and the metrics built on it.

pub mod corpus;
pub mod error;
pub mod io;
pub mod llmgate;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod refine;
pub mod sampling;
pub mod synth;
pub mod text;
pub mod topics;
pub mod trends;

pub use error::{CoreError, Result};
