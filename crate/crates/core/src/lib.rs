//! Language-aware evaluation of multilingual retrieval.
//!
//! Corpora are groups of parallel passages in several languages. Beyond the
//! usual relevance metrics, the engine measures whether a retriever prefers
//! the passage written in the query's own language.

pub mod error;
pub mod format;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod report;
pub mod retrieval;
pub mod runner;

pub use error::{Error, Result};
