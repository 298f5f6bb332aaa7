//! Prompt compression for long LLM contexts.
//!
//! The pipeline splits an input document into semantically coherent chunks,
//! scores each chunk against an embedding of the whole document, allocates a
//! per-chunk token budget so weakly relevant text shrinks the most, then
//! summarizes chunks in ascending relevance order with keyword preservation
//! and an early stop once the requested reduction is reached. Reassembly
//! keeps original order and separators.

pub mod allocator;
pub mod backends;
pub mod chunker;
pub mod compressor;
pub mod error;
pub mod eval;
pub mod keywords;
pub mod pipeline;
pub mod synth;
pub mod text;

pub use error::{Result, ScopeError};
