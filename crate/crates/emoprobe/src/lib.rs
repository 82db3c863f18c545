//! File formats, reports and command-line workflows for the emotion
//! retrieval probe. The numerical work lives in [`emoprobe_core`]; this crate
//! reads and writes the on-disk artifacts around it:
//!
//! * corpus files (`corpus.jsonl` plus a `categories.json` sidecar),
//! * `EMBD` embedding matrices with line-per-row manifests,
//! * probe checkpoints,
//! * evaluation reports in JSON, tab-separated and plain-text form,
//! * run manifests that make every command replayable.

pub mod checkpoint;
pub mod cli;
pub mod corpus_io;
pub mod error;
pub mod manifest;
pub mod matrix_io;
pub mod render;

pub use emoprobe_core as core;
pub use error::{Error, Result};
