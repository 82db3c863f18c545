//! Numerical core of the emotion-retrieval probing harness.
//!
//! A probe is a pair of linear maps over frozen language-model embeddings:
//! one for emotion-label texts, one for event texts. Scores are the cosine
//! of the two projections. The probe is trained with a supervised
//! contrastive loss whose anchors are the emotion labels, and evaluated by
//! ranking held-out events per emotion query.
//!
//! The crate is `no_std` (it needs `alloc`). Transcendental functions come
//! from `libm` and randomness from ChaCha8, so every number it produces is
//! reproducible across platforms. File IO, rendering and the CLI live in the
//! `emoprobe` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod embedding;
pub mod format;
pub mod linalg;
pub mod metrics;
pub mod probe;
pub mod report;
pub mod retrieval;
pub mod synth;

pub use corpus::{Corpus, DistributionSummary, EmotionCategory, EmotionalEvent, Split};
pub use embedding::{AlignmentReport, EmbeddingMatrix, EmbeddingSet};
pub use linalg::Matrix;
pub use metrics::{MetricKind, MetricValue};
pub use probe::{ProbeParameters, TrainConfig, TrainedProbe};
pub use report::EvaluationReport;
pub use retrieval::RankedList;
