use std::path::PathBuf;

use emoprobe_core::embedding::{AlignmentReport, EmbeddingError};
use emoprobe_core::format::FormatError;
use emoprobe_core::metrics::EvalError;
use emoprobe_core::probe::{ProbeError, TrainError};
use emoprobe_core::report::ReportError;
use emoprobe_core::synth::ConfigError;
use thiserror::Error;

use crate::corpus_io::CorpusFileError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    /// `validate` found alignment problems.
    pub const FINDINGS: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const VALIDATION: u8 = 3;
    pub const NUMERICAL: u8 = 4;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusFileError,
    },
    #[error("{path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: EmbeddingError,
    },
    #[error("{path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error("embeddings are not aligned with the corpus: {}", summarize(.0))]
    Alignment(AlignmentReport),
    #[error("probe expects input dimension {probe}, embeddings have dimension {embeddings}")]
    DimMismatch { probe: usize, embeddings: usize },
    #[error(transparent)]
    Train(TrainError),
    #[error(transparent)]
    Eval(EvalError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Synth(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("input {name} changed since the run: digest {actual} != recorded {recorded}")]
    DigestMismatch {
        name: String,
        recorded: String,
        actual: String,
    },
}

fn summarize(r: &AlignmentReport) -> String {
    let mut parts = Vec::new();
    let mut list = |label: &str, ids: &[String]| {
        if !ids.is_empty() {
            let shown: Vec<&str> = ids.iter().take(5).map(String::as_str).collect();
            let more = if ids.len() > 5 { ", ..." } else { "" };
            parts.push(format!(
                "{} {label} [{}{more}]",
                ids.len(),
                shown.join(", ")
            ));
        }
    };
    list("missing events", &r.missing_events);
    list("orphan events", &r.orphan_events);
    list("missing labels", &r.missing_labels);
    list("orphan labels", &r.orphan_labels);
    if !r.dims_match() {
        parts.push(format!(
            "event dim {} != label dim {}",
            r.event_dim, r.label_dim
        ));
    }
    parts.join("; ")
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Alignment(r) => Error::Alignment(r),
            other => Error::Train(other),
        }
    }
}

impl From<EvalError> for Error {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Alignment(r) => Error::Alignment(r),
            EvalError::DimMismatch { probe, embeddings } => {
                Error::DimMismatch { probe, embeddings }
            }
            other => Error::Eval(other),
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) | Error::Synth(_) => exit::USAGE,
            Error::Train(TrainError::Config(_)) => exit::USAGE,
            Error::Eval(EvalError::NoCutoffs | EvalError::ZeroK | EvalError::DuplicateK(_)) => {
                exit::USAGE
            }
            Error::Train(TrainError::Diverged { .. } | TrainError::Numerical { .. })
            | Error::Probe(_) => exit::NUMERICAL,
            Error::Eval(EvalError::Retrieval(emoprobe_core::retrieval::RetrievalError::Probe(
                _,
            ))) => exit::NUMERICAL,
            _ => exit::VALIDATION,
        }
    }
}
