//! Precision, diversity and explicit/implicit rates over ranked lists.
//!
//! All values are stored as exact integer counts; the ratio is derived.
//!
//! * `P@K = n_cr / n_ar`: `n_cr` top-K entries whose gold emotion is the
//!   query, `n_ar = min(K, pool size)`.
//! * `D@K = n_ur / n_cr`: `n_ur` distinct normalized texts among the correct
//!   top-K entries.
//! * explicit (implicit) rate: share of the correct top-K entries whose
//!   explicit flag is set (clear).

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Corpus, Split};
use crate::embedding::EmbeddingSet;
use crate::probe::TrainedProbe;
use crate::report::{EvaluationReport, MacroValue, REPORT_SCHEMA_VERSION};
use crate::retrieval::{RankedList, Ranker, RetrievalError};

/// NFC, lowercased, trimmed, internal whitespace runs collapsed to one space.
pub fn normalize_text(text: &str) -> String {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    let composed: String = lowered.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Precision,
    Diversity,
    ExplicitRate,
    ImplicitRate,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Precision,
        MetricKind::Diversity,
        MetricKind::ExplicitRate,
        MetricKind::ImplicitRate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Precision => "precision",
            MetricKind::Diversity => "diversity",
            MetricKind::ExplicitRate => "explicit_rate",
            MetricKind::ImplicitRate => "implicit_rate",
        }
    }

    /// Short column label, e.g. `P@10`.
    pub fn label(self, k: usize) -> String {
        let prefix = match self {
            MetricKind::Precision => "P",
            MetricKind::Diversity => "D",
            MetricKind::ExplicitRate => "E",
            MetricKind::ImplicitRate => "I",
        };
        alloc::format!("{prefix}@{k}")
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether an explicit-rate metric counts explicit or implicit events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplicitMode {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub k: usize,
    pub query: String,
    pub numerator: u64,
    pub denominator: u64,
    /// False when the ratio is not measurable (0/0, or no relevant event in
    /// the pool).
    pub defined: bool,
}

impl MetricValue {
    /// The ratio, or 0 when undefined.
    pub fn value(&self) -> f64 {
        if self.defined && self.denominator > 0 {
            self.numerator as f64 / self.denominator as f64
        } else {
            0.0
        }
    }
}

fn correct_entries(
    list: &RankedList,
    k: usize,
) -> impl Iterator<Item = &crate::retrieval::RankedEntry> {
    assert!(k >= 1, "K must be at least 1");
    list.entries
        .iter()
        .take(k)
        .filter(move |e| e.emotion == list.query)
}

pub fn precision_at_k(list: &RankedList, k: usize) -> MetricValue {
    let n_cr = correct_entries(list, k).count() as u64;
    let n_ar = k.min(list.len()) as u64;
    MetricValue {
        kind: MetricKind::Precision,
        k,
        query: list.query.clone(),
        numerator: n_cr,
        denominator: n_ar,
        defined: n_ar > 0,
    }
}

pub fn diversity_at_k(list: &RankedList, k: usize) -> MetricValue {
    let mut n_cr = 0u64;
    let mut unique = BTreeSet::new();
    for e in correct_entries(list, k) {
        n_cr += 1;
        unique.insert(e.text.as_str());
    }
    MetricValue {
        kind: MetricKind::Diversity,
        k,
        query: list.query.clone(),
        numerator: unique.len() as u64,
        denominator: n_cr,
        defined: n_cr > 0,
    }
}

pub fn explicit_rate_at_k(list: &RankedList, k: usize, mode: ExplicitMode) -> MetricValue {
    let want = mode == ExplicitMode::Explicit;
    let (mut n_cr, mut hits) = (0u64, 0u64);
    for e in correct_entries(list, k) {
        n_cr += 1;
        if e.explicit == want {
            hits += 1;
        }
    }
    MetricValue {
        kind: match mode {
            ExplicitMode::Explicit => MetricKind::ExplicitRate,
            ExplicitMode::Implicit => MetricKind::ImplicitRate,
        },
        k,
        query: list.query.clone(),
        numerator: hits,
        denominator: n_cr,
        defined: n_cr > 0,
    }
}

/// All four metrics for one list and cutoff, in [`MetricKind::ALL`] order.
pub fn metrics_at_k(list: &RankedList, k: usize) -> [MetricValue; 4] {
    [
        precision_at_k(list, k),
        diversity_at_k(list, k),
        explicit_rate_at_k(list, k, ExplicitMode::Explicit),
        explicit_rate_at_k(list, k, ExplicitMode::Implicit),
    ]
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no cutoffs requested")]
    NoCutoffs,
    #[error("cutoff K must be at least 1")]
    ZeroK,
    #[error("duplicate cutoff K = {0}")]
    DuplicateK(usize),
    #[error("embeddings are not aligned with the corpus")]
    Alignment(crate::embedding::AlignmentReport),
    #[error("probe expects input dimension {probe}, embeddings have {embeddings}")]
    DimMismatch { probe: usize, embeddings: usize },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub pool: Split,
    /// Reference to the probe checkpoint recorded in the report.
    pub checkpoint: String,
}

/// Cutoffs used when none are given.
pub const DEFAULT_KS: [usize; 3] = [3, 10, 50];

/// Ranks the pool for every emotion and computes every metric at every
/// cutoff, plus macro and micro aggregates per (metric, K).
///
/// A query with no event of its emotion in the pool has all of its metrics
/// marked undefined; macro averages skip undefined values and list the
/// skipped queries.
pub fn evaluate_all(
    probe: &TrainedProbe,
    corpus: &Corpus,
    embeddings: &EmbeddingSet,
    options: &EvalOptions,
) -> Result<EvaluationReport, EvalError> {
    if options.ks.is_empty() {
        return Err(EvalError::NoCutoffs);
    }
    let mut seen = BTreeSet::new();
    for &k in &options.ks {
        if k == 0 {
            return Err(EvalError::ZeroK);
        }
        if !seen.insert(k) {
            return Err(EvalError::DuplicateK(k));
        }
    }
    let report = embeddings.validate_alignment(corpus);
    if !report.passed() {
        return Err(EvalError::Alignment(report));
    }
    let params = &probe.parameters;
    if params.input_dim() != embeddings.dim() {
        return Err(EvalError::DimMismatch {
            probe: params.input_dim(),
            embeddings: embeddings.dim(),
        });
    }

    let ranker = Ranker::for_split(params, embeddings, corpus, options.pool)?;
    let mut cells = Vec::new();
    for category in corpus.categories() {
        let list = ranker.rank(&category.name)?;
        let measurable = ranker.pool().iter().any(|e| e.emotion == category.name);
        for &k in &options.ks {
            for mut m in metrics_at_k(&list, k) {
                m.defined &= measurable;
                cells.push(m);
            }
        }
    }

    let emotions: Vec<String> = corpus.categories().iter().map(|c| c.name.clone()).collect();
    let mut macro_rows = Vec::new();
    let mut micro_rows = Vec::new();
    for &k in &options.ks {
        for kind in MetricKind::ALL {
            let group: Vec<&MetricValue> = cells
                .iter()
                .filter(|m| m.k == k && m.kind == kind)
                .collect();
            macro_rows.push(MacroValue::over(kind, k, &group));
            let defined: Vec<&&MetricValue> = group.iter().filter(|m| m.defined).collect();
            let numerator = defined.iter().map(|m| m.numerator).sum();
            let denominator = defined.iter().map(|m| m.denominator).sum();
            micro_rows.push(MetricValue {
                kind,
                k,
                query: String::from("(micro)"),
                numerator,
                denominator,
                defined: denominator > 0,
            });
        }
    }

    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: String::from(env!("CARGO_PKG_VERSION")),
        model_tag: embeddings.model_tag.clone(),
        corpus_tag: corpus.source_tag().into(),
        checkpoint: options.checkpoint.clone(),
        pool: options.pool,
        timestamp: None,
        ks: options.ks.clone(),
        emotions,
        cells,
        macro_rows,
        micro_rows,
    })
}
