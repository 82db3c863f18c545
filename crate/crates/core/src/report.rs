//! Evaluation reports and cross-model comparison tables.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Split;
use crate::metrics::{MetricKind, MetricValue};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Mean of the defined per-query values of one (metric, K) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroValue {
    pub kind: MetricKind,
    pub k: usize,
    pub value: f64,
    pub defined: bool,
    /// Queries whose value entered the mean.
    pub included: usize,
    /// Queries skipped because their value was undefined.
    pub skipped: Vec<String>,
}

impl MacroValue {
    pub fn over(kind: MetricKind, k: usize, values: &[&MetricValue]) -> Self {
        let mut sum = 0.0;
        let mut included = 0;
        let mut skipped = Vec::new();
        for m in values {
            if m.defined {
                sum += m.value();
                included += 1;
            } else {
                skipped.push(m.query.clone());
            }
        }
        Self {
            kind,
            k,
            value: if included > 0 {
                sum / included as f64
            } else {
                0.0
            },
            defined: included > 0,
            included,
            skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub model_tag: String,
    pub corpus_tag: String,
    pub checkpoint: String,
    pub pool: Split,
    /// Caller-supplied; left empty so repeated runs produce identical bytes.
    pub timestamp: Option<String>,
    pub ks: Vec<usize>,
    pub emotions: Vec<String>,
    /// Emotion-major, then K, then metric kind.
    pub cells: Vec<MetricValue>,
    pub macro_rows: Vec<MacroValue>,
    pub micro_rows: Vec<MetricValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("report field {0} is empty")]
    EmptyProvenance(&'static str),
    #[error("report has {count} cells for ({emotion}, K={k}, {kind}); expected exactly 1")]
    CellCount {
        emotion: String,
        k: usize,
        kind: MetricKind,
        count: usize,
    },
    #[error("nothing to merge")]
    NoReports,
    #[error("report {model:?}: {what} differs from the first report")]
    Mismatch { model: String, what: &'static str },
    #[error("model tag {0:?} appears in more than one report")]
    DuplicateModel(String),
}

impl EvaluationReport {
    pub fn cell(&self, emotion: &str, k: usize, kind: MetricKind) -> Option<&MetricValue> {
        self.cells
            .iter()
            .find(|m| m.query == emotion && m.k == k && m.kind == kind)
    }

    pub fn macro_value(&self, k: usize, kind: MetricKind) -> Option<&MacroValue> {
        self.macro_rows.iter().find(|m| m.k == k && m.kind == kind)
    }

    pub fn micro_value(&self, k: usize, kind: MetricKind) -> Option<&MetricValue> {
        self.micro_rows.iter().find(|m| m.k == k && m.kind == kind)
    }

    /// Provenance is present and every (emotion, K, metric) cell appears
    /// exactly once.
    pub fn validate(&self) -> Result<(), ReportError> {
        for (name, value) in [
            ("model_tag", &self.model_tag),
            ("corpus_tag", &self.corpus_tag),
            ("checkpoint", &self.checkpoint),
            ("tool_version", &self.tool_version),
        ] {
            if value.is_empty() {
                return Err(ReportError::EmptyProvenance(name));
            }
        }
        for emotion in &self.emotions {
            for &k in &self.ks {
                for kind in MetricKind::ALL {
                    let count = self
                        .cells
                        .iter()
                        .filter(|m| &m.query == emotion && m.k == k && m.kind == kind)
                        .count();
                    if count != 1 {
                        return Err(ReportError::CellCount {
                            emotion: emotion.clone(),
                            k,
                            kind,
                            count,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model_tag: String,
    pub emotion: String,
    pub k: usize,
    /// In [`MetricKind::ALL`] order.
    pub metrics: Vec<MetricValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub corpus_tag: String,
    pub ks: Vec<usize>,
    pub emotions: Vec<String>,
    /// Sorted by (model tag, emotion, K).
    pub rows: Vec<ComparisonRow>,
}

/// One row per (model, emotion, K). All reports must share corpus, pool,
/// emotions and cutoffs, and model tags must be distinct.
pub fn merge(reports: &[EvaluationReport]) -> Result<ComparisonTable, ReportError> {
    let first = reports.first().ok_or(ReportError::NoReports)?;
    let sorted = |v: &[String]| v.iter().cloned().collect::<BTreeSet<_>>();
    let sorted_ks = |v: &[usize]| v.iter().copied().collect::<BTreeSet<_>>();
    let mut models = BTreeSet::new();
    let mut rows = Vec::new();
    for r in reports {
        r.validate()?;
        let mismatch = |what| ReportError::Mismatch {
            model: r.model_tag.clone(),
            what,
        };
        if r.corpus_tag != first.corpus_tag {
            return Err(mismatch("corpus"));
        }
        if r.pool != first.pool {
            return Err(mismatch("candidate pool"));
        }
        if sorted(&r.emotions) != sorted(&first.emotions) {
            return Err(mismatch("emotion set"));
        }
        if sorted_ks(&r.ks) != sorted_ks(&first.ks) {
            return Err(mismatch("cutoffs"));
        }
        if !models.insert(r.model_tag.clone()) {
            return Err(ReportError::DuplicateModel(r.model_tag.clone()));
        }
        for emotion in &r.emotions {
            for &k in &r.ks {
                rows.push(ComparisonRow {
                    model_tag: r.model_tag.clone(),
                    emotion: emotion.clone(),
                    k,
                    metrics: MetricKind::ALL
                        .iter()
                        .map(|&kind| r.cell(emotion, k, kind).cloned().expect("validated"))
                        .collect(),
                });
            }
        }
    }
    rows.sort_by(|a, b| (&a.model_tag, &a.emotion, a.k).cmp(&(&b.model_tag, &b.emotion, b.k)));
    let mut ks = first.ks.clone();
    ks.sort_unstable();
    Ok(ComparisonTable {
        corpus_tag: first.corpus_tag.clone(),
        ks,
        emotions: first.emotions.clone(),
        rows,
    })
}
