//! Frozen embedding tables and their alignment with a corpus.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingError {
    #[error("matrix shape {count}x{dim} does not match {len} values")]
    Shape {
        count: usize,
        dim: usize,
        len: usize,
    },
    #[error("embedding dimension must be at least 1")]
    ZeroDim,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("{what} manifest has {manifest} ids but the matrix has {count} rows")]
    ManifestLength {
        what: &'static str,
        manifest: usize,
        count: usize,
    },
    #[error("{what} manifest: duplicate id {id:?}")]
    DuplicateId { what: &'static str, id: String },
    #[error("{what} manifest: id {id:?} is empty or contains a line break")]
    InvalidId { what: &'static str, id: String },
}

/// A `count × dim` float32 matrix, row-major, finite everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    count: usize,
    dim: usize,
    values: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(count: usize, dim: usize, values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDim);
        }
        if values.len() != count * dim {
            return Err(EmbeddingError::Shape {
                count,
                dim,
                len: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite {
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(Self { count, dim, values })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Row `i` widened to `f64`.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| f64::from(v)).collect()
    }
}

/// A matrix plus its manifest: row `i` belongs to `ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestMatrix {
    ids: Vec<String>,
    matrix: EmbeddingMatrix,
    index: BTreeMap<String, usize>,
}

impl ManifestMatrix {
    pub fn new(
        what: &'static str,
        ids: Vec<String>,
        matrix: EmbeddingMatrix,
    ) -> Result<Self, EmbeddingError> {
        if ids.len() != matrix.count() {
            return Err(EmbeddingError::ManifestLength {
                what,
                manifest: ids.len(),
                count: matrix.count(),
            });
        }
        let mut index = BTreeMap::new();
        for (row, id) in ids.iter().enumerate() {
            if id.is_empty() || id.contains(['\n', '\r']) {
                return Err(EmbeddingError::InvalidId {
                    what,
                    id: id.clone(),
                });
            }
            if index.insert(id.clone(), row).is_some() {
                return Err(EmbeddingError::DuplicateId {
                    what,
                    id: id.clone(),
                });
            }
        }
        Ok(Self { ids, matrix, index })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.row_of(id).map(|r| self.matrix.row(r))
    }
}

/// Event and emotion-label embeddings from one frozen model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub events: ManifestMatrix,
    pub labels: ManifestMatrix,
    pub model_tag: String,
}

impl EmbeddingSet {
    pub fn new(
        event_ids: Vec<String>,
        event_matrix: EmbeddingMatrix,
        label_names: Vec<String>,
        label_matrix: EmbeddingMatrix,
        model_tag: impl Into<String>,
    ) -> Result<Self, EmbeddingError> {
        Ok(Self {
            events: ManifestMatrix::new("event", event_ids, event_matrix)?,
            labels: ManifestMatrix::new("label", label_names, label_matrix)?,
            model_tag: model_tag.into(),
        })
    }

    /// Event dimension; the probe input size.
    pub fn dim(&self) -> usize {
        self.events.matrix().dim()
    }

    pub fn event_vector(&self, id: &str) -> Option<&[f32]> {
        self.events.vector(id)
    }

    pub fn label_vector(&self, category: &str) -> Option<&[f32]> {
        self.labels.vector(category)
    }

    pub fn validate_alignment(&self, corpus: &Corpus) -> AlignmentReport {
        validate_alignment(self, corpus)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct AlignmentReport {
    /// Corpus event ids with no embedding row, in corpus order.
    pub missing_events: Vec<String>,
    /// Embedding rows whose id is not a corpus event, in manifest order.
    pub orphan_events: Vec<String>,
    /// Corpus categories with no label embedding.
    pub missing_labels: Vec<String>,
    /// Label rows naming no declared category.
    pub orphan_labels: Vec<String>,
    pub event_dim: usize,
    pub label_dim: usize,
}

impl AlignmentReport {
    pub fn dims_match(&self) -> bool {
        self.event_dim == self.label_dim
    }

    pub fn passed(&self) -> bool {
        self.missing_events.is_empty()
            && self.orphan_events.is_empty()
            && self.missing_labels.is_empty()
            && self.orphan_labels.is_empty()
            && self.dims_match()
    }
}

pub fn validate_alignment(set: &EmbeddingSet, corpus: &Corpus) -> AlignmentReport {
    let corpus_ids: BTreeSet<&str> = corpus.events().iter().map(|e| e.id.as_str()).collect();
    let category_names: BTreeSet<&str> = corpus
        .categories()
        .iter()
        .map(|c| c.name.as_str())
        .collect();
    AlignmentReport {
        missing_events: corpus
            .events()
            .iter()
            .filter(|e| set.events.row_of(&e.id).is_none())
            .map(|e| e.id.clone())
            .collect(),
        orphan_events: set
            .events
            .ids()
            .iter()
            .filter(|id| !corpus_ids.contains(id.as_str()))
            .cloned()
            .collect(),
        missing_labels: corpus
            .categories()
            .iter()
            .filter(|c| set.labels.row_of(&c.name).is_none())
            .map(|c| c.name.clone())
            .collect(),
        orphan_labels: set
            .labels
            .ids()
            .iter()
            .filter(|n| !category_names.contains(n.as_str()))
            .cloned()
            .collect(),
        event_dim: set.events.matrix().dim(),
        label_dim: set.labels.matrix().dim(),
    }
}
