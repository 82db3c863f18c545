//! Exact ranking of a candidate pool for each emotion query.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, EmotionalEvent, Split};
use crate::embedding::EmbeddingSet;
use crate::linalg::{dot, Matrix};
use crate::metrics::normalize_text;
use crate::probe::{gather_rows, ProbeError, ProbeParameters, Projected, Side};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("no label embedding for emotion {0:?}")]
    MissingLabel(String),
    #[error("no embedding for pool event {0:?}")]
    MissingEvent(String),
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("K must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub event_id: String,
    pub score: f64,
    pub emotion: String,
    pub explicit: bool,
    /// `normalize_text` of the event text; the de-duplication key.
    pub text: String,
}

/// Candidates ordered by descending score, ties by ascending event id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query: String,
    pub pool_tag: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first `min(k, len)` entries.
    pub fn top_k(&self, k: usize) -> Result<RankedList, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        Ok(RankedList {
            query: self.query.clone(),
            pool_tag: self.pool_tag.clone(),
            entries: self.entries[..k.min(self.entries.len())].to_vec(),
        })
    }

    /// Event ids in rank order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.event_id.as_str())
    }
}

/// Ranking order: score descending, then id ascending.
pub fn rank_order(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.event_id.cmp(&b.event_id))
}

/// A candidate pool with its event projections computed once, so that
/// several queries can be ranked against it.
pub struct Ranker<'a> {
    params: &'a ProbeParameters,
    embeddings: &'a EmbeddingSet,
    events: Vec<&'a EmotionalEvent>,
    projected: Projected,
    pool_tag: String,
}

impl<'a> Ranker<'a> {
    pub fn new(
        params: &'a ProbeParameters,
        embeddings: &'a EmbeddingSet,
        events: Vec<&'a EmotionalEvent>,
        pool_tag: impl Into<String>,
    ) -> Result<Self, RetrievalError> {
        if events.is_empty() {
            return Err(RetrievalError::EmptyPool);
        }
        let rows = events
            .iter()
            .map(|e| {
                embeddings
                    .events
                    .row_of(&e.id)
                    .ok_or_else(|| RetrievalError::MissingEvent(e.id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let matrix = gather_rows(embeddings.events.matrix(), &rows);
        let projected = params.project_normalized(Side::Event, &matrix)?;
        Ok(Self {
            params,
            embeddings,
            events,
            projected,
            pool_tag: pool_tag.into(),
        })
    }

    /// Pool of one corpus split, in corpus order.
    pub fn for_split(
        params: &'a ProbeParameters,
        embeddings: &'a EmbeddingSet,
        corpus: &'a Corpus,
        split: Split,
    ) -> Result<Self, RetrievalError> {
        Self::new(
            params,
            embeddings,
            corpus.split(split).collect(),
            split.as_str(),
        )
    }

    pub fn pool(&self) -> &[&'a EmotionalEvent] {
        &self.events
    }

    /// Ranks the pool for the emotion named `query`.
    pub fn rank(&self, query: &str) -> Result<RankedList, RetrievalError> {
        let label = self
            .embeddings
            .label_vector(query)
            .ok_or_else(|| RetrievalError::MissingLabel(query.into()))?;
        let label = Matrix::from_vec(
            1,
            label.len(),
            label.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("one row");
        let u = self.params.project_normalized(Side::Label, &label)?;
        let direction = u.unit.row(0);
        let mut entries: Vec<RankedEntry> = self
            .events
            .iter()
            .enumerate()
            .map(|(j, e)| RankedEntry {
                event_id: e.id.clone(),
                score: dot(direction, self.projected.unit.row(j)),
                emotion: e.emotion.clone(),
                explicit: e.explicit,
                text: normalize_text(&e.text),
            })
            .collect();
        entries.sort_by(rank_order);
        Ok(RankedList {
            query: query.into(),
            pool_tag: self.pool_tag.clone(),
            entries,
        })
    }
}

/// Ranks `pool` for one emotion query.
pub fn rank_events(
    params: &ProbeParameters,
    query: &str,
    pool: Vec<&EmotionalEvent>,
    embeddings: &EmbeddingSet,
    pool_tag: &str,
) -> Result<RankedList, RetrievalError> {
    Ranker::new(params, embeddings, pool, pool_tag)?.rank(query)
}
