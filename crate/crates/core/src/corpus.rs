//! Corpus data model: emotion categories, emotional events and their
//! fixed train/valid/test partition.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("record {index}: duplicate event id {id:?}")]
    DuplicateId { index: usize, id: String },
    #[error("record {index}: empty event text")]
    EmptyText { index: usize },
    #[error("record {index}: empty event id")]
    EmptyId { index: usize },
    #[error("record {index}: unknown emotion {emotion:?}")]
    UnknownEmotion { index: usize, emotion: String },
    #[error("unknown split {0:?} (expected train, valid or test)")]
    UnknownSplit(String),
    #[error("category {index}: empty name")]
    EmptyCategoryName { index: usize },
    #[error("category {name:?}: empty label text")]
    EmptyLabelText { name: String },
    #[error("duplicate category {0:?}")]
    DuplicateCategory(String),
}

/// Which partition of the corpus an event belongs to. Splits are data, never
/// recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    fn index(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::UnknownSplit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionCategory {
    pub name: String,
    /// The exact string embedded for this emotion. Defaults to `name`.
    pub label_text: String,
}

impl EmotionCategory {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        Self {
            label_text: name.clone(),
            name,
        }
    }

    pub fn with_label_text(name: impl Into<String>, label_text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            label_text: label_text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionalEvent {
    pub id: String,
    pub text: String,
    pub emotion: String,
    /// True when the text carries overt emotion wording.
    pub explicit: bool,
    pub split: Split,
}

/// A validated corpus. Construct through [`CorpusBuilder`] or [`Corpus::new`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    categories: Vec<EmotionCategory>,
    events: Vec<EmotionalEvent>,
    source_tag: String,
}

impl Corpus {
    pub fn new(
        categories: Vec<EmotionCategory>,
        events: Vec<EmotionalEvent>,
        source_tag: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let mut builder = CorpusBuilder::new(categories, source_tag)?;
        for event in events {
            builder.push(event)?;
        }
        Ok(builder.finish())
    }

    pub fn categories(&self) -> &[EmotionCategory] {
        &self.categories
    }

    pub fn events(&self) -> &[EmotionalEvent] {
        &self.events
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn category(&self, name: &str) -> Option<&EmotionCategory> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.name == name)
    }

    /// Events of one split, in corpus order.
    pub fn split(&self, split: Split) -> impl Iterator<Item = &EmotionalEvent> + '_ {
        self.events.iter().filter(move |e| e.split == split)
    }

    pub fn distribution_summary(&self) -> DistributionSummary {
        DistributionSummary::of(self)
    }
}

/// Incremental corpus validation, so file readers can report the offending
/// record as soon as it is pushed.
#[derive(Debug)]
pub struct CorpusBuilder {
    categories: Vec<EmotionCategory>,
    category_names: BTreeSet<String>,
    events: Vec<EmotionalEvent>,
    ids: BTreeSet<String>,
    source_tag: String,
}

impl CorpusBuilder {
    pub fn new(
        categories: Vec<EmotionCategory>,
        source_tag: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let mut category_names = BTreeSet::new();
        for (index, c) in categories.iter().enumerate() {
            if c.name.is_empty() {
                return Err(CorpusError::EmptyCategoryName { index });
            }
            if c.label_text.is_empty() {
                return Err(CorpusError::EmptyLabelText {
                    name: c.name.clone(),
                });
            }
            if !category_names.insert(c.name.clone()) {
                return Err(CorpusError::DuplicateCategory(c.name.clone()));
            }
        }
        Ok(Self {
            categories,
            category_names,
            events: Vec::new(),
            ids: BTreeSet::new(),
            source_tag: source_tag.into(),
        })
    }

    /// Number of events accepted so far; the index the next push will get.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn push(&mut self, event: EmotionalEvent) -> Result<(), CorpusError> {
        let index = self.events.len();
        if event.id.is_empty() {
            return Err(CorpusError::EmptyId { index });
        }
        if event.text.is_empty() {
            return Err(CorpusError::EmptyText { index });
        }
        if !self.category_names.contains(&event.emotion) {
            return Err(CorpusError::UnknownEmotion {
                index,
                emotion: event.emotion,
            });
        }
        if !self.ids.insert(event.id.clone()) {
            return Err(CorpusError::DuplicateId {
                index,
                id: event.id,
            });
        }
        self.events.push(event);
        Ok(())
    }

    pub fn finish(self) -> Corpus {
        Corpus {
            categories: self.categories,
            events: self.events,
            source_tag: self.source_tag,
        }
    }
}

/// Event counts per (category, split) with explicit counts and totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub rows: Vec<DistributionRow>,
    pub totals: DistributionRow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub category: String,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub explicit: usize,
}

impl DistributionRow {
    fn zero(category: &str) -> Self {
        Self {
            category: category.to_string(),
            train: 0,
            valid: 0,
            test: 0,
            explicit: 0,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }

    pub fn count(&self, split: Split) -> usize {
        [self.train, self.valid, self.test][split.index()]
    }

    fn bump(&mut self, split: Split) {
        match split {
            Split::Train => self.train += 1,
            Split::Valid => self.valid += 1,
            Split::Test => self.test += 1,
        }
    }
}

impl DistributionSummary {
    pub fn of(corpus: &Corpus) -> Self {
        let mut by_name: BTreeMap<&str, usize> = BTreeMap::new();
        let mut rows: Vec<DistributionRow> = corpus
            .categories()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                by_name.insert(c.name.as_str(), i);
                DistributionRow::zero(&c.name)
            })
            .collect();
        let mut totals = DistributionRow::zero("total");
        for event in corpus.events() {
            // Corpus validation guarantees the category exists.
            let row = &mut rows[by_name[event.emotion.as_str()]];
            row.bump(event.split);
            totals.bump(event.split);
            if event.explicit {
                row.explicit += 1;
                totals.explicit += 1;
            }
        }
        Self { rows, totals }
    }

    pub fn row(&self, category: &str) -> Option<&DistributionRow> {
        self.rows.iter().find(|r| r.category == category)
    }

    /// True when the totals row equals the column sums.
    pub fn is_consistent(&self) -> bool {
        let mut sum = DistributionRow::zero("total");
        for r in &self.rows {
            sum.train += r.train;
            sum.valid += r.valid;
            sum.test += r.test;
            sum.explicit += r.explicit;
        }
        sum == self.totals
    }
}
