//! Corpus files.
//!
//! `corpus.jsonl` holds one JSON object per line with exactly the fields
//! `id`, `text`, `emotion`, `explicit` and `split`:
//!
//! ```text
//! {"id":"e1","text":"successful career","emotion":"joy","explicit":false,"split":"train"}
//! ```
//!
//! Blank lines are skipped. The `categories.json` sidecar declares the
//! emotion categories, in order, and the corpus provenance tag:
//!
//! ```text
//! {"source_tag":"c3kg-export-2024","categories":[{"name":"joy","label_text":"joy"}]}
//! ```
//!
//! `label_text` may be omitted and defaults to `name`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use emoprobe_core::corpus::{
    Corpus, CorpusBuilder, CorpusError, EmotionCategory, EmotionalEvent, Split,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const CATEGORIES_FILE: &str = "categories.json";

#[derive(Debug, Error)]
pub enum CorpusFileError {
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: CorpusError,
    },
    #[error("line {line}: {source}")]
    Read {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("categories: {0}")]
    Categories(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    text: String,
    emotion: String,
    explicit: bool,
    split: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoriesFile {
    pub source_tag: String,
    pub categories: Vec<CategoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_text: Option<String>,
}

impl CategoriesFile {
    pub fn of(corpus: &Corpus) -> Self {
        Self {
            source_tag: corpus.source_tag().to_string(),
            categories: corpus
                .categories()
                .iter()
                .map(|c| CategoryEntry {
                    name: c.name.clone(),
                    label_text: Some(c.label_text.clone()),
                })
                .collect(),
        }
    }

    pub fn to_categories(&self) -> Vec<EmotionCategory> {
        self.categories
            .iter()
            .map(|c| {
                EmotionCategory::with_label_text(
                    c.name.clone(),
                    c.label_text.clone().unwrap_or_else(|| c.name.clone()),
                )
            })
            .collect()
    }
}

pub fn parse_categories(reader: impl Read) -> Result<CategoriesFile, CorpusFileError> {
    serde_json::from_reader(reader).map_err(|e| CorpusFileError::Categories(e.to_string()))
}

/// Reads records line by line and validates them against `categories`.
/// Errors name the 1-based line number.
pub fn parse_corpus(
    reader: impl BufRead,
    categories: &CategoriesFile,
) -> Result<Corpus, CorpusFileError> {
    let mut builder = CorpusBuilder::new(categories.to_categories(), categories.source_tag.clone())
        .map_err(|e| CorpusFileError::Categories(e.to_string()))?;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusFileError::Read {
            line: line_no,
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorpusFileError::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        let split: Split = record
            .split
            .parse()
            .map_err(|source| CorpusFileError::Invalid {
                line: line_no,
                source,
            })?;
        builder
            .push(EmotionalEvent {
                id: record.id,
                text: record.text,
                emotion: record.emotion,
                explicit: record.explicit,
                split,
            })
            .map_err(|source| CorpusFileError::Invalid {
                line: line_no,
                source,
            })?;
    }
    Ok(builder.finish())
}

/// Writes one record per line, in corpus order.
pub fn serialize_corpus(corpus: &Corpus, mut writer: impl Write) -> std::io::Result<()> {
    for e in corpus.events() {
        let record = Record {
            id: e.id.clone(),
            text: e.text.clone(),
            emotion: e.emotion.clone(),
            explicit: e.explicit,
            split: e.split.as_str().to_string(),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// The sidecar that sits next to a corpus file.
pub fn categories_path_for(corpus_path: &Path) -> PathBuf {
    corpus_path.with_file_name(CATEGORIES_FILE)
}

pub fn load_corpus(corpus_path: &Path, categories_path: Option<&Path>) -> Result<Corpus> {
    let cat_path = categories_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| categories_path_for(corpus_path));
    let cat_file = File::open(&cat_path).map_err(|e| Error::io(&cat_path, e))?;
    let categories =
        parse_categories(BufReader::new(cat_file)).map_err(|source| Error::Corpus {
            path: cat_path.clone(),
            source,
        })?;
    let file = File::open(corpus_path).map_err(|e| Error::io(corpus_path, e))?;
    parse_corpus(BufReader::new(file), &categories).map_err(|source| Error::Corpus {
        path: corpus_path.to_path_buf(),
        source,
    })
}

/// Writes `corpus.jsonl` and `categories.json` into `dir`.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let corpus_path = dir.join(CORPUS_FILE);
    let cat_path = dir.join(CATEGORIES_FILE);
    let f = File::create(&corpus_path).map_err(|e| Error::io(&corpus_path, e))?;
    serialize_corpus(corpus, BufWriter::new(f)).map_err(|e| Error::io(&corpus_path, e))?;
    let mut json = serde_json::to_vec_pretty(&CategoriesFile::of(corpus)).expect("serializable");
    json.push(b'\n');
    std::fs::write(&cat_path, json).map_err(|e| Error::io(&cat_path, e))?;
    Ok((corpus_path, cat_path))
}
