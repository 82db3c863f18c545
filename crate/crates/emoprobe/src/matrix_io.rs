//! `EMBD` matrix files with sibling id manifests, and the embeddings
//! directory that holds one model's event and label matrices.
//!
//! ```text
//! emb/
//!   events.embd   events.ids
//!   labels.embd   labels.ids
//!   model_tag.txt           (optional; defaults to the directory name)
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use emoprobe_core::embedding::{EmbeddingError, EmbeddingMatrix, EmbeddingSet};
use emoprobe_core::format::{self, FormatError, Header, HEADER_LEN};
use thiserror::Error;

use crate::error::{Error, Result};

pub const EVENTS_MATRIX: &str = "events.embd";
pub const EVENTS_MANIFEST: &str = "events.ids";
pub const LABELS_MATRIX: &str = "labels.embd";
pub const LABELS_MANIFEST: &str = "labels.ids";
pub const MODEL_TAG_FILE: &str = "model_tag.txt";

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("manifest has {manifest} ids but the matrix has {count} rows")]
    Length { manifest: usize, count: usize },
    #[error("manifest id {0:?} contains a line break")]
    BadId(String),
}

/// Writes the matrix to `sink` and its ids, one per line, to
/// `manifest_sink`. Returns the number of matrix bytes written.
pub fn write_matrix(
    matrix: &EmbeddingMatrix,
    ids: &[String],
    mut sink: impl Write,
    mut manifest_sink: impl Write,
) -> Result<u64, MatrixIoError> {
    if ids.len() != matrix.count() {
        return Err(MatrixIoError::Length {
            manifest: ids.len(),
            count: matrix.count(),
        });
    }
    if let Some(bad) = ids.iter().find(|id| id.contains(['\n', '\r'])) {
        return Err(MatrixIoError::BadId(bad.clone()));
    }
    let bytes = format::encode_embedding(matrix)?;
    sink.write_all(&bytes)?;
    sink.flush()?;
    for id in ids {
        manifest_sink.write_all(id.as_bytes())?;
        manifest_sink.write_all(b"\n")?;
    }
    manifest_sink.flush()?;
    Ok(bytes.len() as u64)
}

/// Reads a matrix, checking the payload length against the header before
/// allocating.
pub fn read_matrix(mut source: impl Read) -> Result<EmbeddingMatrix, MatrixIoError> {
    let mut head = [0u8; HEADER_LEN];
    let got = read_up_to(&mut source, &mut head)?;
    let header = Header::decode(&head[..got])?;
    let expected = header.payload_len();
    let mut payload = Vec::new();
    source.by_ref().take(expected).read_to_end(&mut payload)?;
    if (payload.len() as u64) < expected {
        return Err(FormatError::Truncated {
            expected,
            actual: payload.len() as u64,
        }
        .into());
    }
    let mut extra = Vec::new();
    let trailing = source.read_to_end(&mut extra)?;
    if trailing > 0 {
        return Err(FormatError::TrailingBytes {
            extra: trailing as u64,
        }
        .into());
    }
    Ok(format::decode_embedding_payload(&header, &payload)?)
}

fn read_up_to(source: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

/// One id per line. A trailing newline is optional; `\r\n` is accepted.
pub fn read_manifest(source: impl BufRead) -> std::io::Result<Vec<String>> {
    source
        .lines()
        .map(|l| l.map(|s| s.strip_suffix('\r').map(str::to_string).unwrap_or(s)))
        .collect()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn io_error(path: &Path, e: MatrixIoError) -> Error {
    match e {
        MatrixIoError::Io(source) => Error::io(path, source),
        MatrixIoError::Format(source) => Error::Format {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Checkpoint {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

pub fn load_matrix_file(path: &Path) -> Result<EmbeddingMatrix> {
    read_matrix(open(path)?).map_err(|e| io_error(path, e))
}

pub fn load_manifest_file(path: &Path) -> Result<Vec<String>> {
    read_manifest(open(path)?).map_err(|e| Error::io(path, e))
}

pub fn save_matrix_files(
    matrix: &EmbeddingMatrix,
    ids: &[String],
    matrix_path: &Path,
    manifest_path: &Path,
) -> Result<u64> {
    let m = File::create(matrix_path).map_err(|e| Error::io(matrix_path, e))?;
    let ids_file = File::create(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    write_matrix(matrix, ids, BufWriter::new(m), BufWriter::new(ids_file))
        .map_err(|e| io_error(matrix_path, e))
}

/// The files making up an embeddings directory, in a stable order.
pub fn embedding_files(dir: &Path) -> [PathBuf; 4] {
    [
        dir.join(EVENTS_MATRIX),
        dir.join(EVENTS_MANIFEST),
        dir.join(LABELS_MATRIX),
        dir.join(LABELS_MANIFEST),
    ]
}

pub fn load_embeddings(dir: &Path) -> Result<EmbeddingSet> {
    let [em, ei, lm, li] = embedding_files(dir);
    let events = load_matrix_file(&em)?;
    let event_ids = load_manifest_file(&ei)?;
    let labels = load_matrix_file(&lm)?;
    let label_ids = load_manifest_file(&li)?;
    let tag_path = dir.join(MODEL_TAG_FILE);
    let model_tag = match std::fs::read_to_string(&tag_path) {
        Ok(s) => s.trim().to_string(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => default_model_tag(dir),
        Err(e) => return Err(Error::io(&tag_path, e)),
    };
    EmbeddingSet::new(event_ids, events, label_ids, labels, model_tag).map_err(|source| {
        let path = match &source {
            EmbeddingError::ManifestLength { what: "label", .. }
            | EmbeddingError::DuplicateId { what: "label", .. }
            | EmbeddingError::InvalidId { what: "label", .. } => li.clone(),
            _ => ei.clone(),
        };
        Error::Manifest { path, source }
    })
}

fn default_model_tag(dir: &Path) -> String {
    std::path::absolute(dir)
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "unnamed".to_string())
}

/// Writes all four matrix files plus `model_tag.txt` into `dir`.
pub fn save_embeddings(set: &EmbeddingSet, dir: &Path) -> Result<Vec<PathBuf>> {
    let [em, ei, lm, li] = embedding_files(dir);
    save_matrix_files(set.events.matrix(), set.events.ids(), &em, &ei)?;
    save_matrix_files(set.labels.matrix(), set.labels.ids(), &lm, &li)?;
    let tag = dir.join(MODEL_TAG_FILE);
    std::fs::write(&tag, format!("{}\n", set.model_tag)).map_err(|e| Error::io(&tag, e))?;
    Ok(vec![em, ei, lm, li, tag])
}
