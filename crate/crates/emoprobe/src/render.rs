//! Report rendering.
//!
//! Every percentage is shown to two decimals next to the exact counts it
//! came from, so a reader can recompute any ratio. Diversity cells show the
//! number of unique events retrieved after deduplication, e.g.
//! `13.51 (72)`; the other metrics show the fraction, e.g. `66.67 (2/3)`.
//! A cell that is not measurable renders as an em dash with a dagger.

use std::fmt::Write as _;
use std::str::FromStr;

use emoprobe_core::metrics::{MetricKind, MetricValue};
use emoprobe_core::report::{ComparisonTable, EvaluationReport, MacroValue, ReportError};
use emoprobe_core::retrieval::RankedList;
use serde::Serialize;
use thiserror::Error;

/// Em dash plus dagger.
pub const UNDEFINED_CELL: &str = "\u{2014}\u{2020}";
pub const UNDEFINED_FOOTNOTE: &str =
    "\u{2020} not measurable: no relevant event in the pool, or none retrieved in the top K";
pub const DIVERSITY_CAPTION: &str =
    "D@K in parentheses: number of unique emotional events retrieved after deduplication";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    /// Tab-separated, one row per value, with a header row.
    Tsv,
    /// The report itself as pretty-printed JSON; parses back losslessly.
    Json,
    /// Aligned plain-text tables, one per cutoff.
    Text,
}

impl RenderFormat {
    pub const ALL: [RenderFormat; 3] = [RenderFormat::Tsv, RenderFormat::Json, RenderFormat::Text];

    pub fn extension(self) -> &'static str {
        match self {
            RenderFormat::Tsv => "tsv",
            RenderFormat::Json => "json",
            RenderFormat::Text => "txt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("unknown render format {0:?} (expected tsv, json or text)")]
    UnknownFormat(String),
    #[error(transparent)]
    Invalid(#[from] ReportError),
}

impl FromStr for RenderFormat {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(RenderFormat::Tsv),
            "json" => Ok(RenderFormat::Json),
            "text" | "txt" => Ok(RenderFormat::Text),
            other => Err(RenderError::UnknownFormat(other.to_string())),
        }
    }
}

/// `n/d` as a percentage rounded half-up to two decimals, using integer
/// arithmetic only.
pub fn percent(numerator: u64, denominator: u64) -> String {
    assert!(denominator > 0, "percent of an empty denominator");
    let hundredths = (numerator as u128 * 20_000 + denominator as u128) / (2 * denominator as u128);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

fn percent_f64(value: f64) -> String {
    format!("{:.2}", value * 100.0)
}

/// One per-query or micro cell.
pub fn format_cell(m: &MetricValue) -> String {
    if !m.defined || m.denominator == 0 {
        return UNDEFINED_CELL.to_string();
    }
    let pct = percent(m.numerator, m.denominator);
    match m.kind {
        MetricKind::Diversity => format!("{pct} ({})", m.numerator),
        _ => format!("{pct} ({}/{})", m.numerator, m.denominator),
    }
}

pub fn format_macro(m: &MacroValue) -> String {
    if m.defined {
        percent_f64(m.value)
    } else {
        UNDEFINED_CELL.to_string()
    }
}

pub fn render(report: &EvaluationReport, format: RenderFormat) -> Result<Vec<u8>, RenderError> {
    report.validate()?;
    Ok(match format {
        RenderFormat::Json => render_json(report),
        RenderFormat::Tsv => render_tsv(report).into_bytes(),
        RenderFormat::Text => render_text(report).into_bytes(),
    })
}

pub fn parse_json(bytes: &[u8]) -> serde_json::Result<EvaluationReport> {
    serde_json::from_slice(bytes)
}

fn render_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("reports serialize");
    out.push(b'\n');
    out
}

const TSV_HEADER: &str = "model_tag\tcorpus_tag\tpool\temotion\tk\tmetric\tnumerator\tdenominator\tdefined\tpercent\tcell";

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

fn render_tsv(r: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str(TSV_HEADER);
    out.push('\n');
    let prefix = format!(
        "{}\t{}\t{}",
        tsv_field(&r.model_tag),
        tsv_field(&r.corpus_tag),
        r.pool
    );
    let mut counted = |m: &MetricValue| {
        let pct = if m.defined && m.denominator > 0 {
            percent(m.numerator, m.denominator)
        } else {
            String::new()
        };
        writeln!(
            out,
            "{prefix}\t{}\t{}\t{}\t{}\t{}\t{}\t{pct}\t{}",
            tsv_field(&m.query),
            m.k,
            m.kind,
            m.numerator,
            m.denominator,
            m.defined,
            format_cell(m)
        )
        .unwrap();
    };
    r.cells.iter().for_each(&mut counted);
    r.micro_rows.iter().for_each(&mut counted);
    for m in &r.macro_rows {
        let pct = if m.defined {
            percent_f64(m.value)
        } else {
            String::new()
        };
        writeln!(
            out,
            "{prefix}\t(macro)\t{}\t{}\t\t\t{}\t{pct}\t{}",
            m.k,
            m.kind,
            m.defined,
            format_macro(m)
        )
        .unwrap();
    }
    out
}

fn render_text(r: &EvaluationReport) -> String {
    let mut out = String::new();
    writeln!(out, "model: {}", r.model_tag).unwrap();
    writeln!(out, "corpus: {}", r.corpus_tag).unwrap();
    writeln!(out, "checkpoint: {}", r.checkpoint).unwrap();
    writeln!(out, "pool: {}", r.pool).unwrap();
    writeln!(out, "tool: emoprobe {}", r.tool_version).unwrap();
    if let Some(ts) = &r.timestamp {
        writeln!(out, "timestamp: {ts}").unwrap();
    }
    let mut any_undefined = false;
    let mut skipped_notes = Vec::new();
    for &k in &r.ks {
        out.push('\n');
        let mut rows = vec![std::iter::once("emotion".to_string())
            .chain(MetricKind::ALL.iter().map(|kind| kind.label(k)))
            .collect::<Vec<_>>()];
        for emotion in &r.emotions {
            let mut row = vec![emotion.clone()];
            for kind in MetricKind::ALL {
                let cell = r.cell(emotion, k, kind).expect("validated report");
                any_undefined |= !cell.defined;
                row.push(format_cell(cell));
            }
            rows.push(row);
        }
        let mut macro_row = vec!["(macro)".to_string()];
        for kind in MetricKind::ALL {
            let m = r.macro_value(k, kind).expect("macro row present");
            any_undefined |= !m.defined;
            if m.defined && !m.skipped.is_empty() {
                skipped_notes.push(format!("{}: skips {}", kind.label(k), m.skipped.join(", ")));
            }
            macro_row.push(format_macro(m));
        }
        rows.push(macro_row);
        let mut micro_row = vec!["(micro)".to_string()];
        for kind in MetricKind::ALL {
            let m = r.micro_value(k, kind).expect("micro row present");
            any_undefined |= !m.defined;
            micro_row.push(format_cell(m));
        }
        rows.push(micro_row);
        write_aligned(&mut out, &rows);
    }
    out.push('\n');
    writeln!(out, "{DIVERSITY_CAPTION}").unwrap();
    if any_undefined {
        writeln!(out, "{UNDEFINED_FOOTNOTE}").unwrap();
    }
    if !skipped_notes.is_empty() {
        writeln!(
            out,
            "macro averages over defined queries only; {}",
            skipped_notes.join("; ")
        )
        .unwrap();
    }
    out
}

fn write_aligned(out: &mut String, rows: &[Vec<String>]) {
    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            if c + 1 < cols {
                line.extend(std::iter::repeat_n(' ', widths[c] - cell.chars().count()));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

/// Cross-model comparison: one row per (model, emotion, K).
pub fn render_comparison(table: &ComparisonTable, format: RenderFormat) -> Vec<u8> {
    match format {
        RenderFormat::Json => render_json(table),
        RenderFormat::Tsv => {
            let mut out = String::from("model_tag\temotion\tk");
            for kind in MetricKind::ALL {
                write!(out, "\t{kind}").unwrap();
            }
            out.push('\n');
            for row in &table.rows {
                write!(
                    out,
                    "{}\t{}\t{}",
                    tsv_field(&row.model_tag),
                    tsv_field(&row.emotion),
                    row.k
                )
                .unwrap();
                for m in &row.metrics {
                    write!(out, "\t{}", format_cell(m)).unwrap();
                }
                out.push('\n');
            }
            out.into_bytes()
        }
        RenderFormat::Text => {
            let mut out = format!("corpus: {}\n\n", table.corpus_tag);
            let mut rows = vec![["model", "emotion", "K"]
                .iter()
                .map(|s| s.to_string())
                .chain(MetricKind::ALL.iter().map(|k| k.as_str().to_string()))
                .collect::<Vec<_>>()];
            let mut any_undefined = false;
            for row in &table.rows {
                let mut cells = vec![
                    row.model_tag.clone(),
                    row.emotion.clone(),
                    row.k.to_string(),
                ];
                for m in &row.metrics {
                    any_undefined |= !m.defined;
                    cells.push(format_cell(m));
                }
                rows.push(cells);
            }
            write_aligned(&mut out, &rows);
            out.push('\n');
            writeln!(out, "{DIVERSITY_CAPTION}").unwrap();
            if any_undefined {
                writeln!(out, "{UNDEFINED_FOOTNOTE}").unwrap();
            }
            out.into_bytes()
        }
    }
}

#[derive(Serialize)]
struct RankedLine<'a> {
    query: &'a str,
    rank: usize,
    id: &'a str,
    score: f64,
    emotion: &'a str,
    explicit: bool,
}

/// The full ranking as JSON lines, rank 1 first.
pub fn render_ranking(list: &RankedList) -> Vec<u8> {
    let mut out = Vec::new();
    for (i, e) in list.entries.iter().enumerate() {
        let line = RankedLine {
            query: &list.query,
            rank: i + 1,
            id: &e.event_id,
            score: e.score,
            emotion: &e.emotion,
            explicit: e.explicit,
        };
        serde_json::to_writer(&mut out, &line).expect("serializable");
        out.push(b'\n');
    }
    out
}
