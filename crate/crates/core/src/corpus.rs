//! Line-delimited JSON corpus files.
//!
//! One record per line:
//!
//! ```text
//! {"font_id":"f","glyph_id":"A","units_per_em":1000,"paths":["M 0 0 L 1 0"],
//!  "labels":{"continuity":[0,2],"alignment":[0]}}
//! ```
//!
//! `labels` is optional. Continuity is encoded C0=0, G1=1, C1=2 and alignment
//! H=0, V=1, None=2.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Glyph;
use crate::svg_io::{parse_path_data, ParseError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {index}: field `{field}`: {message}")]
    Record { index: usize, field: String, message: String },
    #[error("record {index}: path {path}: {source}")]
    PathData { index: usize, path: usize, source: ParseError },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordLabels {
    pub continuity: Vec<u8>,
    pub alignment: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub font_id: String,
    pub glyph_id: String,
    pub units_per_em: f64,
    pub paths: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<RecordLabels>,
}

impl CorpusRecord {
    pub fn validate(&self, index: usize) -> Result<(), CorpusError> {
        let bad = |field: &str, message: &str| CorpusError::Record {
            index,
            field: field.into(),
            message: message.into(),
        };
        if self.font_id.is_empty() {
            return Err(bad("font_id", "must be non-empty"));
        }
        if self.glyph_id.is_empty() {
            return Err(bad("glyph_id", "must be non-empty"));
        }
        if !(self.units_per_em > 0.0 && self.units_per_em.is_finite()) {
            return Err(bad("units_per_em", "must be positive"));
        }
        if let Some(l) = &self.labels {
            if l.continuity.iter().any(|&c| c > 2) {
                return Err(bad("labels.continuity", "codes must be 0, 1 or 2"));
            }
            if l.alignment.iter().any(|&c| c > 2) {
                return Err(bad("labels.alignment", "codes must be 0, 1 or 2"));
            }
        }
        Ok(())
    }

    /// Parses all path strings into a glyph in font units.
    pub fn glyph(&self, index: usize) -> Result<Glyph, CorpusError> {
        let mut paths = Vec::new();
        for (pi, d) in self.paths.iter().enumerate() {
            let parsed = parse_path_data(d)
                .map_err(|source| CorpusError::PathData { index, path: pi, source })?;
            paths.extend(parsed);
        }
        Ok(Glyph::new(paths, self.units_per_em))
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.font_id, &self.glyph_id)
    }
}

fn field_of(err: &serde_json::Error) -> String {
    let msg = err.to_string();
    for marker in ["missing field `", "unknown field `", "duplicate field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            return rest.split('`').next().unwrap_or("").to_string();
        }
    }
    "<record>".to_string()
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(line, out.len())?);
    }
    Ok(out)
}

fn parse_record(line: &str, index: usize) -> Result<CorpusRecord, CorpusError> {
    let rec: CorpusRecord = serde_json::from_str(line).map_err(|e| CorpusError::Record {
        index,
        field: field_of(&e),
        message: e.to_string(),
    })?;
    rec.validate(index)?;
    Ok(rec)
}

pub fn load_corpus(path: impl AsRef<FsPath>) -> Result<Vec<CorpusRecord>, CorpusError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, out.len())?);
    }
    Ok(out)
}

pub fn save_corpus(records: &[CorpusRecord], path: impl AsRef<FsPath>) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_jsonl(records, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes any serializable rows as JSON lines.
pub fn write_jsonl<T: Serialize>(rows: &[T], w: &mut impl Write) -> Result<(), CorpusError> {
    for r in rows {
        let line = serde_json::to_string(r).map_err(|e| CorpusError::Io(e.into()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}
