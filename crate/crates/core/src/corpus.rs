//! Immutable text corpora loaded from jsonl, csv or plain-text files.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const DEFAULT_MAX_EXAMPLES: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("corpus contains no usable examples")]
    Empty,
    #[error("corpus exceeds the configured maximum of {max} examples")]
    TooLarge { max: usize },
    #[error("example id {id} out of range for corpus of {len} examples")]
    OutOfRange { id: u32, len: usize },
    #[error("unknown corpus format {0:?} (expected jsonl, csv or txt-lines)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
    TxtLines,
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            "txt-lines" | "txt" => Ok(CorpusFormat::TxtLines),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Jsonl => "jsonl",
            CorpusFormat::Csv => "csv",
            CorpusFormat::TxtLines => "txt-lines",
        })
    }
}

/// A 256-bit content hash, rendered as lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceDigest(String);

impl SourceDigest {
    pub fn of_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Self {
        let mut hasher = Sha256::new();
        for text in texts {
            hasher.update((text.len() as u64).to_le_bytes());
            hasher.update(text.as_bytes());
        }
        SourceDigest(to_hex(&hasher.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SourceDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    name: String,
    examples: Vec<Example>,
    source_digest: SourceDigest,
}

impl Corpus {
    /// Builds a corpus from raw texts, dropping whitespace-only entries.
    pub fn from_texts<I, S>(name: impl Into<String>, texts: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_texts_capped(name, texts, DEFAULT_MAX_EXAMPLES)
    }

    pub fn from_texts_capped<I, S>(
        name: impl Into<String>,
        texts: I,
        max_examples: usize,
    ) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut examples = Vec::new();
        for text in texts {
            let text = text.into();
            if text.trim().is_empty() {
                continue;
            }
            if examples.len() == max_examples {
                return Err(CorpusError::TooLarge { max: max_examples });
            }
            examples.push(Example {
                id: examples.len() as u32,
                text,
            });
        }
        if examples.is_empty() {
            return Err(CorpusError::Empty);
        }
        let source_digest = SourceDigest::of_texts(examples.iter().map(|e| e.text.as_str()));
        Ok(Corpus {
            name: name.into(),
            examples,
            source_digest,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn source_digest(&self) -> &SourceDigest {
        &self.source_digest
    }

    pub fn get(&self, id: u32) -> Option<&Example> {
        self.examples.get(id as usize)
    }

    /// Returns the requested examples in the order given.
    pub fn get_examples(&self, ids: &[u32]) -> Result<Vec<&Example>, CorpusError> {
        ids.iter()
            .map(|&id| {
                self.get(id).ok_or(CorpusError::OutOfRange {
                    id,
                    len: self.examples.len(),
                })
            })
            .collect()
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    load_corpus_capped(path, format, DEFAULT_MAX_EXAMPLES)
}

pub fn load_corpus_capped(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    max_examples: usize,
) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_corpus(name, &raw, format, max_examples)
}

/// Parses corpus bytes in the declared format.
pub fn parse_corpus(
    name: impl Into<String>,
    raw: &[u8],
    format: CorpusFormat,
    max_examples: usize,
) -> Result<Corpus, CorpusError> {
    let texts = match format {
        CorpusFormat::Jsonl => parse_jsonl(raw)?,
        CorpusFormat::Csv => parse_csv(raw)?,
        CorpusFormat::TxtLines => parse_lines(raw)?,
    };
    Corpus::from_texts_capped(name, texts, max_examples)
}

fn utf8_line(line: &[u8], line_no: usize) -> Result<&str, CorpusError> {
    std::str::from_utf8(line).map_err(|e| CorpusError::MalformedRow {
        line: line_no,
        reason: format!("invalid UTF-8: {e}"),
    })
}

fn split_lines(raw: &[u8]) -> impl Iterator<Item = (usize, &[u8])> {
    raw.split(|&b| b == b'\n').enumerate().map(|(i, line)| {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        (i + 1, line)
    })
}

fn parse_lines(raw: &[u8]) -> Result<Vec<String>, CorpusError> {
    let mut out = Vec::new();
    for (line_no, line) in split_lines(raw) {
        let line = utf8_line(line, line_no)?;
        if !line.trim().is_empty() {
            out.push(line.to_string());
        }
    }
    Ok(out)
}

fn parse_jsonl(raw: &[u8]) -> Result<Vec<String>, CorpusError> {
    let mut out = Vec::new();
    for (line_no, line) in split_lines(raw) {
        let line = utf8_line(line, line_no)?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedRow {
                line: line_no,
                reason: e.to_string(),
            })?;
        match value.get("text") {
            Some(serde_json::Value::String(text)) => out.push(text.clone()),
            Some(_) => {
                return Err(CorpusError::MalformedRow {
                    line: line_no,
                    reason: "\"text\" field is not a string".into(),
                })
            }
            None => {
                return Err(CorpusError::MalformedRow {
                    line: line_no,
                    reason: "missing \"text\" field".into(),
                })
            }
        }
    }
    Ok(out)
}

fn parse_csv(raw: &[u8]) -> Result<Vec<String>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b',')
        .quote(b'"')
        .has_headers(true)
        .from_reader(raw);
    let headers = reader.headers().map_err(|e| CorpusError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    let column = headers
        .iter()
        .position(|h| h.trim() == "text")
        .ok_or_else(|| CorpusError::MalformedRow {
            line: 1,
            reason: "header has no \"text\" column".into(),
        })?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CorpusError::MalformedRow {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let text = record.get(column).ok_or_else(|| CorpusError::MalformedRow {
            line,
            reason: "row has no value in the \"text\" column".into(),
        })?;
        out.push(text.to_string());
    }
    Ok(out)
}
