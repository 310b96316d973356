//! The analysis artifact: one self-contained JSON document holding the
//! entity table, embeddings, histograms, config and run report.
//!
//! Keys are written sorted and floats with 9 significant digits, so equal
//! artifacts serialize to identical bytes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::corpus::Corpus;
use crate::embedding::CachedEmbeddings;
use crate::extraction::EntityTable;
use crate::histogram::{Histogram, HistogramSource};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot write artifact {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot read artifact {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("artifact is not valid JSON: {0}")]
    Json(String),
    #[error("artifact schema_version {found} is not supported (this build reads version {expected}); re-run analyze")]
    SchemaVersion { found: i64, expected: u32 },
    #[error("artifact invariant violated: {0}")]
    Invariant(String),
    #[error("artifact was built from corpus {artifact} but the corpus given has digest {corpus}; re-run analyze on this corpus")]
    DigestMismatch { artifact: String, corpus: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffCount {
    pub cutoff: f64,
    pub clusters: usize,
}

/// Deterministic summary of an analysis run. Wall-clock timings are reported
/// by the command line only and are not stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub corpus_name: String,
    pub example_count: usize,
    pub entity_count: usize,
    pub embedding_provider: String,
    pub label_provider: String,
    pub cluster_counts: Vec<CutoffCount>,
    pub clusters_total: usize,
    pub labeled: usize,
    pub no_label: usize,
    pub failed: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisArtifact {
    pub schema_version: u32,
    pub corpus_digest: String,
    pub config: PipelineConfig,
    pub entities: EntityTable,
    pub embeddings: Option<CachedEmbeddings>,
    pub auto_histograms: Vec<Histogram>,
    pub user_histograms: Vec<Histogram>,
    pub run_report: RunReport,
}

impl AnalysisArtifact {
    pub fn histogram_count(&self) -> usize {
        self.auto_histograms.len() + self.user_histograms.len()
    }

    pub fn histograms(&self) -> impl Iterator<Item = &Histogram> {
        self.auto_histograms.iter().chain(&self.user_histograms)
    }

    /// Checks cross-references inside the artifact; the message names the
    /// failing check.
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(StoreError::SchemaVersion {
                found: self.schema_version.into(),
                expected: SCHEMA_VERSION,
            });
        }
        if self.corpus_digest.len() != 64 || !self.corpus_digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(StoreError::Invariant("corpus_digest is not a 256-bit hex digest".into()));
        }
        let mut ids = std::collections::HashSet::new();
        for (section, list, source) in [
            ("auto_histograms", &self.auto_histograms, HistogramSource::Auto),
            ("user_histograms", &self.user_histograms, HistogramSource::User),
        ] {
            for h in list {
                if h.source != source {
                    return Err(StoreError::Invariant(format!(
                        "{section}: histogram {:?} has source {:?}",
                        h.id, h.source
                    )));
                }
                if !ids.insert(h.id.as_str()) {
                    return Err(StoreError::Invariant(format!("{section}: duplicate histogram id {:?}", h.id)));
                }
                h.validate(&self.entities)
                    .map_err(|m| StoreError::Invariant(format!("{section}: {m}")))?;
            }
        }
        if let Some(cache) = &self.embeddings {
            let dim = self.config.embedding.dimension;
            if let Some((text, v)) = cache.vectors.iter().find(|(_, v)| v.dimension() != dim) {
                return Err(StoreError::Invariant(format!(
                    "embeddings: vector for {text:?} has dimension {} but config says {dim}",
                    v.dimension()
                )));
            }
        }
        Ok(())
    }

    pub fn validate_against_corpus(&self, corpus: &Corpus) -> Result<(), StoreError> {
        if self.corpus_digest != corpus.source_digest().as_str() {
            return Err(StoreError::DigestMismatch {
                artifact: self.corpus_digest.clone(),
                corpus: corpus.source_digest().to_string(),
            });
        }
        if let Some(max) = self.entities.max_posting() {
            if max as usize >= corpus.len() {
                return Err(StoreError::Invariant(format!(
                    "entities: posting {max} is outside a corpus of {} examples",
                    corpus.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, StoreError> {
        let value = serde_json::to_value(self).map_err(|e| StoreError::Json(e.to_string()))?;
        let mut out = String::new();
        write_value(&mut out, &value, 0);
        out.push('\n');
        Ok(out)
    }

    pub fn from_json(raw: &str) -> Result<Self, StoreError> {
        let value: Value = serde_json::from_str(raw).map_err(|e| StoreError::Json(e.to_string()))?;
        match value.get("schema_version").and_then(Value::as_i64) {
            Some(v) if v == i64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(StoreError::SchemaVersion {
                    found: v,
                    expected: SCHEMA_VERSION,
                })
            }
            None => return Err(StoreError::Invariant("schema_version is missing".into())),
        }
        let mut artifact: AnalysisArtifact =
            serde_json::from_value(value).map_err(|e| StoreError::Invariant(e.to_string()))?;
        // stored entropy carries 9 digits; recompute so reloads compare exactly
        let mut stored = Vec::new();
        for h in artifact.auto_histograms.iter_mut().chain(&mut artifact.user_histograms) {
            stored.push((h.id.clone(), h.total_count, h.entropy));
            h.recompute_stats();
        }
        artifact.validate()?;
        for ((id, total, entropy), h) in stored.into_iter().zip(artifact.histograms()) {
            if total != h.total_count || (entropy - h.entropy).abs() > 1e-6 {
                return Err(StoreError::Invariant(format!(
                    "histogram {id:?}: stored total/entropy ({total}, {entropy}) != recomputed ({}, {})",
                    h.total_count, h.entropy
                )));
            }
        }
        Ok(artifact)
    }
}

/// Writes atomically: a temporary file in the target directory is renamed
/// over `path`.
pub fn save_artifact(artifact: &AnalysisArtifact, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    let json = artifact.to_json()?;
    write_atomic(path, json.as_bytes()).map_err(|source| StoreError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

pub fn load_artifact(path: impl AsRef<Path>) -> Result<AnalysisArtifact, StoreError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| StoreError::Read {
        path: path.display().to_string(),
        source,
    })?;
    AnalysisArtifact::from_json(&raw)
}

pub fn validate_against_corpus(artifact: &AnalysisArtifact, corpus: &Corpus) -> Result<(), StoreError> {
    artifact.validate_against_corpus(corpus)
}

/// Rounds to 9 significant digits and prints the shortest form that reads
/// back to the rounded value.
fn format_float(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let mut s = format!("{rounded}");
    if rounded == 0.0 {
        s = "0".into();
    }
    s
}

fn write_string(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("string serializes"));
}

fn indent(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().expect("f64 number")));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(|v| !v.is_array() && !v.is_object()) {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, v, depth);
                }
                out.push(']');
            } else {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    indent(out, depth + 1);
                    write_value(out, v, depth + 1);
                }
                indent(out, depth);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, depth + 1);
                write_string(out, k);
                out.push_str(": ");
                write_value(out, &map[k.as_str()], depth + 1);
            }
            indent(out, depth);
            out.push('}');
        }
    }
}
