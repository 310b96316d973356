//! Pipeline and server settings, read from a TOML file with `[pipeline]` and
//! `[server]` sections. Missing keys take built-in defaults; command-line
//! flags are applied on top by the caller.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{Linkage, DEFAULT_CUTOFFS, DEFAULT_MAX_SIZE, DEFAULT_MIN_SIZE};
use crate::embedding::STUB_DIMENSION;
use crate::extraction::DEFAULT_K_CAP;
use crate::labeling::{DEFAULT_MAX_LABEL_TOKENS, LABEL_TEMPLATE_ID};
use crate::query::{DEFAULT_SEMANTIC_THRESHOLD, DEFAULT_SUGGESTION_LIMIT, DEFAULT_SUGGESTION_THRESHOLD};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config file {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid setting {key}: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Stub,
    Remote,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stub" => Ok(ProviderKind::Stub),
            "remote" => Ok(ProviderKind::Remote),
            other => Err(format!("unknown provider {other:?} (expected stub or remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingProviderConfig {
    pub kind: ProviderKind,
    pub dimension: usize,
    pub batch_size: usize,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    /// Store remote embeddings in the artifact. Stub embeddings are always stored.
    pub store_remote_cache: bool,
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        EmbeddingProviderConfig {
            kind: ProviderKind::Stub,
            dimension: STUB_DIMENSION,
            batch_size: 256,
            endpoint: None,
            api_key_env: None,
            store_remote_cache: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelProviderConfig {
    pub kind: ProviderKind,
    pub prompt_template_id: String,
    pub max_label_tokens: usize,
    pub parallelism: usize,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
}

impl Default for LabelProviderConfig {
    fn default() -> Self {
        LabelProviderConfig {
            kind: ProviderKind::Stub,
            prompt_template_id: LABEL_TEMPLATE_ID.into(),
            max_label_tokens: DEFAULT_MAX_LABEL_TOKENS,
            parallelism: 4,
            endpoint: None,
            api_key_env: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k_cap: usize,
    pub cutoffs: Vec<f64>,
    pub linkage: Linkage,
    pub min_size: usize,
    pub max_size: usize,
    pub embedding: EmbeddingProviderConfig,
    pub labeling: LabelProviderConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k_cap: DEFAULT_K_CAP,
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            linkage: Linkage::Average,
            min_size: DEFAULT_MIN_SIZE,
            max_size: DEFAULT_MAX_SIZE,
            embedding: EmbeddingProviderConfig::default(),
            labeling: LabelProviderConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k_cap == 0 {
            return Err(invalid("k_cap", "must be at least 1"));
        }
        if self.cutoffs.is_empty() {
            return Err(invalid("cutoffs", "at least one cutoff is required"));
        }
        if let Some(c) = self.cutoffs.iter().find(|c| !(c.is_finite() && **c > 0.0 && **c <= 2.0)) {
            return Err(invalid("cutoffs", format!("{c} is outside (0, 2]")));
        }
        if self.cutoffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("cutoffs", "must be strictly ascending"));
        }
        if self.min_size == 0 || self.min_size > self.max_size {
            return Err(invalid(
                "min_size",
                format!("need 1 <= min_size <= max_size, got {} and {}", self.min_size, self.max_size),
            ));
        }
        if self.embedding.dimension < 8 {
            return Err(invalid("embedding.dimension", "must be at least 8"));
        }
        if self.embedding.batch_size == 0 {
            return Err(invalid("embedding.batch_size", "must be at least 1"));
        }
        if self.embedding.kind == ProviderKind::Remote && self.embedding.endpoint.is_none() {
            return Err(invalid("embedding.endpoint", "required for the remote provider"));
        }
        if self.labeling.max_label_tokens == 0 {
            return Err(invalid("labeling.max_label_tokens", "must be at least 1"));
        }
        if self.labeling.parallelism == 0 {
            return Err(invalid("labeling.parallelism", "must be at least 1"));
        }
        if self.labeling.prompt_template_id != LABEL_TEMPLATE_ID {
            return Err(invalid(
                "labeling.prompt_template_id",
                format!("unknown template {:?}", self.labeling.prompt_template_id),
            ));
        }
        if self.labeling.kind == ProviderKind::Remote && self.labeling.endpoint.is_none() {
            return Err(invalid("labeling.endpoint", "required for the remote provider"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub port: u16,
    /// Allowed UI origins; empty allows any origin.
    pub cors_origins: Vec<String>,
    pub provider_timeout_secs: u64,
    pub pending_ttl_secs: u64,
    pub semantic_threshold: f64,
    pub suggestion_limit: usize,
    pub suggestion_threshold: f64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            port: 8080,
            cors_origins: Vec::new(),
            provider_timeout_secs: 20,
            pending_ttl_secs: 30 * 60,
            semantic_threshold: DEFAULT_SEMANTIC_THRESHOLD,
            suggestion_limit: DEFAULT_SUGGESTION_LIMIT,
            suggestion_threshold: DEFAULT_SUGGESTION_THRESHOLD,
        }
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.provider_timeout_secs == 0 {
            return Err(invalid("server.provider_timeout_secs", "must be at least 1"));
        }
        if self.suggestion_limit == 0 {
            return Err(invalid("server.suggestion_limit", "must be at least 1"));
        }
        for (key, v) in [
            ("server.semantic_threshold", self.semantic_threshold),
            ("server.suggestion_threshold", self.suggestion_threshold),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(invalid(key, format!("{v} is outside [-1, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub pipeline: PipelineConfig,
    pub server: ServerConfig,
}

impl ConfigFile {
    pub fn parse(raw: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(raw).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&raw, &path.display().to_string())
    }

    /// Loads `path` if given, otherwise the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
