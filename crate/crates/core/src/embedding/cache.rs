use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{EmbeddingError, EmbeddingVector};
use crate::provider::ProviderError;

/// Source of raw embeddings. Output vectors need not be normalized.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable name distinguishing cache entries from different models/dimensions.
    fn identity(&self) -> String;
    fn dimension(&self) -> usize;
    fn batch_size(&self) -> usize;
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError>;
}

/// Serializable snapshot of a cache for one provider identity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CachedEmbeddings {
    pub provider: String,
    pub vectors: BTreeMap<String, EmbeddingVector>,
}

/// Concurrent reader / serialized writer map from normalized text to vector.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    entries: RwLock<HashMap<String, EmbeddingVector>>,
}

impl EmbeddingCache {
    pub fn get(&self, key: &str) -> Option<EmbeddingVector> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn insert(&self, key: String, vector: EmbeddingVector) {
        self.entries.write().expect("cache lock").insert(key, vector);
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn cache_key(text: &str) -> String {
    text.nfc().collect()
}

/// Provider plus optional cache. Texts that are empty after trimming embed as
/// `e₀` without a provider call.
pub struct Embedder {
    provider: Arc<dyn EmbeddingProvider>,
    identity: String,
    cache: Option<EmbeddingCache>,
}

impl std::fmt::Debug for Embedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Embedder")
            .field("identity", &self.identity)
            .field("cached", &self.cache.as_ref().map(EmbeddingCache::len))
            .finish()
    }
}

impl Embedder {
    pub fn new(provider: Arc<dyn EmbeddingProvider>) -> Self {
        let identity = provider.identity();
        Embedder {
            provider,
            identity,
            cache: Some(EmbeddingCache::default()),
        }
    }

    pub fn uncached(provider: Arc<dyn EmbeddingProvider>) -> Self {
        Embedder {
            cache: None,
            ..Embedder::new(provider)
        }
    }

    /// Seeds the cache from a snapshot; snapshots from another provider are ignored.
    pub fn preload(&self, snapshot: &CachedEmbeddings) -> bool {
        let Some(cache) = &self.cache else {
            return false;
        };
        if snapshot.provider != self.identity {
            return false;
        }
        for (text, vector) in &snapshot.vectors {
            if vector.dimension() == self.provider.dimension() {
                cache.insert(text.clone(), vector.clone());
            }
        }
        true
    }

    pub fn identity(&self) -> &str {
        &self.identity
    }

    pub fn dimension(&self) -> usize {
        self.provider.dimension()
    }

    pub fn snapshot(&self) -> CachedEmbeddings {
        let vectors = self
            .cache
            .as_ref()
            .map(|c| {
                c.entries
                    .read()
                    .expect("cache lock")
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect()
            })
            .unwrap_or_default();
        CachedEmbeddings {
            provider: self.identity.clone(),
            vectors,
        }
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.pop().expect("one vector per text"))
    }

    /// Embeds every text; uncached texts are sent in chunks of `batch_size`.
    pub fn embed_batch<S: AsRef<str>>(
        &self,
        texts: &[S],
    ) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let dimension = self.provider.dimension();
        let keys: Vec<String> = texts.iter().map(|t| cache_key(t.as_ref())).collect();

        let mut resolved: HashMap<&str, EmbeddingVector> = HashMap::new();
        let mut missing: Vec<&str> = Vec::new();
        for key in &keys {
            if resolved.contains_key(key.as_str()) {
                continue;
            }
            if key.trim().is_empty() {
                resolved.insert(key, EmbeddingVector::basis(dimension, 0));
            } else if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(key)) {
                resolved.insert(key, hit);
            } else {
                resolved.insert(key, EmbeddingVector::basis(dimension, 0));
                missing.push(key);
            }
        }

        for chunk in missing.chunks(self.provider.batch_size().max(1)) {
            let request: Vec<String> = chunk.iter().map(|k| k.to_string()).collect();
            let raw = self.provider.embed_raw(&request)?;
            if raw.len() != chunk.len() {
                return Err(EmbeddingError::CountMismatch {
                    expected: chunk.len(),
                    got: raw.len(),
                });
            }
            for (key, components) in chunk.iter().zip(raw) {
                if components.len() != dimension {
                    return Err(EmbeddingError::DimensionMismatch {
                        expected: dimension,
                        got: components.len(),
                    });
                }
                let vector = if components.iter().all(|c| c.is_finite())
                    && (super::l2_norm(&components) - 1.0).abs() <= super::NORM_TOLERANCE
                {
                    EmbeddingVector(components)
                } else {
                    EmbeddingVector::normalize_f32(&components)?
                };
                if let Some(cache) = &self.cache {
                    cache.insert(key.to_string(), vector.clone());
                }
                resolved.insert(key, vector);
            }
        }

        Ok(keys.iter().map(|k| resolved[k.as_str()].clone()).collect())
    }
}
