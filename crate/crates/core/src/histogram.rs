//! Entity-count histograms: one bucket per entity, height = number of
//! examples containing the entity.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{to_hex, Corpus};
use crate::extraction::{EntityId, EntityTable, Token};
use crate::labeling::LabeledCluster;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HistogramError {
    #[error("histogram {0:?} would have no non-empty buckets")]
    Empty(String),
    #[error("entity id {0} is not in the entity table")]
    UnknownEntity(EntityId),
    #[error("entity id {0} has no bucket in this histogram")]
    NotInHistogram(EntityId),
    #[error("entity {entity} is contained in {count} examples but the corpus has only {corpus_len}")]
    CountExceedsCorpus {
        entity: EntityId,
        count: usize,
        corpus_len: usize,
    },
    #[error("histogram label must be non-empty")]
    EmptyLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HistogramSource {
    Auto,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub entity_id: EntityId,
    pub surface: Vec<String>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub id: String,
    pub label: String,
    pub source: HistogramSource,
    pub buckets: Vec<Bucket>,
    pub total_count: u64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    TotalCount,
    Entropy,
}

/// True iff `surface` occurs as a contiguous run of the example's tokens.
pub fn contains_entity(example_tokens: &[Token], surface: &[String]) -> bool {
    if surface.is_empty() || surface.len() > example_tokens.len() {
        return false;
    }
    example_tokens
        .windows(surface.len())
        .any(|w| w.iter().zip(surface).all(|(t, s)| t.surface == *s))
}

/// Shannon entropy (natural log) of the count distribution.
pub fn entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// First 16 hex chars of SHA-256 over the label and sorted member surfaces.
pub fn auto_histogram_id(label: &str, surfaces: &[String]) -> String {
    let mut sorted: Vec<&String> = surfaces.iter().collect();
    sorted.sort();
    let mut hasher = Sha256::new();
    for part in std::iter::once(label).chain(sorted.iter().map(|s| s.as_str())) {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    to_hex(&hasher.finalize()[..8])
}

fn bucket_order(a: &Bucket, b: &Bucket) -> Ordering {
    b.count.cmp(&a.count).then_with(|| a.surface.cmp(&b.surface))
}

impl Histogram {
    /// Builds buckets for `entity_ids` from their posting lists.
    pub fn from_entities(
        id: String,
        label: String,
        source: HistogramSource,
        entity_ids: &[EntityId],
        table: &EntityTable,
        corpus: &Corpus,
    ) -> Result<Self, HistogramError> {
        if label.trim().is_empty() {
            return Err(HistogramError::EmptyLabel);
        }
        let mut buckets = Vec::with_capacity(entity_ids.len());
        let mut seen = std::collections::HashSet::new();
        for &entity_id in entity_ids {
            if !seen.insert(entity_id) {
                continue;
            }
            let entity = table.get(entity_id).ok_or(HistogramError::UnknownEntity(entity_id))?;
            let count = entity.postings.len();
            if count > corpus.len() {
                return Err(HistogramError::CountExceedsCorpus {
                    entity: entity_id,
                    count,
                    corpus_len: corpus.len(),
                });
            }
            if count == 0 {
                continue;
            }
            buckets.push(Bucket {
                entity_id,
                surface: entity.surface.clone(),
                count: count as u64,
            });
        }
        if buckets.is_empty() {
            return Err(HistogramError::Empty(label));
        }
        buckets.sort_by(bucket_order);
        let mut histogram = Histogram {
            id,
            label,
            source,
            buckets,
            total_count: 0,
            entropy: 0.0,
        };
        histogram.recompute_stats();
        Ok(histogram)
    }

    pub fn recompute_stats(&mut self) {
        let counts: Vec<u64> = self.buckets.iter().map(|b| b.count).collect();
        self.total_count = counts.iter().sum();
        self.entropy = entropy(&counts);
    }

    pub fn bucket(&self, entity_id: EntityId) -> Option<&Bucket> {
        self.buckets.iter().find(|b| b.entity_id == entity_id)
    }

    /// Checks this histogram against an entity table; names the failing check.
    pub fn validate(&self, table: &EntityTable) -> Result<(), String> {
        let name = format!("histogram {:?} ({})", self.label, self.id);
        if self.label.trim().is_empty() {
            return Err(format!("{name}: empty label"));
        }
        if self.buckets.is_empty() {
            return Err(format!("{name}: no buckets"));
        }
        for b in &self.buckets {
            let entity = table
                .get(b.entity_id)
                .ok_or_else(|| format!("{name}: bucket references unknown entity {}", b.entity_id))?;
            if entity.surface != b.surface {
                return Err(format!(
                    "{name}: bucket {} surface {:?} does not match entity {:?}",
                    b.entity_id,
                    b.surface.join(" "),
                    entity.display()
                ));
            }
            if b.count == 0 || b.count != entity.postings.len() as u64 {
                return Err(format!(
                    "{name}: bucket {:?} count {} != |postings| {}",
                    entity.display(),
                    b.count,
                    entity.postings.len()
                ));
            }
        }
        if self.buckets.windows(2).any(|w| bucket_order(&w[0], &w[1]) != Ordering::Less) {
            return Err(format!("{name}: buckets not sorted by count desc, surface asc"));
        }
        let total: u64 = self.buckets.iter().map(|b| b.count).sum();
        if total != self.total_count {
            return Err(format!("{name}: total_count {} != sum of buckets {total}", self.total_count));
        }
        let expected = entropy(&self.buckets.iter().map(|b| b.count).collect::<Vec<_>>());
        if (expected - self.entropy).abs() > 1e-6 {
            return Err(format!("{name}: entropy {} != recomputed {expected}", self.entropy));
        }
        Ok(())
    }
}

/// Histogram of an automatically labeled cluster, with a content-derived id.
pub fn build_histogram(
    labeled: &LabeledCluster,
    table: &EntityTable,
    corpus: &Corpus,
) -> Result<Histogram, HistogramError> {
    let surfaces: Vec<String> = labeled
        .cluster
        .entity_ids
        .iter()
        .map(|&id| {
            table
                .get(id)
                .map(|e| e.display())
                .ok_or(HistogramError::UnknownEntity(id))
        })
        .collect::<Result<_, _>>()?;
    Histogram::from_entities(
        auto_histogram_id(&labeled.label, &surfaces),
        labeled.label.clone(),
        HistogramSource::Auto,
        &labeled.cluster.entity_ids,
        table,
        corpus,
    )
}

fn histogram_order(key: SortKey) -> impl Fn(&Histogram, &Histogram) -> Ordering {
    move |a, b| {
        let primary = match key {
            SortKey::TotalCount => b.total_count.cmp(&a.total_count),
            SortKey::Entropy => b.entropy.total_cmp(&a.entropy),
        };
        primary
            .then_with(|| a.label.cmp(&b.label))
            .then_with(|| a.id.cmp(&b.id))
    }
}

/// Stable descending sort by `key`; ties by label then id.
pub fn sort_histograms(mut histograms: Vec<Histogram>, key: SortKey) -> Vec<Histogram> {
    histograms.sort_by(histogram_order(key));
    histograms
}

pub fn sort_histogram_refs(histograms: &mut [&Histogram], key: SortKey) {
    let order = histogram_order(key);
    histograms.sort_by(|a, b| order(a, b));
}

/// Example ids containing a bucket's entity, ascending.
pub fn select_bucket(
    histogram: &Histogram,
    entity_id: EntityId,
    table: &EntityTable,
) -> Result<Vec<u32>, HistogramError> {
    histogram
        .bucket(entity_id)
        .ok_or(HistogramError::NotInHistogram(entity_id))?;
    let entity = table.get(entity_id).ok_or(HistogramError::UnknownEntity(entity_id))?;
    Ok(entity.postings.clone())
}
