//! Unit-norm text embeddings behind a provider contract, with caching and
//! the vector math used for clustering and nearest-entity ranking.

mod cache;
mod stub;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::ProviderError;

pub use cache::{CachedEmbeddings, Embedder, EmbeddingCache, EmbeddingProvider};
pub use stub::{stub_embedding, StubEmbedder, STUB_DIMENSION};

pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EmbeddingError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("provider returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedding has non-finite components")]
    NonFinite,
    #[error("embedding has unit-norm violation (norm {0})")]
    NotUnitNorm(f64),
    #[error("centroid of an empty set")]
    EmptyCentroid,
    #[error("centroid is the zero vector")]
    DegenerateCentroid,
}

/// A finite, L2-normalized vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct EmbeddingVector(Vec<f32>);

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = EmbeddingError;

    /// Accepts only vectors that are already unit norm.
    fn try_from(components: Vec<f32>) -> Result<Self, Self::Error> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        let norm = l2_norm(&components);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(EmbeddingError::NotUnitNorm(norm));
        }
        Ok(EmbeddingVector(components))
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

fn l2_norm(components: &[f32]) -> f64 {
    components
        .iter()
        .map(|&c| f64::from(c) * f64::from(c))
        .sum::<f64>()
        .sqrt()
}

impl EmbeddingVector {
    /// Normalizes raw provider output. An all-zero vector maps to `e₀`.
    pub fn normalize(raw: &[f64]) -> Result<Self, EmbeddingError> {
        if raw.is_empty() {
            return Err(EmbeddingError::DimensionMismatch { expected: 1, got: 0 });
        }
        if raw.iter().any(|c| !c.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(Self::basis(raw.len(), 0));
        }
        Ok(EmbeddingVector(raw.iter().map(|c| (c / norm) as f32).collect()))
    }

    pub fn normalize_f32(raw: &[f32]) -> Result<Self, EmbeddingError> {
        let wide: Vec<f64> = raw.iter().map(|&c| f64::from(c)).collect();
        Self::normalize(&wide)
    }

    pub fn basis(dimension: usize, axis: usize) -> Self {
        let mut v = vec![0.0f32; dimension];
        v[axis] = 1.0;
        EmbeddingVector(v)
    }

    pub fn components(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn negated(&self) -> Self {
        EmbeddingVector(self.0.iter().map(|c| -c).collect())
    }
}

/// Dot product of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: a.dimension(),
            got: b.dimension(),
        });
    }
    let dot: f64 = a
        .0
        .iter()
        .zip(&b.0)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Component-wise mean, re-normalized to unit length.
pub fn centroid(vectors: &[EmbeddingVector]) -> Result<EmbeddingVector, EmbeddingError> {
    EmbeddingVector::normalize(&centroid_direction(vectors)?)
}

/// The centroid at full precision, for ranking without the f32 rounding of
/// a stored vector.
pub fn centroid_direction(vectors: &[EmbeddingVector]) -> Result<Vec<f64>, EmbeddingError> {
    let first = vectors.first().ok_or(EmbeddingError::EmptyCentroid)?;
    let dimension = first.dimension();
    let mut sum = vec![0.0f64; dimension];
    for v in vectors {
        if v.dimension() != dimension {
            return Err(EmbeddingError::DimensionMismatch {
                expected: dimension,
                got: v.dimension(),
            });
        }
        for (s, &c) in sum.iter_mut().zip(&v.0) {
            *s += f64::from(c);
        }
    }
    let n = vectors.len() as f64;
    let mean: Vec<f64> = sum.into_iter().map(|s| s / n).collect();
    let norm = mean.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(EmbeddingError::DegenerateCentroid);
    }
    Ok(mean.into_iter().map(|c| c / norm).collect())
}

/// Cosine between a unit f64 direction and a stored vector.
pub fn cosine_to_direction(direction: &[f64], v: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if direction.len() != v.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: direction.len(),
            got: v.dimension(),
        });
    }
    let dot: f64 = direction.iter().zip(&v.0).map(|(&d, &c)| d * f64::from(c)).sum();
    Ok(dot.clamp(-1.0, 1.0))
}
