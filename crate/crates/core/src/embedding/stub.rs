use unicode_normalization::UnicodeNormalization;

use super::cache::EmbeddingProvider;
use super::EmbeddingVector;
use crate::provider::ProviderError;

pub const STUB_DIMENSION: usize = 64;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Signed character-trigram hashing of `"^" + lowercase(nfc(text)) + "$"`.
///
/// Each trigram is hashed with 64-bit FNV-1a over its UTF-8 bytes and adds
/// +1 (top bit clear) or -1 (top bit set) to component `h mod dimension`.
/// Text with no trigrams embeds as `e₀`.
pub fn stub_embedding(text: &str, dimension: usize) -> EmbeddingVector {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    let padded: Vec<char> = std::iter::once('^')
        .chain(normalized.chars())
        .chain(std::iter::once('$'))
        .collect();
    let mut acc = vec![0.0f64; dimension];
    let mut buf = [0u8; 12];
    for window in padded.windows(3) {
        let mut len = 0;
        for c in window {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let h = fnv1a64(&buf[..len]);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        acc[(h % dimension as u64) as usize] += sign;
    }
    EmbeddingVector::normalize(&acc).expect("stub accumulator is finite and non-empty")
}

/// Offline, bit-deterministic embedding provider.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    dimension: usize,
    batch_size: usize,
}

impl Default for StubEmbedder {
    fn default() -> Self {
        StubEmbedder {
            dimension: STUB_DIMENSION,
            batch_size: 256,
        }
    }
}

impl StubEmbedder {
    pub fn new(dimension: usize, batch_size: usize) -> Self {
        assert!(dimension >= 1 && batch_size >= 1);
        StubEmbedder {
            dimension,
            batch_size,
        }
    }
}

impl EmbeddingProvider for StubEmbedder {
    fn identity(&self) -> String {
        format!("stub-trigram-v1/{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        Ok(texts
            .iter()
            .map(|t| stub_embedding(t, self.dimension).into())
            .collect())
    }
}
