//! extract → embed → cluster → label → histograms, producing an artifact.

use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::clustering::{multi_cutoff_cluster_with, pairwise_distances, ClusterSet, ClusteringError};
use crate::config::{ConfigError, PipelineConfig, ProviderKind};
use crate::corpus::Corpus;
use crate::embedding::{EmbeddingError, EmbeddingProvider, Embedder, StubEmbedder};
use crate::extraction::{extract_entities, ExtractionError, PosTagger, RuleTagger};
use crate::histogram::{build_histogram, HistogramError};
use crate::labeling::{label_clusters, StubGenerator};
use crate::provider::{ProviderError, TextGenerator};
use crate::store::{AnalysisArtifact, CutoffCount, RunReport, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error("embedding failed: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error("provider unavailable: {0}")]
    Provider(#[from] ProviderError),
    #[error("every labeling request failed ({failed} clusters); last error: {last}")]
    LabelingFailed { failed: usize, last: String },
}

impl PipelineError {
    /// True when the failure came from an embedding or generation provider.
    pub fn is_provider_failure(&self) -> bool {
        matches!(
            self,
            PipelineError::Provider(_)
                | PipelineError::LabelingFailed { .. }
                | PipelineError::Embedding(EmbeddingError::Provider(_))
        )
    }
}

/// The embedding and generation backends used by analysis and by the server.
#[derive(Clone)]
pub struct Providers {
    pub embedder: Arc<Embedder>,
    pub generator: Arc<dyn TextGenerator>,
}

impl std::fmt::Debug for Providers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Providers")
            .field("embedder", &self.embedder.identity())
            .field("generator", &self.generator.identity())
            .finish()
    }
}

impl Providers {
    pub fn stub() -> Self {
        Providers {
            embedder: Arc::new(Embedder::new(Arc::new(StubEmbedder::default()))),
            generator: Arc::new(StubGenerator::default()),
        }
    }

    /// Builds providers from config. Remote providers read their token from
    /// the configured environment variable. Must not be called from inside an
    /// async runtime when remote providers are configured.
    pub fn from_config(config: &PipelineConfig) -> Result<Self, PipelineError> {
        let emb = &config.embedding;
        let embedding: Arc<dyn EmbeddingProvider> = match emb.kind {
            ProviderKind::Stub => Arc::new(StubEmbedder::new(emb.dimension, emb.batch_size)),
            ProviderKind::Remote => remote_embedding(config)?,
        };
        let generator: Arc<dyn TextGenerator> = match config.labeling.kind {
            ProviderKind::Stub => Arc::new(StubGenerator::default()),
            ProviderKind::Remote => remote_generator(config)?,
        };
        Ok(Providers {
            embedder: Arc::new(Embedder::new(embedding)),
            generator,
        })
    }
}

#[cfg(feature = "remote")]
fn remote_embedding(config: &PipelineConfig) -> Result<Arc<dyn EmbeddingProvider>, PipelineError> {
    use crate::remote::{token_from_env, RemoteEmbeddingProvider};
    let emb = &config.embedding;
    let url = emb.endpoint.as_deref().unwrap_or_default();
    let token = token_from_env(emb.api_key_env.as_deref())?;
    Ok(Arc::new(RemoteEmbeddingProvider::new(
        url,
        token,
        emb.dimension,
        emb.batch_size,
        Default::default(),
    )?))
}

#[cfg(feature = "remote")]
fn remote_generator(config: &PipelineConfig) -> Result<Arc<dyn TextGenerator>, PipelineError> {
    use crate::remote::{token_from_env, RemoteGenerator};
    let lab = &config.labeling;
    let url = lab.endpoint.as_deref().unwrap_or_default();
    let token = token_from_env(lab.api_key_env.as_deref())?;
    Ok(Arc::new(RemoteGenerator::new(url, token, Default::default())?))
}

#[cfg(not(feature = "remote"))]
fn remote_embedding(_: &PipelineConfig) -> Result<Arc<dyn EmbeddingProvider>, PipelineError> {
    Err(ProviderError::Config("built without the remote feature".into()).into())
}

#[cfg(not(feature = "remote"))]
fn remote_generator(_: &PipelineConfig) -> Result<Arc<dyn TextGenerator>, PipelineError> {
    Err(ProviderError::Config("built without the remote feature".into()).into())
}

#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub stages: Vec<(&'static str, Duration)>,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.stages.iter().map(|(_, d)| *d).sum()
    }
}

// Instant::now panics on wasm32-unknown-unknown
#[cfg(not(target_arch = "wasm32"))]
fn now() -> Option<Instant> {
    Some(Instant::now())
}

#[cfg(target_arch = "wasm32")]
fn now() -> Option<Instant> {
    None
}

pub fn analyze(
    corpus: &Corpus,
    config: &PipelineConfig,
    providers: &Providers,
) -> Result<(AnalysisArtifact, StageTimings), PipelineError> {
    analyze_with_tagger(corpus, config, providers, &RuleTagger::default())
}

pub fn analyze_with_tagger(
    corpus: &Corpus,
    config: &PipelineConfig,
    providers: &Providers,
    tagger: &dyn PosTagger,
) -> Result<(AnalysisArtifact, StageTimings), PipelineError> {
    config.validate()?;
    let mut timings = StageTimings::default();
    let mut clock = now();
    let mut lap = |name: &'static str, timings: &mut StageTimings| {
        timings.stages.push((name, clock.map(|c| c.elapsed()).unwrap_or_default()));
        clock = now();
    };

    let entities = extract_entities(corpus, config.k_cap, tagger)?;
    lap("extract", &mut timings);

    let surfaces: Vec<String> = entities.entities().iter().map(|e| e.display()).collect();
    let vectors = providers.embedder.embed_batch(&surfaces)?;
    lap("embed", &mut timings);

    // a single entity cannot form a cluster
    let clusters = if vectors.len() < 2 {
        ClusterSet {
            clusters: Vec::new(),
            cutoffs_used: config.cutoffs.clone(),
        }
    } else {
        let matrix = pairwise_distances(&vectors)?;
        multi_cutoff_cluster_with(
            &matrix,
            &config.cutoffs,
            config.min_size,
            config.max_size,
            config.linkage,
        )?
    };
    lap("cluster", &mut timings);

    let outcome = label_clusters(
        &clusters,
        &entities,
        providers.generator.as_ref(),
        config.labeling.max_label_tokens,
        config.labeling.parallelism,
    );
    if !clusters.clusters.is_empty() && outcome.failed == clusters.clusters.len() {
        return Err(PipelineError::LabelingFailed {
            failed: outcome.failed,
            last: outcome.warnings.last().cloned().unwrap_or_default(),
        });
    }
    lap("label", &mut timings);

    let mut auto_histograms = Vec::with_capacity(outcome.labeled.len());
    let mut seen = std::collections::HashSet::new();
    for labeled in &outcome.labeled {
        let h = build_histogram(labeled, &entities, corpus)?;
        if seen.insert(h.id.clone()) {
            auto_histograms.push(h);
        }
    }
    lap("histograms", &mut timings);

    let store_cache = config.embedding.kind == ProviderKind::Stub || config.embedding.store_remote_cache;
    let report = RunReport {
        corpus_name: corpus.name().to_string(),
        example_count: corpus.len(),
        entity_count: entities.len(),
        embedding_provider: providers.embedder.identity().to_string(),
        label_provider: providers.generator.identity(),
        cluster_counts: config
            .cutoffs
            .iter()
            .map(|&cutoff| CutoffCount {
                cutoff,
                clusters: clusters.count_at(cutoff),
            })
            .collect(),
        clusters_total: clusters.clusters.len(),
        labeled: outcome.labeled.len(),
        no_label: outcome.no_label,
        failed: outcome.failed,
        warnings: outcome.warnings,
    };
    let artifact = AnalysisArtifact {
        schema_version: SCHEMA_VERSION,
        corpus_digest: corpus.source_digest().to_string(),
        config: config.clone(),
        entities,
        embeddings: store_cache.then(|| providers.embedder.snapshot()),
        auto_histograms,
        user_histograms: Vec::new(),
        run_report: report,
    };
    Ok((artifact, timings))
}
