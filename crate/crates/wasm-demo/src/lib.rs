//! In-browser explorer over pasted text, using the stub providers.
//!
//! Three operations are exported: analyze text into histograms at one
//! cutoff, search those histograms, and build a histogram from a category.
//! Results cross the boundary as JSON strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use histoscope_core::config::PipelineConfig;
use histoscope_core::corpus::Corpus;
use histoscope_core::fixtures::medical_corpus;
use histoscope_core::histogram::{sort_histograms, Histogram, SortKey};
use histoscope_core::labeling::StubGenerator;
use histoscope_core::pipeline::{analyze, Providers};
use histoscope_core::query::{
    create_user_histogram, exact_search, generate_candidate_entities, semantic_search, suggest_dataset_entities,
    EntitySuggestion, SearchResult, DEFAULT_SEMANTIC_THRESHOLD, DEFAULT_SUGGESTION_LIMIT,
    DEFAULT_SUGGESTION_THRESHOLD,
};
use histoscope_core::store::AnalysisArtifact;

/// Pasted text has few repeats, so pairs already count as a group.
pub const DEMO_MIN_SIZE: usize = 2;

#[derive(Debug, Serialize)]
pub struct Summary {
    pub examples: usize,
    pub entities: usize,
    pub histograms: usize,
}

#[derive(Debug, Serialize)]
pub struct CategoryResult {
    pub category: String,
    pub candidates: Vec<String>,
    pub suggestions: Vec<EntitySuggestion>,
    pub histogram: Option<Histogram>,
}

pub struct Explorer {
    corpus: Corpus,
    artifact: AnalysisArtifact,
    providers: Providers,
}

impl Explorer {
    /// One example per non-blank line; clusters at a single `cutoff`.
    pub fn new(text: &str, cutoff: f64) -> Result<Self, String> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let corpus = Corpus::from_texts("pasted", lines).map_err(|e| e.to_string())?;
        let config = PipelineConfig {
            cutoffs: vec![cutoff],
            min_size: DEMO_MIN_SIZE,
            ..Default::default()
        };
        let providers = Providers::stub();
        let (artifact, _) = analyze(&corpus, &config, &providers).map_err(|e| e.to_string())?;
        Ok(Explorer {
            corpus,
            artifact,
            providers,
        })
    }

    pub fn summary(&self) -> Summary {
        Summary {
            examples: self.corpus.len(),
            entities: self.artifact.entities.len(),
            histograms: self.artifact.histogram_count(),
        }
    }

    pub fn histograms(&self, sort: &str) -> Result<Vec<Histogram>, String> {
        let key = match sort {
            "total" => SortKey::TotalCount,
            "entropy" => SortKey::Entropy,
            other => return Err(format!("unknown sort {other:?}")),
        };
        Ok(sort_histograms(self.artifact.histograms().cloned().collect(), key))
    }

    pub fn search(&self, query: &str, semantic: bool) -> Result<Vec<SearchResult>, String> {
        if query.trim().is_empty() {
            return Ok(Vec::new());
        }
        let all: Vec<Histogram> = self.artifact.histograms().cloned().collect();
        if semantic {
            semantic_search(query, &all, &self.providers.embedder, DEFAULT_SEMANTIC_THRESHOLD)
                .map_err(|e| e.to_string())
        } else {
            Ok(exact_search(query, &all))
        }
    }

    /// Suggests entities for `category` and keeps every suggestion as a new
    /// user histogram. No histogram is added when nothing matches.
    pub fn add_category(&mut self, category: &str) -> Result<CategoryResult, String> {
        let category = category.trim();
        if category.is_empty() {
            return Err("category is empty".into());
        }
        let candidates =
            generate_candidate_entities(category, self.providers.generator.as_ref()).map_err(|e| e.to_string())?;
        let suggestions = if candidates.is_empty() {
            Vec::new()
        } else {
            suggest_dataset_entities(
                &candidates,
                &self.artifact.entities,
                &self.providers.embedder,
                DEFAULT_SUGGESTION_LIMIT,
                DEFAULT_SUGGESTION_THRESHOLD,
            )
            .map_err(|e| e.to_string())?
        };
        let histogram = if suggestions.is_empty() {
            None
        } else {
            let ids: Vec<u32> = suggestions.iter().map(|s| s.entity_id).collect();
            let seq = self.artifact.user_histograms.len() as u64 + 1;
            let h = create_user_histogram(category, &ids, &self.artifact.entities, &self.corpus, seq)
                .map_err(|e| e.to_string())?;
            self.artifact.user_histograms.push(h.clone());
            Some(h)
        };
        Ok(CategoryResult {
            category: category.to_string(),
            candidates,
            suggestions,
            histogram,
        })
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| format!("{{\"error\":{:?}}}", e.to_string()))
}

/// Handle exported to JavaScript.
#[wasm_bindgen]
pub struct Demo {
    inner: Explorer,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(text: &str, cutoff: f64) -> Result<Demo, JsError> {
        Explorer::new(text, cutoff)
            .map(|inner| Demo { inner })
            .map_err(|e| JsError::new(&e))
    }

    pub fn summary(&self) -> String {
        to_json(&self.inner.summary())
    }

    pub fn histograms(&self, sort: &str) -> Result<String, JsError> {
        self.inner.histograms(sort).map(|h| to_json(&h)).map_err(|e| JsError::new(&e))
    }

    pub fn search(&self, query: &str, semantic: bool) -> Result<String, JsError> {
        self.inner
            .search(query, semantic)
            .map(|r| to_json(&r))
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = addCategory)]
    pub fn add_category(&mut self, category: &str) -> Result<String, JsError> {
        self.inner
            .add_category(category)
            .map(|r| to_json(&r))
            .map_err(|e| JsError::new(&e))
    }
}

/// The bundled 500-line medical sample, one example per line.
#[wasm_bindgen(js_name = sampleText)]
pub fn sample_text() -> String {
    let corpus = medical_corpus();
    let lines: Vec<&str> = corpus.examples().iter().map(|e| e.text.as_str()).collect();
    lines.join("\n")
}

/// Categories the offline generator can answer, as a JSON array.
#[wasm_bindgen]
pub fn categories() -> String {
    to_json(&StubGenerator::default().known_categories())
}
