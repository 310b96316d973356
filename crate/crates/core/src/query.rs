//! Histogram search and the live flow for creating a histogram from a
//! category name: generate examples, rank dataset entities against their
//! centroid, and build a histogram from the user's selection.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embedding::{centroid_direction, cosine_similarity, cosine_to_direction, Embedder, EmbeddingError};
use crate::extraction::{EntityId, EntityTable};
use crate::histogram::{Histogram, HistogramError, HistogramSource};
use crate::provider::{ProviderError, TextGenerator};

pub const DEFAULT_SEMANTIC_THRESHOLD: f64 = 0.5;
pub const DEFAULT_SUGGESTION_LIMIT: usize = 30;
pub const DEFAULT_SUGGESTION_THRESHOLD: f64 = 0.35;
pub const CANDIDATE_CAP: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error("query must be non-empty")]
    EmptyQuery,
    #[error("category must be non-empty")]
    EmptyCategory,
    #[error("no candidate entities to rank")]
    EmptyCandidates,
    #[error("select at least one entity")]
    EmptySelection,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MatchKind {
    Exact,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub histogram_id: String,
    pub label: String,
    pub score: f64,
    pub match_kind: MatchKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySuggestion {
    pub entity_id: EntityId,
    pub surface: Vec<String>,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingCategory {
    pub category: String,
    pub llm_examples: Vec<String>,
    pub suggestions: Vec<EntitySuggestion>,
}

fn result_order(a: &SearchResult, b: &SearchResult) -> std::cmp::Ordering {
    let rank = |k: MatchKind| if k == MatchKind::Exact { 0 } else { 1 };
    rank(a.match_kind)
        .cmp(&rank(b.match_kind))
        .then_with(|| b.score.total_cmp(&a.score))
        .then_with(|| a.label.cmp(&b.label))
        .then_with(|| a.histogram_id.cmp(&b.histogram_id))
}

/// Case-insensitive substring match against labels and bucket surfaces.
pub fn exact_search(query: &str, histograms: &[Histogram]) -> Vec<SearchResult> {
    let needle = query.trim().to_lowercase();
    if needle.is_empty() {
        return Vec::new();
    }
    let mut results: Vec<SearchResult> = histograms
        .iter()
        .filter(|h| {
            h.label.to_lowercase().contains(&needle)
                || h.buckets.iter().any(|b| b.surface.join(" ").contains(&needle))
        })
        .map(|h| SearchResult {
            histogram_id: h.id.clone(),
            label: h.label.clone(),
            score: 1.0,
            match_kind: MatchKind::Exact,
        })
        .collect();
    results.sort_by(result_order);
    results
}

/// Exact matches first, then histograms whose label embedding has cosine
/// similarity of at least `threshold` with the query.
pub fn semantic_search(
    query: &str,
    histograms: &[Histogram],
    embedder: &Embedder,
    threshold: f64,
) -> Result<Vec<SearchResult>, QueryError> {
    if query.trim().is_empty() {
        return Err(QueryError::EmptyQuery);
    }
    let mut results = exact_search(query, histograms);
    let exact_ids: HashSet<String> = results.iter().map(|r| r.histogram_id.clone()).collect();

    let query_vec = embedder.embed_text(query.trim())?;
    let labels: Vec<&str> = histograms.iter().map(|h| h.label.as_str()).collect();
    let label_vecs = embedder.embed_batch(&labels)?;

    let mut semantic = Vec::new();
    for (h, v) in histograms.iter().zip(&label_vecs) {
        if exact_ids.contains(&h.id) {
            continue;
        }
        let score = cosine_similarity(&query_vec, v)?;
        if score >= threshold {
            semantic.push(SearchResult {
                histogram_id: h.id.clone(),
                label: h.label.clone(),
                score: score.clamp(0.0, 1.0),
                match_kind: MatchKind::Semantic,
            });
        }
    }
    semantic.sort_by(result_order);
    results.extend(semantic);
    Ok(results)
}

pub fn examples_prompt(category: &str) -> String {
    format!("give me examples of {}", category.trim())
}

fn strip_list_marker(item: &str) -> &str {
    let item = item.trim();
    let item = item.trim_start_matches(['-', '*', '\u{2022}']).trim_start();
    let digits = item.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        if let Some(rest) = item[digits..].strip_prefix(['.', ')']) {
            return rest.trim();
        }
    }
    item
}

/// Splits a generated answer on newlines and commas, dropping list markers
/// and duplicates; keeps at most [`CANDIDATE_CAP`] lowercase items.
pub fn parse_candidate_list(raw: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    raw.split(['\n', ','])
        .map(strip_list_marker)
        .map(|s| s.trim_matches(['"', '\'', '.']).trim().to_lowercase())
        .filter(|s| !s.is_empty())
        .filter(|s| seen.insert(s.clone()))
        .take(CANDIDATE_CAP)
        .collect()
}

/// Asks the generator for examples of `category`. The items may or may not
/// occur in the dataset.
pub fn generate_candidate_entities(
    category: &str,
    generator: &dyn TextGenerator,
) -> Result<Vec<String>, QueryError> {
    if category.trim().is_empty() {
        return Err(QueryError::EmptyCategory);
    }
    let raw = generator.generate(&examples_prompt(category))?;
    Ok(parse_candidate_list(&raw))
}

/// Ranks every table entity by cosine similarity to the centroid of the
/// candidate embeddings; returns the top `limit` at or above `threshold`.
pub fn suggest_dataset_entities<S: AsRef<str>>(
    candidates: &[S],
    table: &EntityTable,
    embedder: &Embedder,
    limit: usize,
    threshold: f64,
) -> Result<Vec<EntitySuggestion>, QueryError> {
    if candidates.is_empty() {
        return Err(QueryError::EmptyCandidates);
    }
    let center = centroid_direction(&embedder.embed_batch(candidates)?)?;
    let surfaces: Vec<String> = table.entities().iter().map(|e| e.display()).collect();
    let vectors = embedder.embed_batch(&surfaces)?;

    let mut ranked: Vec<EntitySuggestion> = table
        .entities()
        .iter()
        .zip(&vectors)
        .map(|(e, v)| {
            Ok(EntitySuggestion {
                entity_id: e.id,
                surface: e.surface.clone(),
                similarity: cosine_to_direction(&center, v)?,
            })
        })
        .collect::<Result<_, EmbeddingError>>()?;
    ranked.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(a.entity_id.cmp(&b.entity_id))
    });
    Ok(ranked
        .into_iter()
        .take_while(|s| s.similarity >= threshold)
        .take(limit)
        .collect())
}

/// Builds a user-created histogram with id `user-<sequence>`.
pub fn create_user_histogram(
    label: &str,
    selected_entity_ids: &[EntityId],
    table: &EntityTable,
    corpus: &Corpus,
    sequence: u64,
) -> Result<Histogram, QueryError> {
    if label.trim().is_empty() {
        return Err(QueryError::Histogram(HistogramError::EmptyLabel));
    }
    if selected_entity_ids.is_empty() {
        return Err(QueryError::EmptySelection);
    }
    Ok(Histogram::from_entities(
        format!("user-{sequence}"),
        label.trim().to_string(),
        HistogramSource::User,
        selected_entity_ids,
        table,
        corpus,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{stub_embedding, StubEmbedder};
    use crate::extraction::{extract_entities, RuleTagger};
    use crate::histogram::Bucket;
    use crate::labeling::StubGenerator;
    use std::sync::Arc;

    fn histogram(id: &str, label: &str, surfaces: &[&str]) -> Histogram {
        let buckets = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| Bucket { entity_id: i as u32, surface: vec![s.to_string()], count: 1 })
            .collect();
        let mut h = Histogram {
            id: id.into(),
            label: label.into(),
            source: HistogramSource::Auto,
            buckets,
            total_count: 0,
            entropy: 0.0,
        };
        h.recompute_stats();
        h
    }

    fn stub_embedder() -> Embedder {
        Embedder::new(Arc::new(StubEmbedder::default()))
    }

    #[test]
    fn exact_matches_label_and_surface() {
        let hs = vec![
            histogram("h1", "infectious diseases", &["flu"]),
            histogram("h2", "conditions", &["cancer", "asthma"]),
        ];
        let r = exact_search("disease", &hs);
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].histogram_id.as_str(), r[0].score), ("h1", 1.0));
        let r = exact_search("CANCER", &hs);
        assert_eq!(r[0].histogram_id, "h2");
        assert!(exact_search("zzz", &hs).is_empty());
        assert!(exact_search("  ", &hs).is_empty());
    }

    #[test]
    fn semantic_under_stub() {
        let hs = vec![
            histogram("g", "guitar group", &["guitar"]),
            histogram("d", "diseases group", &["disease"]),
        ];
        let e = stub_embedder();
        let r = semantic_search("diseases", &hs, &e, 0.5).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].label, "diseases group");
        assert_eq!(r[0].match_kind, MatchKind::Exact);

        // without the substring hit the match is semantic
        let hs = vec![histogram("d", "disease group", &["flu"]), histogram("g", "guitar group", &["x"])];
        let r = semantic_search("diseases", &hs, &e, 0.5).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].match_kind, MatchKind::Semantic);
        let expected = cosine_similarity(&stub_embedding("diseases", 64), &stub_embedding("disease group", 64)).unwrap();
        assert!((r[0].score - expected).abs() < 1e-12);
    }

    #[test]
    fn exact_precedes_semantic_without_duplicates() {
        let hs = vec![
            histogram("a", "disease group", &["x"]),
            histogram("b", "diseases", &["y"]),
        ];
        let r = semantic_search("diseases", &hs, &stub_embedder(), 0.0).unwrap();
        assert_eq!(r[0].histogram_id, "b");
        assert_eq!(r[0].match_kind, MatchKind::Exact);
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].match_kind, MatchKind::Semantic);
        let none = semantic_search("diseases", &hs, &stub_embedder(), 1.01).unwrap();
        assert!(none.iter().all(|r| r.match_kind == MatchKind::Exact));
        assert_eq!(semantic_search(" ", &hs, &stub_embedder(), 0.5), Err(QueryError::EmptyQuery));
    }

    #[test]
    fn candidate_parsing() {
        assert_eq!(parse_candidate_list("HIV, syphilis,\nherpes"), vec!["hiv", "syphilis", "herpes"]);
        assert!(parse_candidate_list("").is_empty());
        assert_eq!(
            parse_candidate_list("1. Guitar\n2) piano\n- drums\n* guitar\n• Cello."),
            vec!["guitar", "piano", "drums", "cello"]
        );
        let many: Vec<String> = (0..30).map(|i| format!("item{i}")).collect();
        assert_eq!(parse_candidate_list(&many.join(",")).len(), CANDIDATE_CAP);
        // numbers that are items, not markers, survive
        assert_eq!(parse_candidate_list("200, 400"), vec!["200", "400"]);
    }

    #[test]
    fn generate_uses_fixed_prompt() {
        struct Echo;
        impl TextGenerator for Echo {
            fn identity(&self) -> String {
                "echo".into()
            }
            fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
                Ok(prompt.to_string())
            }
        }
        let out = generate_candidate_entities("sexually transmitted diseases", &Echo).unwrap();
        assert_eq!(out, vec!["give me examples of sexually transmitted diseases"]);
        let stub = StubGenerator::default();
        assert_eq!(
            generate_candidate_entities("sexually transmitted diseases", &stub).unwrap(),
            vec!["hiv", "syphilis", "herpes", "chlamydia", "gonorrhea"]
        );
        assert!(generate_candidate_entities("unknown thing", &stub).unwrap().is_empty());
        assert_eq!(generate_candidate_entities(" ", &stub), Err(QueryError::EmptyCategory));
    }

    fn table() -> (Corpus, EntityTable) {
        let corpus = Corpus::from_texts(
            "t",
            ["hiv and syphilis cases", "herpes outbreak", "guitar lessons", "hiv clinic", "piano"],
        )
        .unwrap();
        let table = extract_entities(&corpus, 100, &RuleTagger::default()).unwrap();
        (corpus, table)
    }

    #[test]
    fn suggestion_self_similarity() {
        let (_, t) = table();
        let s = suggest_dataset_entities(&["syphilis"], &t, &stub_embedder(), 30, 0.35).unwrap();
        assert_eq!(s[0].surface, vec!["syphilis"]);
        assert!((s[0].similarity - 1.0).abs() < 1e-6);
        assert!(s.windows(2).all(|w| w[0].similarity >= w[1].similarity));
        assert!(s.iter().all(|x| x.similarity >= 0.35));
    }

    #[test]
    fn suggestion_threshold_and_limit() {
        let (_, t) = table();
        let e = stub_embedder();
        assert!(suggest_dataset_entities(&["syphilitic"], &t, &e, 30, 1.0).unwrap().is_empty());
        let top = suggest_dataset_entities(&["hiv", "herpes"], &t, &e, 1, -1.0).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(
            suggest_dataset_entities::<&str>(&[], &t, &e, 5, 0.0),
            Err(QueryError::EmptyCandidates)
        );
    }

    #[test]
    fn user_histogram() {
        let (corpus, t) = table();
        let hiv = t.find_str("hiv").unwrap().id;
        let syph = t.find_str("syphilis").unwrap().id;
        let h = create_user_histogram("sexually transmitted diseases", &[hiv, syph], &t, &corpus, 1).unwrap();
        assert_eq!(h.id, "user-1");
        assert_eq!(h.source, HistogramSource::User);
        let counts: Vec<(String, u64)> = h.buckets.iter().map(|b| (b.surface.join(" "), b.count)).collect();
        assert_eq!(counts, vec![("hiv".into(), 2), ("syphilis".into(), 1)]);
        let second = create_user_histogram("x", &[hiv], &t, &corpus, 2).unwrap();
        assert_eq!(second.id, "user-2");
        assert_eq!(create_user_histogram("x", &[], &t, &corpus, 3), Err(QueryError::EmptySelection));
        assert!(create_user_histogram("x", &[999], &t, &corpus, 3).is_err());
        assert!(create_user_histogram(" ", &[hiv], &t, &corpus, 3).is_err());
    }
}
