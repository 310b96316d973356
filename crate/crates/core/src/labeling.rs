//! Few-shot cluster labeling through a text-generation provider.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::clustering::{Cluster, ClusterSet};
use crate::embedding::{cosine_similarity, stub_embedding, STUB_DIMENSION};
use crate::extraction::EntityTable;
use crate::provider::{ProviderError, TextGenerator};

pub const LABEL_TEMPLATE_ID: &str = "label-v1";
const LABEL_TEMPLATE: &str = include_str!("../data/prompts/label-v1.txt");
const STUB_CATEGORIES: &str = include_str!("../data/stub/categories.tsv");

pub const MAX_LABEL_CHARS: usize = 60;
/// Members sent to the labeler, highest frequency first.
pub const PROMPT_ENTITY_CAP: usize = 25;
pub const DEFAULT_MAX_LABEL_TOKENS: usize = 8;
pub const STUB_COHERENCE_THRESHOLD: f64 = 0.15;

const ENTITIES_PREFIX: &str = "Entities: ";
const EXAMPLES_PREFIX: &str = "give me examples of ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Label {
    Named(String),
    NoLabel,
}

impl Label {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Label::Named(s) => Some(s),
            Label::NoLabel => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCluster {
    pub cluster: Cluster,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelingOutcome {
    pub labeled: Vec<LabeledCluster>,
    pub no_label: usize,
    pub failed: usize,
    pub warnings: Vec<String>,
}

fn template_body() -> String {
    LABEL_TEMPLATE
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
        .trim_end()
        .to_string()
}

/// Instruction header, few-shot pairs, then `Entities: a, b, c` as the final line.
pub fn build_label_prompt<S: AsRef<str>>(entity_surfaces: &[S]) -> String {
    let list: Vec<&str> = entity_surfaces.iter().map(AsRef::as_ref).collect();
    format!("{}\n\n{ENTITIES_PREFIX}{}", template_body(), list.join(", "))
}

/// Recovers the target entity list from the last line of a label prompt.
pub fn prompt_entities(prompt: &str) -> Option<Vec<String>> {
    let last = prompt.lines().last()?;
    let list = last.strip_prefix(ENTITIES_PREFIX)?;
    Some(
        list.split(", ")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect(),
    )
}

const QUOTES: &[char] = &['"', '\'', '`', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}'];

fn clean(s: &str) -> &str {
    let mut current = s;
    loop {
        let mut next = current.trim().trim_matches(QUOTES).trim();
        if next.get(..6).is_some_and(|p| p.eq_ignore_ascii_case("label:")) {
            next = next[6..].trim();
        }
        if next == current {
            return current;
        }
        current = next;
    }
}

/// First line only, trimmed of whitespace and quotes, at most 60 characters.
/// "no label", "none" and empty answers become [`Label::NoLabel`].
pub fn parse_label_response(raw: &str) -> Label {
    let first = raw.trim().lines().next().unwrap_or("");
    let cleaned = clean(first);
    let truncated: String = cleaned.chars().take(MAX_LABEL_CHARS).collect();
    let label = clean(&truncated);
    if label.is_empty() || label.eq_ignore_ascii_case("no label") || label.eq_ignore_ascii_case("none") {
        Label::NoLabel
    } else {
        Label::Named(label.to_string())
    }
}

fn limit_words(label: &str, max_words: usize) -> String {
    label.split_whitespace().take(max_words.max(1)).collect::<Vec<_>>().join(" ")
}

fn label_one(
    cluster: &Cluster,
    table: &EntityTable,
    generator: &dyn TextGenerator,
) -> Result<Label, ProviderError> {
    // Entity ids follow (frequency desc, surface asc), so id order is the prompt order.
    let mut members: Vec<u32> = cluster.entity_ids.clone();
    members.sort_unstable();
    let surfaces: Vec<String> = members
        .iter()
        .filter_map(|&id| table.get(id))
        .take(PROMPT_ENTITY_CAP)
        .map(|e| e.display())
        .collect();
    let prompt = build_label_prompt(&surfaces);
    generator.generate(&prompt).map(|raw| parse_label_response(&raw))
}

/// Labels every cluster and drops the ones answered with no label. Provider
/// failures count as no label and are reported as warnings.
pub fn label_clusters(
    clusters: &ClusterSet,
    table: &EntityTable,
    generator: &dyn TextGenerator,
    max_label_tokens: usize,
    parallelism: usize,
) -> LabelingOutcome {
    let results = run_labeling(&clusters.clusters, table, generator, parallelism);

    let mut outcome = LabelingOutcome::default();
    for (cluster, result) in clusters.clusters.iter().zip(results) {
        match result {
            Ok(Label::Named(label)) => outcome.labeled.push(LabeledCluster {
                cluster: cluster.clone(),
                label: limit_words(&label, max_label_tokens),
            }),
            Ok(Label::NoLabel) => outcome.no_label += 1,
            Err(e) => {
                outcome.failed += 1;
                outcome.no_label += 1;
                outcome.warnings.push(format!(
                    "labeling failed for cluster {:?} at cutoff {}: {e}",
                    cluster.entity_ids, cluster.cutoff
                ));
            }
        }
    }
    outcome
}

#[cfg(feature = "parallel")]
fn run_labeling(
    clusters: &[Cluster],
    table: &EntityTable,
    generator: &dyn TextGenerator,
    parallelism: usize,
) -> Vec<Result<Label, ProviderError>> {
    use rayon::prelude::*;
    let work = || {
        clusters
            .par_iter()
            .map(|c| label_one(c, table, generator))
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_labeling(
    clusters: &[Cluster],
    table: &EntityTable,
    generator: &dyn TextGenerator,
    _parallelism: usize,
) -> Vec<Result<Label, ProviderError>> {
    clusters.iter().map(|c| label_one(c, table, generator)).collect()
}

/// Offline generator.
///
/// Label prompts are answered with `"<first listed entity> group"`, or
/// `no label` when a list of three or more entities has mean pairwise stub
/// cosine below [`STUB_COHERENCE_THRESHOLD`]. Example requests
/// (`give me examples of ...`) are answered from a bundled table; unknown
/// categories get an empty answer.
#[derive(Debug, Clone)]
pub struct StubGenerator {
    categories: HashMap<String, String>,
}

impl Default for StubGenerator {
    fn default() -> Self {
        let categories = STUB_CATEGORIES
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .filter_map(|l| l.split_once('\t'))
            .map(|(k, v)| (k.trim().to_lowercase(), v.trim().to_string()))
            .collect();
        StubGenerator { categories }
    }
}

impl StubGenerator {
    /// Category names with canned answers, sorted.
    pub fn known_categories(&self) -> Vec<String> {
        let mut names: Vec<String> = self.categories.keys().cloned().collect();
        names.sort();
        names
    }

    fn answer_label(&self, entities: &[String]) -> String {
        let Some(first) = entities.first() else {
            return "no label".into();
        };
        if entities.len() >= 3 && mean_pairwise_stub_similarity(entities) < STUB_COHERENCE_THRESHOLD {
            return "no label".into();
        }
        format!("{first} group")
    }
}

pub fn mean_pairwise_stub_similarity(surfaces: &[String]) -> f64 {
    let vectors: Vec<_> = surfaces.iter().map(|s| stub_embedding(s, STUB_DIMENSION)).collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            total += cosine_similarity(&vectors[i], &vectors[j]).expect("same dimension");
            pairs += 1;
        }
    }
    if pairs == 0 {
        1.0
    } else {
        total / pairs as f64
    }
}

impl TextGenerator for StubGenerator {
    fn identity(&self) -> String {
        "stub-generator-v1".into()
    }

    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        if let Some(category) = prompt.strip_prefix(EXAMPLES_PREFIX) {
            let key = category.trim().to_lowercase();
            return Ok(self.categories.get(&key).cloned().unwrap_or_default());
        }
        match prompt_entities(prompt) {
            Some(entities) => Ok(self.answer_label(&entities)),
            None => Err(ProviderError::BadResponse(
                "stub generator received an unrecognized prompt".into(),
            )),
        }
    }
}
