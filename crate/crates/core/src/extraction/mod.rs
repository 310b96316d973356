//! Tokenization, part-of-speech filtering and the top-k entity table.

mod tagger;
mod tokenize;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;

pub use tagger::{classify_pos, PosTag, PosTagger, RuleTagger};
pub use tokenize::{is_number, tokenize, Token, TokenKind};

pub const DEFAULT_K_CAP: usize = 2000;

pub type EntityId = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractionError {
    #[error("k_cap must be at least 1")]
    InvalidCap,
    #[error("corpus yields no noun or number entities")]
    NoEntities,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub surface: Vec<String>,
    pub frequency: u64,
    pub postings: Vec<u32>,
}

impl Entity {
    pub fn display(&self) -> String {
        self.surface.join(" ")
    }

    pub fn document_frequency(&self) -> usize {
        self.postings.len()
    }
}

/// Entities sorted by (frequency desc, surface asc); an entity's id is its position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawEntityTable", into = "RawEntityTable")]
pub struct EntityTable {
    entities: Vec<Entity>,
    k_cap: usize,
    by_surface: HashMap<Vec<String>, EntityId>,
}

#[derive(Serialize, Deserialize)]
struct RawEntityTable {
    k_cap: usize,
    entities: Vec<Entity>,
}

impl From<EntityTable> for RawEntityTable {
    fn from(t: EntityTable) -> Self {
        RawEntityTable {
            k_cap: t.k_cap,
            entities: t.entities,
        }
    }
}

impl TryFrom<RawEntityTable> for EntityTable {
    type Error = String;

    fn try_from(raw: RawEntityTable) -> Result<Self, Self::Error> {
        EntityTable::from_entities(raw.entities, raw.k_cap)
    }
}

impl EntityTable {
    /// Rebuilds a table from stored entities, checking every table invariant.
    pub fn from_entities(entities: Vec<Entity>, k_cap: usize) -> Result<Self, String> {
        if entities.len() > k_cap {
            return Err(format!(
                "entity table has {} rows, more than k_cap {k_cap}",
                entities.len()
            ));
        }
        let mut by_surface = HashMap::with_capacity(entities.len());
        for (pos, e) in entities.iter().enumerate() {
            let label = e.display();
            if e.id as usize != pos {
                return Err(format!("entity {label:?} has id {} at position {pos}", e.id));
            }
            if e.surface.is_empty() || e.surface.iter().any(|t| t.is_empty() || t.to_lowercase() != *t) {
                return Err(format!("entity {pos} has an empty or non-lowercase surface"));
            }
            if e.postings.is_empty() || (e.frequency as usize) < e.postings.len() {
                return Err(format!(
                    "entity {label:?} violates frequency >= |postings| >= 1"
                ));
            }
            if e.postings.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("entity {label:?} postings are not strictly ascending"));
            }
            if pos > 0 && order_key(&entities[pos - 1]) > order_key(e) {
                return Err(format!("entity {label:?} is out of (frequency, surface) order"));
            }
            if by_surface.insert(e.surface.clone(), e.id).is_some() {
                return Err(format!("duplicate entity surface {label:?}"));
            }
        }
        Ok(EntityTable {
            entities,
            k_cap,
            by_surface,
        })
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn k_cap(&self) -> usize {
        self.k_cap
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(id as usize)
    }

    pub fn find(&self, surface: &[String]) -> Option<&Entity> {
        self.by_surface.get(surface).and_then(|&id| self.get(id))
    }

    pub fn find_str(&self, surface: &str) -> Option<&Entity> {
        let tokens: Vec<String> = surface.split_whitespace().map(str::to_lowercase).collect();
        self.find(&tokens)
    }

    /// Largest posting id, if any, for checking against a corpus size.
    pub fn max_posting(&self) -> Option<u32> {
        self.entities.iter().filter_map(|e| e.postings.last().copied()).max()
    }
}

fn order_key(e: &Entity) -> (std::cmp::Reverse<u64>, &Vec<String>) {
    (std::cmp::Reverse(e.frequency), &e.surface)
}

/// Distinct entity tokens of one example with their occurrence counts, in
/// first-occurrence order.
fn example_entities(text: &str, tagger: &dyn PosTagger) -> Vec<(String, u64)> {
    let tokens = tokenize(text);
    let tags = classify_pos(&tokens, tagger);
    let mut counts: Vec<(String, u64)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (token, tag) in tokens.into_iter().zip(tags) {
        if tag == PosTag::Other {
            continue;
        }
        match index.get(&token.surface) {
            Some(&i) => counts[i].1 += 1,
            None => {
                index.insert(token.surface.clone(), counts.len());
                counts.push((token.surface, 1));
            }
        }
    }
    counts
}

/// Collects NOUN and NUMBER unigrams across the corpus and keeps the `k_cap`
/// most frequent, ties broken by surface.
pub fn extract_entities(
    corpus: &Corpus,
    k_cap: usize,
    tagger: &dyn PosTagger,
) -> Result<EntityTable, ExtractionError> {
    if k_cap == 0 {
        return Err(ExtractionError::InvalidCap);
    }

    #[cfg(feature = "parallel")]
    let per_example: Vec<Vec<(String, u64)>> = {
        use rayon::prelude::*;
        corpus
            .examples()
            .par_iter()
            .map(|e| example_entities(&e.text, tagger))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_example: Vec<Vec<(String, u64)>> = corpus
        .examples()
        .iter()
        .map(|e| example_entities(&e.text, tagger))
        .collect();

    // Merged in example order so postings come out ascending.
    let mut merged: HashMap<String, (u64, Vec<u32>)> = HashMap::new();
    for (example_id, counts) in per_example.into_iter().enumerate() {
        for (surface, n) in counts {
            let slot = merged.entry(surface).or_default();
            slot.0 += n;
            slot.1.push(example_id as u32);
        }
    }
    if merged.is_empty() {
        return Err(ExtractionError::NoEntities);
    }

    let mut rows: Vec<(String, u64, Vec<u32>)> = merged
        .into_iter()
        .map(|(surface, (frequency, postings))| (surface, frequency, postings))
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(k_cap);

    let entities = rows
        .into_iter()
        .enumerate()
        .map(|(id, (surface, frequency, postings))| Entity {
            id: id as EntityId,
            surface: vec![surface],
            frequency,
            postings,
        })
        .collect();
    Ok(EntityTable::from_entities(entities, k_cap).expect("extraction builds a valid table"))
}
