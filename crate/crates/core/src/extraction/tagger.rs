use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::tokenize::{Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PosTag {
    Noun,
    Number,
    Other,
}

/// Classifies WORD tokens. NUMBER tokens never reach a tagger.
pub trait PosTagger: Send + Sync {
    fn tag_word(&self, surface: &str) -> PosTag;
}

const STOPWORDS: &str = include_str!("../../data/tagger/stopwords.txt");
const SUFFIXES: &str = include_str!("../../data/tagger/suffixes.txt");
const SUFFIX_WHITELIST: &str = include_str!("../../data/tagger/suffix_whitelist.txt");

fn word_list(raw: &str) -> impl Iterator<Item = &str> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Deterministic list-driven tagger: stopwords and suffix-marked words are
/// `Other`, everything else is a `Noun`.
#[derive(Debug, Clone)]
pub struct RuleTagger {
    stopwords: HashSet<String>,
    suffixes: Vec<String>,
    whitelist: HashSet<String>,
    min_word_chars: usize,
}

impl Default for RuleTagger {
    fn default() -> Self {
        RuleTagger::from_lists(STOPWORDS, SUFFIXES, SUFFIX_WHITELIST)
    }
}

impl RuleTagger {
    /// Builds a tagger from newline-separated lists (`#` starts a comment line).
    pub fn from_lists(stopwords: &str, suffixes: &str, whitelist: &str) -> Self {
        RuleTagger {
            stopwords: word_list(stopwords).map(str::to_lowercase).collect(),
            suffixes: word_list(suffixes).map(str::to_lowercase).collect(),
            whitelist: word_list(whitelist).map(str::to_lowercase).collect(),
            min_word_chars: 2,
        }
    }

    pub fn is_stopword(&self, surface: &str) -> bool {
        self.stopwords.contains(surface)
    }

    fn has_excluded_suffix(&self, surface: &str) -> bool {
        if self.whitelist.contains(surface) {
            return false;
        }
        let len = surface.chars().count();
        self.suffixes
            .iter()
            .any(|s| len >= s.chars().count() + 3 && surface.ends_with(s.as_str()))
    }
}

impl PosTagger for RuleTagger {
    fn tag_word(&self, surface: &str) -> PosTag {
        if surface.chars().count() < self.min_word_chars
            || !surface.chars().any(char::is_alphabetic)
            || self.is_stopword(surface)
            || self.has_excluded_suffix(surface)
        {
            PosTag::Other
        } else {
            PosTag::Noun
        }
    }
}

pub fn classify_pos(tokens: &[Token], tagger: &dyn PosTagger) -> Vec<PosTag> {
    tokens
        .iter()
        .map(|t| match t.kind {
            TokenKind::Number => PosTag::Number,
            TokenKind::Word => tagger.tag_word(&t.surface),
        })
        .collect()
}
