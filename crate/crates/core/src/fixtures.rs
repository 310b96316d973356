//! Bundled test corpora, also used by the server tests and the browser demo.

use crate::corpus::{parse_corpus, Corpus, CorpusFormat, DEFAULT_MAX_EXAMPLES};

/// 500 synthetic medical-chatbot questions, one JSON object per line.
pub const MEDICAL_500_JSONL: &str = include_str!("../data/fixtures/medical_500.jsonl");

/// Three word families plus one entity bridging two of them. Under the stub
/// embedding they cluster into three triples at a tight cutoff, then grow
/// into larger groups, so an entity lands in several histograms.
pub const NESTED_ENTITIES: [&str; 10] = [
    "cardiology",
    "cardiologist",
    "cardiologists",
    "neurology",
    "neurologist",
    "neurologists",
    "dermatology",
    "dermatologist",
    "dermatologists",
    "cardioneurology",
];

pub fn medical_corpus() -> Corpus {
    parse_corpus(
        "medical_500",
        MEDICAL_500_JSONL.as_bytes(),
        CorpusFormat::Jsonl,
        DEFAULT_MAX_EXAMPLES,
    )
    .expect("bundled fixture parses")
}

const CONSONANTS: &[u8] = b"bcdfghjkmnpqrstvwxz";

/// `count` distinct vowel-free words such as `zbbc`; the rule tagger reads
/// them all as nouns.
pub fn synthetic_nouns(count: usize) -> Vec<String> {
    (0..count)
        .map(|mut i| {
            let mut word = vec![b'z'];
            for _ in 0..3 {
                word.push(CONSONANTS[i % CONSONANTS.len()]);
                i /= CONSONANTS.len();
            }
            while i > 0 {
                word.push(CONSONANTS[i % CONSONANTS.len()]);
                i /= CONSONANTS.len();
            }
            String::from_utf8(word).expect("ascii")
        })
        .collect()
}

/// Corpus over `synthetic_nouns(distinct)`: noun `i` occurs
/// `1 + (i * 7919) % 13` times, spread over ten-word examples in an order
/// fixed by `seed`.
pub fn synthetic_noun_corpus(distinct: usize, seed: u64) -> Corpus {
    let nouns = synthetic_nouns(distinct);
    let mut bag: Vec<&str> = Vec::new();
    for (i, noun) in nouns.iter().enumerate() {
        for _ in 0..1 + (i * 7919) % 13 {
            bag.push(noun);
        }
    }
    // Fisher-Yates with a 64-bit LCG; the stream only has to be reproducible
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    for i in (1..bag.len()).rev() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let j = ((state >> 33) % (i as u64 + 1)) as usize;
        bag.swap(i, j);
    }
    let texts: Vec<String> = bag.chunks(10).map(|c| c.join(" ")).collect();
    Corpus::from_texts(format!("synthetic_{distinct}"), texts).expect("non-empty corpus")
}
