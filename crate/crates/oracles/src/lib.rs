//! Deliberately naive reference implementations. Nothing here depends on the
//! core crate; inputs are plain vectors and strings.

use std::collections::BTreeMap;

/// Average-linkage agglomeration by full rescan, O(n³). Each step merges the
/// pair with the smallest mean member distance; ties go to the pair whose
/// smaller member ids are smallest. Returns sorted member lists, sorted by
/// first member.
pub fn naive_average_linkage(distances: &[Vec<f64>], cutoff: f64) -> Vec<Vec<u32>> {
    let n = distances.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let mut sum = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        sum += distances[i][j];
                    }
                }
                let mean = sum / (clusters[a].len() * clusters[b].len()) as f64;
                let (lo, hi) = {
                    let (x, y) = (clusters[a][0], clusters[b][0]);
                    (x.min(y), x.max(y))
                };
                let better = match best {
                    None => true,
                    Some((m, l, h, _, _)) => (mean, lo, hi) < (m, l, h),
                };
                if better {
                    best = Some((mean, lo, hi, a, b));
                }
            }
        }
        match best {
            Some((mean, _, _, a, b)) if mean <= cutoff => {
                let merged = clusters.remove(b);
                clusters[a].extend(merged);
                clusters[a].sort_unstable();
            }
            _ => break,
        }
    }
    let mut out: Vec<Vec<u32>> = clusters
        .into_iter()
        .map(|c| c.into_iter().map(|i| i as u32).collect())
        .collect();
    out.sort();
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine_distance_matrix(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    vectors
        .iter()
        .map(|a| vectors.iter().map(|b| 1.0 - dot(a, b).clamp(-1.0, 1.0)).collect())
        .collect()
}

/// True iff `needle` occurs as a contiguous run of `tokens`.
pub fn contains_run(tokens: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > tokens.len() {
        return false;
    }
    (0..=tokens.len() - needle.len()).any(|start| tokens[start..start + needle.len()] == *needle)
}

/// Number of documents containing `needle`, by scanning every document.
pub fn document_count(docs: &[Vec<String>], needle: &[String]) -> u64 {
    docs.iter().filter(|d| contains_run(d, needle)).count() as u64
}

/// Occurrence counts of every single token, then the `k` most frequent by
/// (count desc, token asc).
pub fn top_k_frequencies(docs: &[Vec<String>], k: usize) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in docs {
        for t in doc {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut all: Vec<(String, u64)> = counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect();
    all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Component mean of unit vectors, rescaled to unit length.
pub fn normalized_mean(vectors: &[Vec<f64>]) -> Vec<f64> {
    let dim = vectors[0].len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let norm = dot(&mean, &mean).sqrt();
    mean.iter().map(|m| m / norm).collect()
}

/// Every candidate scored against `query`, ranked by (score desc, id asc),
/// filtered by `threshold`, truncated to `limit`.
pub fn exhaustive_ranking(query: &[f64], candidates: &[(u32, Vec<f64>)], limit: usize, threshold: f64) -> Vec<(u32, f64)> {
    let mut scored: Vec<(u32, f64)> = candidates
        .iter()
        .map(|(id, v)| (*id, dot(query, v).clamp(-1.0, 1.0)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.retain(|s| s.1 >= threshold);
    scored.truncate(limit);
    scored
}
