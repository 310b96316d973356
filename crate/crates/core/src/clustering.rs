//! Agglomerative clustering of entity embeddings at several distance cutoffs.
//!
//! One greedy merge sequence is computed up to the largest cutoff; the flat
//! clustering at cutoff `c` is the prefix of merges whose linkage distance is
//! at most `c`. Average linkage keeps exact sums of member distances so the
//! reported average for a pair of clusters does not depend on merge history.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine_similarity, EmbeddingError, EmbeddingVector};

pub const DEFAULT_CUTOFFS: [f64; 5] = [0.2, 0.35, 0.5, 0.65, 0.8];
pub const DEFAULT_MIN_SIZE: usize = 3;
pub const DEFAULT_MAX_SIZE: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("need at least 2 vectors to cluster, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("cutoff {0} outside (0, 2]")]
    InvalidCutoff(f64),
    #[error("cutoffs must be non-empty and strictly increasing")]
    InvalidCutoffList,
    #[error("invalid size bounds: min {min}, max {max}")]
    InvalidSizeBounds { min: usize, max: usize },
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Complete,
    Single,
}

/// Symmetric matrix of cosine distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates and wraps a full square matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ClusteringError> {
        let n = rows.len();
        let mut d = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(ClusteringError::InvalidMatrix(format!("row {i} has {} columns", row.len())));
            }
            d.extend_from_slice(row);
        }
        let m = DistanceMatrix { n, d };
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(ClusteringError::InvalidMatrix(format!("d({i},{i}) is not 0")));
            }
            for j in 0..n {
                let v = m.get(i, j);
                if !(0.0..=2.0).contains(&v) {
                    return Err(ClusteringError::InvalidMatrix(format!("d({i},{j}) = {v} outside [0, 2]")));
                }
                if v != m.get(j, i) {
                    return Err(ClusteringError::InvalidMatrix(format!("d({i},{j}) != d({j},{i})")));
                }
            }
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// `d(i, j) = 1 - cosine(vᵢ, vⱼ)`.
pub fn pairwise_distances(vectors: &[EmbeddingVector]) -> Result<DistanceMatrix, ClusteringError> {
    let n = vectors.len();
    if n < 2 {
        return Err(ClusteringError::TooFewPoints(n));
    }
    let row = |i: usize| -> Result<Vec<f64>, EmbeddingError> {
        (0..n)
            .map(|j| {
                if i == j {
                    Ok(0.0)
                } else if j < i {
                    // filled from the upper triangle below
                    Ok(f64::NAN)
                } else {
                    cosine_similarity(&vectors[i], &vectors[j]).map(|c| 1.0 - c)
                }
            })
            .collect()
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(row).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = (0..n).map(row).collect::<Result<_, _>>()?;

    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rows[i][j];
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Ok(DistanceMatrix { n, d })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub entity_ids: Vec<u32>,
    pub cutoff: f64,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entity_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
    pub cutoffs_used: Vec<f64>,
}

impl ClusterSet {
    pub fn count_at(&self, cutoff: f64) -> usize {
        self.clusters.iter().filter(|c| c.cutoff == cutoff).count()
    }
}

/// One merge of the greedy sequence. Slots are named by their smallest member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

type PairKey = (f64, usize, usize);

#[inline]
fn pair_key(value: f64, a: usize, b: usize) -> PairKey {
    if a < b {
        (value, a, b)
    } else {
        (value, b, a)
    }
}

#[inline]
fn key_less(a: PairKey, b: PairKey) -> bool {
    a.0.total_cmp(&b.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
        .is_lt()
}

struct LinkageState {
    linkage: Linkage,
    n: usize,
    // average: sum of member distances; complete/single: max/min member distance
    link: Vec<f64>,
    size: Vec<usize>,
    active: Vec<bool>,
    best: Vec<Option<(f64, usize)>>,
}

impl LinkageState {
    fn new(matrix: &DistanceMatrix, linkage: Linkage) -> Self {
        let n = matrix.len();
        let mut state = LinkageState {
            linkage,
            n,
            link: matrix.d.clone(),
            size: vec![1; n],
            active: vec![true; n],
            best: vec![None; n],
        };
        for i in 0..n {
            state.refresh_row(i);
        }
        state
    }

    #[inline]
    fn value(&self, i: usize, j: usize) -> f64 {
        let raw = self.link[i * self.n + j];
        match self.linkage {
            Linkage::Average => raw / (self.size[i] * self.size[j]) as f64,
            Linkage::Complete | Linkage::Single => raw,
        }
    }

    fn refresh_row(&mut self, i: usize) {
        let mut best: Option<PairKey> = None;
        for j in 0..self.n {
            if j == i || !self.active[j] {
                continue;
            }
            let candidate = pair_key(self.value(i, j), i, j);
            if best.is_none_or(|b| key_less(candidate, b)) {
                best = Some(candidate);
            }
        }
        self.best[i] = best.map(|(v, a, b)| (v, if a == i { b } else { a }));
    }

    fn global_min(&self) -> Option<PairKey> {
        let mut best: Option<PairKey> = None;
        for i in 0..self.n {
            if !self.active[i] {
                continue;
            }
            if let Some((v, j)) = self.best[i] {
                let candidate = pair_key(v, i, j);
                if best.is_none_or(|b| key_less(candidate, b)) {
                    best = Some(candidate);
                }
            }
        }
        best
    }

    /// Merges slot `right` into slot `left` (`left < right`).
    fn merge(&mut self, left: usize, right: usize) {
        let n = self.n;
        for k in 0..n {
            if !self.active[k] || k == left || k == right {
                continue;
            }
            let a = self.link[left * n + k];
            let b = self.link[right * n + k];
            let merged = match self.linkage {
                Linkage::Average => a + b,
                Linkage::Complete => a.max(b),
                Linkage::Single => a.min(b),
            };
            self.link[left * n + k] = merged;
            self.link[k * n + left] = merged;
        }
        self.size[left] += self.size[right];
        self.active[right] = false;
        self.best[right] = None;
        self.refresh_row(left);
        for k in 0..n {
            if !self.active[k] || k == left {
                continue;
            }
            match self.best[k] {
                Some((_, p)) if p == left || p == right => self.refresh_row(k),
                Some((v, p)) => {
                    let candidate = pair_key(self.value(k, left), k, left);
                    if key_less(candidate, pair_key(v, k, p)) {
                        self.best[k] = Some((candidate.0, left));
                    }
                }
                None => self.refresh_row(k),
            }
        }
    }
}

impl Dendrogram {
    /// Greedy merge sequence, stopped once the closest pair exceeds `max_distance`.
    ///
    /// Each step merges the pair with the smallest linkage distance; ties go to
    /// the lexicographically smallest (min id of first, min id of second).
    pub fn build(matrix: &DistanceMatrix, linkage: Linkage, max_distance: f64) -> Self {
        let n = matrix.len();
        let mut merges = Vec::new();
        if n >= 2 {
            let mut state = LinkageState::new(matrix, linkage);
            while let Some((distance, left, right)) = state.global_min() {
                if distance > max_distance {
                    break;
                }
                merges.push(Merge { left, right, distance });
                state.merge(left, right);
            }
        }
        Dendrogram { n, merges }
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Flat clusters after applying every merge up to the first one above `cutoff`,
    /// ordered by smallest member.
    pub fn cut(&self, cutoff: f64) -> Vec<Vec<u32>> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        for m in self.merges.iter().take_while(|m| m.distance <= cutoff) {
            parent[m.right] = m.left;
        }
        fn root(parent: &[usize], mut i: usize) -> usize {
            while parent[i] != i {
                i = parent[i];
            }
            i
        }
        let mut groups: Vec<Vec<u32>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            groups[root(&parent, i)].push(i as u32);
        }
        groups.into_iter().filter(|g| !g.is_empty()).collect()
    }
}

fn check_cutoff(cutoff: f64) -> Result<(), ClusteringError> {
    if cutoff > 0.0 && cutoff <= 2.0 {
        Ok(())
    } else {
        Err(ClusteringError::InvalidCutoff(cutoff))
    }
}

/// Average-linkage clusters at one cutoff.
pub fn agglomerate(matrix: &DistanceMatrix, cutoff: f64) -> Result<Vec<Cluster>, ClusteringError> {
    agglomerate_with(matrix, cutoff, Linkage::Average)
}

pub fn agglomerate_with(
    matrix: &DistanceMatrix,
    cutoff: f64,
    linkage: Linkage,
) -> Result<Vec<Cluster>, ClusteringError> {
    check_cutoff(cutoff)?;
    Ok(Dendrogram::build(matrix, linkage, cutoff)
        .cut(cutoff)
        .into_iter()
        .map(|entity_ids| Cluster { entity_ids, cutoff })
        .collect())
}

pub fn multi_cutoff_cluster(
    matrix: &DistanceMatrix,
    cutoffs: &[f64],
    min_size: usize,
    max_size: usize,
) -> Result<ClusterSet, ClusteringError> {
    multi_cutoff_cluster_with(matrix, cutoffs, min_size, max_size, Linkage::Average)
}

/// Union of the flat clusterings at every cutoff, size-filtered, with repeated
/// member sets kept only at their smallest cutoff. Entities may belong to
/// several surviving clusters.
pub fn multi_cutoff_cluster_with(
    matrix: &DistanceMatrix,
    cutoffs: &[f64],
    min_size: usize,
    max_size: usize,
    linkage: Linkage,
) -> Result<ClusterSet, ClusteringError> {
    if cutoffs.is_empty() || cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ClusteringError::InvalidCutoffList);
    }
    for &c in cutoffs {
        check_cutoff(c)?;
    }
    if min_size == 0 || min_size > max_size {
        return Err(ClusteringError::InvalidSizeBounds { min: min_size, max: max_size });
    }
    let max_cutoff = *cutoffs.last().expect("non-empty");
    let dendrogram = Dendrogram::build(matrix, linkage, max_cutoff);

    let mut seen = std::collections::HashSet::new();
    let mut clusters = Vec::new();
    for &cutoff in cutoffs {
        for entity_ids in dendrogram.cut(cutoff) {
            if entity_ids.len() < min_size || entity_ids.len() > max_size {
                continue;
            }
            if seen.insert(entity_ids.clone()) {
                clusters.push(Cluster { entity_ids, cutoff });
            }
        }
    }
    Ok(ClusterSet {
        clusters,
        cutoffs_used: cutoffs.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> DistanceMatrix {
        DistanceMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn ids(clusters: &[Cluster]) -> Vec<Vec<u32>> {
        clusters.iter().map(|c| c.entity_ids.clone()).collect()
    }

    #[test]
    fn distances_from_vectors() {
        let e0 = EmbeddingVector::basis(3, 0);
        let e1 = EmbeddingVector::basis(3, 1);
        let m = pairwise_distances(&[e0.clone(), e0.clone(), e1, e0.negated()]).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(0, 2), 1.0);
        assert_eq!(m.get(0, 3), 2.0);
        assert_eq!(m.get(3, 0), 2.0);
        assert_eq!(
            pairwise_distances(&[EmbeddingVector::basis(3, 0)]),
            Err(ClusteringError::TooFewPoints(1))
        );
    }

    #[test]
    fn matrix_validation() {
        assert!(DistanceMatrix::from_rows(&[vec![0.0, 0.5], vec![0.4, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(&[vec![0.1, 0.5], vec![0.5, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(&[vec![0.0, 2.5], vec![2.5, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(&[vec![0.0], vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn two_points() {
        let close = matrix(&[&[0.0, 0.1], &[0.1, 0.0]]);
        assert_eq!(ids(&agglomerate(&close, 0.2).unwrap()), vec![vec![0, 1]]);
        let far = matrix(&[&[0.0, 0.9], &[0.9, 0.0]]);
        assert_eq!(ids(&agglomerate(&far, 0.2).unwrap()), vec![vec![0], vec![1]]);
    }

    #[test]
    fn two_pairs() {
        let m = matrix(&[
            &[0.0, 0.1, 0.8, 0.9],
            &[0.1, 0.0, 0.85, 0.8],
            &[0.8, 0.85, 0.0, 0.1],
            &[0.9, 0.8, 0.1, 0.0],
        ]);
        let out = agglomerate(&m, 0.3).unwrap();
        assert_eq!(ids(&out), vec![vec![0, 1], vec![2, 3]]);
        assert!(out.iter().all(|c| c.cutoff == 0.3));
    }

    #[test]
    fn average_not_single() {
        // single linkage would chain 2 onto {0,1} via d(1,2)=0.3; the average is 0.55
        let m = matrix(&[&[0.0, 0.1, 0.8], &[0.1, 0.0, 0.3], &[0.8, 0.3, 0.0]]);
        assert_eq!(ids(&agglomerate(&m, 0.5).unwrap()), vec![vec![0, 1], vec![2]]);
        assert_eq!(
            ids(&agglomerate_with(&m, 0.5, Linkage::Single).unwrap()),
            vec![vec![0, 1, 2]]
        );
        assert_eq!(
            ids(&agglomerate_with(&m, 0.5, Linkage::Complete).unwrap()),
            vec![vec![0, 1], vec![2]]
        );
    }

    #[test]
    fn tie_breaking_prefers_smallest_ids() {
        // all pairs tie at 0.5; cutoff 0.5 allows exactly one merge before averages grow
        let m = matrix(&[&[0.0, 0.5, 0.5], &[0.5, 0.0, 0.5], &[0.5, 0.5, 0.0]]);
        let d = Dendrogram::build(&m, Linkage::Average, 2.0);
        assert_eq!((d.merges()[0].left, d.merges()[0].right), (0, 1));
        assert_eq!((d.merges()[1].left, d.merges()[1].right), (0, 2));
    }

    #[test]
    fn cutoff_two_gives_one_cluster() {
        let m = matrix(&[&[0.0, 2.0, 1.5], &[2.0, 0.0, 2.0], &[1.5, 2.0, 0.0]]);
        assert_eq!(ids(&agglomerate(&m, 2.0).unwrap()), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn invalid_cutoffs() {
        let m = matrix(&[&[0.0, 0.1], &[0.1, 0.0]]);
        assert_eq!(agglomerate(&m, 0.0), Err(ClusteringError::InvalidCutoff(0.0)));
        assert_eq!(agglomerate(&m, 2.1), Err(ClusteringError::InvalidCutoff(2.1)));
        assert_eq!(multi_cutoff_cluster(&m, &[], 1, 5), Err(ClusteringError::InvalidCutoffList));
        assert_eq!(
            multi_cutoff_cluster(&m, &[0.5, 0.2], 1, 5),
            Err(ClusteringError::InvalidCutoffList)
        );
        assert!(multi_cutoff_cluster(&m, &[0.5], 3, 2).is_err());
    }

    #[test]
    fn multi_cutoff_dedup() {
        let m = matrix(&[&[0.0, 0.1, 0.9], &[0.1, 0.0, 0.9], &[0.9, 0.9, 0.0]]);
        let set = multi_cutoff_cluster(&m, &[0.2, 0.5], 1, 50).unwrap();
        assert_eq!(ids(&set.clusters), vec![vec![0, 1], vec![2]]);
        assert!(set.clusters.iter().all(|c| c.cutoff == 0.2));
        assert_eq!(set.cutoffs_used, vec![0.2, 0.5]);
    }

    #[test]
    fn multi_cutoff_nesting() {
        let m = matrix(&[&[0.0, 0.1, 0.5], &[0.1, 0.0, 0.5], &[0.5, 0.5, 0.0]]);
        let set = multi_cutoff_cluster(&m, &[0.2, 0.6], 1, 50).unwrap();
        assert_eq!(ids(&set.clusters), vec![vec![0, 1], vec![2], vec![0, 1, 2]]);
        let containing_zero = set.clusters.iter().filter(|c| c.entity_ids.contains(&0)).count();
        assert_eq!(containing_zero, 2);
    }

    #[test]
    fn size_filter() {
        let m = matrix(&[&[0.0, 0.9], &[0.9, 0.0]]);
        let set = multi_cutoff_cluster(&m, &[0.2], 3, 50).unwrap();
        assert!(set.clusters.is_empty());
        let set = multi_cutoff_cluster(&m, &[0.95], 1, 1).unwrap();
        assert!(set.clusters.is_empty());
    }
}
