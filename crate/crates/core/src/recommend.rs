//! Row fusion and top-k selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::SimilarityMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub destination: String,
    pub score: f64,
    pub rank: usize,
}

/// Mean of the similarity rows of `searched`, with the searched destinations
/// themselves set to `-inf` so they never rank.
pub fn fuse_rows<S: AsRef<str>>(sim: &SimilarityMatrix, searched: &[S]) -> Result<Vec<f64>> {
    if searched.is_empty() {
        return Err(Error::Argument("searched destination set is empty".into()));
    }
    let mut idx = searched
        .iter()
        .map(|code| {
            let code = code.as_ref();
            sim.index_of(code)
                .ok_or_else(|| Error::UnknownDestination(code.to_owned()))
        })
        .collect::<Result<Vec<_>>>()?;
    idx.sort_unstable();
    idx.dedup();
    Ok(fuse_indices(sim, &idx))
}

/// [`fuse_rows`] on destination indices. `searched` must be non-empty,
/// in range and free of duplicates.
pub fn fuse_indices(sim: &SimilarityMatrix, searched: &[usize]) -> Vec<f64> {
    let mut scores = vec![0.0; sim.n()];
    for &i in searched {
        for (acc, v) in scores.iter_mut().zip(sim.row(i)) {
            *acc += v;
        }
    }
    let len = searched.len() as f64;
    scores.iter_mut().for_each(|s| *s /= len);
    for &i in searched {
        scores[i] = f64::NEG_INFINITY;
    }
    scores
}

/// Descending score, ties to the smaller destination code.
fn ranks_before(scores: &[f64], codes: &[String], a: usize, b: usize) -> Ordering {
    scores[b]
        .partial_cmp(&scores[a])
        .unwrap_or(Ordering::Equal)
        .then_with(|| codes[a].cmp(&codes[b]))
}

/// The `k` best non-excluded (`-inf`) candidates in rank order. Returns fewer
/// than `k` when candidates run out.
pub fn top_k(scores: &[f64], destinations: &[String], k: usize) -> Vec<Recommendation> {
    debug_assert_eq!(scores.len(), destinations.len());
    let mut candidates: Vec<usize> = (0..scores.len())
        .filter(|&j| scores[j] != f64::NEG_INFINITY)
        .collect();
    let cmp = |a: &usize, b: &usize| ranks_before(scores, destinations, *a, *b);
    if candidates.len() > k && k > 0 {
        candidates.select_nth_unstable_by(k - 1, cmp);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(cmp);
    candidates.truncate(k);
    candidates
        .into_iter()
        .enumerate()
        .map(|(pos, j)| Recommendation {
            destination: destinations[j].clone(),
            score: scores[j],
            rank: pos + 1,
        })
        .collect()
}

/// Whether `target` would appear in `top_k(scores, destinations, k)`, in
/// one linear pass.
pub fn in_top_k(scores: &[f64], destinations: &[String], target: usize, k: usize) -> bool {
    if scores[target] == f64::NEG_INFINITY || k == 0 {
        return false;
    }
    let ahead = (0..scores.len())
        .filter(|&j| {
            j != target
                && scores[j] != f64::NEG_INFINITY
                && ranks_before(scores, destinations, j, target) == Ordering::Less
        })
        .count();
    ahead < k
}

/// Top-k recommendations for a set of searched destination codes.
pub fn recommend<S: AsRef<str>>(
    sim: &SimilarityMatrix,
    searched: &[S],
    k: usize,
) -> Result<Vec<Recommendation>> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    let scores = fuse_rows(sim, searched)?;
    Ok(top_k(&scores, sim.destinations(), k))
}
