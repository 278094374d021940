//! Mask-one-destination evaluation and measure comparison.
//!
//! Each eligible test user hides one searched destination chosen by a
//! generator seeded from `(seed, user_id)`; the similarity rows of the
//! remaining destinations are averaged and the user counts as a hit when the
//! hidden destination lands in the top `k`.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::WindowSpec;
use crate::matrix::{cooccurrence, popularity_with, InteractionMatrix, PopularityDenominator};
use crate::measures::{compute, Measure, SimilarityMatrix};
use crate::recommend::{fuse_indices, in_top_k};

/// Default PCCS `w` sweep.
pub const DEFAULT_W_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// A measure plus its parameter, e.g. `pccs` at `w = 0.3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureSpec {
    pub measure: Measure,
    pub w: Option<f64>,
}

impl MeasureSpec {
    pub fn plain(measure: Measure) -> Self {
        MeasureSpec { measure, w: None }
    }

    /// Report column name: the measure tag, with `_w<value>` for PCCS.
    pub fn label(&self) -> String {
        match (self.measure, self.w) {
            (Measure::Pccs, Some(w)) => format!("pccs_w{w}"),
            (m, _) => m.to_string(),
        }
    }

    /// One spec per non-PCCS measure and one per `w` for PCCS.
    pub fn expand(measures: &[Measure], w_grid: &[f64]) -> Result<Vec<MeasureSpec>> {
        let mut out = Vec::new();
        for &m in measures {
            if m == Measure::Pccs {
                if w_grid.is_empty() {
                    return Err(Error::Argument("pccs needs at least one w".into()));
                }
                out.extend(w_grid.iter().map(|&w| MeasureSpec {
                    measure: m,
                    w: Some(w),
                }));
            } else {
                out.push(MeasureSpec::plain(m));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub k: usize,
    pub seed: u64,
    pub measures: Vec<MeasureSpec>,
    pub window: Option<WindowSpec>,
    pub popularity_denominator: PopularityDenominator,
}

impl EvalConfig {
    pub fn new(measures: Vec<MeasureSpec>, seed: u64) -> Self {
        EvalConfig {
            k: 5,
            seed,
            measures,
            window: None,
            popularity_denominator: PopularityDenominator::N,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if self.measures.is_empty() {
            return Err(Error::Argument("measure list is empty".into()));
        }
        Ok(())
    }
}

/// One masked test case, in training destination indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub user_id: String,
    pub context: Vec<usize>,
    pub masked: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitSet {
    pub splits: Vec<Split>,
    /// Test users with fewer than two destinations or any destination unseen
    /// in training.
    pub skipped_users: usize,
}

fn user_rng(seed: u64, user_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(user_id.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Masks one destination per eligible test user.
///
/// `train_destinations` is the sorted code list of the training matrix.
pub fn mask_one_split(
    test: &InteractionMatrix,
    train_destinations: &[String],
    seed: u64,
) -> SplitSet {
    let test_codes = test.destinations();
    let to_train: Vec<Option<usize>> = test_codes
        .iter()
        .map(|c| train_destinations.binary_search(c).ok())
        .collect();

    let per_user: Vec<Option<Split>> = (0..test.n_users())
        .into_par_iter()
        .map(|u| {
            let row = test.row(u);
            if row.len() < 2 {
                return None;
            }
            let mut known = row
                .iter()
                .map(|&d| to_train[d as usize])
                .collect::<Option<Vec<usize>>>()?;
            let user_id = &test.users()[u];
            let pick = user_rng(seed, user_id).gen_range(0..known.len());
            let masked = known.remove(pick);
            Some(Split {
                user_id: user_id.clone(),
                context: known,
                masked,
            })
        })
        .collect();

    let skipped_users = per_user.iter().filter(|s| s.is_none()).count();
    SplitSet {
        splits: per_user.into_iter().flatten().collect(),
        skipped_users,
    }
}

/// Counts hits for an arbitrary fused-score function.
pub fn evaluate_scores<F>(splits: &[Split], destinations: &[String], k: usize, score: F) -> u64
where
    F: Fn(&[usize]) -> Vec<f64> + Sync,
{
    splits
        .par_iter()
        .filter(|s| in_top_k(&score(&s.context), destinations, s.masked, k))
        .count() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    pub measure: String,
    pub hits: u64,
    pub eligible_users: u64,
    /// `hits / eligible_users`; null when nobody was eligible.
    pub accuracy: Option<f64>,
}

impl MeasureResult {
    pub fn new(measure: String, hits: u64, eligible_users: u64) -> Self {
        let accuracy = (eligible_users > 0).then(|| hits as f64 / eligible_users as f64);
        MeasureResult {
            measure,
            hits,
            eligible_users,
            accuracy,
        }
    }
}

/// Top-k accuracy of one similarity matrix over a split set.
pub fn evaluate_topk(
    sim: &SimilarityMatrix,
    splits: &[Split],
    k: usize,
    label: String,
) -> MeasureResult {
    let hits = evaluate_scores(splits, sim.destinations(), k, |ctx| fuse_indices(sim, ctx));
    MeasureResult::new(label, hits, splits.len() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub market: String,
    pub seed: u64,
    pub k: usize,
    pub window: Option<WindowSpec>,
    pub n_train_users: usize,
    pub n_destinations: usize,
    pub eligible_users: u64,
    pub skipped_users: usize,
    pub results: Vec<MeasureResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub created_at: Option<String>,
}

impl EvalReport {
    /// Accuracy per measure label, or `None` if the period had no eligible
    /// users.
    pub fn accuracies(&self) -> Option<IndexMap<String, f64>> {
        self.results
            .iter()
            .map(|r| r.accuracy.map(|a| (r.measure.clone(), a)))
            .collect()
    }
}

/// Runs the full protocol for one market and period. `test = None` stands for
/// an empty test window.
pub fn evaluate(
    train: &InteractionMatrix,
    test: Option<&InteractionMatrix>,
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let stats = cooccurrence(train);
    let split_set = test
        .map(|t| mask_one_split(t, train.destinations(), config.seed))
        .unwrap_or_default();

    let mut results = Vec::with_capacity(config.measures.len());
    for spec in &config.measures {
        let pop = match (spec.measure, spec.w) {
            (Measure::Pccs, Some(w)) => {
                Some(popularity_with(&stats, w, config.popularity_denominator)?)
            }
            _ => None,
        };
        let sim = compute(spec.measure, &stats, pop.as_ref())?;
        results.push(evaluate_topk(
            &sim,
            &split_set.splits,
            config.k,
            spec.label(),
        ));
    }

    Ok(EvalReport {
        market: train.market.clone(),
        seed: config.seed,
        k: config.k,
        window: config.window,
        n_train_users: train.n_users(),
        n_destinations: train.n_destinations(),
        eligible_users: split_set.splits.len() as u64,
        skipped_users: split_set.skipped_users,
        results,
        created_at: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub measure: String,
    /// Mean within-period rank, 1 = best.
    pub mean_rank: f64,
    pub mean_accuracy: f64,
    /// Mean of `accuracy - baseline accuracy` over periods.
    pub mean_delta: f64,
    pub std_delta: f64,
}

/// Ranks measures within each period (ties share the mean of their ranks) and
/// averages ranks, accuracies and deltas against `baseline` over periods.
///
/// The measure set is taken from the first period; every period must contain
/// all of them.
pub fn average_ranks(
    periods: &[IndexMap<String, f64>],
    baseline: &str,
) -> Result<Vec<RankSummary>> {
    let Some(first) = periods.first() else {
        return Ok(Vec::new());
    };
    let names: Vec<&String> = first.keys().collect();
    if !first.contains_key(baseline) {
        return Err(Error::MissingMeasure {
            period: 0,
            measure: baseline.to_owned(),
        });
    }

    let mut rank_sum = vec![0.0; names.len()];
    let mut acc_sum = vec![0.0; names.len()];
    let mut deltas: Vec<Vec<f64>> = vec![Vec::with_capacity(periods.len()); names.len()];

    for (p, period) in periods.iter().enumerate() {
        let accs = names
            .iter()
            .map(|&name| {
                period
                    .get(name)
                    .copied()
                    .ok_or_else(|| Error::MissingMeasure {
                        period: p,
                        measure: name.clone(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let base = *period.get(baseline).ok_or_else(|| Error::MissingMeasure {
            period: p,
            measure: baseline.to_owned(),
        })?;
        for (i, &a) in accs.iter().enumerate() {
            let better = accs.iter().filter(|&&b| b > a).count() as f64;
            let tied = accs.iter().filter(|&&b| b == a).count() as f64;
            rank_sum[i] += better + (tied + 1.0) / 2.0;
            acc_sum[i] += a;
            deltas[i].push(a - base);
        }
    }

    let count = periods.len() as f64;
    Ok(names
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let mean_delta = deltas[i].iter().sum::<f64>() / count;
            let std_delta = if periods.len() > 1 {
                (deltas[i]
                    .iter()
                    .map(|d| (d - mean_delta).powi(2))
                    .sum::<f64>()
                    / (count - 1.0))
                    .sqrt()
            } else {
                0.0
            };
            RankSummary {
                measure: name.clone(),
                mean_rank: rank_sum[i] / count,
                mean_accuracy: acc_sum[i] / count,
                mean_delta,
                std_delta,
            }
        })
        .collect())
}
