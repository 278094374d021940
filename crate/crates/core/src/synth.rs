//! Synthetic search logs with planted interest clusters and Zipf popularity.
//!
//! Destination `r` (0-based) has global popularity rank `r + 1` and weight
//! `(r + 1)^-zipf_exponent`. Clusters take destinations round-robin by rank,
//! so each cluster mixes popular and rare destinations. Every user picks one
//! cluster and draws distinct destinations from it, or from the global
//! distribution with probability `noise`.

use chrono::{DateTime, Utc};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::SearchRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_destinations: usize,
    pub n_clusters: usize,
    pub zipf_exponent: f64,
    /// Inclusive range of distinct destinations per user.
    pub searches_per_user: (usize, usize),
    pub noise: f64,
    pub seed: u64,
    pub market: String,
    /// Half-open range for timestamps.
    pub time_range: (DateTime<Utc>, DateTime<Utc>),
}

impl Default for SynthConfig {
    fn default() -> Self {
        let start = DateTime::from_timestamp(1_577_836_800, 0).expect("valid epoch"); // 2020-01-01
        SynthConfig {
            n_users: 50_000,
            n_destinations: 200,
            n_clusters: 10,
            zipf_exponent: 1.0,
            searches_per_user: (2, 6),
            noise: 0.2,
            seed: 42,
            market: "FR".to_owned(),
            time_range: (start, start + chrono::Duration::weeks(9)),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(msg));
        let (lo, hi) = self.searches_per_user;
        if self.n_users == 0 || self.n_destinations == 0 {
            return bad("n_users and n_destinations must be positive".into());
        }
        if self.n_clusters == 0 || self.n_clusters > self.n_destinations {
            return bad(format!(
                "n_clusters must lie in [1, {}], got {}",
                self.n_destinations, self.n_clusters
            ));
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad(format!(
                "zipf exponent must be >= 0, got {}",
                self.zipf_exponent
            ));
        }
        if lo == 0 || lo > hi {
            return bad(format!("searches per user range [{lo}, {hi}] is invalid"));
        }
        if hi > self.n_destinations {
            return bad(format!(
                "cannot draw {hi} distinct destinations out of {}",
                self.n_destinations
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1], got {}", self.noise));
        }
        if self.market.trim().is_empty() {
            return bad("market must be non-empty".into());
        }
        if self.time_range.0 >= self.time_range.1 {
            return bad("time range is empty".into());
        }
        Ok(())
    }

    /// Destination code for global popularity rank `r` (0-based).
    pub fn destination_code(&self, r: usize) -> String {
        let width = digits(self.n_destinations - 1);
        format!("D{r:0width$}")
    }

    pub fn user_id(&self, u: usize) -> String {
        let width = digits(self.n_users - 1);
        format!("U{u:0width$}")
    }

    /// Cluster of the destination with 0-based rank `r`.
    pub fn cluster_of(&self, r: usize) -> usize {
        r % self.n_clusters
    }
}

fn digits(mut v: usize) -> usize {
    let mut d = 1;
    while v >= 10 {
        v /= 10;
        d += 1;
    }
    d
}

/// Generates the log, users in order, each user's searches in draw order.
///
/// Each user has its own ChaCha stream (`seed`, stream = user index), so the
/// output does not depend on how the work is scheduled.
pub fn generate(config: &SynthConfig) -> Result<Vec<SearchRecord>> {
    config.validate()?;
    let n = config.n_destinations;
    let weights: Vec<f64> = (0..n)
        .map(|r| ((r + 1) as f64).powf(-config.zipf_exponent))
        .collect();
    let global = WeightedIndex::new(&weights).expect("positive weights");
    let clusters: Vec<(Vec<usize>, WeightedIndex<f64>)> = (0..config.n_clusters)
        .map(|c| {
            let members: Vec<usize> = (c..n).step_by(config.n_clusters).collect();
            let dist =
                WeightedIndex::new(members.iter().map(|&r| weights[r])).expect("non-empty cluster");
            (members, dist)
        })
        .collect();
    let codes: Vec<String> = (0..n).map(|r| config.destination_code(r)).collect();
    let market = config.market.trim().to_uppercase();
    let (t0, t1) = config.time_range;
    let span = (t1 - t0).num_seconds();
    let (lo, hi) = config.searches_per_user;

    let per_user: Vec<Vec<SearchRecord>> = (0..config.n_users)
        .into_par_iter()
        .map(|u| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(u as u64);
            let (members, in_cluster) = &clusters[rng.gen_range(0..clusters.len())];
            let wanted = rng.gen_range(lo..=hi);

            let mut chosen: Vec<usize> = Vec::with_capacity(wanted);
            let mut from_cluster = 0;
            while chosen.len() < wanted {
                let cluster_open = from_cluster < members.len();
                let use_global =
                    config.noise > 0.0 && (!cluster_open || rng.gen::<f64>() < config.noise);
                if !use_global && !cluster_open {
                    // noise = 0 and the cluster is exhausted
                    break;
                }
                let d = if use_global {
                    global.sample(&mut rng)
                } else {
                    members[in_cluster.sample(&mut rng)]
                };
                if !chosen.contains(&d) {
                    if config.cluster_of(d) == config.cluster_of(members[0]) {
                        from_cluster += 1;
                    }
                    chosen.push(d);
                }
            }

            let user_id = config.user_id(u);
            chosen
                .into_iter()
                .map(|d| SearchRecord {
                    user_id: user_id.clone(),
                    destination: codes[d].clone(),
                    market: market.clone(),
                    timestamp: t0 + chrono::Duration::seconds(rng.gen_range(0..span)),
                })
                .collect()
        })
        .collect();

    Ok(per_user.into_iter().flatten().collect())
}
