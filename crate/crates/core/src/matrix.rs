//! Binary user×destination matrix and the statistics every measure reads.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{SearchRecord, TimeRange};

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Users with more distinct destinations than this are dropped as bots.
    pub max_user_degree: usize,
    /// Destinations searched by fewer users are dropped.
    pub min_support: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_user_degree: 1000,
            min_support: 1,
        }
    }
}

/// Sparse binary matrix in row-compressed form: row `u` holds the sorted
/// destination indices user `u` searched.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    users: Vec<String>,
    destinations: Vec<String>,
    row_offsets: Vec<usize>,
    entries: Vec<u32>,
    pub market: String,
    pub window: Option<TimeRange>,
}

impl InteractionMatrix {
    /// Builds a matrix from explicit per-user destination sets. Empty rows and
    /// duplicate entries are rejected; ids are re-sorted into index order.
    pub fn from_rows(market: &str, rows: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut pairs: Vec<(&str, &str)> = rows
            .iter()
            .flat_map(|(u, ds)| ds.iter().map(move |d| (u.as_str(), d.as_str())))
            .collect();
        if rows.iter().any(|(_, ds)| ds.is_empty()) {
            return Err(Error::Argument("matrix rows must be non-empty".into()));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        if pairs.len() != before {
            return Err(Error::Argument("duplicate matrix entry".into()));
        }
        Self::from_sorted_pairs(market, &pairs, BuildOptions::default())
    }

    fn from_sorted_pairs(market: &str, pairs: &[(&str, &str)], opts: BuildOptions) -> Result<Self> {
        // per-user spans in the sorted pair list, minus presumed bots
        let mut spans: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        while start < pairs.len() {
            let user = pairs[start].0;
            let mut end = start + 1;
            while end < pairs.len() && pairs[end].0 == user {
                end += 1;
            }
            if end - start <= opts.max_user_degree {
                spans.push((start, end));
            }
            start = end;
        }

        let mut support: HashMap<&str, usize> = HashMap::new();
        for &(s, e) in &spans {
            for &(_, d) in &pairs[s..e] {
                *support.entry(d).or_default() += 1;
            }
        }
        let mut destinations: Vec<&str> = support
            .iter()
            .filter(|&(_, &c)| c >= opts.min_support.max(1))
            .map(|(&d, _)| d)
            .collect();
        destinations.sort_unstable();
        let dest_index: HashMap<&str, u32> = destinations
            .iter()
            .enumerate()
            .map(|(i, &d)| (d, i as u32))
            .collect();

        let mut users = Vec::with_capacity(spans.len());
        let mut row_offsets = Vec::with_capacity(spans.len() + 1);
        let mut entries = Vec::new();
        row_offsets.push(0);
        for &(s, e) in &spans {
            let before = entries.len();
            // pairs are sorted by code and indices follow code order
            entries.extend(
                pairs[s..e]
                    .iter()
                    .filter_map(|(_, d)| dest_index.get(d).copied()),
            );
            if entries.len() > before {
                users.push(pairs[s].0.to_owned());
                row_offsets.push(entries.len());
            }
        }

        if entries.is_empty() {
            return Err(Error::EmptyWindow(format!(
                "no interactions left for market {market}"
            )));
        }
        Ok(InteractionMatrix {
            users,
            destinations: destinations.into_iter().map(str::to_owned).collect(),
            row_offsets,
            entries,
            market: market.to_owned(),
            window: None,
        })
    }

    pub fn with_window(mut self, window: TimeRange) -> Self {
        self.window = Some(window);
        self
    }

    /// Number of users, `m`.
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Number of destinations, `n`.
    pub fn n_destinations(&self) -> usize {
        self.destinations.len()
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn density(&self) -> f64 {
        self.n_entries() as f64 / (self.n_users() as f64 * self.n_destinations() as f64)
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    /// Destination codes in index order (ascending code).
    pub fn destinations(&self) -> &[String] {
        &self.destinations
    }

    pub fn row(&self, user: usize) -> &[u32] {
        &self.entries[self.row_offsets[user]..self.row_offsets[user + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.n_users()).map(move |u| self.row(u))
    }

    pub fn destination_index(&self, code: &str) -> Option<usize> {
        self.destinations
            .binary_search_by(|d| d.as_str().cmp(code))
            .ok()
    }

    /// Writes `user_idx,dest_idx,1` triplets plus a JSON sidecar with the
    /// index maps.
    pub fn export(&self, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
        let file = fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "user_idx,dest_idx,value")?;
            for u in 0..self.n_users() {
                for &d in self.row(u) {
                    writeln!(out, "{u},{d},1")?;
                }
            }
            out.flush()
        };
        write().map_err(|e| Error::io(csv_path, e))?;

        let sidecar = MatrixSidecar {
            m: self.n_users(),
            n: self.n_destinations(),
            market: self.market.clone(),
            window: self.window,
            users: self.users.clone(),
            destinations: self.destinations.clone(),
        };
        let json = serde_json::to_vec_pretty(&sidecar)?;
        fs::write(sidecar_path, json).map_err(|e| Error::io(sidecar_path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixSidecar {
    m: usize,
    n: usize,
    market: String,
    window: Option<TimeRange>,
    users: Vec<String>,
    destinations: Vec<String>,
}

/// Builds the binary matrix from deduplicated records of a single market.
///
/// Users and destinations are indexed in ascending id order, so the result
/// does not depend on record order.
pub fn build_matrix(records: &[SearchRecord], opts: BuildOptions) -> Result<InteractionMatrix> {
    let Some(first) = records.first() else {
        return Err(Error::EmptyWindow("no records".into()));
    };
    let market = first.market.as_str();
    if let Some(other) = records.iter().find(|r| r.market != market) {
        return Err(Error::MixedMarkets(format!("{market}, {}", other.market)));
    }
    let mut pairs: Vec<(&str, &str)> = records
        .iter()
        .map(|r| (r.user_id.as_str(), r.destination.as_str()))
        .collect();
    pairs.par_sort_unstable();
    pairs.dedup();
    InteractionMatrix::from_sorted_pairs(market, &pairs, opts)
}

/// Pairwise co-search counts and per-destination support.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceStats {
    n: usize,
    counts: Vec<u32>,
    pub support: Vec<u32>,
    /// User count `m`.
    pub m: usize,
    pub destinations: Vec<String>,
    /// Number of (user, i<j) pair increments the kernel performed.
    pub pair_updates: u64,
}

impl CooccurrenceStats {
    /// Builds stats from a dense count matrix (row-major, `n*n`). The
    /// diagonal is taken as support.
    pub fn from_dense(counts: Vec<u32>, m: usize, destinations: Vec<String>) -> Result<Self> {
        let n = destinations.len();
        if counts.len() != n * n {
            return Err(Error::Argument(format!(
                "count matrix has {} cells, expected {}",
                counts.len(),
                n * n
            )));
        }
        let support = (0..n).map(|i| counts[i * n + i]).collect();
        Ok(CooccurrenceStats {
            n,
            counts,
            support,
            m,
            destinations,
            pair_updates: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.n..(i + 1) * self.n]
    }
}

/// Co-occurrence counts by emitting every destination pair inside each user's
/// row, so the cost is `Σ_u d_u²` rather than `n²·m`.
///
/// Users are split into one shard per rayon worker; shard counts are summed,
/// which is exact for integers, so the result is independent of sharding.
pub fn cooccurrence(mat: &InteractionMatrix) -> CooccurrenceStats {
    let shards = rayon::current_num_threads().max(1);
    cooccurrence_sharded(mat, shards)
}

/// [`cooccurrence`] with an explicit shard count.
pub fn cooccurrence_sharded(mat: &InteractionMatrix, shards: usize) -> CooccurrenceStats {
    let n = mat.n_destinations();
    let m = mat.n_users();
    let shard_len = m.div_ceil(shards.max(1)).max(1);

    let shard_ranges: Vec<(usize, usize)> = (0..m)
        .step_by(shard_len)
        .map(|s| (s, (s + shard_len).min(m)))
        .collect();

    let (upper, support, pair_updates) = shard_ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut upper = vec![0u32; n * n];
            let mut support = vec![0u32; n];
            let mut updates = 0u64;
            for u in lo..hi {
                let row = mat.row(u);
                for (a, &i) in row.iter().enumerate() {
                    support[i as usize] += 1;
                    let base = i as usize * n;
                    for &j in &row[a + 1..] {
                        upper[base + j as usize] += 1;
                    }
                    updates += (row.len() - a - 1) as u64;
                }
            }
            (upper, support, updates)
        })
        .reduce(
            || (vec![0u32; n * n], vec![0u32; n], 0u64),
            |(mut ua, mut sa, ca), (ub, sb, cb)| {
                ua.iter_mut().zip(&ub).for_each(|(a, b)| *a += b);
                sa.iter_mut().zip(&sb).for_each(|(a, b)| *a += b);
                (ua, sa, ca + cb)
            },
        );

    // rows are sorted so every pair landed in the upper triangle
    let mut counts = upper;
    for i in 0..n {
        counts[i * n + i] = support[i];
        for j in i + 1..n {
            counts[j * n + i] = counts[i * n + j];
        }
    }

    CooccurrenceStats {
        n,
        counts,
        support,
        m,
        destinations: mat.destinations().to_vec(),
        pair_updates,
    }
}

/// What the popularity rank is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopularityDenominator {
    /// Destination count: `p_i` spans `(1-w, 1]` whatever the user count.
    #[default]
    N,
    /// User count, as literally written for the original formula.
    M,
}

impl FromStr for PopularityDenominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n" => Ok(PopularityDenominator::N),
            "m" => Ok(PopularityDenominator::M),
            other => Err(Error::Argument(format!(
                "popularity denominator must be `n` or `m`, got `{other}`"
            ))),
        }
    }
}

/// Per-destination popularity ranks and scores `p_i = 1 - w·b_i/denominator`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityVector {
    /// 1 = least searched, n = most searched.
    pub rank: Vec<u32>,
    pub p: Vec<f64>,
    pub w: f64,
    pub denominator: PopularityDenominator,
}

impl PopularityVector {
    pub fn n(&self) -> usize {
        self.rank.len()
    }
}

pub fn popularity(stats: &CooccurrenceStats, w: f64) -> Result<PopularityVector> {
    popularity_with(stats, w, PopularityDenominator::N)
}

/// Ranks destinations ascending by support (ties by ascending code) and
/// derives `p_i`.
pub fn popularity_with(
    stats: &CooccurrenceStats,
    w: f64,
    denominator: PopularityDenominator,
) -> Result<PopularityVector> {
    if !(0.0..1.0).contains(&w) {
        return Err(Error::Argument(format!("w must lie in [0, 1), got {w}")));
    }
    let n = stats.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        stats.support[a]
            .cmp(&stats.support[b])
            .then_with(|| stats.destinations[a].cmp(&stats.destinations[b]))
    });
    let mut rank = vec![0u32; n];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos as u32 + 1;
    }
    let denom = match denominator {
        PopularityDenominator::N => n,
        PopularityDenominator::M => stats.m,
    } as f64;
    let p = rank.iter().map(|&b| 1.0 - w * b as f64 / denom).collect();
    Ok(PopularityVector {
        rank,
        p,
        w,
        denominator,
    })
}
