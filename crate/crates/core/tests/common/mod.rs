//! Dense brute-force oracle over explicit 0/1 column vectors. Shares nothing
//! with the sparse kernel or the measure code beyond the public types.
#![allow(dead_code)]

use destsim::{InteractionMatrix, Measure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A dense binary matrix with every row and column non-empty, plus its
/// destination codes (ascending).
#[derive(Debug, Clone)]
pub struct Dense {
    pub rows: Vec<Vec<u8>>,
    pub codes: Vec<String>,
}

impl Dense {
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.codes.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j] as f64).collect()
    }

    /// The same data as a library matrix.
    pub fn to_matrix(&self) -> InteractionMatrix {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(u, r)| {
                let dests = r
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v == 1)
                    .map(|(j, _)| self.codes[j].clone())
                    .collect();
                (format!("user{u:03}"), dests)
            })
            .collect();
        InteractionMatrix::from_rows("XX", rows).unwrap()
    }
}

/// Random binary matrix with up to `max_m` users and `max_n` destinations at
/// the given density; empty rows and columns are removed (they cannot exist
/// in a matrix built from search records).
pub fn random_dense(rng: &mut impl Rng, max_m: usize, max_n: usize, density: f64) -> Dense {
    loop {
        let m = rng.gen_range(2..=max_m);
        let n = rng.gen_range(2..=max_n);
        let raw: Vec<Vec<u8>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_bool(density) as u8).collect())
            .collect();
        let rows: Vec<Vec<u8>> = raw.into_iter().filter(|r| r.contains(&1)).collect();
        let keep: Vec<usize> = (0..n).filter(|&j| rows.iter().any(|r| r[j] == 1)).collect();
        if rows.len() < 2 || keep.len() < 2 {
            continue;
        }
        let rows = rows
            .into_iter()
            .map(|r| keep.iter().map(|&j| r[j]).collect())
            .collect();
        let codes = (0..keep.len()).map(|j| format!("D{j:02}")).collect();
        return Dense { rows, codes };
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `counts[i][j]` by the triple loop over users.
pub fn dense_counts(d: &Dense) -> Vec<Vec<u32>> {
    let n = d.n();
    let mut counts = vec![vec![0u32; n]; n];
    for i in 0..n {
        for j in 0..n {
            for r in &d.rows {
                if r[i] == 1 && r[j] == 1 {
                    counts[i][j] += 1;
                }
            }
        }
    }
    counts
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson correlation of two columns over all users.
pub fn pearson_pair(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        num / (vx.sqrt() * vy.sqrt())
    }
}

pub fn cosine_pair(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx: f64 = x.iter().map(|a| a * a).sum();
    let ny: f64 = y.iter().map(|b| b * b).sum();
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        dot / (nx * ny).sqrt()
    }
}

pub fn jaccard_pair(x: &[f64], y: &[f64]) -> f64 {
    let inter = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a == 1.0 && **b == 1.0)
        .count();
    let union = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a == 1.0 || **b == 1.0)
        .count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// 1 − (c_tf + c_ft − c_tt + m) / (c_tf + c_ft + m), counting over users.
pub fn kulsinski_pair(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let tally = |p: f64, q: f64| {
        x.iter()
            .zip(y)
            .filter(|(a, b)| **a == p && **b == q)
            .count() as f64
    };
    let (tt, tf, ft) = (tally(1.0, 1.0), tally(1.0, 0.0), tally(0.0, 1.0));
    1.0 - (tf + ft - tt + m) / (tf + ft + m)
}

/// Per-user consensus indicator averaged over all users.
pub fn ccs_pair(x: &[f64], y: &[f64]) -> f64 {
    let per_user: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| if *a == 1.0 && *b == 1.0 { 1.0 } else { 0.0 })
        .sum();
    per_user / x.len() as f64
}

fn pairwise(d: &Dense, f: fn(&[f64], &[f64]) -> f64) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..d.n()).map(|j| d.column(j)).collect();
    (0..d.n())
        .map(|i| {
            (0..d.n())
                .map(|j| if i == j { 0.0 } else { f(&cols[i], &cols[j]) })
                .collect()
        })
        .collect()
}

pub fn oracle_ccs_norm(d: &Dense) -> Vec<Vec<f64>> {
    pairwise(d, ccs_pair)
        .into_iter()
        .map(|row| {
            let max = row.iter().cloned().fold(0.0, f64::max);
            if max == 0.0 {
                row
            } else {
                row.iter().map(|v| v / max).collect()
            }
        })
        .collect()
}

/// Popularity scores: destinations sorted ascending by number of searches
/// (ties by code) get ranks 1..n; p = 1 − w·rank/n.
pub fn oracle_popularity(d: &Dense, w: f64) -> Vec<f64> {
    let searches: Vec<usize> = (0..d.n())
        .map(|j| d.rows.iter().filter(|r| r[j] == 1).count())
        .collect();
    let mut order: Vec<usize> = (0..d.n()).collect();
    order.sort_by(|&a, &b| {
        searches[a]
            .cmp(&searches[b])
            .then(d.codes[a].cmp(&d.codes[b]))
    });
    let mut p = vec![0.0; d.n()];
    for (pos, &j) in order.iter().enumerate() {
        p[j] = 1.0 - w * (pos + 1) as f64 / d.n() as f64;
    }
    p
}

pub fn oracle_pccs(d: &Dense, w: f64) -> Vec<Vec<f64>> {
    let norm = oracle_ccs_norm(d);
    let p = oracle_popularity(d, w);
    norm.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, v)| {
                    if i == j {
                        0.0
                    } else {
                        1.0 / (1.0 + (p[i] - v).exp())
                    }
                })
                .collect()
        })
        .collect()
}

pub fn oracle(measure: Measure, d: &Dense, w: f64) -> Vec<Vec<f64>> {
    match measure {
        Measure::Pearson => pairwise(d, pearson_pair),
        Measure::Cosine => pairwise(d, cosine_pair),
        Measure::Jaccard => pairwise(d, jaccard_pair),
        Measure::Kulsinski => pairwise(d, kulsinski_pair),
        Measure::Ccs => pairwise(d, ccs_pair),
        Measure::CcsNorm => oracle_ccs_norm(d),
        Measure::Pccs => oracle_pccs(d, w),
    }
}

/// Relative closeness with an absolute floor for cells whose exact value is
/// zero, where a relative bound is meaningless.
pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    let diff = (a - b).abs();
    diff <= rel * a.abs().max(b.abs()) || diff <= 1e-14
}
