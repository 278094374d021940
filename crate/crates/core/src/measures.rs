//! The seven destination-destination similarity measures.
//!
//! Every measure reads destination columns of the binary matrix over all `m`
//! users through [`CooccurrenceStats`]; only PCCS additionally needs a
//! [`PopularityVector`]. All outputs have a zero diagonal.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeRange;
use crate::matrix::{CooccurrenceStats, PopularityDenominator, PopularityVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Pearson,
    Cosine,
    Jaccard,
    Kulsinski,
    Ccs,
    CcsNorm,
    Pccs,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::Pearson,
        Measure::Cosine,
        Measure::Jaccard,
        Measure::Kulsinski,
        Measure::Ccs,
        Measure::CcsNorm,
        Measure::Pccs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Pearson => "pearson",
            Measure::Cosine => "cosine",
            Measure::Jaccard => "jaccard",
            Measure::Kulsinski => "kulsinski",
            Measure::Ccs => "ccs",
            Measure::CcsNorm => "ccs_norm",
            Measure::Pccs => "pccs",
        }
    }

    /// Whether `values[i][j] == values[j][i]` is guaranteed.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, Measure::CcsNorm | Measure::Pccs)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "pearson" | "pcc" => Measure::Pearson,
            "cosine" | "cos" => Measure::Cosine,
            "jaccard" => Measure::Jaccard,
            "kulsinski" => Measure::Kulsinski,
            "ccs" => Measure::Ccs,
            "ccs_norm" | "ccs-norm" | "ccsnorm" => Measure::CcsNorm,
            "pccs" => Measure::Pccs,
            _ => return Err(Error::UnknownMeasure(s.to_owned())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasureParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub popularity_denominator: Option<PopularityDenominator>,
}

/// Dense `n×n` similarity scores tagged with the measure that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub measure: Measure,
    pub params: MeasureParams,
    destinations: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps raw row-major values; the diagonal is forced to zero.
    pub fn from_values(
        measure: Measure,
        params: MeasureParams,
        destinations: Vec<String>,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        let n = destinations.len();
        if values.len() != n * n {
            return Err(Error::Argument(format!(
                "similarity matrix has {} cells, expected {}",
                values.len(),
                n * n
            )));
        }
        if destinations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(
                "destination codes must be strictly ascending".into(),
            ));
        }
        for i in 0..n {
            values[i * n + i] = 0.0;
        }
        Ok(SimilarityMatrix {
            measure,
            params,
            destinations,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.destinations.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn destinations(&self) -> &[String] {
        &self.destinations
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.destinations
            .binary_search_by(|d| d.as_str().cmp(code))
            .ok()
    }
}

/// Fills an `n×n` matrix row by row in parallel; `cell(i, j)` is only called
/// for `i != j`.
fn fill<F>(n: usize, cell: F) -> Vec<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let mut values = vec![0.0; n * n];
    if n == 0 {
        return values;
    }
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = cell(i, j);
            }
        }
    });
    values
}

fn finish(
    measure: Measure,
    params: MeasureParams,
    dests: &[String],
    values: Vec<f64>,
) -> SimilarityMatrix {
    SimilarityMatrix::from_values(measure, params, dests.to_vec(), values)
        .expect("shape derived from stats")
}

/// Share of all users who searched both destinations.
pub fn ccs(stats: &CooccurrenceStats) -> SimilarityMatrix {
    let m = stats.m as f64;
    let values = fill(stats.n(), |i, j| stats.count(i, j) as f64 / m);
    finish(
        Measure::Ccs,
        MeasureParams::default(),
        &stats.destinations,
        values,
    )
}

/// Divides each CCS row by its off-diagonal maximum. All-zero rows stay zero.
pub fn ccs_norm(s_ccs: &SimilarityMatrix) -> Result<SimilarityMatrix> {
    if s_ccs.measure != Measure::Ccs {
        return Err(Error::Argument(format!(
            "ccs_norm expects a ccs matrix, got {}",
            s_ccs.measure
        )));
    }
    let n = s_ccs.n();
    let mut values = s_ccs.values.clone();
    if n > 0 {
        values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let max = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .fold(0.0, f64::max);
            if max > 0.0 {
                row.iter_mut().for_each(|v| *v /= max);
            }
        });
    }
    Ok(finish(
        Measure::CcsNorm,
        MeasureParams::default(),
        &s_ccs.destinations,
        values,
    ))
}

/// Logistic transform of CCS_norm shifted by each row's popularity score:
/// `1 / (1 + exp(p_i - s_norm[i][j]))`. The diagonal is zeroed afterwards.
pub fn pccs(s_norm: &SimilarityMatrix, pop: &PopularityVector) -> Result<SimilarityMatrix> {
    if s_norm.measure != Measure::CcsNorm {
        return Err(Error::Argument(format!(
            "pccs expects a ccs_norm matrix, got {}",
            s_norm.measure
        )));
    }
    if pop.n() != s_norm.n() {
        return Err(Error::Argument(format!(
            "popularity vector has {} entries for {} destinations",
            pop.n(),
            s_norm.n()
        )));
    }
    let values = fill(s_norm.n(), |i, j| {
        1.0 / (1.0 + (pop.p[i] - s_norm.get(i, j)).exp())
    });
    let params = MeasureParams {
        w: Some(pop.w),
        popularity_denominator: Some(pop.denominator),
    };
    Ok(finish(Measure::Pccs, params, &s_norm.destinations, values))
}

pub fn cosine(stats: &CooccurrenceStats) -> SimilarityMatrix {
    let values = fill(stats.n(), |i, j| {
        let norm = (stats.support[i] as f64 * stats.support[j] as f64).sqrt();
        if norm == 0.0 {
            0.0
        } else {
            stats.count(i, j) as f64 / norm
        }
    });
    finish(
        Measure::Cosine,
        MeasureParams::default(),
        &stats.destinations,
        values,
    )
}

/// Pearson correlation of two binary columns over all users. Columns with
/// zero variance (nobody or everybody searched it) score 0.
pub fn pearson(stats: &CooccurrenceStats) -> SimilarityMatrix {
    let m = stats.m as i128;
    let values = fill(stats.n(), |i, j| {
        let (si, sj) = (stats.support[i] as i128, stats.support[j] as i128);
        let var_i = si * (m - si);
        let var_j = sj * (m - sj);
        if var_i == 0 || var_j == 0 {
            return 0.0;
        }
        let cov = m * stats.count(i, j) as i128 - si * sj;
        (cov as f64 / ((var_i * var_j) as f64).sqrt()).clamp(-1.0, 1.0)
    });
    finish(
        Measure::Pearson,
        MeasureParams::default(),
        &stats.destinations,
        values,
    )
}

/// `(numerator, denominator)` of Jaccard: intersection over union size.
pub fn jaccard_ratio(stats: &CooccurrenceStats, i: usize, j: usize) -> (u64, u64) {
    let both = stats.count(i, j) as u64;
    (
        both,
        stats.support[i] as u64 + stats.support[j] as u64 - both,
    )
}

pub fn jaccard(stats: &CooccurrenceStats) -> SimilarityMatrix {
    let values = fill(stats.n(), |i, j| {
        let (num, den) = jaccard_ratio(stats, i, j);
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    });
    finish(
        Measure::Jaccard,
        MeasureParams::default(),
        &stats.destinations,
        values,
    )
}

/// One minus the Kulsinski dissimilarity
/// `(c_tf + c_ft - c_tt + m) / (c_tf + c_ft + m)`, which reduces to
/// `c_tt / (c_tf + c_ft + m)`.
pub fn kulsinski(stats: &CooccurrenceStats) -> SimilarityMatrix {
    let m = stats.m as u64;
    let values = fill(stats.n(), |i, j| {
        let tt = stats.count(i, j) as u64;
        let tf = stats.support[i] as u64 - tt;
        let ft = stats.support[j] as u64 - tt;
        let den = tf + ft + m;
        if den == 0 {
            0.0
        } else {
            tt as f64 / den as f64
        }
    });
    finish(
        Measure::Kulsinski,
        MeasureParams::default(),
        &stats.destinations,
        values,
    )
}

/// Dispatches to the measure's constructor. `pop` is required for PCCS.
pub fn compute(
    measure: Measure,
    stats: &CooccurrenceStats,
    pop: Option<&PopularityVector>,
) -> Result<SimilarityMatrix> {
    Ok(match measure {
        Measure::Pearson => pearson(stats),
        Measure::Cosine => cosine(stats),
        Measure::Jaccard => jaccard(stats),
        Measure::Kulsinski => kulsinski(stats),
        Measure::Ccs => ccs(stats),
        Measure::CcsNorm => ccs_norm(&ccs(stats))?,
        Measure::Pccs => {
            let pop = pop
                .ok_or_else(|| Error::Argument("pccs needs a popularity vector (set w)".into()))?;
            pccs(&ccs_norm(&ccs(stats))?, pop)?
        }
    })
}

/// JSON metadata stored next to an exported similarity matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilaritySidecar {
    pub measure: Measure,
    pub params: MeasureParams,
    pub n: usize,
    pub market: String,
    pub window: Option<TimeRange>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub created_at: Option<String>,
    pub destinations: Vec<String>,
}

/// Sidecar path for a matrix CSV: same stem, `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

impl SimilarityMatrix {
    /// Writes nonzero off-diagonal entries as `dest_i,dest_j,value` (shortest
    /// round-trip decimal) and the JSON sidecar. Omitted cells are zero.
    pub fn export(
        &self,
        csv_path: &Path,
        market: &str,
        window: Option<TimeRange>,
        created_at: Option<String>,
    ) -> Result<()> {
        let file = fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "dest_i,dest_j,value")?;
            for i in 0..self.n() {
                for (j, &v) in self.row(i).iter().enumerate() {
                    if i != j && v != 0.0 {
                        writeln!(
                            out,
                            "{},{},{}",
                            self.destinations[i], self.destinations[j], v
                        )?;
                    }
                }
            }
            out.flush()
        };
        write().map_err(|e| Error::io(csv_path, e))?;

        let sidecar = SimilaritySidecar {
            measure: self.measure,
            params: self.params,
            n: self.n(),
            market: market.to_owned(),
            window,
            created_at,
            destinations: self.destinations.clone(),
        };
        let path = sidecar_path(csv_path);
        let json = serde_json::to_vec_pretty(&sidecar)?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    /// Reads a matrix written by [`SimilarityMatrix::export`].
    pub fn import(csv_path: &Path) -> Result<(SimilarityMatrix, SimilaritySidecar)> {
        let side_path = sidecar_path(csv_path);
        let raw = fs::read(&side_path).map_err(|e| Error::io(&side_path, e))?;
        let sidecar: SimilaritySidecar = serde_json::from_slice(&raw)?;
        let bad = |reason: String| Error::MatrixFile {
            path: csv_path.to_owned(),
            reason,
        };
        if sidecar.n != sidecar.destinations.len() {
            return Err(bad(format!(
                "sidecar n = {} but lists {} destinations",
                sidecar.n,
                sidecar.destinations.len()
            )));
        }
        let n = sidecar.n;
        let index: HashMap<&str, usize> = sidecar
            .destinations
            .iter()
            .enumerate()
            .map(|(i, d)| (d.as_str(), i))
            .collect();
        let file = fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let mut values = vec![0.0; n * n];
        for row in reader.records() {
            let row = row?;
            if row.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", row.len())));
            }
            let lookup = |code: &str| {
                index
                    .get(code)
                    .copied()
                    .ok_or_else(|| bad(format!("destination `{code}` not in sidecar")))
            };
            let (i, j) = (lookup(&row[0])?, lookup(&row[1])?);
            values[i * n + j] = row[2]
                .parse()
                .map_err(|_| bad(format!("bad value `{}`", &row[2])))?;
        }
        let matrix = SimilarityMatrix::from_values(
            sidecar.measure,
            sidecar.params,
            sidecar.destinations.clone(),
            values,
        )
        .map_err(|e| bad(e.to_string()))?;
        Ok((matrix, sidecar))
    }
}
