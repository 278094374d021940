//! Search-log ingestion: parsing, time windows, dedupe and market partitions.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One search event from the log.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchRecord {
    pub user_id: String,
    pub destination: String,
    pub market: String,
    #[serde(with = "utc_seconds")]
    pub timestamp: DateTime<Utc>,
}

impl SearchRecord {
    /// Builds a record, normalising fields the same way the parser does.
    pub fn new(
        user_id: &str,
        destination: &str,
        market: &str,
        timestamp: DateTime<Utc>,
    ) -> Result<Self> {
        let raw = RawRecord {
            user_id: user_id.to_owned(),
            destination: destination.to_owned(),
            market: market.to_owned(),
            timestamp: format_timestamp(&timestamp),
        };
        raw.validate()
            .map_err(|reason| Error::Argument(format!("invalid record: {reason}")))
    }
}

/// Train and test windows, each half-open `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    #[serde(with = "utc_seconds")]
    pub train_start: DateTime<Utc>,
    #[serde(with = "utc_seconds")]
    pub train_end: DateTime<Utc>,
    #[serde(with = "utc_seconds")]
    pub test_start: DateTime<Utc>,
    #[serde(with = "utc_seconds")]
    pub test_end: DateTime<Utc>,
}

impl WindowSpec {
    pub fn new(
        train_start: DateTime<Utc>,
        train_end: DateTime<Utc>,
        test_start: DateTime<Utc>,
        test_end: DateTime<Utc>,
    ) -> Result<Self> {
        if !(train_start < train_end && train_end <= test_start && test_start < test_end) {
            return Err(Error::Argument(format!(
                "window must satisfy train_start < train_end <= test_start < test_end, got {} / {} / {} / {}",
                format_timestamp(&train_start),
                format_timestamp(&train_end),
                format_timestamp(&test_start),
                format_timestamp(&test_end),
            )));
        }
        Ok(WindowSpec {
            train_start,
            train_end,
            test_start,
            test_end,
        })
    }

    pub fn train(&self) -> TimeRange {
        TimeRange {
            start: self.train_start,
            end: self.train_end,
        }
    }

    pub fn test(&self) -> TimeRange {
        TimeRange {
            start: self.test_start,
            end: self.test_end,
        }
    }

    /// Same window lengths, moved forward by `by`.
    pub fn shifted(&self, by: chrono::Duration) -> Self {
        WindowSpec {
            train_start: self.train_start + by,
            train_end: self.train_end + by,
            test_start: self.test_start + by,
            test_end: self.test_end + by,
        }
    }
}

/// A single half-open `[start, end)` interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    #[serde(with = "utc_seconds")]
    pub start: DateTime<Utc>,
    #[serde(with = "utc_seconds")]
    pub end: DateTime<Utc>,
}

impl TimeRange {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        if start >= end {
            return Err(Error::Argument(format!(
                "window start {} is not before end {}",
                format_timestamp(&start),
                format_timestamp(&end)
            )));
        }
        Ok(TimeRange { start, end })
    }

    pub fn contains(&self, ts: &DateTime<Utc>) -> bool {
        self.start <= *ts && *ts < self.end
    }
}

impl std::fmt::Display for TimeRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}, {})",
            format_timestamp(&self.start),
            format_timestamp(&self.end)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Csv,
    Jsonl,
}

impl LogFormat {
    /// `.jsonl` / `.ndjson` are JSON lines, anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => LogFormat::Jsonl,
            _ => LogFormat::Csv,
        }
    }
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(LogFormat::Csv),
            "jsonl" | "ndjson" => Ok(LogFormat::Jsonl),
            other => Err(Error::Argument(format!("unknown log format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Fail when more than this fraction of data rows is malformed.
    pub max_malformed_fraction: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_malformed_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLog {
    pub records: Vec<SearchRecord>,
    pub malformed: usize,
    /// 1-based line number of the first malformed row.
    pub first_malformed_line: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    user_id: String,
    destination: String,
    market: String,
    timestamp: String,
}

impl RawRecord {
    fn validate(self) -> std::result::Result<SearchRecord, &'static str> {
        let user_id = self.user_id.trim();
        let destination = self.destination.trim().to_uppercase();
        let market = self.market.trim().to_uppercase();
        if user_id.is_empty() {
            return Err("empty user_id");
        }
        if destination.is_empty() {
            return Err("empty destination");
        }
        if market.is_empty() {
            return Err("empty market");
        }
        let timestamp = parse_timestamp(&self.timestamp).ok_or("bad timestamp")?;
        Ok(SearchRecord {
            user_id: user_id.to_owned(),
            destination,
            market,
            timestamp,
        })
    }
}

/// Parses an ISO-8601 UTC instant, truncated to whole seconds.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let parsed = DateTime::parse_from_rfc3339(s.trim()).ok()?;
    let utc = parsed.with_timezone(&Utc);
    DateTime::from_timestamp(utc.timestamp(), 0)
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub(crate) mod utc_seconds {
    use chrono::{DateTime, Utc};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_timestamp(&raw)
            .ok_or_else(|| de::Error::custom(format!("invalid timestamp `{raw}`")))
    }
}

/// Parses a CSV (with header) or JSON-lines search log.
///
/// Malformed rows are skipped and counted; the call fails when they exceed
/// `options.max_malformed_fraction` of all data rows.
pub fn parse_log<R: Read>(
    source: R,
    format: LogFormat,
    options: ParseOptions,
) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    let mut total = 0usize;
    let note_bad = |out: &mut ParsedLog, line: u64| {
        out.malformed += 1;
        out.first_malformed_line.get_or_insert(line);
    };

    match format {
        LogFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(source);
            let headers = reader.headers().map_err(csv_to_io)?.clone();
            let column = |name: &str| {
                headers.iter().position(|h| h == name).ok_or(Error::Format {
                    malformed: 0,
                    total: 0,
                    first_line: 1,
                })
            };
            let cols = [
                column("user_id")?,
                column("destination")?,
                column("market")?,
                column("timestamp")?,
            ];
            let mut row = csv::StringRecord::new();
            loop {
                match reader.read_record(&mut row) {
                    Ok(false) => break,
                    Ok(true) => {}
                    Err(e) if e.is_io_error() => return Err(csv_to_io(e).into()),
                    Err(e) => {
                        total += 1;
                        let line = e.position().map_or(0, |p| p.line());
                        note_bad(&mut out, line);
                        continue;
                    }
                }
                total += 1;
                let line = row.position().map_or(0, |p| p.line());
                let field = |i: usize| row.get(cols[i]).map(str::to_owned);
                let raw = match (field(0), field(1), field(2), field(3)) {
                    (Some(user_id), Some(destination), Some(market), Some(timestamp))
                        if row.len() == headers.len() =>
                    {
                        RawRecord {
                            user_id,
                            destination,
                            market,
                            timestamp,
                        }
                    }
                    _ => {
                        note_bad(&mut out, line);
                        continue;
                    }
                };
                match raw.validate() {
                    Ok(rec) => out.records.push(rec),
                    Err(_) => note_bad(&mut out, line),
                }
            }
        }
        LogFormat::Jsonl => {
            for (i, line) in BufReader::new(source).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                total += 1;
                let lineno = i as u64 + 1;
                match serde_json::from_str::<RawRecord>(&line)
                    .ok()
                    .and_then(|raw| raw.validate().ok())
                {
                    Some(rec) => out.records.push(rec),
                    None => note_bad(&mut out, lineno),
                }
            }
        }
    }

    if total > 0 && out.malformed as f64 > options.max_malformed_fraction * total as f64 {
        return Err(Error::Format {
            malformed: out.malformed,
            total,
            first_line: out.first_malformed_line.unwrap_or(0),
        });
    }
    Ok(out)
}

fn csv_to_io(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{other:?}")),
    }
}

/// Opens and parses a log file, picking the format from its extension.
pub fn read_log_file(path: &Path, options: ParseOptions) -> Result<ParsedLog> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_log(file, LogFormat::from_path(path), options).map_err(|e| match e {
        Error::Stream(source) => Error::io(path, source),
        other => other,
    })
}

/// Writes records in the CSV log format (header + one row per record).
pub fn write_csv<W: Write>(records: &[SearchRecord], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["user_id", "destination", "market", "timestamp"])?;
    for r in records {
        writer.write_record([
            r.user_id.as_str(),
            r.destination.as_str(),
            r.market.as_str(),
            format_timestamp(&r.timestamp).as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Groups records by market, keeping file order inside each group.
pub fn partition_by_market(records: Vec<SearchRecord>) -> BTreeMap<String, Vec<SearchRecord>> {
    let mut parts: BTreeMap<String, Vec<SearchRecord>> = BTreeMap::new();
    for r in records {
        parts.entry(r.market.clone()).or_default().push(r);
    }
    parts
}

/// Keeps records with `start <= timestamp < end`.
pub fn filter_window(
    records: &[SearchRecord],
    start: DateTime<Utc>,
    end: DateTime<Utc>,
) -> Result<Vec<SearchRecord>> {
    let range = TimeRange::new(start, end)?;
    Ok(records
        .iter()
        .filter(|r| range.contains(&r.timestamp))
        .cloned()
        .collect())
}

/// One record per (user, destination): the earliest, ties to the first seen.
///
/// Output keeps the relative input order of the surviving records.
pub fn dedupe(records: Vec<SearchRecord>) -> Vec<SearchRecord> {
    let mut best: HashMap<(&str, &str), usize> = HashMap::with_capacity(records.len());
    for (idx, r) in records.iter().enumerate() {
        best.entry((r.user_id.as_str(), r.destination.as_str()))
            .and_modify(|cur| {
                if r.timestamp < records[*cur].timestamp {
                    *cur = idx;
                }
            })
            .or_insert(idx);
    }
    let mut keep = vec![false; records.len()];
    for idx in best.into_values() {
        keep[idx] = true;
    }
    records
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect()
}
