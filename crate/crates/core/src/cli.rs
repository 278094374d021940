//! The `destsim` command line: `generate | build | evaluate | recommend`.
//!
//! `build` and `evaluate` (and `generate`) accept `--config <file>`, a flat
//! TOML table whose keys are the long flag names (`train-start = "..."`,
//! `measures = "ccs,pccs"`, `k = 5`). Flags given on the command line win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{self, EvalConfig, EvalReport, MeasureSpec, RankSummary, DEFAULT_W_GRID};
use crate::ingest::{self, format_timestamp, ParseOptions, SearchRecord, TimeRange, WindowSpec};
use crate::matrix::{self, BuildOptions, PopularityDenominator};
use crate::measures::{self, Measure, SimilarityMatrix};
use crate::recommend;
use crate::synth::{self, SynthConfig};

#[derive(Debug, Parser)]
#[command(
    name = "destsim",
    version,
    about = "Destination similarity from search logs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic search log in CSV format.
    Generate(GenerateArgs),
    /// Build similarity matrices per market and measure.
    Build(PipelineArgs),
    /// Run the mask-one evaluation over train/test windows.
    Evaluate(PipelineArgs),
    /// Recommend destinations from a built matrix.
    Recommend(RecommendArgs),
}

#[derive(Debug, Args, Default)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub destinations: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub zipf: Option<f64>,
    #[arg(long)]
    pub min_searches: Option<usize>,
    #[arg(long)]
    pub max_searches: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub market: Option<String>,
    #[arg(long, value_parser = parse_instant)]
    pub start: Option<DateTime<Utc>>,
    #[arg(long, value_parser = parse_instant)]
    pub end: Option<DateTime<Utc>>,
}

#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Log files (CSV or .jsonl); repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    pub input: Vec<PathBuf>,
    /// Only process these markets.
    #[arg(long, value_delimiter = ',')]
    pub market: Vec<String>,
    #[arg(long, value_parser = parse_instant)]
    pub train_start: Option<DateTime<Utc>>,
    #[arg(long, value_parser = parse_instant)]
    pub train_end: Option<DateTime<Utc>>,
    #[arg(long, value_parser = parse_instant)]
    pub test_start: Option<DateTime<Utc>>,
    #[arg(long, value_parser = parse_instant)]
    pub test_end: Option<DateTime<Utc>>,
    /// Measures to compute (default: all seven).
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<String>,
    /// PCCS w values (build default 0.5, evaluate default 0.1,0.3,0.5,0.7,0.9).
    #[arg(long, value_delimiter = ',')]
    pub w: Vec<f64>,
    /// Top-k cutoff (default 5).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `n` (destination count, default) or `m` (user count).
    #[arg(long)]
    pub popularity_denominator: Option<String>,
    /// Drop users with more distinct destinations than this (default 1000).
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long)]
    pub min_support: Option<usize>,
    /// Number of consecutive evaluation periods (default 1).
    #[arg(long)]
    pub periods: Option<usize>,
    /// Shift between periods, in days (default 7).
    #[arg(long)]
    pub period_step_days: Option<i64>,
    /// Baseline measure for accuracy deltas (default pearson).
    #[arg(long)]
    pub baseline: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Omit wall-clock timestamps from written files.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Similarity matrix CSV written by `build`.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Searched destination codes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub searched: Vec<String>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
}

/// Accepts RFC 3339 instants or bare `YYYY-MM-DD` dates (midnight UTC).
fn parse_instant(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    if let Some(ts) = ingest::parse_timestamp(s) {
        return Ok(ts);
    }
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc())
        .ok_or_else(|| format!("`{s}` is not an ISO-8601 UTC instant or date"))
}

/// Flat key-value config file.
#[derive(Debug, Default)]
struct FileConfig(BTreeMap<String, toml::Value>);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: BTreeMap<String, toml::Value> = toml::from_str(&text)
            .map_err(|e| Error::Argument(format!("config {}: {e}", path.display())))?;
        let mut out = BTreeMap::new();
        for (key, value) in table {
            if matches!(value, toml::Value::Table(_)) {
                return Err(Error::Argument(format!(
                    "config {}: key `{key}` is a table; the config must be flat",
                    path.display()
                )));
            }
            out.insert(key.replace('_', "-"), value);
        }
        Ok(FileConfig(out))
    }

    fn raw(&self, key: &str) -> Option<String> {
        self.0.get(key).map(|v| match v {
            toml::Value::String(s) => s.clone(),
            toml::Value::Array(items) => items
                .iter()
                .map(|i| match i {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|raw| {
                raw.trim()
                    .parse::<T>()
                    .map_err(|_| Error::Argument(format!("config key `{key}`: bad value `{raw}`")))
            })
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        match self.raw(key) {
            None => Ok(Vec::new()),
            Some(raw) => raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>().map_err(|_| {
                        Error::Argument(format!("config key `{key}`: bad value `{s}`"))
                    })
                })
                .collect(),
        }
    }

    fn instant(&self, key: &str) -> Result<Option<DateTime<Utc>>> {
        self.raw(key)
            .map(|raw| {
                parse_instant(&raw).map_err(|e| Error::Argument(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> bool {
        matches!(self.0.get(key), Some(toml::Value::Boolean(true)))
    }
}

fn pick<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

fn pick_list<T>(cli: Vec<T>, file: Vec<T>) -> Vec<T> {
    if cli.is_empty() {
        file
    } else {
        cli
    }
}

/// Resolved settings for `build` / `evaluate`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub markets: Vec<String>,
    pub train: Option<TimeRange>,
    pub test: Option<TimeRange>,
    pub measures: Vec<Measure>,
    pub w: Vec<f64>,
    pub k: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub popularity_denominator: PopularityDenominator,
    pub build: BuildOptions,
    pub periods: usize,
    pub period_step_days: i64,
    pub baseline: String,
    pub threads: Option<usize>,
    pub deterministic: bool,
}

impl RunConfig {
    fn resolve(args: PipelineArgs, default_w: &[f64]) -> Result<Self> {
        let file = FileConfig::load(args.config.as_deref())?;
        let inputs = pick_list(args.input, file.list("input")?);
        if inputs.is_empty() {
            return Err(Error::Argument("no --input given".into()));
        }
        let markets: Vec<String> = pick_list(args.market, file.list("market")?)
            .into_iter()
            .map(|m| m.trim().to_uppercase())
            .collect();
        let range = |start: Option<DateTime<Utc>>, end: Option<DateTime<Utc>>, name: &str| match (
            start, end,
        ) {
            (Some(s), Some(e)) => TimeRange::new(s, e).map(Some),
            (None, None) => Ok(None),
            _ => Err(Error::Argument(format!(
                "--{name}-start and --{name}-end must be given together"
            ))),
        };
        let train = range(
            args.train_start.or(file.instant("train-start")?),
            args.train_end.or(file.instant("train-end")?),
            "train",
        )?;
        let test = range(
            args.test_start.or(file.instant("test-start")?),
            args.test_end.or(file.instant("test-end")?),
            "test",
        )?;

        let measure_names = pick_list(args.measures, file.list::<String>("measures")?);
        let measures = if measure_names.is_empty() {
            Measure::ALL.to_vec()
        } else {
            measure_names
                .iter()
                .map(|m| m.parse())
                .collect::<Result<Vec<Measure>>>()?
        };
        let w = pick_list(args.w, file.list("w")?);
        let w = if w.is_empty() { default_w.to_vec() } else { w };
        if let Some(bad) = w.iter().find(|w| !(0.0..1.0).contains(*w)) {
            return Err(Error::Argument(format!("w must lie in [0, 1), got {bad}")));
        }
        let denominator = match args.popularity_denominator {
            Some(s) => Some(s.parse()?),
            None => file.get("popularity-denominator")?,
        };
        let k = pick(args.k, file.get("k")?, 5);
        if k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        let defaults = BuildOptions::default();
        let periods = pick(args.periods, file.get("periods")?, 1);
        if periods == 0 {
            return Err(Error::Argument("periods must be at least 1".into()));
        }
        let baseline = pick(args.baseline, file.get("baseline")?, "pearson".to_owned());
        Ok(RunConfig {
            inputs,
            markets,
            train,
            test,
            measures,
            w,
            k: k as usize,
            seed: pick(args.seed, file.get("seed")?, 0),
            out: pick(args.out, file.get("out")?, PathBuf::from("out")),
            popularity_denominator: denominator.unwrap_or_default(),
            build: BuildOptions {
                max_user_degree: pick(
                    args.max_degree,
                    file.get("max-degree")?,
                    defaults.max_user_degree,
                ),
                min_support: pick(
                    args.min_support,
                    file.get("min-support")?,
                    defaults.min_support,
                ),
            },
            periods,
            period_step_days: pick(args.period_step_days, file.get("period-step-days")?, 7),
            baseline,
            threads: args.threads.or(file.get("threads")?),
            deterministic: args.deterministic || file.flag("deterministic"),
        })
    }

    fn specs(&self) -> Result<Vec<MeasureSpec>> {
        MeasureSpec::expand(&self.measures, &self.w)
    }

    fn created_at(&self) -> Option<String> {
        (!self.deterministic).then(|| format_timestamp(&Utc::now()))
    }
}

fn synth_config(args: GenerateArgs) -> Result<(SynthConfig, PathBuf)> {
    let file = FileConfig::load(args.config.as_deref())?;
    let d = SynthConfig::default();
    let out = args
        .out
        .or(file.get("out")?)
        .ok_or_else(|| Error::Argument("no --out given".into()))?;
    let cfg = SynthConfig {
        n_users: pick(args.users, file.get("users")?, d.n_users),
        n_destinations: pick(
            args.destinations,
            file.get("destinations")?,
            d.n_destinations,
        ),
        n_clusters: pick(args.clusters, file.get("clusters")?, d.n_clusters),
        zipf_exponent: pick(args.zipf, file.get("zipf")?, d.zipf_exponent),
        searches_per_user: (
            pick(
                args.min_searches,
                file.get("min-searches")?,
                d.searches_per_user.0,
            ),
            pick(
                args.max_searches,
                file.get("max-searches")?,
                d.searches_per_user.1,
            ),
        ),
        noise: pick(args.noise, file.get("noise")?, d.noise),
        seed: pick(args.seed, file.get("seed")?, d.seed),
        market: pick(args.market, file.get("market")?, d.market.clone()),
        time_range: (
            pick(args.start, file.instant("start")?, d.time_range.0),
            pick(args.end, file.instant("end")?, d.time_range.1),
        ),
    };
    cfg.validate()?;
    Ok((cfg, out))
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Build(args) => {
            let cfg = RunConfig::resolve(args, &[0.5])?;
            with_threads(cfg.threads, || cmd_build(&cfg))
        }
        Command::Evaluate(args) => {
            let cfg = RunConfig::resolve(args, &DEFAULT_W_GRID)?;
            with_threads(cfg.threads, || cmd_evaluate(&cfg))
        }
        Command::Recommend(args) => cmd_recommend(args),
    }
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?
            .install(f),
    }
}

pub fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let (cfg, out) = synth_config(args)?;
    let records = synth::generate(&cfg)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(&out).map_err(|e| Error::io(&out, e))?;
    ingest::write_csv(&records, std::io::BufWriter::new(file))?;
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

/// Reads every input (all paths are checked first) and groups records by
/// market, applying the market filter.
fn load_markets(cfg: &RunConfig) -> Result<BTreeMap<String, Vec<SearchRecord>>> {
    if let Some(missing) = cfg.inputs.iter().find(|p| !p.is_file()) {
        return Err(Error::io(
            missing,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        ));
    }
    let mut records = Vec::new();
    for path in &cfg.inputs {
        let parsed = ingest::read_log_file(path, ParseOptions::default())?;
        if parsed.malformed > 0 {
            eprintln!(
                "warning: {}: skipped {} malformed rows (first at line {})",
                path.display(),
                parsed.malformed,
                parsed.first_malformed_line.unwrap_or(0)
            );
        }
        records.extend(parsed.records);
    }
    let mut parts = ingest::partition_by_market(records);
    if !cfg.markets.is_empty() {
        parts.retain(|m, _| cfg.markets.contains(m));
        if let Some(missing) = cfg.markets.iter().find(|m| !parts.contains_key(*m)) {
            return Err(Error::EmptyWindow(format!(
                "no records for market {missing}"
            )));
        }
    }
    if parts.is_empty() {
        return Err(Error::EmptyWindow("input contains no records".into()));
    }
    Ok(parts)
}

fn window_matrix(
    records: &[SearchRecord],
    range: Option<TimeRange>,
    market: &str,
    opts: BuildOptions,
) -> Result<matrix::InteractionMatrix> {
    let selected = match range {
        Some(r) => ingest::filter_window(records, r.start, r.end)?,
        None => records.to_vec(),
    };
    let describe = || match range {
        Some(r) => format!("market {market}, window {r}"),
        None => format!("market {market}, all records"),
    };
    let mat = matrix::build_matrix(&ingest::dedupe(selected), opts).map_err(|e| match e {
        Error::EmptyWindow(_) => Error::EmptyWindow(describe()),
        other => other,
    })?;
    Ok(match range {
        Some(r) => mat.with_window(r),
        None => mat,
    })
}

fn file_stem(spec: &MeasureSpec) -> String {
    spec.label()
}

pub fn cmd_build(cfg: &RunConfig) -> Result<()> {
    let markets = load_markets(cfg)?;
    let specs = cfg.specs()?;
    let created_at = cfg.created_at();

    struct Built {
        market: String,
        spec: MeasureSpec,
        sim: SimilarityMatrix,
        window: Option<TimeRange>,
        n: usize,
        density: f64,
        millis: u128,
    }
    let mut built = Vec::new();
    for (market, records) in &markets {
        let started = Instant::now();
        let mat = window_matrix(records, cfg.train, market, cfg.build)?;
        let stats = matrix::cooccurrence(&mat);
        let base_ms = started.elapsed().as_millis();
        for spec in &specs {
            let t = Instant::now();
            let pop = match spec.w {
                Some(w) => Some(matrix::popularity_with(
                    &stats,
                    w,
                    cfg.popularity_denominator,
                )?),
                None => None,
            };
            let sim = measures::compute(spec.measure, &stats, pop.as_ref())?;
            built.push(Built {
                market: market.clone(),
                spec: *spec,
                sim,
                window: mat.window,
                n: mat.n_destinations(),
                density: mat.density(),
                millis: base_ms + t.elapsed().as_millis(),
            });
        }
    }

    // nothing is written until every matrix is computed
    for b in &built {
        let dir = cfg.out.join(&b.market);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(format!("{}.csv", file_stem(&b.spec)));
        b.sim
            .export(&path, &b.market, b.window, created_at.clone())?;
        println!(
            "market={} measure={} n={} density={:.6} wall_ms={} file={}",
            b.market,
            b.spec.label(),
            b.n,
            b.density,
            b.millis,
            path.display()
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct MarketEvaluation {
    pub market: String,
    pub baseline: String,
    pub periods: Vec<EvalReport>,
    /// Averaged over periods with at least one eligible test user.
    pub ranks: Vec<RankSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let (Some(train), Some(test)) = (cfg.train, cfg.test) else {
        return Err(Error::Argument(
            "evaluate needs --train-start/--train-end and --test-start/--test-end".into(),
        ));
    };
    let base_window = WindowSpec::new(train.start, train.end, test.start, test.end)?;
    let specs = cfg.specs()?;
    let labels: Vec<String> = specs.iter().map(MeasureSpec::label).collect();
    if !labels.contains(&cfg.baseline) {
        return Err(Error::UnknownMeasure(format!(
            "{} (baseline is not among the evaluated measures)",
            cfg.baseline
        )));
    }
    let markets = load_markets(cfg)?;
    let created_at = cfg.created_at();

    let mut evaluations = Vec::new();
    for (market, records) in &markets {
        let mut reports = Vec::with_capacity(cfg.periods);
        for p in 0..cfg.periods {
            let window =
                base_window.shifted(chrono::Duration::days(cfg.period_step_days * p as i64));
            let train_mat = window_matrix(records, Some(window.train()), market, cfg.build)?;
            let test_mat = match window_matrix(records, Some(window.test()), market, cfg.build) {
                Ok(m) => Some(m),
                Err(Error::EmptyWindow(_)) => None,
                Err(e) => return Err(e),
            };
            let eval_cfg = EvalConfig {
                k: cfg.k,
                seed: cfg.seed,
                measures: specs.clone(),
                window: Some(window),
                popularity_denominator: cfg.popularity_denominator,
            };
            let mut report = eval::evaluate(&train_mat, test_mat.as_ref(), &eval_cfg)?;
            if report.eligible_users == 0 {
                eprintln!(
                    "warning: market {market}, test window {}: no eligible test users",
                    window.test()
                );
            }
            report.created_at = created_at.clone();
            reports.push(report);
        }
        let usable: Vec<_> = reports.iter().filter_map(EvalReport::accuracies).collect();
        let ranks = eval::average_ranks(&usable, &cfg.baseline)?;
        evaluations.push(MarketEvaluation {
            market: market.clone(),
            baseline: cfg.baseline.clone(),
            periods: reports,
            ranks,
            created_at: created_at.clone(),
        });
    }

    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    for ev in &evaluations {
        let path = cfg.out.join(format!("{}.json", ev.market));
        let mut json = serde_json::to_vec_pretty(ev)?;
        json.push(b'\n');
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    }
    write_summary(&cfg.out.join("summary.csv"), &evaluations, &labels)?;
    write_ranks(&cfg.out.join("ranks.csv"), &evaluations)?;

    for ev in &evaluations {
        for (p, report) in ev.periods.iter().enumerate() {
            let cells: Vec<String> = report
                .results
                .iter()
                .map(|r| match r.accuracy {
                    Some(a) => format!("{}={a:.4}", r.measure),
                    None => format!("{}=null", r.measure),
                })
                .collect();
            println!(
                "market={} period={p} eligible={} skipped={} {}",
                ev.market,
                report.eligible_users,
                report.skipped_users,
                cells.join(" ")
            );
        }
        for r in &ev.ranks {
            println!(
                "market={} measure={} mean_rank={:.2} mean_accuracy={:.4} delta_vs_{}={:+.4}",
                ev.market, r.measure, r.mean_rank, r.mean_accuracy, ev.baseline, r.mean_delta
            );
        }
    }
    Ok(())
}

fn write_summary(path: &Path, evaluations: &[MarketEvaluation], labels: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Argument(format!("{other:?}")),
    })?;
    let mut header = vec![
        "market".to_owned(),
        "period".to_owned(),
        "train_start".to_owned(),
        "test_start".to_owned(),
        "eligible_users".to_owned(),
    ];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for ev in evaluations {
        for (p, report) in ev.periods.iter().enumerate() {
            let window = report.window.expect("evaluate always sets the window");
            let mut row = vec![
                ev.market.clone(),
                p.to_string(),
                format_timestamp(&window.train_start),
                format_timestamp(&window.test_start),
                report.eligible_users.to_string(),
            ];
            row.extend(
                report
                    .results
                    .iter()
                    .map(|r| r.accuracy.map_or_else(String::new, |a| a.to_string())),
            );
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_ranks(path: &Path, evaluations: &[MarketEvaluation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Argument(format!("{other:?}")),
    })?;
    w.write_record([
        "market",
        "measure",
        "mean_rank",
        "mean_accuracy",
        "mean_delta",
        "std_delta",
    ])?;
    for ev in evaluations {
        for r in &ev.ranks {
            w.write_record([
                ev.market.clone(),
                r.measure.clone(),
                r.mean_rank.to_string(),
                r.mean_accuracy.to_string(),
                r.mean_delta.to_string(),
                r.std_delta.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_recommend(args: RecommendArgs) -> Result<()> {
    if !args.matrix.is_file() {
        return Err(Error::io(
            &args.matrix,
            std::io::Error::new(std::io::ErrorKind::NotFound, "matrix file not found"),
        ));
    }
    let (sim, _) = SimilarityMatrix::import(&args.matrix)?;
    let searched: Vec<String> = args
        .searched
        .iter()
        .map(|s| s.trim().to_uppercase())
        .filter(|s| !s.is_empty())
        .collect();
    let recs = recommend::recommend(&sim, &searched, args.k as usize)?;
    println!("{}", serde_json::to_string_pretty(&recs)?);
    Ok(())
}
