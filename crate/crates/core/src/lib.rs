//! Destination-destination similarity from binary user search logs.
//!
//! The pipeline is `ingest` (parse, window, dedupe, partition by market) →
//! `matrix` (binary user×destination matrix, co-occurrence counts, popularity
//! ranks) → `measures` (seven similarity matrices) → `recommend` (row fusion
//! and top-k) / `eval` (mask-one-destination accuracy). `synth` generates
//! clustered, popularity-skewed logs for testing, and `cli` wires it all into
//! the `destsim` binary.

pub mod cli;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod matrix;
pub mod measures;
pub mod recommend;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{EvalConfig, EvalReport, MeasureSpec};
pub use ingest::{SearchRecord, WindowSpec};
pub use matrix::{CooccurrenceStats, InteractionMatrix, PopularityDenominator, PopularityVector};
pub use measures::{Measure, SimilarityMatrix};
pub use recommend::Recommendation;
pub use synth::SynthConfig;
