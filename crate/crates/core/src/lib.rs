//! Measures allocational bias in ranking and selection decisions driven by
//! model predictions.
//!
//! The crate is organized around a small pipeline:
//!
//! 1. [`data`] loads and validates candidate records, predictions, and
//!    candidate pools from line-delimited JSON.
//! 2. [`scoring`] turns prediction evidence into scalar ranking scores
//!    (pointwise expected relevance, pairwise tournament scores).
//! 3. [`metrics`] computes RABBI and baseline bias metrics (average score
//!    gap, pairwise preference rate, Jensen-Shannon divergence, Earth
//!    Mover's distance) between a protected group and a reference group.
//! 4. [`sim`] simulates multi-round top-k candidate selection and measures
//!    the resulting demographic-parity and equal-opportunity gaps.
//! 5. [`validity`] evaluates how well each bias metric predicts those
//!    allocation gaps: Pearson correlations, RMS aggregation, fairness
//!    rankings, and NDCG@N.
//! 6. [`synth`] generates synthetic model score distributions so the whole
//!    pipeline can be exercised and stress-tested without any live model.
//!
//! [`report`] holds the flat report-row schemas and the CSV/JSON writers
//! shared by the CLI.

pub mod audit;
pub mod data;
pub mod error;
pub mod metrics;
pub mod report;
pub mod scoring;
pub mod seed;
pub mod sim;
pub mod synth;
pub mod validity;

pub use error::{Error, Result};
