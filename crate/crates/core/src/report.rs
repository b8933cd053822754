//! Report-row schemas, provenance headers, and CSV/JSON writers.
//!
//! Every emitted report carries a provenance block: tool version, config
//! hash, seed, and input file digests. Nothing time-dependent goes in,
//! so a rerun on identical inputs produces byte-identical files. JSON
//! reports are the machine-readable form consumed downstream; CSV files
//! are flat exports for plotting, with the provenance as `#` comment
//! lines on top.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::CandidateRecord;
use crate::error::{Error, Result};
use crate::metrics::BiasMetric;
use crate::scoring::{ScoreMode, ScoreTable};
use crate::sim::SelectionOutcome;
use crate::validity::ValidityReport;

/// Which allocation-gap notion a row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    DemographicParity,
    EqualOpportunity,
}

impl GapKind {
    pub fn name(self) -> &'static str {
        match self {
            GapKind::DemographicParity => "DP",
            GapKind::EqualOpportunity => "EO",
        }
    }
}

/// Whether a metric row was computed on full groups or on their
/// qualified subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    Full,
    Qualified,
}

impl Population {
    pub fn name(self) -> &'static str {
        match self {
            Population::Full => "full",
            Population::Qualified => "qualified",
        }
    }
}

/// One bias-metric measurement row of a bias report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReportRow {
    pub metric: BiasMetric,
    pub protected: String,
    pub reference: String,
    pub subtask: String,
    pub model_id: String,
    pub population: Population,
    /// None when the measurement is undefined (e.g. empty qualified
    /// subset); the reason goes in `note`.
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub directional: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// One simulated allocation-gap row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub subtask: String,
    pub model_id: String,
    pub gap_kind: GapKind,
    pub protected: String,
    pub reference: String,
    pub k: usize,
    /// None when undefined (a group with no qualified appearances).
    pub value: Option<f64>,
    pub rounds: usize,
}

/// Provenance block stamped on every report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    /// (file name, sha256 hex digest), sorted by name.
    pub inputs: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.into(),
            seed,
            inputs: Vec::new(),
        }
    }

    /// Records an input file's digest under its basename.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.inputs.push((name, sha256_hex(&bytes)));
        self.inputs.sort();
        Ok(())
    }

    fn comment_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# tool_version: {}", self.tool_version),
            format!("# config_hash: {}", self.config_hash),
            format!("# seed: {}", self.seed),
        ];
        for (name, digest) in &self.inputs {
            lines.push(format!("# input: {name} sha256:{digest}"));
        }
        lines
    }
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Canonical hash of any serializable configuration value.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(value)?.as_bytes()))
}

/// A JSON report envelope: provenance plus a payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub provenance: Provenance,
    pub body: T,
}

/// Writes a JSON report file.
pub fn write_json<T: Serialize>(path: &Path, provenance: &Provenance, body: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let report = Report {
        provenance: provenance.clone(),
        body,
    };
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads back a JSON report file.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Report<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn csv_writer(path: &Path, provenance: &Provenance) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in provenance.comment_lines() {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(csv::Writer::from_writer(w))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Bias report CSV: one row per metric x group pair x subtask x model.
pub fn write_bias_csv(path: &Path, provenance: &Provenance, rows: &[BiasReportRow]) -> Result<()> {
    let mut w = csv_writer(path, provenance)?;
    let io_err = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));
    w.write_record([
        "metric",
        "protected",
        "reference",
        "subtask",
        "model_id",
        "population",
        "value",
        "p_value",
        "directional",
        "note",
    ])
    .map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.metric.name(),
            &r.protected,
            &r.reference,
            &r.subtask,
            &r.model_id,
            r.population.name(),
            &fmt_opt(r.value),
            &fmt_opt(r.p_value),
            if r.directional { "1" } else { "0" },
            r.note.as_deref().unwrap_or(""),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Gap CSV: subtask, model_id, metric(DP|EO), group_a, group_b, k,
/// value, rounds.
pub fn write_gaps_csv(path: &Path, provenance: &Provenance, rows: &[GapRow]) -> Result<()> {
    let mut w = csv_writer(path, provenance)?;
    let io_err = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));
    w.write_record([
        "subtask", "model_id", "metric", "group_a", "group_b", "k", "value", "rounds",
    ])
    .map_err(io_err)?;
    for r in rows {
        w.write_record([
            &r.subtask,
            &r.model_id,
            r.gap_kind.name(),
            &r.protected,
            &r.reference,
            &r.k.to_string(),
            &fmt_opt(r.value),
            &r.rounds.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Score table CSV: subtask, pool_id (empty for pointwise),
/// candidate_id, group, score, mode.
pub fn write_scores_csv(
    path: &Path,
    provenance: &Provenance,
    tables: &[ScoreTable],
    group_of: impl Fn(&str, &str) -> Option<String>,
) -> Result<()> {
    let mut w = csv_writer(path, provenance)?;
    let io_err = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));
    w.write_record(["subtask", "pool_id", "candidate_id", "group", "score", "mode"])
        .map_err(io_err)?;
    for table in tables {
        let mode = match table.mode {
            ScoreMode::Pointwise => "pointwise",
            ScoreMode::Pairwise => "pairwise",
        };
        for (candidate, score) in &table.entries {
            w.write_record([
                &table.subtask,
                table.pool_id.as_deref().unwrap_or(""),
                candidate,
                &group_of(&table.subtask, candidate).unwrap_or_default(),
                &format!("{score}"),
                mode,
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Selection outcome CSV: pool_id, rank, candidate_id, group, score,
/// selected(0/1).
pub fn write_outcomes_csv(
    path: &Path,
    provenance: &Provenance,
    outcomes: &[(SelectionOutcome, ScoreTable)],
    candidates: &std::collections::BTreeMap<String, CandidateRecord>,
) -> Result<()> {
    let mut w = csv_writer(path, provenance)?;
    let io_err = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));
    w.write_record(["pool_id", "rank", "candidate_id", "group", "score", "selected"])
        .map_err(io_err)?;
    for (outcome, scores) in outcomes {
        for (pos, candidate) in outcome.ranking.iter().enumerate() {
            let group = candidates
                .get(candidate)
                .map(|r| r.group.clone())
                .unwrap_or_default();
            let score = scores.score_of(candidate).unwrap_or(f64::NAN);
            let selected = if outcome.is_selected(candidate) { "1" } else { "0" };
            w.write_record([
                outcome.pool_id.as_str(),
                &(pos + 1).to_string(),
                candidate,
                &group,
                &format!("{score}"),
                selected,
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Flat CSV exports of a validity report: correlations, rankings with
/// NDCG, and long-form plot data.
pub fn write_validity_csv(
    dir: &Path,
    provenance: &Provenance,
    report: &ValidityReport,
) -> Result<()> {
    let io_err = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));

    let mut w = csv_writer(&dir.join("validity_correlations.csv"), provenance)?;
    w.write_record([
        "slice", "metric", "gap_kind", "protected", "reference", "k", "r", "p_value", "points",
    ])
    .map_err(io_err)?;
    let all = report
        .overall
        .iter()
        .map(|r| ("overall", r))
        .chain(report.per_group.iter().map(|r| ("per_group", r)))
        .chain(report.per_k.iter().map(|r| ("per_k", r)));
    for (slice, r) in all {
        w.write_record([
            slice,
            r.metric.name(),
            r.gap_kind.name(),
            r.protected.as_deref().unwrap_or(""),
            r.reference.as_deref().unwrap_or(""),
            &r.k.map(|k| k.to_string()).unwrap_or_default(),
            &format!("{}", r.r),
            &format!("{}", r.p_value),
            &r.points.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::io(&dir.join("validity_correlations.csv"), e))?;

    let mut w = csv_writer(&dir.join("validity_rankings.csv"), provenance)?;
    w.write_record([
        "metric", "gap_kind", "subtask", "k", "n", "ndcg", "metric_order", "ideal_order",
    ])
    .map_err(io_err)?;
    for c in &report.rankings {
        for (i, v) in c.ndcg.iter().enumerate() {
            w.write_record([
                c.metric.name(),
                c.gap_kind.name(),
                &c.subtask,
                &c.k.to_string(),
                &(i + 1).to_string(),
                &format!("{v}"),
                &c.metric_ranking.order.join("|"),
                &c.ideal_ranking.order.join("|"),
            ])
            .map_err(io_err)?;
        }
    }
    for m in &report.mean_ndcg {
        for (i, v) in m.ndcg.iter().enumerate() {
            w.write_record([
                m.metric.name(),
                m.gap_kind.name(),
                "<mean>",
                &m.k.to_string(),
                &(i + 1).to_string(),
                &format!("{v}"),
                "",
                "",
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::io(&dir.join("validity_rankings.csv"), e))?;

    let mut w = csv_writer(&dir.join("validity_pairs.csv"), provenance)?;
    w.write_record([
        "metric",
        "gap_kind",
        "model_id",
        "subtask",
        "protected",
        "reference",
        "k",
        "metric_value",
        "gap_value",
    ])
    .map_err(io_err)?;
    for p in &report.pairs {
        w.write_record([
            p.metric.name(),
            p.gap_kind.name(),
            &p.model_id,
            &p.subtask,
            &p.protected,
            &p.reference,
            &p.k.to_string(),
            &format!("{}", p.metric_value),
            &format!("{}", p.gap_value),
        ])
        .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::io(&dir.join("validity_pairs.csv"), e))
}
