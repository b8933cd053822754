//! Shared domain types and the line-delimited JSON file formats for
//! candidate records, predictions, and candidate pools.
//!
//! All loaders validate type invariants on the way in and report the
//! offending line number for malformed input. Loaded data is immutable;
//! the readers are safe for concurrent use on distinct files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One candidate's identity, group membership, and qualification flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub candidate_id: String,
    pub group: String,
    pub subtask: String,
    pub qualified: bool,
}

impl CandidateRecord {
    fn validate(&self) -> Result<()> {
        if self.candidate_id.is_empty() {
            return Err(Error::InvalidRecord {
                candidate_id: self.candidate_id.clone(),
                message: "empty candidate_id".into(),
            });
        }
        if self.group.is_empty() {
            return Err(Error::InvalidRecord {
                candidate_id: self.candidate_id.clone(),
                message: "empty group".into(),
            });
        }
        Ok(())
    }
}

/// Prediction evidence for one candidate: either raw (possibly
/// unnormalized) label probabilities or a precomputed scalar score.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionEvidence {
    LabelProbs(BTreeMap<String, f64>),
    Score(f64),
}

/// A pointwise prediction attached to a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwisePrediction {
    pub candidate_id: String,
    pub evidence: PredictionEvidence,
}

/// Verdict of a single ordered pairwise prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    First,
    Second,
    Tie,
    Invalid,
}

/// Surface forms accepted for a tie verdict in input files. Fixed and
/// documented: models phrase "both are equally good" in several ways.
pub const TIE_ALIASES: &[&str] = &["tie", "both", "equal", "equally good", "draw"];

impl Verdict {
    /// Parses a raw verdict string, applying the tie alias table.
    pub fn parse(raw: &str) -> Option<Verdict> {
        let folded = raw.trim().to_lowercase();
        match folded.as_str() {
            "first" => Some(Verdict::First),
            "second" => Some(Verdict::Second),
            "invalid" => Some(Verdict::Invalid),
            other => {
                if TIE_ALIASES.contains(&other) {
                    Some(Verdict::Tie)
                } else {
                    None
                }
            }
        }
    }
}

/// One ordered pairwise prompt outcome: the model was shown `first` then
/// `second` and produced `verdict`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseResponse {
    pub subtask: String,
    pub pool_id: String,
    pub first: String,
    pub second: String,
    pub verdict: Verdict,
}

impl PairwiseResponse {
    /// The unordered pair key, lexicographically normalized.
    pub fn pair_key(&self) -> (String, String) {
        if self.first <= self.second {
            (self.first.clone(), self.second.clone())
        } else {
            (self.second.clone(), self.first.clone())
        }
    }
}

/// An ordered list of labels with their relevance values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScale {
    pub labels: Vec<LabelRelevance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRelevance {
    pub label: String,
    pub relevance: f64,
}

impl LabelScale {
    pub fn new(pairs: &[(&str, f64)]) -> Result<Self> {
        let scale = LabelScale {
            labels: pairs
                .iter()
                .map(|(l, r)| LabelRelevance {
                    label: (*l).to_string(),
                    relevance: *r,
                })
                .collect(),
        };
        scale.validate()?;
        Ok(scale)
    }

    /// The conventional binary screening scale {No: 0, Yes: 1}.
    pub fn yes_no() -> Self {
        LabelScale::new(&[("No", 0.0), ("Yes", 1.0)]).expect("static scale is valid")
    }

    /// A 1..=5 rating scale where each label is the digit itself.
    pub fn rating_1_to_5() -> Self {
        LabelScale::new(&[
            ("1", 1.0),
            ("2", 2.0),
            ("3", 3.0),
            ("4", 4.0),
            ("5", 5.0),
        ])
        .expect("static scale is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::InvalidScale("no labels".into()));
        }
        let mut seen = BTreeSet::new();
        for entry in &self.labels {
            if !seen.insert(entry.label.as_str()) {
                return Err(Error::InvalidScale(format!(
                    "duplicate label {:?}",
                    entry.label
                )));
            }
            if !entry.relevance.is_finite() {
                return Err(Error::InvalidScale(format!(
                    "non-finite relevance for label {:?}",
                    entry.label
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|e| e.label == label)
    }

    pub fn relevance_of(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .find(|e| e.label == label)
            .map(|e| e.relevance)
    }

    pub fn min_relevance(&self) -> f64 {
        self.labels
            .iter()
            .map(|e| e.relevance)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_relevance(&self) -> f64 {
        self.labels
            .iter()
            .map(|e| e.relevance)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn known_labels(&self) -> String {
        self.labels
            .iter()
            .map(|e| e.label.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// One selection round: a pool of candidates and the quota `k` to select.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub pool_id: String,
    pub subtask: String,
    pub members: Vec<String>,
    pub k: usize,
}

impl PoolSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.members.len();
        if self.k < 1 || self.k >= n {
            return Err(Error::InvalidPool {
                pool_id: self.pool_id.clone(),
                message: format!("quota k={} must satisfy 1 <= k < n={}", self.k, n),
            });
        }
        let mut seen = BTreeSet::new();
        for m in &self.members {
            if !seen.insert(m.as_str()) {
                return Err(Error::InvalidPool {
                    pool_id: self.pool_id.clone(),
                    message: format!("duplicate member {m:?}"),
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Line schemas
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PointwiseLine {
    candidate_id: String,
    group: String,
    subtask: String,
    qualified: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_probs: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct PairwiseLine {
    subtask: String,
    pool_id: String,
    first: String,
    second: String,
    verdict: String,
}

// ---------------------------------------------------------------------------
// Loaders
// ---------------------------------------------------------------------------

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((idx + 1, line));
    }
    Ok(out)
}

fn malformed(path: &Path, line: usize, err: impl std::fmt::Display) -> Error {
    Error::MalformedLine {
        path: path.display().to_string(),
        line,
        message: err.to_string(),
    }
}

/// Loads pointwise predictions together with their candidate records.
///
/// Every record is validated against the type invariants; when
/// `label_probs` is present, its labels are restricted to those defined by
/// `scale`.
pub fn load_pointwise(
    path: &Path,
    scale: &LabelScale,
) -> Result<Vec<(CandidateRecord, PointwisePrediction)>> {
    scale.validate()?;
    let mut out = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (line_no, line) in read_lines(path)? {
        let parsed: PointwiseLine =
            serde_json::from_str(&line).map_err(|e| malformed(path, line_no, e))?;
        let record = CandidateRecord {
            candidate_id: parsed.candidate_id.clone(),
            group: parsed.group,
            subtask: parsed.subtask,
            qualified: parsed.qualified != 0,
        };
        record.validate()?;
        if !seen.insert((record.subtask.clone(), record.candidate_id.clone())) {
            return Err(Error::DuplicateCandidate {
                candidate_id: record.candidate_id,
                subtask: record.subtask,
            });
        }
        let evidence = match (parsed.label_probs, parsed.score) {
            (Some(probs), None) => {
                let mut positive = false;
                for (label, p) in &probs {
                    if !scale.contains(label) {
                        return Err(Error::UnknownLabel {
                            label: label.clone(),
                            known: scale.known_labels(),
                        });
                    }
                    if !p.is_finite() || *p < 0.0 {
                        return Err(malformed(
                            path,
                            line_no,
                            format!("probability for label {label:?} must be finite and >= 0"),
                        ));
                    }
                    positive |= *p > 0.0;
                }
                if !positive {
                    return Err(malformed(
                        path,
                        line_no,
                        "label_probs must contain at least one positive probability",
                    ));
                }
                PredictionEvidence::LabelProbs(probs)
            }
            (None, Some(score)) => {
                if !score.is_finite() {
                    return Err(malformed(path, line_no, "score must be finite"));
                }
                PredictionEvidence::Score(score)
            }
            _ => {
                return Err(malformed(
                    path,
                    line_no,
                    "exactly one of label_probs / score must be present",
                ));
            }
        };
        let prediction = PointwisePrediction {
            candidate_id: parsed.candidate_id,
            evidence,
        };
        out.push((record, prediction));
    }
    Ok(out)
}

/// Pairwise responses plus warnings about missing reverse-order records.
#[derive(Debug, Clone)]
pub struct PairwiseLoad {
    pub responses: Vec<PairwiseResponse>,
    /// One entry per (pool, ordered pair) whose opposite order is absent.
    pub missing_orders: Vec<String>,
}

/// Loads pairwise responses.
///
/// Both orders of each unordered pair are expected per pool; missing
/// orders are reported as warnings, not errors.
pub fn load_pairwise(path: &Path) -> Result<PairwiseLoad> {
    let mut responses = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let parsed: PairwiseLine =
            serde_json::from_str(&line).map_err(|e| malformed(path, line_no, e))?;
        if parsed.first == parsed.second {
            return Err(malformed(
                path,
                line_no,
                format!("first == second ({:?})", parsed.first),
            ));
        }
        let verdict = Verdict::parse(&parsed.verdict)
            .ok_or_else(|| malformed(path, line_no, format!("unknown verdict {:?}", parsed.verdict)))?;
        responses.push(PairwiseResponse {
            subtask: parsed.subtask,
            pool_id: parsed.pool_id,
            first: parsed.first,
            second: parsed.second,
            verdict,
        });
    }
    let missing_orders = find_missing_orders(&responses);
    Ok(PairwiseLoad {
        responses,
        missing_orders,
    })
}

fn find_missing_orders(responses: &[PairwiseResponse]) -> Vec<String> {
    let mut ordered: BTreeSet<(String, String, String)> = BTreeSet::new();
    for r in responses {
        ordered.insert((r.pool_id.clone(), r.first.clone(), r.second.clone()));
    }
    let mut missing = Vec::new();
    for (pool, first, second) in &ordered {
        if !ordered.contains(&(pool.clone(), second.clone(), first.clone())) {
            missing.push(format!(
                "pool {pool:?}: response ({first:?}, {second:?}) has no reverse-order record"
            ));
        }
    }
    missing
}

#[derive(Serialize, Deserialize)]
struct CandidateLine {
    candidate_id: String,
    group: String,
    subtask: String,
    qualified: u8,
}

/// Loads a candidate roster (no prediction evidence).
pub fn load_candidates(path: &Path) -> Result<Vec<CandidateRecord>> {
    let mut records = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (line_no, line) in read_lines(path)? {
        let parsed: CandidateLine =
            serde_json::from_str(&line).map_err(|e| malformed(path, line_no, e))?;
        let record = CandidateRecord {
            candidate_id: parsed.candidate_id,
            group: parsed.group,
            subtask: parsed.subtask,
            qualified: parsed.qualified != 0,
        };
        record.validate()?;
        if !seen.insert((record.subtask.clone(), record.candidate_id.clone())) {
            return Err(Error::DuplicateCandidate {
                candidate_id: record.candidate_id,
                subtask: record.subtask,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes a candidate roster.
pub fn write_candidates(path: &Path, records: &[CandidateRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = CandidateLine {
            candidate_id: r.candidate_id.clone(),
            group: r.group.clone(),
            subtask: r.subtask.clone(),
            qualified: u8::from(r.qualified),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads pool specifications.
pub fn load_pools(path: &Path) -> Result<Vec<PoolSpec>> {
    let mut pools = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let pool: PoolSpec =
            serde_json::from_str(&line).map_err(|e| malformed(path, line_no, e))?;
        pool.validate()?;
        pools.push(pool);
    }
    Ok(pools)
}

// ---------------------------------------------------------------------------
// Writers (same formats, used by the synthetic generator and the client)
// ---------------------------------------------------------------------------

/// Writes pointwise prediction lines.
pub fn write_pointwise(
    path: &Path,
    rows: &[(CandidateRecord, PointwisePrediction)],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (record, pred) in rows {
        let (label_probs, score) = match &pred.evidence {
            PredictionEvidence::LabelProbs(p) => (Some(p.clone()), None),
            PredictionEvidence::Score(s) => (None, Some(*s)),
        };
        let line = PointwiseLine {
            candidate_id: record.candidate_id.clone(),
            group: record.group.clone(),
            subtask: record.subtask.clone(),
            qualified: u8::from(record.qualified),
            label_probs,
            score,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes pairwise response lines.
pub fn write_pairwise(path: &Path, responses: &[PairwiseResponse]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in responses {
        let line = PairwiseLine {
            subtask: r.subtask.clone(),
            pool_id: r.pool_id.clone(),
            first: r.first.clone(),
            second: r.second.clone(),
            verdict: match r.verdict {
                Verdict::First => "first".into(),
                Verdict::Second => "second".into(),
                Verdict::Tie => "tie".into(),
                Verdict::Invalid => "invalid".into(),
            },
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes pool specification lines.
pub fn write_pools(path: &Path, pools: &[PoolSpec]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for pool in pools {
        serde_json::to_writer(&mut w, pool)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Dataset validation
// ---------------------------------------------------------------------------

/// A single cross-reference or consistency problem found in a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    pub kind: String,
    pub detail: String,
}

/// Summary counts and issues from [`validate_dataset`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    /// (subtask, group) -> candidate count.
    pub group_counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub candidate_total: usize,
    pub pool_total: usize,
    pub issues: Vec<ValidationIssue>,
    pub warnings: Vec<String>,
}

impl ValidationSummary {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Cross-references every pool member against the candidate records and
/// summarizes per-group counts.
pub fn validate_dataset(records: &[CandidateRecord], pools: &[PoolSpec]) -> ValidationSummary {
    let mut group_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut known: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut issues = Vec::new();

    for r in records {
        *group_counts
            .entry(r.subtask.clone())
            .or_default()
            .entry(r.group.clone())
            .or_default() += 1;
        if !known.insert((r.subtask.as_str(), r.candidate_id.as_str())) {
            issues.push(ValidationIssue {
                kind: "duplicate-candidate".into(),
                detail: format!(
                    "candidate {:?} appears more than once in subtask {:?}",
                    r.candidate_id, r.subtask
                ),
            });
        }
    }

    for pool in pools {
        for member in &pool.members {
            if !known.contains(&(pool.subtask.as_str(), member.as_str())) {
                issues.push(ValidationIssue {
                    kind: "dangling-reference".into(),
                    detail: format!(
                        "pool {:?} references unknown candidate {:?} in subtask {:?}",
                        pool.pool_id, member, pool.subtask
                    ),
                });
            }
        }
    }

    ValidationSummary {
        group_counts,
        candidate_total: records.len(),
        pool_total: pools.len(),
        issues,
        warnings: Vec::new(),
    }
}

/// Builds a candidate_id -> record index for one subtask's records.
///
/// Candidate ids are only unique within a subtask, so callers filter
/// first; mixed subtasks are rejected to catch that mistake early.
pub fn index_candidates(records: &[CandidateRecord]) -> Result<BTreeMap<String, CandidateRecord>> {
    let mut index = BTreeMap::new();
    let mut subtask: Option<&str> = None;
    for r in records {
        match subtask {
            None => subtask = Some(&r.subtask),
            Some(s) if s != r.subtask => {
                return Err(Error::MixedInput {
                    what: "subtasks".into(),
                    a: s.to_string(),
                    b: r.subtask.clone(),
                });
            }
            _ => {}
        }
        if index.insert(r.candidate_id.clone(), r.clone()).is_some() {
            return Err(Error::DuplicateCandidate {
                candidate_id: r.candidate_id.clone(),
                subtask: r.subtask.clone(),
            });
        }
    }
    Ok(index)
}

/// Distinct subtasks present in a record set, sorted.
pub fn subtasks(records: &[CandidateRecord]) -> Vec<String> {
    let set: BTreeSet<&str> = records.iter().map(|r| r.subtask.as_str()).collect();
    set.into_iter().map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    #[test]
    fn load_pointwise_two_valid_lines() {
        let f = write_tmp(&[
            r#"{"candidate_id":"a","group":"G1","subtask":"t","qualified":1,"label_probs":{"Yes":0.8,"No":0.1}}"#,
            r#"{"candidate_id":"b","group":"G2","subtask":"t","qualified":0,"score":0.4}"#,
        ]);
        let rows = load_pointwise(f.path(), &LabelScale::yes_no()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0.candidate_id, "a");
        assert!(rows[0].0.qualified);
        assert!(matches!(rows[1].1.evidence, PredictionEvidence::Score(s) if s == 0.4));
    }

    #[test]
    fn load_pointwise_rejects_unknown_label() {
        let f = write_tmp(&[
            r#"{"candidate_id":"a","group":"G1","subtask":"t","qualified":0,"label_probs":{"Maybe":1.0}}"#,
        ]);
        let err = load_pointwise(f.path(), &LabelScale::yes_no()).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { ref label, .. } if label == "Maybe"));
    }

    #[test]
    fn load_pointwise_resume_task_shape() {
        // 8 groups x 100 candidates, like the resume screening setup.
        let mut lines = Vec::new();
        for g in 0..8 {
            for c in 0..100 {
                lines.push(format!(
                    r#"{{"candidate_id":"g{g}_c{c}","group":"G{g}","subtask":"job","qualified":1,"score":0.5}}"#
                ));
            }
        }
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let f = write_tmp(&refs);
        let rows = load_pointwise(f.path(), &LabelScale::yes_no()).unwrap();
        assert_eq!(rows.len(), 800);
        let records: Vec<CandidateRecord> = rows.iter().map(|(r, _)| r.clone()).collect();
        let summary = validate_dataset(&records, &[]);
        let counts = &summary.group_counts["job"];
        assert_eq!(counts.len(), 8);
        assert!(counts.values().all(|&c| c == 100));
    }

    #[test]
    fn load_pointwise_rejects_duplicates_and_reports_line_numbers() {
        let f = write_tmp(&[
            r#"{"candidate_id":"a","group":"G","subtask":"t","qualified":0,"score":1.0}"#,
            r#"{"candidate_id":"a","group":"G","subtask":"t","qualified":0,"score":2.0}"#,
        ]);
        let err = load_pointwise(f.path(), &LabelScale::yes_no()).unwrap_err();
        assert!(matches!(err, Error::DuplicateCandidate { .. }));

        let f = write_tmp(&[
            r#"{"candidate_id":"a","group":"G","subtask":"t","qualified":0,"score":1.0}"#,
            r#"not json"#,
        ]);
        let err = load_pointwise(f.path(), &LabelScale::yes_no()).unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 2, .. }));
    }

    #[test]
    fn load_pointwise_requires_exactly_one_evidence_kind() {
        let f = write_tmp(&[
            r#"{"candidate_id":"a","group":"G","subtask":"t","qualified":0,"label_probs":{"Yes":0.5},"score":1.0}"#,
        ]);
        assert!(load_pointwise(f.path(), &LabelScale::yes_no()).is_err());
        let f = write_tmp(&[r#"{"candidate_id":"a","group":"G","subtask":"t","qualified":0}"#]);
        assert!(load_pointwise(f.path(), &LabelScale::yes_no()).is_err());
    }

    fn pair_line(pool: &str, first: &str, second: &str, verdict: &str) -> String {
        format!(
            r#"{{"subtask":"t","pool_id":"{pool}","first":"{first}","second":"{second}","verdict":"{verdict}"}}"#
        )
    }

    #[test]
    fn load_pairwise_complete_pool_has_no_warnings() {
        let lines = [
            pair_line("p", "a", "b", "first"),
            pair_line("p", "b", "a", "second"),
            pair_line("p", "a", "c", "first"),
            pair_line("p", "c", "a", "first"),
            pair_line("p", "b", "c", "tie"),
            pair_line("p", "c", "b", "first"),
        ];
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let f = write_tmp(&refs);
        let loaded = load_pairwise(f.path()).unwrap();
        assert_eq!(loaded.responses.len(), 6);
        assert!(loaded.missing_orders.is_empty());
    }

    #[test]
    fn load_pairwise_detects_missing_order() {
        let lines = [
            pair_line("p", "a", "b", "first"),
            pair_line("p", "b", "a", "second"),
            pair_line("p", "a", "c", "first"),
            pair_line("p", "c", "a", "first"),
            pair_line("p", "b", "c", "tie"),
        ];
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let f = write_tmp(&refs);
        let loaded = load_pairwise(f.path()).unwrap();
        assert_eq!(loaded.responses.len(), 5);
        assert_eq!(loaded.missing_orders.len(), 1);
        assert!(loaded.missing_orders[0].contains("\"b\""));
    }

    #[test]
    fn load_pairwise_normalizes_tie_aliases() {
        let lines = [pair_line("p", "a", "b", "both")];
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let f = write_tmp(&refs);
        let loaded = load_pairwise(f.path()).unwrap();
        assert_eq!(loaded.responses[0].verdict, Verdict::Tie);
    }

    #[test]
    fn load_pairwise_rejects_self_pair() {
        let lines = [pair_line("p", "a", "a", "first")];
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let f = write_tmp(&refs);
        assert!(load_pairwise(f.path()).is_err());
    }

    #[test]
    fn load_pools_validates_quota() {
        let f = write_tmp(&[
            r#"{"pool_id":"p1","subtask":"t","members":["a","b","c","d","e","f","g","h"],"k":2}"#,
        ]);
        assert_eq!(load_pools(f.path()).unwrap()[0].k, 2);

        let f = write_tmp(&[
            r#"{"pool_id":"p2","subtask":"t","members":["a","b","c","d","e","f","g","h","i","j"],"k":1}"#,
        ]);
        assert_eq!(load_pools(f.path()).unwrap()[0].members.len(), 10);

        let f = write_tmp(&[r#"{"pool_id":"p3","subtask":"t","members":["a","b","c"],"k":3}"#]);
        assert!(load_pools(f.path()).is_err());

        let f = write_tmp(&[r#"{"pool_id":"p4","subtask":"t","members":["a","b","a"],"k":1}"#]);
        assert!(load_pools(f.path()).is_err());
    }

    #[test]
    fn validate_dataset_flags_dangling_reference() {
        let records = vec![
            CandidateRecord {
                candidate_id: "a".into(),
                group: "G1".into(),
                subtask: "t".into(),
                qualified: true,
            },
            CandidateRecord {
                candidate_id: "b".into(),
                group: "G2".into(),
                subtask: "t".into(),
                qualified: false,
            },
        ];
        let pool = PoolSpec {
            pool_id: "p".into(),
            subtask: "t".into(),
            members: vec!["a".into(), "b".into()],
            k: 1,
        };
        let clean = validate_dataset(&records, std::slice::from_ref(&pool));
        assert!(clean.is_clean());

        let bad_pool = PoolSpec {
            pool_id: "p".into(),
            subtask: "t".into(),
            members: vec!["a".into(), "X9".into()],
            k: 1,
        };
        let summary = validate_dataset(&records, &[bad_pool]);
        assert_eq!(summary.issues.len(), 1);
        assert_eq!(summary.issues[0].kind, "dangling-reference");
        assert!(summary.issues[0].detail.contains("X9"));
    }

    #[test]
    fn index_candidates_rejects_mixed_subtasks() {
        let records = vec![
            CandidateRecord {
                candidate_id: "a".into(),
                group: "G".into(),
                subtask: "t1".into(),
                qualified: true,
            },
            CandidateRecord {
                candidate_id: "b".into(),
                group: "G".into(),
                subtask: "t2".into(),
                qualified: true,
            },
        ];
        assert!(index_candidates(&records).is_err());
        assert!(index_candidates(&records[..1]).is_ok());
    }
}
