//! Converts raw prediction evidence into scalar ranking scores.
//!
//! Pointwise scores are relevance-weighted sums of normalized label
//! probabilities. Pairwise scores are pool-local tournament scores built
//! from per-prompt awards: each ordered prompt awards 0.5 to the named
//! winner, or 0.25 to each candidate on a tie. Invalid responses also
//! award 0.25 each so that pool score mass is conserved; they are
//! surfaced separately in the consistency statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{LabelScale, PairwiseResponse, PointwisePrediction, PredictionEvidence, Verdict};
use crate::error::{Error, Result};

/// Which scoring method produced a [`ScoreTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    Pointwise,
    Pairwise,
}

/// Per-subtask mapping candidate -> scalar ranking score.
///
/// Pairwise scores are pool-local (`pool_id` is set) and lie in
/// `[0, n-1]` for a pool of n; pointwise scores lie in the relevance
/// range of the scale that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub subtask: String,
    pub mode: ScoreMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_id: Option<String>,
    pub entries: BTreeMap<String, f64>,
}

impl ScoreTable {
    pub fn score_of(&self, candidate_id: &str) -> Option<f64> {
        self.entries.get(candidate_id).copied()
    }
}

/// Normalizes raw label probabilities over the scale's labels.
///
/// Labels absent from the raw map are treated as zero; the output sums
/// to 1 and is proportional to the raw values.
pub fn normalize_label_probs(
    raw: &BTreeMap<String, f64>,
    scale: &LabelScale,
) -> Result<BTreeMap<String, f64>> {
    let mut mass = 0.0;
    for entry in &scale.labels {
        mass += raw.get(&entry.label).copied().unwrap_or(0.0).max(0.0);
    }
    if mass <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let mut out = BTreeMap::new();
    for entry in &scale.labels {
        let p = raw.get(&entry.label).copied().unwrap_or(0.0).max(0.0);
        out.insert(entry.label.clone(), p / mass);
    }
    Ok(out)
}

/// Pointwise ranking score: sum over labels of normalized probability
/// times the label's relevance value. Precomputed scalar scores pass
/// through untouched.
pub fn pointwise_score(pred: &PointwisePrediction, scale: &LabelScale) -> Result<f64> {
    match &pred.evidence {
        PredictionEvidence::Score(s) => Ok(*s),
        PredictionEvidence::LabelProbs(raw) => {
            let normalized = normalize_label_probs(raw, scale)?;
            let mut score = 0.0;
            for entry in &scale.labels {
                score += normalized[&entry.label] * entry.relevance;
            }
            Ok(score)
        }
    }
}

/// Scores a whole pointwise prediction set for one subtask.
pub fn pointwise_score_table(
    subtask: &str,
    preds: &[PointwisePrediction],
    scale: &LabelScale,
) -> Result<ScoreTable> {
    let mut entries = BTreeMap::new();
    for pred in preds {
        entries.insert(pred.candidate_id.clone(), pointwise_score(pred, scale)?);
    }
    Ok(ScoreTable {
        subtask: subtask.to_string(),
        mode: ScoreMode::Pointwise,
        pool_id: None,
        entries,
    })
}

/// Tournament scores for one pool from its ordered pairwise responses.
///
/// Per-prompt accounting: FIRST/SECOND award 0.5 to the winner, TIE and
/// INVALID award 0.25 to each candidate. A consistent two-order win thus
/// totals 1.0 for the winner, a flipped pair 0.5 each, and a double tie
/// 0.5 each. With complete order pairs the scores sum to n(n-1)/2.
pub fn pairwise_scores(responses: &[PairwiseResponse]) -> Result<ScoreTable> {
    let (subtask, pool_id) = single_pool_key(responses)?;
    let mut entries: BTreeMap<String, f64> = BTreeMap::new();
    for r in responses {
        entries.entry(r.first.clone()).or_insert(0.0);
        entries.entry(r.second.clone()).or_insert(0.0);
        match r.verdict {
            Verdict::First => *entries.get_mut(&r.first).unwrap() += 0.5,
            Verdict::Second => *entries.get_mut(&r.second).unwrap() += 0.5,
            Verdict::Tie | Verdict::Invalid => {
                *entries.get_mut(&r.first).unwrap() += 0.25;
                *entries.get_mut(&r.second).unwrap() += 0.25;
            }
        }
    }
    Ok(ScoreTable {
        subtask,
        mode: ScoreMode::Pairwise,
        pool_id: Some(pool_id),
        entries,
    })
}

fn single_pool_key(responses: &[PairwiseResponse]) -> Result<(String, String)> {
    let first = responses.first().ok_or(Error::NoResponses)?;
    for r in responses {
        if r.pool_id != first.pool_id {
            return Err(Error::MixedInput {
                what: "pools".into(),
                a: first.pool_id.clone(),
                b: r.pool_id.clone(),
            });
        }
        if r.subtask != first.subtask {
            return Err(Error::MixedInput {
                what: "subtasks".into(),
                a: first.subtask.clone(),
                b: r.subtask.clone(),
            });
        }
    }
    Ok((first.subtask.clone(), first.pool_id.clone()))
}

/// Scores every pool found in a pairwise response set.
pub fn pairwise_score_tables(responses: &[PairwiseResponse]) -> Result<Vec<ScoreTable>> {
    let mut by_pool: BTreeMap<(String, String), Vec<PairwiseResponse>> = BTreeMap::new();
    for r in responses {
        by_pool
            .entry((r.subtask.clone(), r.pool_id.clone()))
            .or_default()
            .push(r.clone());
    }
    by_pool.values().map(|rs| pairwise_scores(rs)).collect()
}

/// How unordered pairs resolved, as percentages over all pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseConsistencyStats {
    pub regular_pct: f64,
    pub flipped_pct: f64,
    pub tie_pct: f64,
    pub invalid_pct: f64,
    pub pair_count: usize,
}

/// Classifies each unordered pair (per pool) as Regular, Flipped, Tie,
/// or Invalid and reports percentages.
///
/// Invalid takes precedence over Tie when a pair has both kinds of
/// prompt, so data-quality problems always surface. A pair observed in
/// only one order counts as Regular when its lone prompt is decisive.
pub fn pairwise_consistency_stats(responses: &[PairwiseResponse]) -> PairwiseConsistencyStats {
    #[derive(Default)]
    struct PairState {
        winners: Vec<String>,
        ties: usize,
        invalids: usize,
    }

    let mut pairs: BTreeMap<(String, String, String), PairState> = BTreeMap::new();
    for r in responses {
        let (lo, hi) = r.pair_key();
        let state = pairs.entry((r.pool_id.clone(), lo, hi)).or_default();
        match r.verdict {
            Verdict::First => state.winners.push(r.first.clone()),
            Verdict::Second => state.winners.push(r.second.clone()),
            Verdict::Tie => state.ties += 1,
            Verdict::Invalid => state.invalids += 1,
        }
    }

    let total = pairs.len();
    let (mut regular, mut flipped, mut tie, mut invalid) = (0usize, 0usize, 0usize, 0usize);
    for state in pairs.values() {
        if state.invalids > 0 {
            invalid += 1;
        } else if state.ties > 0 {
            tie += 1;
        } else if state.winners.windows(2).all(|w| w[0] == w[1]) {
            regular += 1;
        } else {
            flipped += 1;
        }
    }

    let pct = |count: usize| {
        if total == 0 {
            0.0
        } else {
            100.0 * count as f64 / total as f64
        }
    };
    PairwiseConsistencyStats {
        regular_pct: pct(regular),
        flipped_pct: pct(flipped),
        tie_pct: pct(tie),
        invalid_pct: pct(invalid),
        pair_count: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn probs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(l, p)| (l.to_string(), *p)).collect()
    }

    fn resp(pool: &str, first: &str, second: &str, verdict: Verdict) -> PairwiseResponse {
        PairwiseResponse {
            subtask: "t".into(),
            pool_id: pool.into(),
            first: first.into(),
            second: second.into(),
            verdict,
        }
    }

    #[test]
    fn normalize_is_proportional() {
        let scale = LabelScale::yes_no();
        let out = normalize_label_probs(&probs(&[("No", 0.2), ("Yes", 0.6)]), &scale).unwrap();
        assert_relative_eq!(out["No"], 0.25);
        assert_relative_eq!(out["Yes"], 0.75);

        let out = normalize_label_probs(&probs(&[("Yes", 1.0)]), &scale).unwrap();
        assert_relative_eq!(out["No"], 0.0);
        assert_relative_eq!(out["Yes"], 1.0);

        let err = normalize_label_probs(&probs(&[("No", 0.0), ("Yes", 0.0)]), &scale).unwrap_err();
        assert!(matches!(err, Error::ZeroMass));
    }

    #[test]
    fn pointwise_score_binary_scale() {
        let scale = LabelScale::yes_no();
        let pred = PointwisePrediction {
            candidate_id: "a".into(),
            evidence: PredictionEvidence::LabelProbs(probs(&[("Yes", 0.73), ("No", 0.27)])),
        };
        assert_relative_eq!(pointwise_score(&pred, &scale).unwrap(), 0.73);

        // Unnormalized input: {No: 0.2, Yes: 0.6} -> P(Yes) = 0.75.
        let pred = PointwisePrediction {
            candidate_id: "a".into(),
            evidence: PredictionEvidence::LabelProbs(probs(&[("No", 0.2), ("Yes", 0.6)])),
        };
        assert_relative_eq!(pointwise_score(&pred, &scale).unwrap(), 0.75);
    }

    #[test]
    fn pointwise_score_rating_scale() {
        let scale = LabelScale::rating_1_to_5();
        let pred = PointwisePrediction {
            candidate_id: "a".into(),
            evidence: PredictionEvidence::LabelProbs(probs(&[
                ("1", 0.1),
                ("2", 0.2),
                ("3", 0.4),
                ("4", 0.2),
                ("5", 0.1),
            ])),
        };
        assert_relative_eq!(pointwise_score(&pred, &scale).unwrap(), 3.0);
    }

    #[test]
    fn pointwise_score_passes_precomputed_through() {
        let pred = PointwisePrediction {
            candidate_id: "a".into(),
            evidence: PredictionEvidence::Score(-2.5),
        };
        assert_relative_eq!(
            pointwise_score(&pred, &LabelScale::yes_no()).unwrap(),
            -2.5
        );
    }

    #[test]
    fn pairwise_scores_mixed_pool() {
        // a beats b both orders; a-c flipped; b-c one tie prompt, one c win.
        let responses = vec![
            resp("p", "a", "b", Verdict::First),
            resp("p", "b", "a", Verdict::Second),
            resp("p", "a", "c", Verdict::First),
            resp("p", "c", "a", Verdict::First),
            resp("p", "b", "c", Verdict::Tie),
            resp("p", "c", "b", Verdict::First),
        ];
        let table = pairwise_scores(&responses).unwrap();
        assert_relative_eq!(table.entries["a"], 1.5);
        assert_relative_eq!(table.entries["b"], 0.25);
        assert_relative_eq!(table.entries["c"], 1.25);
        assert_relative_eq!(table.entries.values().sum::<f64>(), 3.0);
    }

    #[test]
    fn pairwise_scores_dominant_and_tied_pairs() {
        let responses = vec![
            resp("p", "a", "b", Verdict::First),
            resp("p", "b", "a", Verdict::Second),
        ];
        let table = pairwise_scores(&responses).unwrap();
        assert_relative_eq!(table.entries["a"], 1.0);
        assert_relative_eq!(table.entries["b"], 0.0);

        let responses = vec![
            resp("p", "a", "b", Verdict::Tie),
            resp("p", "b", "a", Verdict::Tie),
        ];
        let table = pairwise_scores(&responses).unwrap();
        assert_relative_eq!(table.entries["a"], 0.5);
        assert_relative_eq!(table.entries["b"], 0.5);
    }

    #[test]
    fn pairwise_scores_rejects_empty_input() {
        assert!(matches!(pairwise_scores(&[]), Err(Error::NoResponses)));
    }

    #[test]
    fn consistency_stats_classification() {
        // 10 pairs, all consistent.
        let mut responses = Vec::new();
        for i in 0..10 {
            let (x, y) = (format!("x{i}"), format!("y{i}"));
            responses.push(resp("p", &x, &y, Verdict::First));
            responses.push(resp("p", &y, &x, Verdict::Second));
        }
        let stats = pairwise_consistency_stats(&responses);
        assert_relative_eq!(stats.regular_pct, 100.0);

        // 4 pairs: 2 consistent, 1 flipped, 1 with a tie -> 50/25/25/0.
        let responses = vec![
            resp("p", "a", "b", Verdict::First),
            resp("p", "b", "a", Verdict::Second),
            resp("p", "c", "d", Verdict::Second),
            resp("p", "d", "c", Verdict::First),
            resp("p", "e", "f", Verdict::First),
            resp("p", "f", "e", Verdict::First),
            resp("p", "g", "h", Verdict::Tie),
            resp("p", "h", "g", Verdict::First),
        ];
        let stats = pairwise_consistency_stats(&responses);
        assert_relative_eq!(stats.regular_pct, 50.0);
        assert_relative_eq!(stats.flipped_pct, 25.0);
        assert_relative_eq!(stats.tie_pct, 25.0);
        assert_relative_eq!(stats.invalid_pct, 0.0);
    }

    #[test]
    fn consistency_stats_invalid_precedence() {
        // One pair with both a tie and an invalid prompt counts Invalid.
        let responses = vec![
            resp("p", "a", "b", Verdict::Tie),
            resp("p", "b", "a", Verdict::Invalid),
        ];
        let stats = pairwise_consistency_stats(&responses);
        assert_relative_eq!(stats.invalid_pct, 100.0);
        assert_relative_eq!(stats.tie_pct, 0.0);
    }

    #[test]
    fn consistency_percentages_partition() {
        let responses = vec![
            resp("p", "a", "b", Verdict::First),
            resp("p", "b", "a", Verdict::First),
            resp("p", "c", "d", Verdict::Invalid),
            resp("p", "d", "c", Verdict::First),
            resp("p", "e", "f", Verdict::Tie),
            resp("p", "f", "e", Verdict::Tie),
        ];
        let stats = pairwise_consistency_stats(&responses);
        let total = stats.regular_pct + stats.flipped_pct + stats.tie_pct + stats.invalid_pct;
        assert_relative_eq!(total, 100.0, epsilon = 1e-9);
    }
}
