//! Evaluates how well bias metrics predict allocation gaps.
//!
//! Metric values are paired with simulated gaps under fixed rules:
//! equal-opportunity gaps pair with metric values computed on qualified
//! subsets, and non-directional metrics (JSD, EMD) pair with the absolute
//! gap. Agreement is summarized by Pearson correlation overall plus
//! per-group-pair and per-quota slices, and by comparing metric-induced
//! model fairness rankings against the gap-induced ideal ranking with
//! NDCG@N.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::CandidateRecord;
use crate::error::{Error, Result};
use crate::metrics::BiasMetric;
use crate::report::{BiasReportRow, GapKind, GapRow, Population};

/// One paired observation: a metric value and the allocation gap it is
/// supposed to predict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricGapPair {
    pub metric: BiasMetric,
    pub gap_kind: GapKind,
    pub model_id: String,
    pub subtask: String,
    pub protected: String,
    pub reference: String,
    pub k: usize,
    pub metric_value: f64,
    /// Absolute gap for non-directional metrics, signed otherwise.
    pub gap_value: f64,
}

/// Splits two groups' candidates down to their qualified members.
///
/// Either side may come back empty; downstream sample construction then
/// reports the error.
pub fn qualified_subset<'a>(
    records: &'a [CandidateRecord],
    a: &str,
    b: &str,
) -> (Vec<&'a CandidateRecord>, Vec<&'a CandidateRecord>) {
    let pick = |group: &str| {
        records
            .iter()
            .filter(|r| r.group == group && r.qualified)
            .collect::<Vec<_>>()
    };
    (pick(a), pick(b))
}

/// Pearson correlation coefficient of two equal-length series.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidConfig(format!(
            "series lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::SampleTooSmall {
            need: 3,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::ConstantSeries);
    }
    Ok((cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value for a Pearson correlation via the t-approximation
/// with n - 2 degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    let denom = (1.0 - r * r).max(f64::EPSILON);
    let t = r.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0)
}

/// Root mean square of a value list.
pub fn rms_aggregate(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::SampleTooSmall { need: 1, got: 0 });
    }
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    Ok((sum_sq / values.len() as f64).sqrt())
}

/// Models ordered by ascending overall bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRanking {
    /// What the aggregate values are: a metric name or a gap kind.
    pub basis: String,
    /// Model ids, least biased first.
    pub order: Vec<String>,
    /// Aggregate value per model, aligned with `order`; non-decreasing.
    pub aggregates: Vec<f64>,
}

impl FairnessRanking {
    /// 1-based rank of a model.
    pub fn rank_of(&self, model_id: &str) -> Option<usize> {
        self.order.iter().position(|m| m == model_id).map(|i| i + 1)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Ranks models by ascending aggregate bias; ties break lexicographically
/// by model id so reports are reproducible.
pub fn rank_models(aggregates: &BTreeMap<String, f64>, basis: &str) -> FairnessRanking {
    let mut items: Vec<(&String, &f64)> = aggregates.iter().collect();
    items.sort_by(|(ma, va), (mb, vb)| {
        va.partial_cmp(vb)
            .expect("aggregates are finite")
            .then_with(|| ma.cmp(mb))
    });
    FairnessRanking {
        basis: basis.to_string(),
        order: items.iter().map(|(m, _)| (*m).clone()).collect(),
        aggregates: items.iter().map(|(_, v)| **v).collect(),
    }
}

/// NDCG@N of ranking `tau` against ideal ranking `sigma`.
///
/// The relevance of a model is its reverse ideal rank: the ideal top
/// model gets relevance |models| and the ideal bottom model gets 1, so
/// placing ideal-top models early in `tau` is rewarded and
/// `ndcg_at(sigma, sigma, n) = 1` for every n.
pub fn ndcg_at(tau: &FairnessRanking, sigma: &FairnessRanking, n: usize) -> Result<f64> {
    let models: BTreeSet<&String> = tau.order.iter().collect();
    let ideal_models: BTreeSet<&String> = sigma.order.iter().collect();
    if models != ideal_models || tau.order.len() != sigma.order.len() {
        return Err(Error::MismatchedModelSets);
    }
    let count = tau.order.len();
    if n < 1 || n > count {
        return Err(Error::BadRankCutoff { n, max: count });
    }

    let sigma_max = count as f64;
    let relevance = |model: &str| -> f64 {
        let ideal_rank = sigma.rank_of(model).expect("model sets match") as f64;
        sigma_max + 1.0 - ideal_rank
    };
    let dcg = |ranking: &FairnessRanking| -> f64 {
        ranking
            .order
            .iter()
            .take(n)
            .enumerate()
            .map(|(i, model)| relevance(model) / ((i + 2) as f64).log2())
            .sum()
    };
    Ok(dcg(tau) / dcg(sigma))
}

/// Pairing and slicing policy for [`correlation_report`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairingRules {
    /// Slices with fewer paired points than this are omitted with a
    /// warning instead of reported as NaN.
    pub min_points: usize,
    pub per_group_slices: bool,
    pub per_k_slices: bool,
}

impl Default for PairingRules {
    fn default() -> Self {
        PairingRules {
            min_points: 3,
            per_group_slices: true,
            per_k_slices: true,
        }
    }
}

/// One correlation cell of the validity report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub metric: BiasMetric,
    pub gap_kind: GapKind,
    /// Present only on sliced rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protected: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub r: f64,
    pub p_value: f64,
    pub points: usize,
}

/// Ranking agreement for one (metric, gap kind, subtask, quota) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingComparison {
    pub metric: BiasMetric,
    pub gap_kind: GapKind,
    pub subtask: String,
    pub k: usize,
    pub metric_ranking: FairnessRanking,
    pub ideal_ranking: FairnessRanking,
    /// NDCG@N for N = 1..=|models|.
    pub ndcg: Vec<f64>,
}

/// Full predictive-validity evaluation output.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidityReport {
    pub overall: Vec<CorrelationRow>,
    pub per_group: Vec<CorrelationRow>,
    pub per_k: Vec<CorrelationRow>,
    pub rankings: Vec<RankingComparison>,
    /// Averaged over subtasks: (metric, gap_kind) -> NDCG@N list.
    pub mean_ndcg: Vec<MeanNdcgRow>,
    /// The paired points behind the correlations, for plotting.
    pub pairs: Vec<MetricGapPair>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanNdcgRow {
    pub metric: BiasMetric,
    pub gap_kind: GapKind,
    pub k: usize,
    pub ndcg: Vec<f64>,
}

/// Pairs bias scores with allocation gaps.
///
/// A bias row joins a gap row when (model, subtask, protected, reference)
/// match and the row's population fits the gap kind: FULL for
/// demographic parity, QUALIFIED for equal opportunity. Rows with
/// undefined values never pair.
pub fn pair_metrics_with_gaps(bias: &[BiasReportRow], gaps: &[GapRow]) -> Vec<MetricGapPair> {
    let mut by_key: BTreeMap<(&str, &str, &str, &str, Population), Vec<&BiasReportRow>> =
        BTreeMap::new();
    for row in bias {
        if row.value.is_none() {
            continue;
        }
        by_key
            .entry((
                row.model_id.as_str(),
                row.subtask.as_str(),
                row.protected.as_str(),
                row.reference.as_str(),
                row.population,
            ))
            .or_default()
            .push(row);
    }

    let mut pairs = Vec::new();
    for gap in gaps {
        let Some(gap_value) = gap.value else { continue };
        let population = match gap.gap_kind {
            GapKind::DemographicParity => Population::Full,
            GapKind::EqualOpportunity => Population::Qualified,
        };
        let Some(rows) = by_key.get(&(
            gap.model_id.as_str(),
            gap.subtask.as_str(),
            gap.protected.as_str(),
            gap.reference.as_str(),
            population,
        )) else {
            continue;
        };
        for row in rows {
            let metric_value = row.value.expect("filtered above");
            let paired_gap = if row.directional {
                gap_value
            } else {
                gap_value.abs()
            };
            pairs.push(MetricGapPair {
                metric: row.metric,
                gap_kind: gap.gap_kind,
                model_id: gap.model_id.clone(),
                subtask: gap.subtask.clone(),
                protected: gap.protected.clone(),
                reference: gap.reference.clone(),
                k: gap.k,
                metric_value,
                gap_value: paired_gap,
            });
        }
    }
    pairs
}

fn correlation_of(pairs: &[&MetricGapPair]) -> Result<(f64, f64)> {
    let xs: Vec<f64> = pairs.iter().map(|p| p.metric_value).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.gap_value).collect();
    let r = pearson(&xs, &ys)?;
    Ok((r, pearson_p_value(r, xs.len())))
}

fn checked_correlation(
    pairs: &[&MetricGapPair],
    min_points: usize,
) -> std::result::Result<(f64, f64), String> {
    if pairs.len() < min_points.max(3) {
        return Err(format!("only {} paired points", pairs.len()));
    }
    correlation_of(pairs).map_err(|e| e.to_string())
}

/// Builds the correlation side of the validity report.
pub fn correlation_report(
    bias: &[BiasReportRow],
    gaps: &[GapRow],
    rules: &PairingRules,
) -> ValidityReport {
    let pairs = pair_metrics_with_gaps(bias, gaps);
    let mut report = ValidityReport {
        pairs: pairs.clone(),
        ..ValidityReport::default()
    };

    let mut slices: BTreeMap<(BiasMetric, GapKind), Vec<&MetricGapPair>> = BTreeMap::new();
    for p in &pairs {
        slices.entry((p.metric, p.gap_kind)).or_default().push(p);
    }
    for ((metric, gap_kind), slice) in &slices {
        match checked_correlation(slice, rules.min_points) {
            Ok((r, p_value)) => report.overall.push(CorrelationRow {
                metric: *metric,
                gap_kind: *gap_kind,
                protected: None,
                reference: None,
                k: None,
                r,
                p_value,
                points: slice.len(),
            }),
            Err(reason) => report.warnings.push(format!(
                "overall slice ({}, {}) omitted: {reason}",
                metric.name(),
                gap_kind.name()
            )),
        }
    }

    if rules.per_group_slices {
        let mut group_slices: BTreeMap<(BiasMetric, GapKind, &str, &str), Vec<&MetricGapPair>> =
            BTreeMap::new();
        for p in &pairs {
            group_slices
                .entry((p.metric, p.gap_kind, &p.protected, &p.reference))
                .or_default()
                .push(p);
        }
        for ((metric, gap_kind, protected, reference), slice) in &group_slices {
            match checked_correlation(slice, rules.min_points) {
                Ok((r, p_value)) => report.per_group.push(CorrelationRow {
                    metric: *metric,
                    gap_kind: *gap_kind,
                    protected: Some((*protected).to_string()),
                    reference: Some((*reference).to_string()),
                    k: None,
                    r,
                    p_value,
                    points: slice.len(),
                }),
                Err(reason) => report.warnings.push(format!(
                    "group slice ({}, {}, {protected} vs {reference}) omitted: {reason}",
                    metric.name(),
                    gap_kind.name()
                )),
            }
        }
    }

    if rules.per_k_slices {
        let mut k_slices: BTreeMap<(BiasMetric, GapKind, usize), Vec<&MetricGapPair>> =
            BTreeMap::new();
        for p in &pairs {
            k_slices
                .entry((p.metric, p.gap_kind, p.k))
                .or_default()
                .push(p);
        }
        for ((metric, gap_kind, k), slice) in &k_slices {
            match checked_correlation(slice, rules.min_points) {
                Ok((r, p_value)) => report.per_k.push(CorrelationRow {
                    metric: *metric,
                    gap_kind: *gap_kind,
                    protected: None,
                    reference: None,
                    k: Some(*k),
                    r,
                    p_value,
                    points: slice.len(),
                }),
                Err(reason) => report.warnings.push(format!(
                    "quota slice ({}, {}, k={k}) omitted: {reason}",
                    metric.name(),
                    gap_kind.name()
                )),
            }
        }
    }

    report
}

/// Builds fairness rankings and NDCG tables at one quota.
///
/// Per (subtask, metric): models are ranked by the RMS of their metric
/// values over group pairs; the ideal ranking comes from the RMS of the
/// corresponding gaps. NDCG@N compares the two; the second return value
/// averages NDCG over subtasks per (metric, gap kind).
pub fn ranking_report(
    bias: &[BiasReportRow],
    gaps: &[GapRow],
    k: usize,
    warnings: &mut Vec<String>,
) -> (Vec<RankingComparison>, Vec<MeanNdcgRow>) {
    let pairs: Vec<MetricGapPair> = pair_metrics_with_gaps(bias, gaps)
        .into_iter()
        .filter(|p| p.k == k)
        .collect();

    type PerModel<'a> = BTreeMap<&'a str, (Vec<f64>, Vec<f64>)>;
    let mut cells: BTreeMap<(BiasMetric, GapKind, &str), PerModel> = BTreeMap::new();
    for p in &pairs {
        let per_model = cells
            .entry((p.metric, p.gap_kind, p.subtask.as_str()))
            .or_default()
            .entry(p.model_id.as_str())
            .or_default();
        per_model.0.push(p.metric_value);
        per_model.1.push(p.gap_value);
    }

    let mut comparisons = Vec::new();
    for ((metric, gap_kind, subtask), per_model) in &cells {
        let mut metric_agg = BTreeMap::new();
        let mut gap_agg = BTreeMap::new();
        for (model, (metric_values, gap_values)) in per_model {
            let m = rms_aggregate(metric_values).expect("non-empty by construction");
            let g = rms_aggregate(gap_values).expect("non-empty by construction");
            metric_agg.insert((*model).to_string(), m);
            gap_agg.insert((*model).to_string(), g);
        }
        let tau = rank_models(&metric_agg, metric.name());
        let sigma = rank_models(&gap_agg, gap_kind.name());
        let count = tau.len();
        let mut ndcg = Vec::with_capacity(count);
        let mut ok = true;
        for n in 1..=count {
            match ndcg_at(&tau, &sigma, n) {
                Ok(v) => ndcg.push(v),
                Err(e) => {
                    warnings.push(format!(
                        "ranking cell ({}, {}, {subtask}) skipped: {e}",
                        metric.name(),
                        gap_kind.name()
                    ));
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            comparisons.push(RankingComparison {
                metric: *metric,
                gap_kind: *gap_kind,
                subtask: (*subtask).to_string(),
                k,
                metric_ranking: tau,
                ideal_ranking: sigma,
                ndcg,
            });
        }
    }

    let mut grouped: BTreeMap<(BiasMetric, GapKind), Vec<&Vec<f64>>> = BTreeMap::new();
    for c in &comparisons {
        grouped
            .entry((c.metric, c.gap_kind))
            .or_default()
            .push(&c.ndcg);
    }
    let mut mean_rows = Vec::new();
    for ((metric, gap_kind), lists) in grouped {
        let max_len = lists.iter().map(|l| l.len()).max().unwrap_or(0);
        let mut mean = Vec::with_capacity(max_len);
        for i in 0..max_len {
            let values: Vec<f64> = lists.iter().filter_map(|l| l.get(i).copied()).collect();
            mean.push(values.iter().sum::<f64>() / values.len() as f64);
        }
        mean_rows.push(MeanNdcgRow {
            metric,
            gap_kind,
            k,
            ndcg: mean,
        });
    }
    (comparisons, mean_rows)
}
