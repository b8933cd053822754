//! Bias-report assembly: enumerates (metric, protected group, population)
//! rows for one subtask and model against a reference group.
//!
//! Pointwise inputs yield RABBI, the average score gap, JSD, and EMD;
//! pairwise inputs yield RABBI (over pooled tournament scores) and the
//! consistent-preference rate. Distribution metrics only apply to
//! pointwise scores. Every metric is computed twice: on the full groups
//! and on their qualified subsets, which is what equal-opportunity gaps
//! are compared against.

use std::collections::BTreeMap;

use crate::data::{CandidateRecord, PairwiseResponse};
use crate::error::{Error, Result};
use crate::metrics::{
    self, BiasMetric, BinningRule, GroupScoreSample, PValueOptions,
};
use crate::report::{BiasReportRow, Population};
use crate::scoring::{self, ScoreTable};

/// Options shared by the row builders.
#[derive(Debug, Clone, Copy)]
pub struct AuditOptions {
    pub binning: BinningRule,
    /// Attach the Mann-Whitney significance approximation to RABBI rows.
    pub include_p_values: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            binning: BinningRule::default(),
            include_p_values: true,
        }
    }
}

/// Sorted group names, with the reference verified present.
fn group_roster(records: &[CandidateRecord], reference: &str) -> Result<Vec<String>> {
    let mut groups: Vec<String> = records
        .iter()
        .map(|r| r.group.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if !groups.iter().any(|g| g == reference) {
        return Err(Error::InvalidConfig(format!(
            "reference group {reference:?} not present in data"
        )));
    }
    groups.retain(|g| g != reference);
    Ok(groups)
}

/// Collects per-group score observations from one or more score tables.
///
/// Every table entry must resolve to a known candidate. A candidate
/// scored in several pool-local tables contributes one observation per
/// table.
pub fn collect_group_scores(
    records: &[CandidateRecord],
    tables: &[&ScoreTable],
    qualified_only: bool,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let index = crate::data::index_candidates(records)?;
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for record in records {
        by_group.entry(record.group.clone()).or_default();
    }
    for table in tables {
        for (candidate, score) in &table.entries {
            let record = index.get(candidate).ok_or_else(|| Error::UnknownCandidate {
                candidate_id: candidate.clone(),
                context: format!("score table for subtask {:?}", table.subtask),
            })?;
            if qualified_only && !record.qualified {
                continue;
            }
            by_group.get_mut(&record.group).expect("seeded above").push(*score);
        }
    }
    Ok(by_group)
}

struct RowBuilder<'a> {
    subtask: &'a str,
    model_id: &'a str,
    reference: &'a str,
    population: Population,
    rows: Vec<BiasReportRow>,
}

impl<'a> RowBuilder<'a> {
    fn push_value(
        &mut self,
        metric: BiasMetric,
        protected: &str,
        value: Option<f64>,
        p_value: Option<f64>,
        note: Option<String>,
    ) {
        self.rows.push(BiasReportRow {
            metric,
            protected: protected.to_string(),
            reference: self.reference.to_string(),
            subtask: self.subtask.to_string(),
            model_id: self.model_id.to_string(),
            population: self.population,
            value,
            p_value,
            directional: metric.directional(),
            note,
        });
    }

    fn push_undefined(&mut self, metrics: &[BiasMetric], protected: &str, reason: &str) {
        for metric in metrics {
            self.push_value(*metric, protected, None, None, Some(reason.to_string()));
        }
    }
}

const POINTWISE_METRICS: [BiasMetric; 4] = [
    BiasMetric::Rabbi,
    BiasMetric::DeltaPointwise,
    BiasMetric::Jsd,
    BiasMetric::Emd,
];

/// Builds bias rows from a pointwise score table for one subtask.
pub fn pointwise_bias_rows(
    records: &[CandidateRecord],
    table: &ScoreTable,
    model_id: &str,
    reference: &str,
    opts: &AuditOptions,
) -> Result<Vec<BiasReportRow>> {
    let protected_groups = group_roster(records, reference)?;
    let mut rows = Vec::new();

    for population in [Population::Full, Population::Qualified] {
        let qualified_only = population == Population::Qualified;
        let by_group = collect_group_scores(records, &[table], qualified_only)?;
        let mut builder = RowBuilder {
            subtask: &table.subtask,
            model_id,
            reference,
            population,
            rows: Vec::new(),
        };

        let reference_sample =
            GroupScoreSample::new(reference, by_group[reference].clone()).ok();

        for protected in &protected_groups {
            let scores = by_group[protected].clone();
            let (Some(ref_sample), Ok(sample)) = (
                reference_sample.as_ref(),
                GroupScoreSample::new(protected, scores),
            ) else {
                let reason = if qualified_only {
                    "empty qualified subset"
                } else {
                    "empty group sample"
                };
                builder.push_undefined(&POINTWISE_METRICS, protected, reason);
                continue;
            };

            let rabbi = metrics::rabbi(&sample, ref_sample)?;
            let p_value = if opts.include_p_values {
                Some(metrics::rabbi_p_value_with(
                    &sample,
                    ref_sample,
                    PValueOptions::default(),
                )?)
            } else {
                None
            };
            builder.push_value(BiasMetric::Rabbi, protected, Some(rabbi.value), p_value, None);

            let delta = metrics::delta_pointwise(&sample, ref_sample)?;
            builder.push_value(BiasMetric::DeltaPointwise, protected, Some(delta.value), None, None);

            let jsd = metrics::jsd(&sample, ref_sample, opts.binning)?;
            builder.push_value(BiasMetric::Jsd, protected, Some(jsd.value), None, None);

            let emd = metrics::emd(&sample, ref_sample)?;
            builder.push_value(BiasMetric::Emd, protected, Some(emd.value), None, None);
        }
        rows.extend(builder.rows);
    }
    Ok(rows)
}

/// Builds bias rows from pairwise responses for one subtask.
///
/// RABBI is computed over tournament scores pooled across the subtask's
/// pools; scores are pool-local ranks in [0, n-1], so pooling assumes
/// the subtask's pools share one size. The preference rate comes
/// straight from the responses. For the qualified population, cross
/// pairs are restricted to qualified candidates on both sides.
pub fn pairwise_bias_rows(
    records: &[CandidateRecord],
    responses: &[PairwiseResponse],
    model_id: &str,
    reference: &str,
    opts: &AuditOptions,
) -> Result<Vec<BiasReportRow>> {
    let subtask = match responses.first() {
        Some(r) => r.subtask.clone(),
        None => return Err(Error::NoResponses),
    };
    let protected_groups = group_roster(records, reference)?;
    let tables = scoring::pairwise_score_tables(responses)?;
    let table_refs: Vec<&ScoreTable> = tables.iter().collect();

    let full_groups: BTreeMap<String, String> = records
        .iter()
        .map(|r| (r.candidate_id.clone(), r.group.clone()))
        .collect();
    let qualified_groups: BTreeMap<String, String> = records
        .iter()
        .filter(|r| r.qualified)
        .map(|r| (r.candidate_id.clone(), r.group.clone()))
        .collect();

    let mut rows = Vec::new();
    for population in [Population::Full, Population::Qualified] {
        let qualified_only = population == Population::Qualified;
        let by_group = collect_group_scores(records, &table_refs, qualified_only)?;
        let groups_map = if qualified_only {
            &qualified_groups
        } else {
            &full_groups
        };
        let mut builder = RowBuilder {
            subtask: &subtask,
            model_id,
            reference,
            population,
            rows: Vec::new(),
        };

        let reference_sample =
            GroupScoreSample::new(reference, by_group[reference].clone()).ok();

        for protected in &protected_groups {
            match (
                reference_sample.as_ref(),
                GroupScoreSample::new(protected, by_group[protected].clone()),
            ) {
                (Some(ref_sample), Ok(sample)) => {
                    let rabbi = metrics::rabbi(&sample, ref_sample)?;
                    let p_value = if opts.include_p_values {
                        Some(metrics::rabbi_p_value(&sample, ref_sample)?)
                    } else {
                        None
                    };
                    builder.push_value(
                        BiasMetric::Rabbi,
                        protected,
                        Some(rabbi.value),
                        p_value,
                        None,
                    );
                }
                _ => {
                    let reason = if qualified_only {
                        "empty qualified subset"
                    } else {
                        "empty group sample"
                    };
                    builder.push_undefined(&[BiasMetric::Rabbi], protected, reason);
                }
            }

            match metrics::delta_pairwise(responses, groups_map, protected, reference) {
                Ok(delta) => builder.push_value(
                    BiasMetric::DeltaPairwise,
                    protected,
                    Some(delta.value),
                    None,
                    None,
                ),
                Err(Error::NoCrossPairs { .. }) => {
                    let reason = if qualified_only {
                        "no qualified cross-group pairs"
                    } else {
                        "no cross-group pairs"
                    };
                    builder.push_undefined(&[BiasMetric::DeltaPairwise], protected, reason);
                }
                Err(e) => return Err(e),
            }
        }
        rows.extend(builder.rows);
    }
    Ok(rows)
}
