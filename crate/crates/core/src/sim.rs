//! Multi-round top-k selection simulation and allocation gaps.
//!
//! Pools are built per round (one candidate per group, or m sampled
//! uniformly without replacement), candidates are ranked by score
//! descending, and the top k are selected. Score ties are broken by a
//! uniform random permutation derived from (seed, pool_id) rather than
//! lexicographically, so the tie-break itself cannot inject a systematic
//! group bias. Everything is deterministic given the seeds.
//!
//! Selection rates are appearance-weighted: a candidate sampled into
//! multiple rounds counts once per appearance.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::data::{CandidateRecord, PoolSpec};
use crate::error::{Error, Result};
use crate::scoring::ScoreTable;
use crate::seed::{derive_seed, rng_from};

/// Pool construction rule for [`build_rounds`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// One candidate sampled uniformly from each group; pool size = |G|.
    OnePerGroup,
    /// `m` candidates sampled uniformly without replacement per round.
    SampleM { m: usize },
}

/// Builds `rounds` selection pools from one subtask's candidates.
///
/// Deterministic given `seed`; each round draws from its own derived
/// sub-seed, so rounds can be regenerated independently.
pub fn build_rounds(
    candidates: &[CandidateRecord],
    mode: PoolMode,
    rounds: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<PoolSpec>> {
    let subtask = match candidates.first() {
        Some(c) => c.subtask.clone(),
        None => {
            return Err(Error::EmptyGroup {
                group: "<all>".into(),
            })
        }
    };
    if let Some(other) = candidates.iter().find(|c| c.subtask != subtask) {
        return Err(Error::MixedInput {
            what: "subtasks".into(),
            a: subtask,
            b: other.subtask.clone(),
        });
    }

    let mut by_group: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for c in candidates {
        by_group
            .entry(c.group.as_str())
            .or_default()
            .push(c.candidate_id.as_str());
    }
    let all_ids: Vec<&str> = candidates.iter().map(|c| c.candidate_id.as_str()).collect();

    match mode {
        PoolMode::OnePerGroup => {
            for (group, members) in &by_group {
                if members.is_empty() {
                    return Err(Error::EmptyGroup {
                        group: (*group).to_string(),
                    });
                }
            }
        }
        PoolMode::SampleM { m } => {
            if m > all_ids.len() {
                return Err(Error::PopulationTooSmall {
                    m,
                    population: all_ids.len(),
                });
            }
            if m < 2 {
                return Err(Error::InvalidConfig(format!(
                    "sample size m={m} must be at least 2"
                )));
            }
        }
    }

    let mut pools = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let pool_id = format!("{subtask}:r{round:05}");
        let mut rng = rng_from(derive_seed(seed, &pool_id));
        let members: Vec<String> = match mode {
            PoolMode::OnePerGroup => by_group
                .values()
                .map(|ids| {
                    ids.choose(&mut rng)
                        .expect("groups verified non-empty")
                        .to_string()
                })
                .collect(),
            PoolMode::SampleM { m } => {
                let mut shuffled = all_ids.clone();
                shuffled.shuffle(&mut rng);
                shuffled.truncate(m);
                shuffled.into_iter().map(String::from).collect()
            }
        };
        let pool = PoolSpec {
            pool_id,
            subtask: subtask.clone(),
            members,
            k,
        };
        pool.validate()?;
        pools.push(pool);
    }
    Ok(pools)
}

/// One round's ranking and selected set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub pool_id: String,
    /// Pool members by score descending; rank = position + 1.
    pub ranking: Vec<String>,
    /// The top-k prefix of `ranking`, as a set.
    pub selected: Vec<String>,
    /// Sub-seed the tie-break permutation was drawn from.
    pub tie_break_seed: u64,
}

impl SelectionOutcome {
    pub fn is_selected(&self, candidate_id: &str) -> bool {
        self.selected.iter().any(|c| c == candidate_id)
    }
}

/// Ranks a pool by score descending and selects the top k.
pub fn select_top_k(pool: &PoolSpec, scores: &ScoreTable, seed: u64) -> Result<SelectionOutcome> {
    let tie_break_seed = derive_seed(seed, &pool.pool_id);
    let mut rng = rng_from(tie_break_seed);

    let mut shuffled: Vec<&str> = pool.members.iter().map(String::as_str).collect();
    shuffled.shuffle(&mut rng);
    let tie_rank: BTreeMap<&str, usize> = shuffled
        .iter()
        .enumerate()
        .map(|(pos, id)| (*id, pos))
        .collect();

    let mut ranked: Vec<(&str, f64)> = Vec::with_capacity(pool.members.len());
    for member in &pool.members {
        let score = scores
            .score_of(member)
            .ok_or_else(|| Error::MissingScore {
                candidate_id: member.clone(),
                pool_id: pool.pool_id.clone(),
            })?;
        ranked.push((member.as_str(), score));
    }
    ranked.sort_by(|(ida, sa), (idb, sb)| {
        sb.partial_cmp(sa)
            .expect("scores are finite")
            .then_with(|| tie_rank[ida].cmp(&tie_rank[idb]))
    });

    let ranking: Vec<String> = ranked.iter().map(|(id, _)| (*id).to_string()).collect();
    let selected = ranking[..pool.k].to_vec();
    Ok(SelectionOutcome {
        pool_id: pool.pool_id.clone(),
        ranking,
        selected,
        tie_break_seed,
    })
}

/// Runs [`select_top_k`] over many pools, optionally across threads.
///
/// Outcomes depend only on (pool, scores, seed), so the split across
/// `jobs` threads cannot change results; output order matches `pools`.
pub fn simulate_outcomes(
    pools: &[PoolSpec],
    score_for_pool: impl Fn(&PoolSpec) -> Option<ScoreTable> + Sync,
    seed: u64,
    jobs: usize,
) -> Result<Vec<SelectionOutcome>> {
    let run_one = |pool: &PoolSpec| -> Result<SelectionOutcome> {
        let table = score_for_pool(pool).ok_or_else(|| Error::MissingScore {
            candidate_id: "<any>".into(),
            pool_id: pool.pool_id.clone(),
        })?;
        select_top_k(pool, &table, seed)
    };

    if jobs <= 1 || pools.len() < 2 {
        return pools.iter().map(run_one).collect();
    }

    let chunk = pools.len().div_ceil(jobs);
    let mut results: Vec<Result<Vec<SelectionOutcome>>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = pools
            .chunks(chunk)
            .map(|slice| scope.spawn(move || slice.iter().map(run_one).collect()))
            .collect();
        for h in handles {
            results.push(h.join().expect("simulation thread panicked"));
        }
    });
    let mut out = Vec::with_capacity(pools.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Appearance-weighted selection counts for one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSelectionStats {
    pub total: u64,
    pub selected: u64,
    pub qualified_total: u64,
    pub qualified_selected: u64,
}

impl GroupSelectionStats {
    /// Selection rate over all appearances.
    pub fn selection_rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.selected as f64 / self.total as f64)
    }

    /// Selection rate over qualified appearances only.
    pub fn qualified_selection_rate(&self) -> Option<f64> {
        (self.qualified_total > 0)
            .then(|| self.qualified_selected as f64 / self.qualified_total as f64)
    }
}

/// Aggregates selection outcomes into per-group counts.
pub fn group_stats(
    outcomes: &[SelectionOutcome],
    candidates: &BTreeMap<String, CandidateRecord>,
) -> Result<BTreeMap<String, GroupSelectionStats>> {
    let mut stats: BTreeMap<String, GroupSelectionStats> = BTreeMap::new();
    for outcome in outcomes {
        for member in &outcome.ranking {
            let record = candidates
                .get(member)
                .ok_or_else(|| Error::UnknownCandidate {
                    candidate_id: member.clone(),
                    context: format!("outcome for pool {:?}", outcome.pool_id),
                })?;
            let entry = stats
                .entry(record.group.clone())
                .or_insert(GroupSelectionStats {
                    total: 0,
                    selected: 0,
                    qualified_total: 0,
                    qualified_selected: 0,
                });
            let selected = outcome.is_selected(member);
            entry.total += 1;
            if selected {
                entry.selected += 1;
            }
            if record.qualified {
                entry.qualified_total += 1;
                if selected {
                    entry.qualified_selected += 1;
                }
            }
        }
    }
    Ok(stats)
}

/// Demographic parity gap: selection rate of `a` minus selection rate
/// of `b`.
pub fn dp_gap(
    stats: &BTreeMap<String, GroupSelectionStats>,
    a: &str,
    b: &str,
) -> Result<f64> {
    let rate = |group: &str| -> Result<f64> {
        stats
            .get(group)
            .and_then(GroupSelectionStats::selection_rate)
            .ok_or_else(|| Error::NoAppearances {
                group: group.to_string(),
            })
    };
    Ok(rate(a)? - rate(b)?)
}

/// Equal opportunity gap: qualified selection rate of `a` minus that of
/// `b`. A group with no qualified appearances makes the gap undefined,
/// which is an explicit error rather than zero.
pub fn eo_gap(
    stats: &BTreeMap<String, GroupSelectionStats>,
    a: &str,
    b: &str,
) -> Result<f64> {
    let rate = |group: &str| -> Result<f64> {
        stats
            .get(group)
            .and_then(GroupSelectionStats::qualified_selection_rate)
            .ok_or_else(|| Error::NoQualified {
                group: group.to_string(),
            })
    };
    Ok(rate(a)? - rate(b)?)
}

/// Configuration for a full gap simulation over one subtask.
#[derive(Debug, Clone)]
pub struct GapSimConfig {
    pub mode: PoolMode,
    pub quotas: Vec<usize>,
    pub rounds: usize,
    pub seed: u64,
    pub jobs: usize,
}

/// Simulation output for one quota value.
#[derive(Debug, Clone)]
pub struct QuotaOutcomes {
    pub k: usize,
    pub pools: Vec<PoolSpec>,
    pub outcomes: Vec<SelectionOutcome>,
    pub stats: BTreeMap<String, GroupSelectionStats>,
}

/// Runs the selection simulation for every configured quota and derives
/// DP / EO gap rows for each protected group against the reference.
///
/// Pool membership and tie-break permutations depend on the seed and
/// round only, not on k, so a group's selection rate is non-decreasing
/// in k across the returned quotas. Gaps that are undefined (a group
/// with no qualified appearances) become rows with a missing value.
pub fn simulate_gaps(
    records: &[CandidateRecord],
    score_for_pool: impl Fn(&PoolSpec) -> Option<ScoreTable> + Sync,
    cfg: &GapSimConfig,
    model_id: &str,
    reference: &str,
) -> Result<(Vec<crate::report::GapRow>, Vec<QuotaOutcomes>)> {
    use crate::report::{GapKind, GapRow};

    let index = crate::data::index_candidates(records)?;
    let groups: Vec<String> = {
        let set: std::collections::BTreeSet<&str> =
            records.iter().map(|r| r.group.as_str()).collect();
        set.into_iter()
            .filter(|g| *g != reference)
            .map(String::from)
            .collect()
    };
    if !records.iter().any(|r| r.group == reference) {
        return Err(Error::InvalidConfig(format!(
            "reference group {reference:?} not present in data"
        )));
    }

    let subtask = records[0].subtask.clone();
    let mut gap_rows = Vec::new();
    let mut per_quota = Vec::new();
    for &k in &cfg.quotas {
        let pools = build_rounds(records, cfg.mode, cfg.rounds, k, cfg.seed)?;
        let outcomes = simulate_outcomes(&pools, &score_for_pool, cfg.seed, cfg.jobs)?;
        let stats = group_stats(&outcomes, &index)?;

        for protected in &groups {
            let dp = match dp_gap(&stats, protected, reference) {
                Ok(v) => Some(v),
                Err(Error::NoAppearances { .. }) => None,
                Err(e) => return Err(e),
            };
            gap_rows.push(GapRow {
                subtask: subtask.clone(),
                model_id: model_id.to_string(),
                gap_kind: GapKind::DemographicParity,
                protected: protected.clone(),
                reference: reference.to_string(),
                k,
                value: dp,
                rounds: cfg.rounds,
            });

            let eo = match eo_gap(&stats, protected, reference) {
                Ok(v) => Some(v),
                Err(Error::NoQualified { .. }) => None,
                Err(e) => return Err(e),
            };
            gap_rows.push(GapRow {
                subtask: subtask.clone(),
                model_id: model_id.to_string(),
                gap_kind: GapKind::EqualOpportunity,
                protected: protected.clone(),
                reference: reference.to_string(),
                k,
                value: eo,
                rounds: cfg.rounds,
            });
        }

        per_quota.push(QuotaOutcomes {
            k,
            pools,
            outcomes,
            stats,
        });
    }
    Ok((gap_rows, per_quota))
}

/// Like [`simulate_gaps`], but over a fixed pool list (the pools a
/// pairwise collection actually prompted) instead of freshly built
/// rounds. Each configured quota overrides the pools' stored k.
#[allow(clippy::too_many_arguments)]
pub fn simulate_gaps_with_pools(
    records: &[CandidateRecord],
    base_pools: &[PoolSpec],
    score_for_pool: impl Fn(&PoolSpec) -> Option<ScoreTable> + Sync,
    quotas: &[usize],
    rounds_label: usize,
    seed: u64,
    jobs: usize,
    model_id: &str,
    reference: &str,
) -> Result<(Vec<crate::report::GapRow>, Vec<QuotaOutcomes>)> {
    use crate::report::{GapKind, GapRow};

    let index = crate::data::index_candidates(records)?;
    if !records.iter().any(|r| r.group == reference) {
        return Err(Error::InvalidConfig(format!(
            "reference group {reference:?} not present in data"
        )));
    }
    let groups: Vec<String> = {
        let set: std::collections::BTreeSet<&str> =
            records.iter().map(|r| r.group.as_str()).collect();
        set.into_iter()
            .filter(|g| *g != reference)
            .map(String::from)
            .collect()
    };
    let subtask = records[0].subtask.clone();

    let mut gap_rows = Vec::new();
    let mut per_quota = Vec::new();
    for &k in quotas {
        let mut pools = base_pools.to_vec();
        for pool in &mut pools {
            pool.k = k;
            pool.validate()?;
        }
        let outcomes = simulate_outcomes(&pools, &score_for_pool, seed, jobs)?;
        let stats = group_stats(&outcomes, &index)?;
        for protected in &groups {
            let dp = match dp_gap(&stats, protected, reference) {
                Ok(v) => Some(v),
                Err(Error::NoAppearances { .. }) => None,
                Err(e) => return Err(e),
            };
            gap_rows.push(GapRow {
                subtask: subtask.clone(),
                model_id: model_id.to_string(),
                gap_kind: GapKind::DemographicParity,
                protected: protected.clone(),
                reference: reference.to_string(),
                k,
                value: dp,
                rounds: rounds_label,
            });
            let eo = match eo_gap(&stats, protected, reference) {
                Ok(v) => Some(v),
                Err(Error::NoQualified { .. }) => None,
                Err(e) => return Err(e),
            };
            gap_rows.push(GapRow {
                subtask: subtask.clone(),
                model_id: model_id.to_string(),
                gap_kind: GapKind::EqualOpportunity,
                protected: protected.clone(),
                reference: reference.to_string(),
                k,
                value: eo,
                rounds: rounds_label,
            });
        }
        per_quota.push(QuotaOutcomes {
            k,
            pools,
            outcomes,
            stats,
        });
    }
    Ok((gap_rows, per_quota))
}
