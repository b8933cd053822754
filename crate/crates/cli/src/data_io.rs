//! Loads one model's prediction inputs and derives its score tables.

use std::collections::BTreeMap;
use std::path::Path;

use rabbi_core::data::{
    self, CandidateRecord, LabelScale, PairwiseResponse, PointwisePrediction, PoolSpec,
};
use rabbi_core::scoring::{self, ScoreTable};

use crate::config::ModelEntry;
use crate::error::{CliError, Result};

/// Everything a model entry provides, resolved per subtask.
#[derive(Debug, Clone, Default)]
pub struct ModelData {
    pub model_id: String,
    /// Candidate roster per subtask (from the pointwise file, the
    /// candidates file, or both merged consistently).
    pub records: BTreeMap<String, Vec<CandidateRecord>>,
    pub predictions: BTreeMap<String, Vec<PointwisePrediction>>,
    /// Pointwise score table per subtask.
    pub point_tables: BTreeMap<String, ScoreTable>,
    /// Pairwise responses per subtask.
    pub pair_responses: BTreeMap<String, Vec<PairwiseResponse>>,
    /// Pool-local pairwise score tables per subtask, keyed by pool.
    pub pair_tables: BTreeMap<String, BTreeMap<String, ScoreTable>>,
    pub pools: Vec<PoolSpec>,
    pub warnings: Vec<String>,
}

impl ModelData {
    /// Pools of one subtask.
    pub fn pools_for(&self, subtask: &str) -> Vec<&PoolSpec> {
        self.pools.iter().filter(|p| p.subtask == subtask).collect()
    }
}

/// Loads and scores a model entry.
pub fn load_model(entry: &ModelEntry, scale: &LabelScale) -> Result<ModelData> {
    let mut out = ModelData {
        model_id: entry.model_id.clone(),
        ..ModelData::default()
    };

    if let Some(path) = &entry.pointwise {
        let rows = data::load_pointwise(path, scale)?;
        for (record, prediction) in rows {
            out.records
                .entry(record.subtask.clone())
                .or_default()
                .push(record.clone());
            out.predictions
                .entry(record.subtask.clone())
                .or_default()
                .push(prediction);
        }
        for (subtask, preds) in &out.predictions {
            let table = scoring::pointwise_score_table(subtask, preds, scale)?;
            out.point_tables.insert(subtask.clone(), table);
        }
    }

    if let Some(path) = &entry.candidates {
        let roster = data::load_candidates(path)?;
        merge_roster(&mut out, roster, path)?;
    }

    if let Some(path) = &entry.pairwise {
        let loaded = data::load_pairwise(path)?;
        out.warnings.extend(loaded.missing_orders);
        for response in loaded.responses {
            out.pair_responses
                .entry(response.subtask.clone())
                .or_default()
                .push(response);
        }
        for (subtask, responses) in &out.pair_responses {
            let tables = scoring::pairwise_score_tables(responses)?;
            let by_pool: BTreeMap<String, ScoreTable> = tables
                .into_iter()
                .map(|t| (t.pool_id.clone().expect("pairwise tables are pool-local"), t))
                .collect();
            out.pair_tables.insert(subtask.clone(), by_pool);
        }
    }

    if let Some(path) = &entry.pools {
        out.pools = data::load_pools(path)?;
    }

    for subtask in out.pair_responses.keys() {
        if !out.records.contains_key(subtask) {
            return Err(CliError::Input(format!(
                "model {:?}: pairwise data for subtask {subtask:?} needs a candidates (or pointwise) file for group membership",
                entry.model_id
            )));
        }
    }

    Ok(out)
}

/// Merges an explicit roster with records derived from predictions,
/// rejecting contradictions.
fn merge_roster(
    out: &mut ModelData,
    roster: Vec<CandidateRecord>,
    path: &Path,
) -> Result<()> {
    for record in roster {
        let existing = out
            .records
            .entry(record.subtask.clone())
            .or_default()
            .iter()
            .find(|r| r.candidate_id == record.candidate_id)
            .cloned();
        match existing {
            None => out
                .records
                .get_mut(&record.subtask)
                .expect("entry created above")
                .push(record),
            Some(prior) if prior == record => {}
            Some(prior) => {
                return Err(CliError::Input(format!(
                    "{}: candidate {:?} contradicts the pointwise file ({:?}/{} vs {:?}/{})",
                    path.display(),
                    record.candidate_id,
                    record.group,
                    record.qualified,
                    prior.group,
                    prior.qualified,
                )));
            }
        }
    }
    Ok(())
}
