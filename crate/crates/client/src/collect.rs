//! Batch collection: every pointwise call per candidate and every
//! ordered pair per pool, executed once, cached, and written out in the
//! standard prediction formats.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rabbi_core::data::{self, CandidateRecord, LabelScale, PairwiseResponse, PoolSpec};

use crate::config::EndpointConfig;
use crate::error::{ClientError, Result};
use crate::http::{compare_pairwise_llm, score_pointwise_llm, ChatClient};
use crate::parse::PairKeys;
use crate::templates::{AnswerMode, PromptTemplate};

/// One candidate with the text the model sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectItem {
    pub candidate_id: String,
    pub group: String,
    pub subtask: String,
    pub qualified: bool,
    /// Resume or essay body bound into the prompt.
    pub text: String,
    /// What the model echoes to pick this candidate in name-answer
    /// pairwise prompts; defaults to the candidate_id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_key: Option<String>,
}

impl CollectItem {
    pub fn record(&self) -> CandidateRecord {
        CandidateRecord {
            candidate_id: self.candidate_id.clone(),
            group: self.group.clone(),
            subtask: self.subtask.clone(),
            qualified: self.qualified,
        }
    }

    pub fn answer_key(&self) -> &str {
        self.answer_key.as_deref().unwrap_or(&self.candidate_id)
    }
}

#[derive(Serialize, Deserialize)]
struct CollectItemLine {
    candidate_id: String,
    group: String,
    subtask: String,
    qualified: u8,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer_key: Option<String>,
}

/// Loads collection items from line-delimited JSON.
pub fn load_collect_items(path: &Path) -> Result<Vec<CollectItem>> {
    let file = File::open(path).map_err(|e| ClientError::io(path, e))?;
    let mut items = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ClientError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CollectItemLine = serde_json::from_str(&line).map_err(|e| {
            ClientError::InvalidConfig(format!("{}:{}: {e}", path.display(), idx + 1))
        })?;
        items.push(CollectItem {
            candidate_id: parsed.candidate_id,
            group: parsed.group,
            subtask: parsed.subtask,
            qualified: parsed.qualified != 0,
            text: parsed.text,
            answer_key: parsed.answer_key,
        });
    }
    Ok(items)
}

/// Writes collection items as line-delimited JSON.
pub fn write_collect_items(path: &Path, items: &[CollectItem]) -> Result<()> {
    let file = File::create(path).map_err(|e| ClientError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = CollectItemLine {
            candidate_id: item.candidate_id.clone(),
            group: item.group.clone(),
            subtask: item.subtask.clone(),
            qualified: u8::from(item.qualified),
            text: item.text.clone(),
            answer_key: item.answer_key.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| ClientError::io(path, e))?;
    }
    w.flush().map_err(|e| ClientError::io(path, e))
}

/// What a collection run gathers.
#[derive(Debug, Clone)]
pub enum CollectMode {
    /// One call per candidate; label probabilities from log-probs.
    Pointwise { scale: LabelScale },
    /// Both orders of every pair in every pool.
    Pairwise,
}

/// A full collection job.
pub struct CollectJob<'a> {
    pub template: &'a PromptTemplate,
    pub mode: CollectMode,
    pub items: &'a [CollectItem],
    /// Required for pairwise collection.
    pub pools: &'a [PoolSpec],
    /// Per-subtask bindings (job description, essay statement, ...).
    pub subtask_context: BTreeMap<String, BTreeMap<String, String>>,
    /// Run fails (nonzero exit at the CLI) when the transport-failure
    /// rate exceeds this fraction.
    pub fail_threshold: f64,
    pub out_dir: PathBuf,
}

/// Counters from a collection run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CollectSummary {
    pub total_requests: usize,
    pub cache_hits: usize,
    pub transport_failures: usize,
    /// Responses that produced no usable label or verdict.
    pub flagged_invalid: usize,
    pub failure_rate: f64,
    pub over_threshold: bool,
    pub outputs: Vec<String>,
}

#[derive(Serialize)]
struct InvalidLine<'a> {
    candidate_id: &'a str,
    subtask: &'a str,
    reason: &'a str,
}

fn item_bindings(
    job: &CollectJob,
    subtask: &str,
    slots: &[(String, String)],
) -> BTreeMap<String, String> {
    let mut bindings = job
        .subtask_context
        .get(subtask)
        .cloned()
        .unwrap_or_default();
    for (slot, text) in slots {
        bindings.insert(slot.clone(), text.clone());
    }
    bindings
}

/// Runs every input chunk on up to `jobs` threads, preserving order.
fn run_parallel<T: Send, R: Send>(
    inputs: Vec<T>,
    jobs: usize,
    f: impl Fn(T) -> R + Sync,
) -> Vec<R> {
    if jobs <= 1 || inputs.len() < 2 {
        return inputs.into_iter().map(f).collect();
    }
    let chunk = inputs.len().div_ceil(jobs);
    let mut chunks: Vec<Vec<T>> = Vec::new();
    let mut inputs = inputs;
    while !inputs.is_empty() {
        let rest = inputs.split_off(chunk.min(inputs.len()));
        chunks.push(std::mem::replace(&mut inputs, rest));
    }
    let f = &f;
    let mut out = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|c| scope.spawn(move || c.into_iter().map(f).collect::<Vec<R>>()))
            .collect();
        for h in handles {
            out.extend(h.join().expect("collection worker panicked"));
        }
    });
    out
}

/// Executes a collection job against an endpoint.
///
/// Responses are cached by request hash, so rerunning an unchanged job
/// makes no network calls and rewrites byte-identical prediction files.
/// Partial transport failure does not abort the run; failures become
/// flagged records or INVALID verdicts and are tallied in the summary.
pub fn collect_run(client: &ChatClient, job: &CollectJob) -> Result<CollectSummary> {
    let mut seen = std::collections::BTreeSet::new();
    for item in job.items {
        if !seen.insert((item.subtask.as_str(), item.candidate_id.as_str())) {
            return Err(ClientError::Core(rabbi_core::Error::DuplicateCandidate {
                candidate_id: item.candidate_id.clone(),
                subtask: item.subtask.clone(),
            }));
        }
    }
    std::fs::create_dir_all(&job.out_dir).map_err(|e| ClientError::io(&job.out_dir, e))?;
    match &job.mode {
        CollectMode::Pointwise { scale } => collect_pointwise(client, job, scale),
        CollectMode::Pairwise => collect_pairwise(client, job),
    }
}

fn collect_pointwise(
    client: &ChatClient,
    job: &CollectJob,
    scale: &LabelScale,
) -> Result<CollectSummary> {
    let mut items: Vec<&CollectItem> = job.items.iter().collect();
    items.sort_by(|a, b| {
        (a.subtask.as_str(), a.candidate_id.as_str())
            .cmp(&(b.subtask.as_str(), b.candidate_id.as_str()))
    });

    struct Outcome<'a> {
        item: &'a CollectItem,
        prediction: Option<rabbi_core::data::PointwisePrediction>,
        flagged: Option<String>,
        transport_failure: bool,
        from_cache: bool,
    }

    let jobs = client.config().max_parallel;
    let slot = job.template.item_slots.first().cloned().ok_or_else(|| {
        ClientError::InvalidConfig(format!(
            "template {:?} declares no item slot",
            job.template.id
        ))
    })?;
    let outcomes: Vec<Result<Outcome>> = run_parallel(items, jobs, |item| {
        let bindings = item_bindings(job, &item.subtask, &[(slot.clone(), item.text.clone())]);
        let prompt = job.template.render(&bindings)?;
        match score_pointwise_llm(client, &item.candidate_id, &job.template.id, &prompt, scale) {
            Ok(call) => Ok(Outcome {
                item,
                prediction: call.prediction,
                flagged: call.flagged,
                transport_failure: false,
                from_cache: call.from_cache,
            }),
            Err(e @ (ClientError::Transport { .. } | ClientError::Status { .. })) => Ok(Outcome {
                item,
                prediction: None,
                flagged: Some(format!("transport: {e}")),
                transport_failure: true,
                from_cache: false,
            }),
            Err(e) => Err(e),
        }
    });

    let mut summary = CollectSummary::default();
    let mut rows = Vec::new();
    let mut invalid = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        summary.total_requests += 1;
        if outcome.from_cache {
            summary.cache_hits += 1;
        }
        if outcome.transport_failure {
            summary.transport_failures += 1;
        }
        match (outcome.prediction, outcome.flagged) {
            (Some(prediction), _) => rows.push((outcome.item.record(), prediction)),
            (None, reason) => {
                summary.flagged_invalid += 1;
                invalid.push((
                    outcome.item.candidate_id.clone(),
                    outcome.item.subtask.clone(),
                    reason.unwrap_or_else(|| "invalid".into()),
                ));
            }
        }
    }

    let out_path = job.out_dir.join("pointwise.jsonl");
    data::write_pointwise(&out_path, &rows)?;
    summary.outputs.push(out_path.display().to_string());

    let invalid_path = job.out_dir.join("invalid.jsonl");
    let file = File::create(&invalid_path).map_err(|e| ClientError::io(&invalid_path, e))?;
    let mut w = BufWriter::new(file);
    for (candidate_id, subtask, reason) in &invalid {
        serde_json::to_writer(
            &mut w,
            &InvalidLine {
                candidate_id,
                subtask,
                reason,
            },
        )?;
        w.write_all(b"\n").map_err(|e| ClientError::io(&invalid_path, e))?;
    }
    w.flush().map_err(|e| ClientError::io(&invalid_path, e))?;
    summary.outputs.push(invalid_path.display().to_string());

    finish_summary(&mut summary, job.fail_threshold);
    Ok(summary)
}

fn collect_pairwise(client: &ChatClient, job: &CollectJob) -> Result<CollectSummary> {
    let by_key: BTreeMap<(&str, &str), &CollectItem> = job
        .items
        .iter()
        .map(|i| ((i.subtask.as_str(), i.candidate_id.as_str()), i))
        .collect();
    let slots = &job.template.item_slots;
    if slots.len() != 2 {
        return Err(ClientError::InvalidConfig(format!(
            "pairwise template {:?} must declare exactly two item slots",
            job.template.id
        )));
    }
    let answer_mode = job.template.answer_mode.unwrap_or(AnswerMode::Name);

    let mut pools: Vec<&PoolSpec> = job.pools.iter().collect();
    pools.sort_by(|a, b| a.pool_id.cmp(&b.pool_id));

    struct Call<'a> {
        pool: &'a PoolSpec,
        first: &'a CollectItem,
        second: &'a CollectItem,
    }

    let mut calls = Vec::new();
    for pool in pools {
        for first_id in &pool.members {
            for second_id in &pool.members {
                if first_id == second_id {
                    continue;
                }
                let lookup = |id: &str| {
                    by_key
                        .get(&(pool.subtask.as_str(), id))
                        .copied()
                        .ok_or_else(|| {
                            ClientError::Core(rabbi_core::Error::UnknownCandidate {
                                candidate_id: id.to_string(),
                                context: format!("pool {:?}", pool.pool_id),
                            })
                        })
                };
                calls.push(Call {
                    pool,
                    first: lookup(first_id)?,
                    second: lookup(second_id)?,
                });
            }
        }
    }

    let jobs = client.config().max_parallel;
    let results: Vec<Result<(PairwiseResponse, bool, bool)>> =
        run_parallel(calls, jobs, |call| {
            let first_text = job.template.wrap_pair_text(0, &call.first.text);
            let second_text = job.template.wrap_pair_text(1, &call.second.text);
            let bindings = item_bindings(
                job,
                &call.pool.subtask,
                &[
                    (slots[0].clone(), first_text),
                    (slots[1].clone(), second_text),
                ],
            );
            let prompt = job.template.render(&bindings)?;
            let keys = match answer_mode {
                AnswerMode::Name => {
                    PairKeys::for_names(call.first.answer_key(), call.second.answer_key())
                }
                AnswerMode::Letter => PairKeys::letters(),
            };
            let outcome = compare_pairwise_llm(client, &job.template.id, &prompt, &keys);
            Ok((
                PairwiseResponse {
                    subtask: call.pool.subtask.clone(),
                    pool_id: call.pool.pool_id.clone(),
                    first: call.first.candidate_id.clone(),
                    second: call.second.candidate_id.clone(),
                    verdict: outcome.verdict,
                },
                outcome.error.is_some(),
                outcome.from_cache,
            ))
        });

    let mut summary = CollectSummary::default();
    let mut responses = Vec::new();
    for result in results {
        let (response, failed, from_cache) = result?;
        summary.total_requests += 1;
        if failed {
            summary.transport_failures += 1;
        }
        if from_cache {
            summary.cache_hits += 1;
        }
        if response.verdict == rabbi_core::data::Verdict::Invalid {
            summary.flagged_invalid += 1;
        }
        responses.push(response);
    }
    responses.sort_by(|a, b| {
        (&a.subtask, &a.pool_id, &a.first, &a.second)
            .cmp(&(&b.subtask, &b.pool_id, &b.first, &b.second))
    });

    let out_path = job.out_dir.join("pairwise.jsonl");
    data::write_pairwise(&out_path, &responses)?;
    summary.outputs.push(out_path.display().to_string());

    finish_summary(&mut summary, job.fail_threshold);
    Ok(summary)
}

fn finish_summary(summary: &mut CollectSummary, threshold: f64) {
    summary.failure_rate = if summary.total_requests == 0 {
        0.0
    } else {
        summary.transport_failures as f64 / summary.total_requests as f64
    };
    summary.over_threshold = summary.failure_rate > threshold;
}

/// Convenience: builds a client and endpoint config pair for a job.
pub fn client_for(config: EndpointConfig, cache_dir: Option<&Path>) -> Result<ChatClient> {
    let cache = match cache_dir {
        Some(dir) => Some(crate::cache::DiskCache::open(dir)?),
        None => None,
    };
    ChatClient::new(config, cache)
}
