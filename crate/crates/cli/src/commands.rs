//! Subcommand implementations. Each command is a thin orchestration of
//! library calls plus deterministic report writing; `pipeline` chains
//! them in memory so a fixed (inputs, config, seed) triple yields
//! byte-identical report files on every run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rabbi_core::audit::{pairwise_bias_rows, pointwise_bias_rows, AuditOptions};
use rabbi_core::data::{self, CandidateRecord, PoolSpec};
use rabbi_core::report::{
    self, config_hash, BiasReportRow, GapRow, Provenance, Report,
};
use rabbi_core::scoring::{pairwise_consistency_stats, PairwiseConsistencyStats, ScoreTable};
use rabbi_core::sim::{self, GapSimConfig, QuotaOutcomes};
use rabbi_core::synth::{self, SyntheticModelSpec};
use rabbi_core::validity::{self, PairingRules, ValidityReport};

use rabbi_client::{
    builtin_template, collect_run, load_collect_items, ChatClient, CollectJob, CollectMode,
    DiskCache, PromptTemplate,
};

use crate::config::{CollectModeConfig, ModelEntry, RunConfig, SynthConfig};
use crate::data_io::{load_model, ModelData};
use crate::error::{CliError, Result};

pub struct Ctx {
    pub config: RunConfig,
    pub config_path: PathBuf,
}

impl Ctx {
    pub fn out(&self) -> &Path {
        &self.config.output_dir
    }

    fn ensure_out(&self, sub: &str) -> Result<PathBuf> {
        let dir = if sub.is_empty() {
            self.config.output_dir.clone()
        } else {
            self.config.output_dir.join(sub)
        };
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }

    /// Provenance stamped on every emitted report: resolved-config hash,
    /// seed, and digests of the config file plus existing input files.
    pub fn provenance(&self) -> Result<Provenance> {
        let hash = config_hash(&self.config)?;
        let mut provenance = Provenance::new(hash, self.config.seed);
        provenance.add_input(&self.config_path)?;
        for path in self.config.input_paths() {
            if path.exists() {
                provenance.add_input(&path)?;
            }
        }
        Ok(provenance)
    }
}

fn file_label(model_label: &str) -> String {
    model_label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn load_models(ctx: &Ctx, entries: &[ModelEntry]) -> Result<Vec<ModelData>> {
    if entries.is_empty() {
        return Err(CliError::Input(
            "no models configured; add a models list (or a synth section for pipeline runs)"
                .into(),
        ));
    }
    entries
        .iter()
        .map(|entry| load_model(entry, &ctx.config.scale))
        .collect()
}

/// Audit/simulation unit label. Entries carrying both pointwise and
/// pairwise data are split into two analysis units so metric rows pair
/// only with gaps from the same scoring mode.
fn unit_label(model: &ModelData, mode: &str) -> String {
    let both = !model.point_tables.is_empty() && !model.pair_responses.is_empty();
    if both {
        format!("{}@{mode}", model.model_id)
    } else {
        model.model_id.clone()
    }
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ValidationReportBody {
    models: BTreeMap<String, data::ValidationSummary>,
    issue_total: usize,
    warning_total: usize,
}

pub fn cmd_validate(ctx: &Ctx) -> Result<u8> {
    let models = load_models(ctx, &ctx.config.models)?;
    let mut body = ValidationReportBody {
        models: BTreeMap::new(),
        issue_total: 0,
        warning_total: 0,
    };

    for model in &models {
        let records: Vec<CandidateRecord> =
            model.records.values().flatten().cloned().collect();
        let mut summary = data::validate_dataset(&records, &model.pools);
        summary.warnings.extend(model.warnings.iter().cloned());

        // Pairwise responses must reference known candidates.
        for (subtask, responses) in &model.pair_responses {
            let known: std::collections::BTreeSet<&str> = model
                .records
                .get(subtask)
                .map(|rs| rs.iter().map(|r| r.candidate_id.as_str()).collect())
                .unwrap_or_default();
            for response in responses {
                for id in [&response.first, &response.second] {
                    if !known.contains(id.as_str()) {
                        summary.issues.push(data::ValidationIssue {
                            kind: "dangling-reference".into(),
                            detail: format!(
                                "pairwise response in pool {:?} references unknown candidate {id:?}",
                                response.pool_id
                            ),
                        });
                    }
                }
            }
        }

        body.issue_total += summary.issues.len();
        body.warning_total += summary.warnings.len();
        body.models.insert(model.model_id.clone(), summary);
    }

    let out = ctx.ensure_out("")?;
    let provenance = ctx.provenance()?;
    report::write_json(&out.join("validation_summary.json"), &provenance, &body)?;
    println!(
        "validate: {} model(s), {} issue(s), {} warning(s) -> {}",
        body.models.len(),
        body.issue_total,
        body.warning_total,
        out.join("validation_summary.json").display()
    );
    Ok(if body.issue_total == 0 { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct SynthSummary {
    models: Vec<ModelEntry>,
    files: Vec<String>,
    adversarial: Option<synth::AdversarialStats>,
}

pub fn run_synth(ctx: &Ctx) -> Result<(Vec<ModelEntry>, SynthSummary)> {
    let Some(synth_config) = &ctx.config.synth else {
        return Err(CliError::Input(
            "config has no synth section; nothing to generate".into(),
        ));
    };
    let data_dir = ctx.ensure_out("data")?;
    let mut entries = Vec::new();
    let mut summary = SynthSummary {
        models: Vec::new(),
        files: Vec::new(),
        adversarial: None,
    };

    match synth_config {
        SynthConfig::Benchmark {
            models,
            candidates_per_group,
        } => {
            let bench = synth::gen_benchmark(ctx.config.seed, *models, *candidates_per_group)?;
            let mut all_records = Vec::new();
            for regime in &bench.regimes {
                all_records.extend(regime.records.iter().cloned());
            }
            let candidates_path = data_dir.join("candidates.jsonl");
            data::write_candidates(&candidates_path, &all_records)?;
            summary.files.push(candidates_path.display().to_string());

            let model_count = bench.regimes.first().map_or(0, |r| r.models.len());
            for model_idx in 0..model_count {
                let model_id = bench.regimes[0].models[model_idx].model_id.clone();
                let mut rows = Vec::new();
                for regime in &bench.regimes {
                    let scores = &regime.models[model_idx];
                    rows.extend(
                        regime
                            .records
                            .iter()
                            .cloned()
                            .zip(scores.predictions.iter().cloned()),
                    );
                }
                let path = data_dir.join(format!("{}.pointwise.jsonl", file_label(&model_id)));
                data::write_pointwise(&path, &rows)?;
                summary.files.push(path.display().to_string());
                entries.push(ModelEntry {
                    model_id,
                    pointwise: Some(path),
                    pairwise: None,
                    pools: None,
                    candidates: None,
                });
            }
        }
        SynthConfig::Adversarial => {
            let spec = synth::gen_adversarial_case(ctx.config.seed)?;
            let stats = synth::evaluate_adversarial(&spec, 2000, spec.seed)?;
            let dataset = synth::gen_scores(&spec)?;
            let path = data_dir.join("adversarial.pointwise.jsonl");
            data::write_pointwise(&path, &dataset.prediction_rows())?;
            summary.files.push(path.display().to_string());

            let spec_path = data_dir.join("adversarial.spec.json");
            let bytes = serde_json::to_vec_pretty(&spec)?;
            std::fs::write(&spec_path, bytes)
                .map_err(|e| CliError::Internal(format!("write {}: {e}", spec_path.display())))?;
            summary.files.push(spec_path.display().to_string());
            summary.adversarial = Some(stats);

            entries.push(ModelEntry {
                model_id: spec.model_id.clone(),
                pointwise: Some(path),
                pairwise: None,
                pools: None,
                candidates: None,
            });
        }
        SynthConfig::Spec { path } => {
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
            let spec: SyntheticModelSpec = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Input(format!("invalid spec {}: {e}", path.display())))?;
            let dataset = synth::gen_scores(&spec)?;
            let out_path =
                data_dir.join(format!("{}.pointwise.jsonl", file_label(&spec.model_id)));
            data::write_pointwise(&out_path, &dataset.prediction_rows())?;
            summary.files.push(out_path.display().to_string());
            entries.push(ModelEntry {
                model_id: spec.model_id.clone(),
                pointwise: Some(out_path),
                pairwise: None,
                pools: None,
                candidates: None,
            });
        }
    }

    summary.models = entries.clone();
    let manifest_path = data_dir.join("models.json");
    let bytes = serde_json::to_vec_pretty(&entries)?;
    std::fs::write(&manifest_path, bytes)
        .map_err(|e| CliError::Internal(format!("write {}: {e}", manifest_path.display())))?;
    summary.files.push(manifest_path.display().to_string());
    Ok((entries, summary))
}

pub fn cmd_synth(ctx: &Ctx) -> Result<u8> {
    let (entries, summary) = run_synth(ctx)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    println!("synth: generated {} model(s)", entries.len());
    Ok(0)
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ScoreReportBody {
    point_tables: Vec<ScoreTable>,
    pair_tables: Vec<ScoreTable>,
    consistency: BTreeMap<String, PairwiseConsistencyStats>,
}

fn write_scores(ctx: &Ctx, models: &[ModelData]) -> Result<()> {
    let dir = ctx.ensure_out("scores")?;
    let provenance = ctx.provenance()?;

    for model in models {
        let body = ScoreReportBody {
            point_tables: model.point_tables.values().cloned().collect(),
            pair_tables: model
                .pair_tables
                .values()
                .flat_map(|by_pool| by_pool.values().cloned())
                .collect(),
            consistency: model
                .pair_responses
                .iter()
                .map(|(subtask, responses)| {
                    (subtask.clone(), pairwise_consistency_stats(responses))
                })
                .collect(),
        };

        let label = file_label(&model.model_id);
        report::write_json(&dir.join(format!("{label}.scores.json")), &provenance, &body)?;

        let mut tables: Vec<ScoreTable> = body.point_tables.clone();
        tables.extend(body.pair_tables.iter().cloned());
        let records = model.records.clone();
        report::write_scores_csv(
            &dir.join(format!("{label}.scores.csv")),
            &provenance,
            &tables,
            |subtask, candidate| {
                records.get(subtask).and_then(|rs| {
                    rs.iter()
                        .find(|r| r.candidate_id == candidate)
                        .map(|r| r.group.clone())
                })
            },
        )?;
        println!(
            "score: {} -> {} pointwise table(s), {} pairwise pool table(s)",
            model.model_id,
            body.point_tables.len(),
            body.pair_tables.len()
        );
    }
    Ok(())
}

pub fn cmd_score(ctx: &Ctx) -> Result<u8> {
    let models = load_models(ctx, &ctx.config.models)?;
    write_scores(ctx, &models)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

#[derive(Serialize, serde::Deserialize)]
pub struct BiasReportBody {
    pub rows: Vec<BiasReportRow>,
    pub notices: Vec<String>,
}

pub fn run_audit(ctx: &Ctx, models: &[ModelData]) -> Result<BiasReportBody> {
    let opts = AuditOptions::default();
    let mut body = BiasReportBody {
        rows: Vec::new(),
        notices: Vec::new(),
    };

    for model in models {
        for (subtask, table) in &model.point_tables {
            let records = &model.records[subtask];
            let reference = ctx.config.reference.for_subtask(subtask);
            let label = unit_label(model, "point");
            body.rows
                .extend(pointwise_bias_rows(records, table, &label, reference, &opts)?);
        }
        for (subtask, responses) in &model.pair_responses {
            let records = &model.records[subtask];
            let reference = ctx.config.reference.for_subtask(subtask);
            let label = unit_label(model, "pair");
            body.rows
                .extend(pairwise_bias_rows(records, responses, &label, reference, &opts)?);
            body.notices.push(format!(
                "{label}/{subtask}: pairwise input; jsd and emd omitted (pointwise-only metrics)"
            ));
        }
    }
    Ok(body)
}

fn write_bias_report(ctx: &Ctx, body: &BiasReportBody) -> Result<PathBuf> {
    let out = ctx.ensure_out("")?;
    let provenance = ctx.provenance()?;
    let json_path = out.join("bias_report.json");
    report::write_json(&json_path, &provenance, body)?;
    report::write_bias_csv(&out.join("bias_report.csv"), &provenance, &body.rows)?;
    Ok(json_path)
}

pub fn cmd_audit(ctx: &Ctx) -> Result<u8> {
    let models = load_models(ctx, &ctx.config.models)?;
    let body = run_audit(ctx, &models)?;
    let path = write_bias_report(ctx, &body)?;
    println!(
        "audit: {} row(s), {} notice(s) -> {}",
        body.rows.len(),
        body.notices.len(),
        path.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub struct SimulationArtifacts {
    pub gap_rows: Vec<GapRow>,
    /// (unit label, subtask, per-quota outcomes) for outcome export.
    pub outcomes: Vec<(String, String, Vec<QuotaOutcomes>)>,
}

pub fn run_simulate(ctx: &Ctx, models: &[ModelData]) -> Result<SimulationArtifacts> {
    let mut artifacts = SimulationArtifacts {
        gap_rows: Vec::new(),
        outcomes: Vec::new(),
    };

    for model in models {
        for (subtask, table) in &model.point_tables {
            let records = &model.records[subtask];
            let reference = ctx.config.reference.for_subtask(subtask);
            let label = unit_label(model, "point");
            let cfg = GapSimConfig {
                mode: ctx.config.pool_mode,
                quotas: ctx.config.quotas.clone(),
                rounds: ctx.config.rounds,
                // Pools depend on (seed, subtask) only, so every model
                // faces the same resampled rounds.
                seed: rabbi_core::seed::derive_seed(ctx.config.seed, subtask),
                jobs: ctx.config.jobs,
            };
            let (rows, outcomes) = sim::simulate_gaps(
                records,
                |_| Some(table.clone()),
                &cfg,
                &label,
                reference,
            )?;
            artifacts.gap_rows.extend(rows);
            artifacts.outcomes.push((label, subtask.clone(), outcomes));
        }

        for (subtask, by_pool) in &model.pair_tables {
            let records = &model.records[subtask];
            let reference = ctx.config.reference.for_subtask(subtask);
            let label = unit_label(model, "pair");
            let pools: Vec<PoolSpec> = model
                .pools_for(subtask)
                .into_iter()
                .cloned()
                .collect();
            if pools.is_empty() {
                return Err(CliError::Input(format!(
                    "model {:?}: pairwise subtask {subtask:?} needs a pools file to simulate",
                    model.model_id
                )));
            }
            let (rows, outcomes) = sim::simulate_gaps_with_pools(
                records,
                &pools,
                |pool| by_pool.get(&pool.pool_id).cloned(),
                &ctx.config.quotas,
                pools.len(),
                rabbi_core::seed::derive_seed(ctx.config.seed, subtask),
                ctx.config.jobs,
                &label,
                reference,
            )?;
            artifacts.gap_rows.extend(rows);
            artifacts.outcomes.push((label, subtask.clone(), outcomes));
        }
    }
    Ok(artifacts)
}

fn write_simulation(ctx: &Ctx, models: &[ModelData], artifacts: &SimulationArtifacts) -> Result<PathBuf> {
    let out = ctx.ensure_out("")?;
    let outcome_dir = ctx.ensure_out("outcomes")?;
    let provenance = ctx.provenance()?;

    let gaps_path = out.join("gaps.json");
    report::write_json(&gaps_path, &provenance, &artifacts.gap_rows)?;
    report::write_gaps_csv(&out.join("gaps.csv"), &provenance, &artifacts.gap_rows)?;

    let records_by_unit: BTreeMap<(String, String), BTreeMap<String, CandidateRecord>> = {
        let mut map = BTreeMap::new();
        for model in models {
            for (subtask, records) in &model.records {
                let index: BTreeMap<String, CandidateRecord> = records
                    .iter()
                    .map(|r| (r.candidate_id.clone(), r.clone()))
                    .collect();
                for mode in ["point", "pair"] {
                    map.insert((unit_label(model, mode), subtask.clone()), index.clone());
                }
            }
        }
        map
    };

    for (label, subtask, per_quota) in &artifacts.outcomes {
        let Some(index) = records_by_unit.get(&(label.clone(), subtask.clone())) else {
            continue;
        };
        for quota in per_quota {
            let path = outcome_dir.join(format!(
                "{}_{}_k{}.csv",
                file_label(label),
                file_label(subtask),
                quota.k
            ));
            let pairs: Vec<(sim::SelectionOutcome, ScoreTable)> = quota
                .outcomes
                .iter()
                .zip(&quota.pools)
                .filter_map(|(outcome, pool)| {
                    let table = find_table_for(models, label, subtask, pool)?;
                    Some((outcome.clone(), table))
                })
                .collect();
            report::write_outcomes_csv(&path, &provenance, &pairs, index)?;
        }
    }
    Ok(gaps_path)
}

fn find_table_for(
    models: &[ModelData],
    label: &str,
    subtask: &str,
    pool: &PoolSpec,
) -> Option<ScoreTable> {
    for model in models {
        if unit_label(model, "point") == label {
            if let Some(table) = model.point_tables.get(subtask) {
                return Some(table.clone());
            }
        }
        if unit_label(model, "pair") == label {
            if let Some(table) = model
                .pair_tables
                .get(subtask)
                .and_then(|by_pool| by_pool.get(&pool.pool_id))
            {
                return Some(table.clone());
            }
        }
    }
    None
}

pub fn cmd_simulate(ctx: &Ctx) -> Result<u8> {
    let models = load_models(ctx, &ctx.config.models)?;
    let artifacts = run_simulate(ctx, &models)?;
    let path = write_simulation(ctx, &models, &artifacts)?;
    println!(
        "simulate: {} gap row(s) over quotas {:?} -> {}",
        artifacts.gap_rows.len(),
        ctx.config.quotas,
        path.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

pub fn run_evaluate(ctx: &Ctx, bias: &[BiasReportRow], gaps: &[GapRow]) -> ValidityReport {
    let rules = PairingRules::default();
    let mut report = validity::correlation_report(bias, gaps, &rules);
    for &k in &ctx.config.quotas {
        let mut warnings = Vec::new();
        let (rankings, mean_ndcg) = validity::ranking_report(bias, gaps, k, &mut warnings);
        report.rankings.extend(rankings);
        report.mean_ndcg.extend(mean_ndcg);
        report.warnings.extend(warnings);
    }
    report
}

fn write_validity(ctx: &Ctx, body: &ValidityReport) -> Result<PathBuf> {
    let out = ctx.ensure_out("")?;
    let provenance = ctx.provenance()?;
    let json_path = out.join("validity.json");
    report::write_json(&json_path, &provenance, body)?;
    report::write_validity_csv(&out, &provenance, body)?;
    Ok(json_path)
}

pub fn cmd_evaluate(
    ctx: &Ctx,
    bias_path: Option<PathBuf>,
    gaps_path: Option<PathBuf>,
) -> Result<u8> {
    let bias_path = bias_path.unwrap_or_else(|| ctx.out().join("bias_report.json"));
    let gaps_path = gaps_path.unwrap_or_else(|| ctx.out().join("gaps.json"));
    let bias: Report<BiasReportBody> = report::read_json(&bias_path)?;
    let gaps: Report<Vec<GapRow>> = report::read_json(&gaps_path)?;

    let body = run_evaluate(ctx, &bias.body.rows, &gaps.body);
    let path = write_validity(ctx, &body)?;
    for row in &body.overall {
        println!(
            "evaluate: r({}, {}) = {:+.4}  (p = {:.2e}, n = {})",
            row.metric.name(),
            row.gap_kind.name(),
            row.r,
            row.p_value,
            row.points
        );
    }
    println!("evaluate: -> {}", path.display());
    Ok(0)
}

// ---------------------------------------------------------------------------
// collect
// ---------------------------------------------------------------------------

fn resolve_template(name_or_path: &str) -> Result<PromptTemplate> {
    let path = Path::new(name_or_path);
    if path.exists() {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        return serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Input(format!("invalid template {}: {e}", path.display())));
    }
    Ok(builtin_template(name_or_path)?)
}

pub fn cmd_collect(ctx: &Ctx) -> Result<u8> {
    let Some(collect) = &ctx.config.collect else {
        return Err(CliError::Input("config has no collect section".into()));
    };
    let items = load_collect_items(&collect.items)?;
    if items.is_empty() {
        return Err(CliError::Input("no collection items".into()));
    }
    let pools = match (&collect.mode, &collect.pools) {
        (CollectModeConfig::Pair, Some(path)) => data::load_pools(path)?,
        (CollectModeConfig::Pair, None) => {
            return Err(CliError::Input(
                "pairwise collection requires a pools file".into(),
            ));
        }
        (CollectModeConfig::Point, _) => Vec::new(),
    };

    let template = resolve_template(&collect.template)?;
    let mode = match collect.mode {
        CollectModeConfig::Point => CollectMode::Pointwise {
            scale: ctx.config.scale.clone(),
        },
        CollectModeConfig::Pair => CollectMode::Pairwise,
    };

    let out_dir = ctx.ensure_out("collected")?;
    let job = CollectJob {
        template: &template,
        mode,
        items: &items,
        pools: &pools,
        subtask_context: collect.context.clone(),
        fail_threshold: collect.fail_threshold,
        out_dir: out_dir.clone(),
    };

    let cache = DiskCache::open(&collect.cache_dir)?;
    let client = ChatClient::new(collect.endpoint.clone(), Some(cache))?;
    let summary = collect_run(&client, &job)?;

    // Candidate roster for downstream audits.
    let records: Vec<CandidateRecord> = items.iter().map(|i| i.record()).collect();
    data::write_candidates(&out_dir.join("candidates.jsonl"), &records)?;

    println!("{}", serde_json::to_string_pretty(&summary)?);
    if summary.over_threshold {
        return Err(CliError::Collection(format!(
            "failure rate {:.3} > threshold {:.3}",
            summary.failure_rate, collect.fail_threshold
        )));
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

pub fn cmd_pipeline(ctx: &Ctx) -> Result<u8> {
    let mut entries = ctx.config.models.clone();
    if ctx.config.synth.is_some() {
        let (generated, _) = run_synth(ctx)?;
        println!("pipeline: synth generated {} model(s)", generated.len());
        entries.extend(generated);
    }
    if entries.is_empty() {
        return Err(CliError::Input(
            "pipeline has nothing to run: no models and no synth section".into(),
        ));
    }

    let models = load_models(ctx, &entries)?;

    // Validation gate.
    let mut issues = 0usize;
    for model in &models {
        let records: Vec<CandidateRecord> =
            model.records.values().flatten().cloned().collect();
        let summary = data::validate_dataset(&records, &model.pools);
        issues += summary.issues.len();
    }
    if issues > 0 {
        return Err(CliError::Input(format!(
            "pipeline aborted: {issues} validation issue(s); run `rabbi validate` for details"
        )));
    }
    println!("pipeline: validated {} model(s)", models.len());

    write_scores(ctx, &models)?;

    let audit_body = run_audit(ctx, &models)?;
    let bias_path = write_bias_report(ctx, &audit_body)?;
    println!(
        "pipeline: audit wrote {} row(s) -> {}",
        audit_body.rows.len(),
        bias_path.display()
    );

    let artifacts = run_simulate(ctx, &models)?;
    let gaps_path = write_simulation(ctx, &models, &artifacts)?;
    println!(
        "pipeline: simulation wrote {} gap row(s) -> {}",
        artifacts.gap_rows.len(),
        gaps_path.display()
    );

    let validity = run_evaluate(ctx, &audit_body.rows, &artifacts.gap_rows);
    let validity_path = write_validity(ctx, &validity)?;
    println!(
        "pipeline: evaluation wrote {} correlation(s) -> {}",
        validity.overall.len(),
        validity_path.display()
    );
    Ok(0)
}
