//! Run configuration: one JSON file plus flag overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rabbi_client::EndpointConfig;
use rabbi_core::data::LabelScale;
use rabbi_core::sim::PoolMode;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_quotas")]
    pub quotas: Vec<usize>,
    #[serde(default = "default_pool_mode")]
    pub pool_mode: PoolMode,
    #[serde(default = "LabelScale::yes_no")]
    pub scale: LabelScale,
    pub reference: ReferenceConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub collect: Option<CollectConfig>,
}

fn default_seed() -> u64 {
    42
}
fn default_rounds() -> usize {
    1000
}
fn default_quotas() -> Vec<usize> {
    vec![1]
}
fn default_pool_mode() -> PoolMode {
    PoolMode::OnePerGroup
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_jobs() -> usize {
    1
}

/// Reference group per subtask, with a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub default: String,
    #[serde(default)]
    pub per_subtask: BTreeMap<String, String>,
}

impl ReferenceConfig {
    pub fn for_subtask(&self, subtask: &str) -> &str {
        self.per_subtask
            .get(subtask)
            .map(String::as_str)
            .unwrap_or(&self.default)
    }
}

/// One model's prediction inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelEntry {
    pub model_id: String,
    #[serde(default)]
    pub pointwise: Option<PathBuf>,
    #[serde(default)]
    pub pairwise: Option<PathBuf>,
    /// Pool file; required for pairwise simulation.
    #[serde(default)]
    pub pools: Option<PathBuf>,
    /// Candidate roster; required when only pairwise data is given
    /// (pairwise responses do not carry group or qualification).
    #[serde(default)]
    pub candidates: Option<PathBuf>,
}

/// What `rabbi synth` should generate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthConfig {
    /// Multi-model benchmark over a symmetric and a skewed regime.
    Benchmark {
        #[serde(default = "default_bench_models")]
        models: usize,
        #[serde(default = "default_bench_candidates")]
        candidates_per_group: usize,
    },
    /// One engineered model whose mean gap hides its allocation gap.
    Adversarial,
    /// A synthetic model spec loaded from a JSON file.
    Spec { path: PathBuf },
}

fn default_bench_models() -> usize {
    10
}
fn default_bench_candidates() -> usize {
    60
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollectModeConfig {
    Point,
    Pair,
}

/// Live-collection settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollectConfig {
    pub endpoint: EndpointConfig,
    pub template: String,
    pub mode: CollectModeConfig,
    /// Collection items (candidate texts), line-delimited JSON.
    pub items: PathBuf,
    #[serde(default)]
    pub pools: Option<PathBuf>,
    pub cache_dir: PathBuf,
    #[serde(default = "default_fail_threshold")]
    pub fail_threshold: f64,
    /// Per-subtask template bindings (job description, statement, ...).
    #[serde(default)]
    pub context: BTreeMap<String, BTreeMap<String, String>>,
}

fn default_fail_threshold() -> f64 {
    0.1
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quotas.is_empty() || self.quotas.iter().any(|k| *k < 1) {
            return Err(CliError::Input(
                "quotas must be a non-empty list of values >= 1".into(),
            ));
        }
        let distinct: std::collections::BTreeSet<usize> = self.quotas.iter().copied().collect();
        if distinct.len() != self.quotas.len() {
            return Err(CliError::Input("quotas must be distinct".into()));
        }
        if self.rounds == 0 {
            return Err(CliError::Input("rounds must be >= 1".into()));
        }
        if self.jobs == 0 {
            return Err(CliError::Input("jobs must be >= 1".into()));
        }
        self.scale
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for entry in &self.models {
            if !seen.insert(entry.model_id.as_str()) {
                return Err(CliError::Input(format!(
                    "duplicate model_id {:?}",
                    entry.model_id
                )));
            }
            if entry.pointwise.is_none() && entry.pairwise.is_none() {
                return Err(CliError::Input(format!(
                    "model {:?} has neither pointwise nor pairwise data",
                    entry.model_id
                )));
            }
        }
        Ok(())
    }

    /// Paths this config references that exist on disk, for provenance.
    pub fn input_paths(&self) -> Vec<PathBuf> {
        let mut paths = Vec::new();
        for entry in &self.models {
            for p in [&entry.pointwise, &entry.pairwise, &entry.pools, &entry.candidates]
                .into_iter()
                .flatten()
            {
                paths.push(p.clone());
            }
        }
        if let Some(SynthConfig::Spec { path }) = &self.synth {
            paths.push(path.clone());
        }
        if let Some(collect) = &self.collect {
            paths.push(collect.items.clone());
            if let Some(p) = &collect.pools {
                paths.push(p.clone());
            }
        }
        paths
    }
}

/// Flag overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rounds: Option<usize>,
    pub quotas: Option<Vec<usize>>,
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(rounds) = self.rounds {
            config.rounds = rounds;
        }
        if let Some(quotas) = &self.quotas {
            config.quotas = quotas.clone();
        }
        if let Some(out) = &self.output_dir {
            config.output_dir = out.clone();
        }
        if let Some(jobs) = self.jobs {
            config.jobs = jobs;
        }
    }
}
