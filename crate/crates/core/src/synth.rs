//! Synthetic model generation: parametric per-group score distributions
//! standing in for live models, so the full pipeline can be validated at
//! desk scale.
//!
//! Three distribution families cover the two empirical regimes that
//! matter here: near-symmetric unimodal scores (essay-style grading) and
//! scores massed near the extremes with heavy tails (yes/no screening).
//! The generator can also construct adversarial cases where the average
//! score gap is close to zero while the selection-rate gap is large,
//! which is exactly the failure mode average-gap metrics cannot see.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{CandidateRecord, PointwisePrediction, PredictionEvidence};
use crate::error::{Error, Result};
use crate::metrics::{self, GroupScoreSample};
use crate::scoring::{ScoreMode, ScoreTable};
use crate::seed::{derive_seed, derive_seed_n, rng_from};
use crate::sim::{self, PoolMode};

/// Per-group score distribution family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistFamily {
    Normal {
        mean: f64,
        sd: f64,
    },
    SkewMixture {
        components: Vec<MixComponent>,
    },
    PointMassMix {
        masses: Vec<PointMass>,
        jitter: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub weight: f64,
    pub value: f64,
}

impl DistFamily {
    fn validate(&self) -> Result<()> {
        let check_weights = |weights: &[f64]| -> Result<()> {
            if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
                return Err(Error::InvalidDistribution(
                    "mixture weights must be finite and non-negative".into(),
                ));
            }
            let sum: f64 = weights.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDistribution(format!(
                    "mixture weights sum to {sum}, expected 1"
                )));
            }
            Ok(())
        };
        match self {
            DistFamily::Normal { sd, mean } => {
                if !sd.is_finite() || *sd <= 0.0 || !mean.is_finite() {
                    return Err(Error::InvalidDistribution(format!(
                        "normal(mean={mean}, sd={sd}) requires finite mean and sd > 0"
                    )));
                }
            }
            DistFamily::SkewMixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidDistribution("empty mixture".into()));
                }
                check_weights(&components.iter().map(|c| c.weight).collect::<Vec<_>>())?;
                for c in components {
                    if !c.sd.is_finite() || c.sd <= 0.0 || !c.mean.is_finite() {
                        return Err(Error::InvalidDistribution(format!(
                            "component(mean={}, sd={}) requires finite mean and sd > 0",
                            c.mean, c.sd
                        )));
                    }
                }
            }
            DistFamily::PointMassMix { masses, jitter } => {
                if masses.is_empty() {
                    return Err(Error::InvalidDistribution("empty point-mass mix".into()));
                }
                check_weights(&masses.iter().map(|m| m.weight).collect::<Vec<_>>())?;
                if !jitter.is_finite() || *jitter < 0.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "jitter {jitter} must be finite and >= 0"
                    )));
                }
            }
        }
        Ok(())
    }

    fn sample_one(&self, rng: &mut impl Rng) -> f64 {
        match self {
            DistFamily::Normal { mean, sd } => {
                Normal::new(*mean, *sd).expect("validated").sample(rng)
            }
            DistFamily::SkewMixture { components } => {
                let pick: f64 = rng.random();
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    if pick <= acc {
                        return Normal::new(c.mean, c.sd).expect("validated").sample(rng);
                    }
                }
                let last = components.last().expect("non-empty");
                Normal::new(last.mean, last.sd).expect("validated").sample(rng)
            }
            DistFamily::PointMassMix { masses, jitter } => {
                let pick: f64 = rng.random();
                let mut acc = 0.0;
                let mut value = masses.last().expect("non-empty").value;
                for m in masses {
                    acc += m.weight;
                    if pick <= acc {
                        value = m.value;
                        break;
                    }
                }
                if *jitter > 0.0 {
                    value += Normal::new(0.0, *jitter).expect("validated").sample(rng);
                }
                value
            }
        }
    }
}

/// One group's distribution in a synthetic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDistribution {
    pub group: String,
    pub dist: DistFamily,
}

/// Full specification of one synthetic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModelSpec {
    pub model_id: String,
    pub subtask: String,
    pub seed: u64,
    pub candidates_per_group: usize,
    /// Generated scores are clipped into this closed range.
    pub score_clip: (f64, f64),
    /// Fraction of candidates marked qualified (by latent quality).
    pub qualified_rate: f64,
    /// How strongly latent quality follows the score, in [0, 1].
    pub quality_strength: f64,
    pub groups: Vec<GroupDistribution>,
}

impl SyntheticModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.candidates_per_group < 1 {
            return Err(Error::InvalidDistribution(
                "candidates_per_group must be >= 1".into(),
            ));
        }
        if self.groups.is_empty() {
            return Err(Error::InvalidDistribution("no groups".into()));
        }
        if self.score_clip.0 >= self.score_clip.1 {
            return Err(Error::InvalidDistribution(format!(
                "score clip range ({}, {}) is empty",
                self.score_clip.0, self.score_clip.1
            )));
        }
        if !(0.0..=1.0).contains(&self.qualified_rate) {
            return Err(Error::InvalidDistribution(
                "qualified_rate must lie in [0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.quality_strength) {
            return Err(Error::InvalidDistribution(
                "quality_strength must lie in [0, 1]".into(),
            ));
        }
        for g in &self.groups {
            g.dist.validate()?;
        }
        Ok(())
    }
}

/// Generated candidates, their precomputed-score predictions, and the
/// matching score table. Serializes through the standard file formats,
/// so synthetic and collected datasets are interchangeable downstream.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub records: Vec<CandidateRecord>,
    pub predictions: Vec<PointwisePrediction>,
    pub scores: ScoreTable,
}

impl SyntheticDataset {
    pub fn prediction_rows(&self) -> Vec<(CandidateRecord, PointwisePrediction)> {
        self.records
            .iter()
            .cloned()
            .zip(self.predictions.iter().cloned())
            .collect()
    }
}

/// Generates a dataset from a synthetic model spec, deterministically in
/// the spec's seed.
///
/// Qualification: each candidate draws a latent quality that mixes its
/// standardized score (weight `quality_strength`) with independent
/// noise; the top `qualified_rate` fraction by latent quality is marked
/// qualified.
pub fn gen_scores(spec: &SyntheticModelSpec) -> Result<SyntheticDataset> {
    spec.validate()?;

    struct Draw {
        candidate_id: String,
        group: String,
        score: f64,
        noise: f64,
    }

    let mut draws = Vec::with_capacity(spec.groups.len() * spec.candidates_per_group);
    for gd in &spec.groups {
        let mut rng = rng_from(derive_seed(
            spec.seed,
            &format!("{}/{}", spec.subtask, gd.group),
        ));
        for i in 0..spec.candidates_per_group {
            let raw = gd.dist.sample_one(&mut rng);
            let score = raw.clamp(spec.score_clip.0, spec.score_clip.1);
            let noise: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(&mut rng);
            draws.push(Draw {
                candidate_id: format!("{}_{i:03}", gd.group),
                group: gd.group.clone(),
                score,
                noise,
            });
        }
    }

    let n = draws.len() as f64;
    let mean = draws.iter().map(|d| d.score).sum::<f64>() / n;
    let var = draws.iter().map(|d| (d.score - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let strength = spec.quality_strength;
    let quality: Vec<f64> = draws
        .iter()
        .map(|d| {
            let z = if sd > 0.0 { (d.score - mean) / sd } else { 0.0 };
            strength * z + (1.0 - strength) * d.noise
        })
        .collect();

    let threshold = {
        let mut sorted = quality.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let cut = ((1.0 - spec.qualified_rate) * sorted.len() as f64).floor() as usize;
        sorted.get(cut.min(sorted.len() - 1)).copied()
    };

    let mut records = Vec::with_capacity(draws.len());
    let mut predictions = Vec::with_capacity(draws.len());
    let mut entries = std::collections::BTreeMap::new();
    for (draw, q) in draws.iter().zip(&quality) {
        let qualified = match threshold {
            Some(t) if spec.qualified_rate > 0.0 => *q >= t,
            _ => false,
        };
        records.push(CandidateRecord {
            candidate_id: draw.candidate_id.clone(),
            group: draw.group.clone(),
            subtask: spec.subtask.clone(),
            qualified,
        });
        predictions.push(PointwisePrediction {
            candidate_id: draw.candidate_id.clone(),
            evidence: PredictionEvidence::Score(draw.score),
        });
        entries.insert(draw.candidate_id.clone(), draw.score);
    }

    Ok(SyntheticDataset {
        records,
        predictions,
        scores: ScoreTable {
            subtask: spec.subtask.clone(),
            mode: ScoreMode::Pointwise,
            pool_id: None,
            entries,
        },
    })
}

/// Realized statistics of an adversarial candidate spec.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdversarialStats {
    /// Realized average score gap between the protected and reference
    /// groups.
    pub delta: f64,
    /// Simulated demographic parity gap at k = 1.
    pub dp_gap: f64,
    pub rabbi: f64,
    pub rounds: usize,
}

/// The protected / reference group names used by adversarial specs.
pub const ADVERSARIAL_PROTECTED: &str = "A";
pub const ADVERSARIAL_REFERENCE: &str = "B";

/// Generates the candidate data for `spec`, simulates one-per-group
/// selection at k = 1, and measures the quantities the adversarial
/// filter cares about.
pub fn evaluate_adversarial(
    spec: &SyntheticModelSpec,
    rounds: usize,
    sim_seed: u64,
) -> Result<AdversarialStats> {
    let dataset = gen_scores(spec)?;
    let by_group = |group: &str| -> Result<GroupScoreSample> {
        let scores: Vec<f64> = dataset
            .records
            .iter()
            .filter(|r| r.group == group)
            .map(|r| dataset.scores.entries[&r.candidate_id])
            .collect();
        GroupScoreSample::new(group, scores)
    };
    let a = by_group(ADVERSARIAL_PROTECTED)?;
    let b = by_group(ADVERSARIAL_REFERENCE)?;
    let delta = metrics::delta_pointwise(&a, &b)?.value;
    let rabbi = metrics::rabbi(&a, &b)?.value;

    let pools = sim::build_rounds(&dataset.records, PoolMode::OnePerGroup, rounds, 1, sim_seed)?;
    let outcomes = sim::simulate_outcomes(&pools, |_| Some(dataset.scores.clone()), sim_seed, 1)?;
    let index = crate::data::index_candidates(&dataset.records)?;
    let stats = sim::group_stats(&outcomes, &index)?;
    let dp = sim::dp_gap(&stats, ADVERSARIAL_PROTECTED, ADVERSARIAL_REFERENCE)?;

    Ok(AdversarialStats {
        delta,
        dp_gap: dp,
        rabbi,
        rounds,
    })
}

/// Whether realized statistics qualify as an adversarial case: a near
/// zero average gap hiding a large selection-rate gap that RABBI still
/// sees, with matching signs.
pub fn adversarial_qualifies(stats: &AdversarialStats) -> bool {
    stats.delta.abs() < 0.05
        && stats.dp_gap.abs() > 0.2
        && stats.rabbi.abs() >= 0.2
        && (stats.rabbi * stats.dp_gap) > 0.0
}

fn adversarial_candidate_spec(seed: u64) -> SyntheticModelSpec {
    // Group A: three-quarters of its mass just above the reference, one
    // quarter far below, so the means match while A dominates head to
    // head. Six filler groups sit well under both.
    let mut groups = vec![
        GroupDistribution {
            group: ADVERSARIAL_PROTECTED.into(),
            dist: DistFamily::SkewMixture {
                components: vec![
                    MixComponent {
                        weight: 0.75,
                        mean: 0.35,
                        sd: 0.008,
                    },
                    MixComponent {
                        weight: 0.25,
                        mean: 0.05,
                        sd: 0.008,
                    },
                ],
            },
        },
        GroupDistribution {
            group: ADVERSARIAL_REFERENCE.into(),
            dist: DistFamily::Normal {
                mean: 0.275,
                sd: 0.008,
            },
        },
    ];
    for name in ["C", "D", "E", "F", "G", "H"] {
        groups.push(GroupDistribution {
            group: name.into(),
            dist: DistFamily::Normal {
                mean: 0.10,
                sd: 0.01,
            },
        });
    }
    SyntheticModelSpec {
        model_id: "adversarial".into(),
        subtask: "adversarial".into(),
        seed,
        candidates_per_group: 100,
        score_clip: (0.0, 1.0),
        qualified_rate: 0.5,
        quality_strength: 0.8,
        groups,
    }
}

const ADVERSARIAL_RETRY_BUDGET: usize = 1000;
const ADVERSARIAL_FILTER_ROUNDS: usize = 1000;

/// Constructs a spec whose realized data hides a large allocation gap
/// behind a near-zero average score gap.
///
/// Candidate sub-seeds are derived from `seed` and tried until the
/// realized sample passes [`adversarial_qualifies`]; the passing spec is
/// returned, so regenerating from it reproduces the same data.
pub fn gen_adversarial_case(seed: u64) -> Result<SyntheticModelSpec> {
    for attempt in 0..ADVERSARIAL_RETRY_BUDGET {
        let candidate_seed = derive_seed_n(seed, attempt as u64);
        let spec = adversarial_candidate_spec(candidate_seed);
        let stats = evaluate_adversarial(&spec, ADVERSARIAL_FILTER_ROUNDS, candidate_seed)?;
        if adversarial_qualifies(&stats) {
            return Ok(spec);
        }
    }
    Err(Error::RetryBudgetExhausted {
        attempts: ADVERSARIAL_RETRY_BUDGET,
    })
}

/// Score-distribution regime of a benchmark subtask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Near-symmetric unimodal rating scores on a 1-5 scale.
    EssayLike,
    /// Scores massed near 0 and 1 with heavy tails.
    ResumeLike,
}

impl Regime {
    pub fn subtask_name(self) -> &'static str {
        match self {
            Regime::EssayLike => "essay_like",
            Regime::ResumeLike => "resume_like",
        }
    }
}

/// One synthetic model's scores over a shared candidate set.
#[derive(Debug, Clone)]
pub struct ModelScores {
    pub model_id: String,
    pub table: ScoreTable,
    pub predictions: Vec<PointwisePrediction>,
}

/// A regime's shared candidates plus every model's scores for them.
#[derive(Debug, Clone)]
pub struct RegimeData {
    pub regime: Regime,
    pub subtask: String,
    pub records: Vec<CandidateRecord>,
    pub models: Vec<ModelScores>,
}

/// The synthetic multi-model benchmark: `n_models` models scored on the
/// same candidates in each regime.
#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub regimes: Vec<RegimeData>,
}

pub const BENCHMARK_GROUPS: [&str; 4] = ["G0", "G1", "G2", "G3"];
pub const BENCHMARK_REFERENCE: &str = "G0";

/// Builds the benchmark. Candidates (and their qualification flags) are
/// fixed per regime; every model scores the same people.
///
/// Models in the skewed regime alternate between two bias mechanisms:
/// even models differ across groups in how often a candidate lands in
/// the high-score cluster (visible to average-gap metrics), odd models
/// differ only in where that cluster sits (nearly invisible to them,
/// but decisive for top-k selection).
pub fn gen_benchmark(
    seed: u64,
    n_models: usize,
    candidates_per_group: usize,
) -> Result<SyntheticBenchmark> {
    if n_models == 0 || candidates_per_group == 0 {
        return Err(Error::InvalidConfig(
            "benchmark needs at least one model and one candidate per group".into(),
        ));
    }
    let regimes = [Regime::EssayLike, Regime::ResumeLike]
        .into_iter()
        .map(|regime| gen_regime(regime, seed, n_models, candidates_per_group))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticBenchmark { regimes })
}

fn gen_regime(
    regime: Regime,
    seed: u64,
    n_models: usize,
    candidates_per_group: usize,
) -> Result<RegimeData> {
    let subtask = regime.subtask_name().to_string();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    // Shared candidates with a latent quality draw; the top half is
    // qualified, identically for every model.
    let mut quality_rng = rng_from(derive_seed(seed, &format!("{subtask}/quality")));
    let mut ids = Vec::new();
    let mut quality = Vec::new();
    for group in BENCHMARK_GROUPS {
        for i in 0..candidates_per_group {
            ids.push((format!("{group}_{i:03}"), group.to_string()));
            quality.push(unit.sample(&mut quality_rng));
        }
    }
    let threshold = {
        let mut sorted = quality.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        sorted[sorted.len() / 2]
    };
    let records: Vec<CandidateRecord> = ids
        .iter()
        .zip(&quality)
        .map(|((id, group), q)| CandidateRecord {
            candidate_id: id.clone(),
            group: group.clone(),
            subtask: subtask.clone(),
            qualified: *q >= threshold,
        })
        .collect();

    let mut models = Vec::with_capacity(n_models);
    for model_idx in 0..n_models {
        let model_id = format!("synth-{model_idx:02}");
        let mut rng = rng_from(derive_seed(
            seed,
            &format!("{subtask}/model/{model_idx}"),
        ));

        let mut entries = std::collections::BTreeMap::new();
        match regime {
            Regime::EssayLike => {
                // Per-group mean shift; scores track latent quality with
                // correlation ~0.5.
                let bias: Vec<f64> = BENCHMARK_GROUPS
                    .iter()
                    .map(|_| rng.random_range(-0.7..0.7))
                    .collect();
                for ((id, group), q) in ids.iter().zip(&quality) {
                    let g = BENCHMARK_GROUPS.iter().position(|x| x == group).unwrap();
                    let eps = unit.sample(&mut rng);
                    let score =
                        3.0 + bias[g] + 0.75 * (0.5 * q + (0.75f64).sqrt() * eps);
                    entries.insert(id.clone(), score.clamp(1.0, 5.0));
                }
            }
            Regime::ResumeLike => {
                let rate_driven = model_idx % 2 == 0;
                let shared_rate = rng.random_range(0.60..0.85);
                let rates: Vec<f64> = BENCHMARK_GROUPS
                    .iter()
                    .map(|_| {
                        if rate_driven {
                            rng.random_range(0.50..0.90)
                        } else {
                            shared_rate
                        }
                    })
                    .collect();
                let shifts: Vec<f64> = BENCHMARK_GROUPS
                    .iter()
                    .map(|_| {
                        if rate_driven {
                            0.0
                        } else {
                            rng.random_range(-0.035..0.035)
                        }
                    })
                    .collect();
                for ((id, group), q) in ids.iter().zip(&quality) {
                    let g = BENCHMARK_GROUPS.iter().position(|x| x == group).unwrap();
                    let p_top = (rates[g] + 0.12 * q).clamp(0.03, 0.97);
                    let in_top = rng.random::<f64>() < p_top;
                    let noise = 0.018 * unit.sample(&mut rng);
                    let score = if in_top {
                        0.92 + shifts[g] + 0.005 * q + noise
                    } else {
                        0.06 + 0.005 * q + noise
                    };
                    entries.insert(id.clone(), score.clamp(0.0, 1.0));
                }
            }
        }

        let predictions = ids
            .iter()
            .map(|(id, _)| PointwisePrediction {
                candidate_id: id.clone(),
                evidence: PredictionEvidence::Score(entries[id]),
            })
            .collect();
        models.push(ModelScores {
            model_id,
            table: ScoreTable {
                subtask: subtask.clone(),
                mode: ScoreMode::Pointwise,
                pool_id: None,
                entries,
            },
            predictions,
        });
    }

    Ok(RegimeData {
        regime,
        subtask,
        records,
        models,
    })
}
