//! Bias metrics between a protected group and a reference group.
//!
//! The central measure is the rank-allocational bias index (RABBI): the
//! difference between the fraction of cross-group score pairs favoring
//! the protected group and the fraction favoring the reference group,
//!
//! ```text
//! rabbi(A, B) = (#{(a,b) : s_a > s_b} - #{(a,b) : s_a < s_b}) / (|A||B|)
//! ```
//!
//! which equals the rank-biserial correlation and can be written as
//! `(U_A - U_B) / (n_A n_B)` in Mann-Whitney terms. Tied pairs contribute
//! zero, so that identity holds with or without ties; the textbook
//! `2 U_A / (n_A n_B) - 1` form assumes no ties and is only valid then.
//!
//! Baselines: average score gap (pointwise), average consistent-preference
//! rate (pairwise), Jensen-Shannon divergence, and Earth Mover's distance.
//! The distribution-based metrics are non-directional.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{PairwiseResponse, Verdict};
use crate::error::{Error, Result};

/// Scores of one group's candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupScoreSample {
    group: String,
    scores: Vec<f64>,
}

impl GroupScoreSample {
    /// Builds a sample, rejecting empty or non-finite inputs.
    pub fn new(group: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        let group = group.into();
        if scores.is_empty() {
            return Err(Error::EmptySample { group });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteScore { group });
        }
        Ok(GroupScoreSample { group, scores })
    }

    pub fn group(&self) -> &str {
        &self.group
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }
}

/// Which bias metric a [`BiasScore`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMetric {
    Rabbi,
    DeltaPointwise,
    DeltaPairwise,
    Jsd,
    Emd,
}

impl BiasMetric {
    /// Directional metrics carry a sign (protected minus reference);
    /// non-directional metrics only measure magnitude.
    pub fn directional(self) -> bool {
        match self {
            BiasMetric::Rabbi | BiasMetric::DeltaPointwise | BiasMetric::DeltaPairwise => true,
            BiasMetric::Jsd | BiasMetric::Emd => false,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BiasMetric::Rabbi => "rabbi",
            BiasMetric::DeltaPointwise => "delta_pointwise",
            BiasMetric::DeltaPairwise => "delta_pairwise",
            BiasMetric::Jsd => "jsd",
            BiasMetric::Emd => "emd",
        }
    }
}

/// One bias measurement between a protected group and a reference group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasScore {
    pub metric: BiasMetric,
    pub protected: String,
    pub reference: String,
    pub value: f64,
    pub directional: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

fn bias_score(metric: BiasMetric, a: &str, b: &str, value: f64) -> BiasScore {
    BiasScore {
        metric,
        protected: a.to_string(),
        reference: b.to_string(),
        value,
        directional: metric.directional(),
        p_value: None,
    }
}

/// Strict cross-group pair counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitneyCounts {
    /// Pairs where the protected sample's score is strictly greater.
    pub u_a: f64,
    /// Pairs where the reference sample's score is strictly greater.
    pub u_b: f64,
    /// Exactly tied pairs. `u_a + u_b + tie_pairs = n_a * n_b`.
    pub tie_pairs: f64,
}

/// Counts cross-group pairs via a sorted reference sample; O((n+m) log m)
/// rather than the quadratic double loop.
pub fn mann_whitney_u(a: &GroupScoreSample, b: &GroupScoreSample) -> Result<MannWhitneyCounts> {
    let mut sorted_b = b.scores().to_vec();
    sorted_b.sort_by(|x, y| x.partial_cmp(y).expect("samples are finite"));

    let mut wins = 0u64;
    let mut ties = 0u64;
    for &s in a.scores() {
        let below = sorted_b.partition_point(|&x| x < s) as u64;
        let not_above = sorted_b.partition_point(|&x| x <= s) as u64;
        wins += below;
        ties += not_above - below;
    }
    let total = (a.len() as u64) * (b.len() as u64);
    Ok(MannWhitneyCounts {
        u_a: wins as f64,
        u_b: (total - wins - ties) as f64,
        tie_pairs: ties as f64,
    })
}

/// Rank-allocational bias index in `[-1, 1]`.
///
/// `+1` means every protected score exceeds every reference score, `-1`
/// the reverse, `0` no statistical preference. Antisymmetric in its
/// arguments and invariant under any strictly increasing transform of
/// all scores.
pub fn rabbi(a: &GroupScoreSample, b: &GroupScoreSample) -> Result<BiasScore> {
    let counts = mann_whitney_u(a, b)?;
    let total = a.len() as f64 * b.len() as f64;
    let value = (counts.u_a - counts.u_b) / total;
    Ok(bias_score(BiasMetric::Rabbi, a.group(), b.group(), value))
}

/// Options for the significance approximation of [`rabbi_p_value_with`].
#[derive(Debug, Clone, Copy)]
pub struct PValueOptions {
    /// Use midrank ties in the U statistic and the tie-corrected variance.
    pub tie_correction: bool,
    /// Apply the 0.5 continuity correction to |U - mean|.
    pub continuity_correction: bool,
}

impl Default for PValueOptions {
    fn default() -> Self {
        PValueOptions {
            tie_correction: true,
            continuity_correction: false,
        }
    }
}

/// Two-sided p-value for RABBI from the normal approximation to the
/// Mann-Whitney U statistic, with tie correction by default.
///
/// All-identical scores have zero variance; p = 1 by convention. The
/// p-value is reported for reference and plays no part in pass/fail
/// decisions elsewhere in the crate.
pub fn rabbi_p_value(a: &GroupScoreSample, b: &GroupScoreSample) -> Result<f64> {
    rabbi_p_value_with(a, b, PValueOptions::default())
}

pub fn rabbi_p_value_with(
    a: &GroupScoreSample,
    b: &GroupScoreSample,
    opts: PValueOptions,
) -> Result<f64> {
    let counts = mann_whitney_u(a, b)?;
    let n_a = a.len() as f64;
    let n_b = b.len() as f64;
    let n = n_a + n_b;
    let mean = n_a * n_b / 2.0;

    let variance = if opts.tie_correction {
        let tie_term: f64 = tie_group_sizes(a, b)
            .into_iter()
            .map(|t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        (n_a * n_b / 12.0) * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        n_a * n_b * (n + 1.0) / 12.0
    };
    if variance <= 0.0 {
        return Ok(1.0);
    }

    // With midrank ties, U - mean = (U_A - U_B) / 2; without tie handling
    // the strict count U_A is used directly.
    let u = if opts.tie_correction {
        counts.u_a + 0.5 * counts.tie_pairs
    } else {
        counts.u_a
    };
    let mut deviation = (u - mean).abs();
    if opts.continuity_correction {
        deviation = (deviation - 0.5).max(0.0);
    }
    let z = deviation / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = 2.0 * (1.0 - normal.cdf(z));
    Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Sizes of tie groups in the pooled sample (sizes of 1 contribute
/// nothing to the correction but are cheap to include).
fn tie_group_sizes(a: &GroupScoreSample, b: &GroupScoreSample) -> Vec<usize> {
    let mut pooled: Vec<f64> = a.scores().iter().chain(b.scores()).copied().collect();
    pooled.sort_by(|x, y| x.partial_cmp(y).expect("samples are finite"));
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j] == pooled[i] {
            j += 1;
        }
        sizes.push(j - i);
        i = j;
    }
    sizes
}

/// Average performance gap: mean protected score minus mean reference
/// score. Pointwise settings only.
pub fn delta_pointwise(a: &GroupScoreSample, b: &GroupScoreSample) -> Result<BiasScore> {
    Ok(bias_score(
        BiasMetric::DeltaPointwise,
        a.group(),
        b.group(),
        a.mean() - b.mean(),
    ))
}

/// Average pairwise preference: the fraction of observed cross-group
/// pairs where the model consistently preferred the protected group's
/// candidate in both prompt orders.
///
/// Each (pool, unordered pair) occurrence counts once; a pair seen in
/// only one order cannot be consistent and stays in the denominator.
pub fn delta_pairwise(
    responses: &[PairwiseResponse],
    groups: &BTreeMap<String, String>,
    protected: &str,
    reference: &str,
) -> Result<BiasScore> {
    #[derive(Default)]
    struct CrossPair {
        /// Winners named by decisive prompts, by candidate id.
        decisive: Vec<String>,
        prompts: usize,
        soft: usize,
    }

    let mut pairs: BTreeMap<(String, String, String), CrossPair> = BTreeMap::new();
    for r in responses {
        let (Some(g_first), Some(g_second)) = (groups.get(&r.first), groups.get(&r.second)) else {
            continue;
        };
        let is_cross = (g_first == protected && g_second == reference)
            || (g_first == reference && g_second == protected);
        if !is_cross {
            continue;
        }
        let (lo, hi) = r.pair_key();
        let state = pairs.entry((r.pool_id.clone(), lo, hi)).or_default();
        state.prompts += 1;
        match r.verdict {
            Verdict::First => state.decisive.push(r.first.clone()),
            Verdict::Second => state.decisive.push(r.second.clone()),
            Verdict::Tie | Verdict::Invalid => state.soft += 1,
        }
    }

    if pairs.is_empty() {
        return Err(Error::NoCrossPairs {
            protected: protected.to_string(),
            reference: reference.to_string(),
        });
    }

    let mut consistent_wins = 0usize;
    for state in pairs.values() {
        if state.prompts == 2 && state.soft == 0 && state.decisive[0] == state.decisive[1] {
            let winner_group = &groups[&state.decisive[0]];
            if winner_group == protected {
                consistent_wins += 1;
            }
        }
    }
    let value = consistent_wins as f64 / pairs.len() as f64;
    Ok(bias_score(
        BiasMetric::DeltaPairwise,
        protected,
        reference,
        value,
    ))
}

/// How score samples are binned into empirical distributions for JSD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinningRule {
    /// Exact discrete support when the union has at most `max_discrete`
    /// distinct values, otherwise `uniform_bins` equal-width bins over
    /// the joint min-max range.
    Auto {
        max_discrete: usize,
        uniform_bins: usize,
    },
    /// Always use the exact discrete support.
    DiscreteSupport,
    /// Always use this many equal-width bins over the joint range.
    UniformBins(usize),
}

impl Default for BinningRule {
    fn default() -> Self {
        // Screening scores cluster on a handful of values, so exact
        // support is usually the right histogram; 20 bins otherwise.
        BinningRule::Auto {
            max_discrete: 32,
            uniform_bins: 20,
        }
    }
}

fn histograms(a: &[f64], b: &[f64], rule: BinningRule) -> (Vec<f64>, Vec<f64>) {
    let mut support: Vec<f64> = a.iter().chain(b).copied().collect();
    support.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    support.dedup();

    let discrete = match rule {
        BinningRule::DiscreteSupport => true,
        BinningRule::UniformBins(_) => false,
        BinningRule::Auto { max_discrete, .. } => support.len() <= max_discrete,
    };

    if discrete {
        let index: BTreeMap<u64, usize> = support
            .iter()
            .enumerate()
            .map(|(i, v)| (v.to_bits(), i))
            .collect();
        let mut p = vec![0.0; support.len()];
        let mut q = vec![0.0; support.len()];
        for &x in a {
            p[index[&x.to_bits()]] += 1.0 / a.len() as f64;
        }
        for &x in b {
            q[index[&x.to_bits()]] += 1.0 / b.len() as f64;
        }
        (p, q)
    } else {
        let bins = match rule {
            BinningRule::UniformBins(n) => n,
            BinningRule::Auto { uniform_bins, .. } => uniform_bins,
            BinningRule::DiscreteSupport => unreachable!(),
        }
        .max(1);
        let lo = support[0];
        let hi = *support.last().expect("non-empty support");
        let width = (hi - lo) / bins as f64;
        let bin_of = |x: f64| {
            if width == 0.0 {
                0
            } else {
                (((x - lo) / width) as usize).min(bins - 1)
            }
        };
        let mut p = vec![0.0; bins];
        let mut q = vec![0.0; bins];
        for &x in a {
            p[bin_of(x)] += 1.0 / a.len() as f64;
        }
        for &x in b {
            q[bin_of(x)] += 1.0 / b.len() as f64;
        }
        (p, q)
    }
}

/// Jensen-Shannon divergence between the binned empirical score
/// distributions, base-2 logarithms so the value lies in `[0, 1]`.
/// Symmetric and non-directional.
pub fn jsd(a: &GroupScoreSample, b: &GroupScoreSample, rule: BinningRule) -> Result<BiasScore> {
    let (p, q) = histograms(a.scores(), b.scores(), rule);
    let m: Vec<f64> = p.iter().zip(&q).map(|(x, y)| 0.5 * (x + y)).collect();
    let kl = |from: &[f64], to: &[f64]| -> f64 {
        from.iter()
            .zip(to)
            .filter(|(&f, _)| f > 0.0)
            .map(|(&f, &t)| f * (f / t).log2())
            .sum()
    };
    let value = 0.5 * kl(&p, &m) + 0.5 * kl(&q, &m);
    // Clamp away tiny negative rounding noise.
    let value = value.clamp(0.0, 1.0);
    Ok(bias_score(BiasMetric::Jsd, a.group(), b.group(), value))
}

/// Earth Mover's (1-Wasserstein) distance between the empirical score
/// distributions, in raw score units: the integral of |F_A - F_B| over
/// the score axis. Symmetric and non-directional.
pub fn emd(a: &GroupScoreSample, b: &GroupScoreSample) -> Result<BiasScore> {
    let mut xs = a.scores().to_vec();
    let mut ys = b.scores().to_vec();
    xs.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    ys.sort_by(|x, y| x.partial_cmp(y).expect("finite"));

    let step_a = 1.0 / xs.len() as f64;
    let step_b = 1.0 / ys.len() as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let (mut cdf_a, mut cdf_b) = (0.0f64, 0.0f64);
    let mut prev: Option<f64> = None;
    let mut total = 0.0;

    while i < xs.len() || j < ys.len() {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        if let Some(p) = prev {
            total += (cdf_a - cdf_b).abs() * (next - p);
        }
        while i < xs.len() && xs[i] == next {
            cdf_a += step_a;
            i += 1;
        }
        while j < ys.len() && ys[j] == next {
            cdf_b += step_b;
            j += 1;
        }
        prev = Some(next);
    }

    Ok(bias_score(BiasMetric::Emd, a.group(), b.group(), total))
}

/// Sample skewness and excess kurtosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistMoments {
    /// Fisher-Pearson skewness m3 / m2^1.5.
    pub skewness: f64,
    /// m4 / m2^2 - 3.
    pub excess_kurtosis: f64,
}

/// Central-moment skewness and excess kurtosis of a score sample.
pub fn dist_moments(sample: &[f64]) -> Result<DistMoments> {
    if sample.len() < 3 {
        return Err(Error::SampleTooSmall {
            need: 3,
            got: sample.len(),
        });
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let moment = |k: u32| sample.iter().map(|x| (x - mean).powi(k as i32)).sum::<f64>() / n;
    let m2 = moment(2);
    if m2 == 0.0 {
        return Err(Error::ZeroVariance {
            context: "distribution moments".into(),
        });
    }
    Ok(DistMoments {
        skewness: moment(3) / m2.powf(1.5),
        excess_kurtosis: moment(4) / (m2 * m2) - 3.0,
    })
}
