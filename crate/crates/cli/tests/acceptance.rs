//! Acceptance suite: every release gate runs here, one test per
//! criterion, each printing a PASS line (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! The gates are property-based and synthetic-oracle-based and run with
//! no network access; the only endpoint involved is the in-process stub.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use rabbi_core::audit::{pointwise_bias_rows, AuditOptions};
use rabbi_core::data::{CandidateRecord, LabelScale, PairwiseResponse, PoolSpec, Verdict};
use rabbi_core::metrics::{
    self, BiasMetric, BinningRule, GroupScoreSample, PValueOptions,
};
use rabbi_core::report::GapKind;
use rabbi_core::scoring::{self, ScoreMode, ScoreTable};
use rabbi_core::seed::rng_from;
use rabbi_core::sim::{self, GapSimConfig, GroupSelectionStats, PoolMode};
use rabbi_core::synth;
use rabbi_core::validity::{self, pair_metrics_with_gaps, FairnessRanking};

fn sample(group: &str, scores: &[f64]) -> GroupScoreSample {
    GroupScoreSample::new(group, scores.to_vec()).unwrap()
}

fn random_sample(rng: &mut impl Rng, max_len: usize, value_range: u32) -> Vec<f64> {
    let len = rng.random_range(1..=max_len);
    (0..len)
        .map(|_| f64::from(rng.random_range(0..value_range)))
        .collect()
}

/// Independently coded quadratic pair counter (the oracle).
fn brute_force_rabbi(a: &[f64], b: &[f64]) -> f64 {
    let mut favorable = 0i64;
    let mut unfavorable = 0i64;
    for &x in a {
        for &y in b {
            if x > y {
                favorable += 1;
            }
            if x < y {
                unfavorable += 1;
            }
        }
    }
    (favorable - unfavorable) as f64 / (a.len() as f64 * b.len() as f64)
}

#[test]
fn criterion_01_rabbi_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = rng_from(0xACCE01);
    for _ in 0..1000 {
        // Small integer range to force ties.
        let a = random_sample(&mut rng, 12, 6);
        let b = random_sample(&mut rng, 12, 6);
        let ga = sample("A", &a);
        let gb = sample("B", &b);

        let r = metrics::rabbi(&ga, &gb).unwrap().value;
        assert_eq!(r, brute_force_rabbi(&a, &b), "a={a:?} b={b:?}");

        let counts = metrics::mann_whitney_u(&ga, &gb).unwrap();
        let total = a.len() as f64 * b.len() as f64;
        assert_eq!(counts.u_a + counts.u_b + counts.tie_pairs, total);
        let via_u = (counts.u_a - counts.u_b) / total;
        assert!((r - via_u).abs() <= 1e-12, "a={a:?} b={b:?}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "acceptance criterion 1: PASS - rabbi matches the brute-force pair counter and \
         (U_A-U_B)/(n_A n_B) on 1000 random tied samples in {elapsed:?}"
    );
}

#[test]
fn criterion_02_tie_free_u_identity() {
    let start = Instant::now();
    let mut rng = rng_from(0xACCE02);
    for _ in 0..1000 {
        // Draw distinct values across both samples: no ties anywhere.
        let n_a = rng.random_range(1..=12);
        let n_b = rng.random_range(1..=12);
        let mut values: Vec<f64> = (0..1000).map(f64::from).collect();
        for i in (1..values.len()).rev() {
            let j = rng.random_range(0..=i);
            values.swap(i, j);
        }
        let a: Vec<f64> = values[..n_a].to_vec();
        let b: Vec<f64> = values[n_a..n_a + n_b].to_vec();

        let ga = sample("A", &a);
        let gb = sample("B", &b);
        let r = metrics::rabbi(&ga, &gb).unwrap().value;
        let counts = metrics::mann_whitney_u(&ga, &gb).unwrap();
        assert_eq!(counts.tie_pairs, 0.0);
        let identity = 2.0 * counts.u_a / (n_a as f64 * n_b as f64) - 1.0;
        assert!((r - identity).abs() <= 1e-12);
    }
    let elapsed = start.elapsed();
    println!(
        "acceptance criterion 2: PASS - tie-free identity rabbi = 2 U_A/(n_A n_B) - 1 \
         on 1000 random samples in {elapsed:?}"
    );
}

#[test]
fn criterion_03_metric_invariant_suite() {
    let start = Instant::now();
    let mut rng = rng_from(0xACCE03);

    // Antisymmetry and bounds for rabbi; symmetry for JSD and EMD.
    for _ in 0..500 {
        let a = random_sample(&mut rng, 10, 8);
        let b = random_sample(&mut rng, 10, 8);
        let ga = sample("A", &a);
        let gb = sample("B", &b);

        let ab = metrics::rabbi(&ga, &gb).unwrap().value;
        let ba = metrics::rabbi(&gb, &ga).unwrap().value;
        assert_eq!(ab, -ba);
        assert!((-1.0..=1.0).contains(&ab));

        let j_ab = metrics::jsd(&ga, &gb, BinningRule::default()).unwrap().value;
        let j_ba = metrics::jsd(&gb, &ga, BinningRule::default()).unwrap().value;
        assert!((j_ab - j_ba).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&j_ab));

        let e_ab = metrics::emd(&ga, &gb).unwrap().value;
        let e_ba = metrics::emd(&gb, &ga).unwrap().value;
        assert!((e_ab - e_ba).abs() < 1e-12);
        assert!(e_ab >= 0.0);
    }

    // Antisymmetry of both allocation gaps over random count fixtures.
    for _ in 0..500 {
        let mut stats: BTreeMap<String, GroupSelectionStats> = BTreeMap::new();
        for group in ["A", "B"] {
            let total = rng.random_range(1..50u64);
            let selected = rng.random_range(0..=total);
            let qualified_total = rng.random_range(1..=total);
            let qualified_selected = rng.random_range(0..=qualified_total.min(selected));
            stats.insert(
                group.to_string(),
                GroupSelectionStats {
                    total,
                    selected,
                    qualified_total,
                    qualified_selected,
                },
            );
        }
        let dp_ab = sim::dp_gap(&stats, "A", "B").unwrap();
        let dp_ba = sim::dp_gap(&stats, "B", "A").unwrap();
        assert_eq!(dp_ab, -dp_ba);
        assert!((-1.0..=1.0).contains(&dp_ab));
        let eo_ab = sim::eo_gap(&stats, "A", "B").unwrap();
        let eo_ba = sim::eo_gap(&stats, "B", "A").unwrap();
        assert_eq!(eo_ab, -eo_ba);
        assert!((-1.0..=1.0).contains(&eo_ab));
    }

    // Pairwise score conservation over 10^4 randomized pools.
    let verdicts = [Verdict::First, Verdict::Second, Verdict::Tie, Verdict::Invalid];
    for pool_idx in 0..10_000 {
        let n = rng.random_range(2..=6);
        let mut responses = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                responses.push(PairwiseResponse {
                    subtask: "t".into(),
                    pool_id: format!("p{pool_idx}"),
                    first: format!("c{i}"),
                    second: format!("c{j}"),
                    verdict: verdicts[rng.random_range(0..verdicts.len())],
                });
            }
        }
        let table = scoring::pairwise_scores(&responses).unwrap();
        let total: f64 = table.entries.values().sum();
        let expected = (n * (n - 1)) as f64 / 2.0;
        assert!((total - expected).abs() < 1e-9, "pool {pool_idx}: {total} vs {expected}");
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "acceptance criterion 3: PASS - antisymmetry, bounds, symmetry, and pairwise \
         conservation over 10^4 randomized pools in {elapsed:?}"
    );
}

#[test]
fn criterion_04_monotone_transform_invariance() {
    let transform = |x: f64| x * x * x + x;
    let mut rng = rng_from(0xACCE04);
    for _ in 0..200 {
        let a = random_sample(&mut rng, 10, 8);
        let b = random_sample(&mut rng, 10, 8);
        let before = metrics::rabbi(&sample("A", &a), &sample("B", &b)).unwrap().value;
        let ta: Vec<f64> = a.iter().map(|&x| transform(x)).collect();
        let tb: Vec<f64> = b.iter().map(|&x| transform(x)).collect();
        let after = metrics::rabbi(&sample("A", &ta), &sample("B", &tb)).unwrap().value;
        assert_eq!(before, after, "rabbi moved under x^3 + x");
    }

    // One fixture where the same transform moves delta and emd.
    let a = sample("A", &[0.0, 3.0]);
    let b = sample("B", &[1.0, 2.0]);
    let ta = sample("A", &[transform(0.0), transform(3.0)]);
    let tb = sample("B", &[transform(1.0), transform(2.0)]);
    let delta_moved = metrics::delta_pointwise(&a, &b).unwrap().value
        != metrics::delta_pointwise(&ta, &tb).unwrap().value;
    let emd_moved =
        metrics::emd(&a, &b).unwrap().value != metrics::emd(&ta, &tb).unwrap().value;
    assert!(delta_moved, "delta_pointwise unchanged by the transform");
    assert!(emd_moved, "emd unchanged by the transform");
    println!(
        "acceptance criterion 4: PASS - x -> x^3 + x leaves rabbi exactly unchanged \
         while moving delta_pointwise and emd"
    );
}

/// Independent top-k oracle: full sort by (score desc, id asc).
fn sort_oracle_top_k(pool: &PoolSpec, scores: &BTreeMap<String, f64>) -> Vec<String> {
    let mut members: Vec<&String> = pool.members.iter().collect();
    members.sort_by(|x, y| {
        scores[*y]
            .partial_cmp(&scores[*x])
            .unwrap()
            .then_with(|| x.cmp(y))
    });
    members.into_iter().take(pool.k).cloned().collect()
}

#[test]
fn criterion_05_simulation_correctness() {
    let start = Instant::now();
    let mut rng = rng_from(0xACCE05);

    // Top-k equals the sort oracle on 10^3 random pools of size <= 6
    // with distinct scores.
    for pool_idx in 0..1000 {
        let n = rng.random_range(2..=6usize);
        let k = rng.random_range(1..n);
        let members: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let mut values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        for i in (1..values.len()).rev() {
            let j = rng.random_range(0..=i);
            values.swap(i, j);
        }
        let entries: BTreeMap<String, f64> =
            members.iter().cloned().zip(values.iter().copied()).collect();
        let pool = PoolSpec {
            pool_id: format!("p{pool_idx}"),
            subtask: "t".into(),
            members,
            k,
        };
        let table = ScoreTable {
            subtask: "t".into(),
            mode: ScoreMode::Pointwise,
            pool_id: None,
            entries: entries.clone(),
        };
        let outcome = sim::select_top_k(&pool, &table, pool_idx as u64).unwrap();
        assert_eq!(outcome.selected.len(), k);
        let mut got = outcome.selected.clone();
        got.sort();
        let mut want = sort_oracle_top_k(&pool, &entries);
        want.sort();
        assert_eq!(got, want);
    }

    // Per-round selected count and appearance totals match construction.
    let mut candidates = Vec::new();
    for g in 0..4 {
        for c in 0..25 {
            candidates.push(CandidateRecord {
                candidate_id: format!("g{g}c{c}"),
                group: format!("G{g}"),
                subtask: "t".into(),
                qualified: c % 2 == 0,
            });
        }
    }
    let entries: BTreeMap<String, f64> = candidates
        .iter()
        .enumerate()
        .map(|(i, r)| (r.candidate_id.clone(), ((i * 13) % 17) as f64))
        .collect();
    let table = ScoreTable {
        subtask: "t".into(),
        mode: ScoreMode::Pointwise,
        pool_id: None,
        entries,
    };
    let rounds = 500;
    let k = 2;
    let pools = sim::build_rounds(&candidates, PoolMode::OnePerGroup, rounds, k, 99).unwrap();
    let outcomes = sim::simulate_outcomes(&pools, |_| Some(table.clone()), 99, 2).unwrap();
    for outcome in &outcomes {
        assert_eq!(outcome.selected.len(), k);
    }
    let index = rabbi_core::data::index_candidates(&candidates).unwrap();
    let stats = sim::group_stats(&outcomes, &index).unwrap();
    let mut selected_total = 0;
    for g in 0..4 {
        let s = &stats[&format!("G{g}")];
        assert_eq!(s.total, rounds as u64);
        selected_total += s.selected;
    }
    assert_eq!(selected_total, (k * rounds) as u64);

    // Seeded tie-break selects each tied candidate 50% +/- 2% over 10^4 seeds.
    let pool = PoolSpec {
        pool_id: "tie".into(),
        subtask: "t".into(),
        members: vec!["a".into(), "b".into()],
        k: 1,
    };
    let tied = ScoreTable {
        subtask: "t".into(),
        mode: ScoreMode::Pointwise,
        pool_id: None,
        entries: [("a".to_string(), 0.5), ("b".to_string(), 0.5)].into(),
    };
    let mut a_wins = 0usize;
    let trials = 10_000;
    for seed in 0..trials {
        let outcome = sim::select_top_k(&pool, &tied, seed as u64).unwrap();
        if outcome.is_selected("a") {
            a_wins += 1;
        }
        if seed < 5 {
            // Stability: the same seed always picks the same winner.
            let again = sim::select_top_k(&pool, &tied, seed as u64).unwrap();
            assert_eq!(outcome, again);
        }
    }
    let rate = a_wins as f64 / trials as f64;
    assert!((rate - 0.5).abs() <= 0.02, "tie-break rate {rate}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "acceptance criterion 5: PASS - selection counts, sort-oracle agreement on 10^3 \
         pools, and tie-break rate {rate:.3} in {elapsed:?}"
    );
}

#[test]
fn criterion_06_average_gap_failure_mode() {
    let spec = synth::gen_adversarial_case(0xACCE06).unwrap();
    let stats = synth::evaluate_adversarial(&spec, 2000, spec.seed).unwrap();
    assert!(stats.delta.abs() < 0.05, "delta = {}", stats.delta);
    assert!(stats.dp_gap.abs() >= 0.2, "dp_gap = {}", stats.dp_gap);
    assert!(stats.rabbi.abs() >= 0.2, "rabbi = {}", stats.rabbi);
    assert!(
        stats.rabbi * stats.dp_gap > 0.0,
        "signs disagree: rabbi = {}, dp_gap = {}",
        stats.rabbi,
        stats.dp_gap
    );
    println!(
        "acceptance criterion 6: PASS - adversarial case hides |delta| = {:.4} behind \
         dp_gap = {:+.3} with rabbi = {:+.3} (same sign), 8-member pools, k = 1, 2000 rounds",
        stats.delta.abs(),
        stats.dp_gap,
        stats.rabbi
    );
}

#[test]
fn criterion_07_synthetic_predictive_validity() {
    let start = Instant::now();
    let bench = synth::gen_benchmark(0xACCE07, 10, 60).unwrap();
    let opts = AuditOptions {
        include_p_values: false,
        ..AuditOptions::default()
    };

    let mut bias_rows = Vec::new();
    let mut gap_rows = Vec::new();
    for regime in &bench.regimes {
        for model in &regime.models {
            bias_rows.extend(
                pointwise_bias_rows(
                    &regime.records,
                    &model.table,
                    &model.model_id,
                    synth::BENCHMARK_REFERENCE,
                    &opts,
                )
                .unwrap(),
            );
            let cfg = GapSimConfig {
                mode: PoolMode::OnePerGroup,
                quotas: vec![1],
                rounds: 1000,
                seed: rabbi_core::seed::derive_seed(0xACCE07, &regime.subtask),
                jobs: 2,
            };
            let (rows, _) = sim::simulate_gaps(
                &regime.records,
                |_| Some(model.table.clone()),
                &cfg,
                &model.model_id,
                synth::BENCHMARK_REFERENCE,
            )
            .unwrap();
            gap_rows.extend(rows);
        }
    }

    let pairs = pair_metrics_with_gaps(&bias_rows, &gap_rows);
    let corr = |metric: BiasMetric, subtask: Option<&str>| -> f64 {
        let xs: Vec<f64> = pairs
            .iter()
            .filter(|p| {
                p.metric == metric
                    && p.gap_kind == GapKind::DemographicParity
                    && subtask.is_none_or(|s| p.subtask == s)
            })
            .map(|p| p.metric_value)
            .collect();
        let ys: Vec<f64> = pairs
            .iter()
            .filter(|p| {
                p.metric == metric
                    && p.gap_kind == GapKind::DemographicParity
                    && subtask.is_none_or(|s| p.subtask == s)
            })
            .map(|p| p.gap_value)
            .collect();
        validity::pearson(&xs, &ys).unwrap()
    };

    let r_rabbi_overall = corr(BiasMetric::Rabbi, None);
    let skewed = "resume_like";
    let r_rabbi = corr(BiasMetric::Rabbi, Some(skewed));
    let r_delta = corr(BiasMetric::DeltaPointwise, Some(skewed));
    let r_jsd = corr(BiasMetric::Jsd, Some(skewed));

    assert!(
        r_rabbi_overall >= 0.9,
        "overall r(rabbi, dp) = {r_rabbi_overall}"
    );
    assert!(
        r_rabbi > r_delta,
        "skewed regime: r(rabbi) = {r_rabbi} vs r(delta) = {r_delta}"
    );
    assert!(
        r_rabbi > r_jsd,
        "skewed regime: r(rabbi) = {r_rabbi} vs r(jsd) = {r_jsd}"
    );

    // Model-selection utility on the same benchmark: rabbi's NDCG@10
    // against the gap-ideal ranking is at least each baseline's.
    let mut warnings = Vec::new();
    let (rankings, _) = validity::ranking_report(&bias_rows, &gap_rows, 1, &mut warnings);
    let ndcg10 = |metric: BiasMetric| -> f64 {
        rankings
            .iter()
            .find(|c| {
                c.metric == metric
                    && c.gap_kind == GapKind::DemographicParity
                    && c.subtask == skewed
            })
            .map(|c| c.ndcg[9])
            .expect("10-model ranking cell")
    };
    let ndcg_rabbi = ndcg10(BiasMetric::Rabbi);
    let ndcg_delta = ndcg10(BiasMetric::DeltaPointwise);
    let ndcg_jsd = ndcg10(BiasMetric::Jsd);
    assert!(
        ndcg_rabbi >= ndcg_delta && ndcg_rabbi >= ndcg_jsd,
        "ndcg@10: rabbi {ndcg_rabbi} vs delta {ndcg_delta} vs jsd {ndcg_jsd}"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "acceptance criterion 7: PASS - 10 models x 2 regimes x 1000 rounds: overall \
         r(rabbi, dp) = {r_rabbi_overall:.3}; skewed regime rabbi {r_rabbi:.3} > delta \
         {r_delta:.3} and > jsd {r_jsd:.3}; ndcg@10 rabbi {ndcg_rabbi:.3} >= delta \
         {ndcg_delta:.3} and >= jsd {ndcg_jsd:.3} in {elapsed:?}"
    );
}

#[test]
fn criterion_08_ndcg_correctness() {
    let ranking = |models: &[(&str, f64)]| -> FairnessRanking {
        let map: BTreeMap<String, f64> =
            models.iter().map(|(m, v)| (m.to_string(), *v)).collect();
        validity::rank_models(&map, "test")
    };

    // Ideal against itself is 1 at every cutoff.
    let sigma = ranking(&[("M1", 0.1), ("M2", 0.2), ("M3", 0.3), ("M4", 0.4), ("M5", 0.5)]);
    for n in 1..=5 {
        let v = validity::ndcg_at(&sigma, &sigma, n).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "ndcg@{n} = {v}");
    }

    // Hand-derived 3-model example.
    let sigma3 = ranking(&[("M1", 0.1), ("M2", 0.2), ("M3", 0.3)]);
    let tau3 = ranking(&[("M2", 0.1), ("M1", 0.2), ("M3", 0.3)]);
    let v = validity::ndcg_at(&tau3, &sigma3, 3).unwrap();
    assert!((v - 0.9225).abs() <= 1e-4, "ndcg = {v}");

    // Permuting below rank N leaves NDCG@N unchanged.
    let tau_low_swap = ranking(&[("M1", 0.1), ("M2", 0.2), ("M3", 0.3), ("M5", 0.4), ("M4", 0.5)]);
    for n in 1..=3 {
        let a = validity::ndcg_at(&sigma, &sigma, n).unwrap();
        let b = validity::ndcg_at(&tau_low_swap, &sigma, n).unwrap();
        assert!((a - b).abs() < 1e-12, "ndcg@{n} changed: {a} vs {b}");
    }
    println!(
        "acceptance criterion 8: PASS - ndcg(sigma, sigma, N) = 1, the 3-model example \
         equals 0.9225, and below-cutoff permutations leave NDCG@N unchanged"
    );
}

#[test]
fn criterion_09_hand_derived_values() {
    let tol = 1e-4;
    let assert_close = |label: &str, got: f64, want: f64| {
        assert!((got - want).abs() <= tol, "{label}: {got} vs {want}");
    };

    // rabbi on the enumerated 9-pair fixture.
    let a = sample("A", &[3.0, 1.0, 2.0]);
    let b = sample("B", &[2.0, 2.0, 4.0]);
    assert_close("rabbi", metrics::rabbi(&a, &b).unwrap().value, -1.0 / 3.0);

    // Mann-Whitney counts (2, 5) with 2 ties.
    let counts = metrics::mann_whitney_u(&a, &b).unwrap();
    assert_eq!((counts.u_a, counts.u_b, counts.tie_pairs), (2.0, 5.0, 2.0));

    // Uncorrected normal approximation on the same fixture.
    let p = metrics::rabbi_p_value_with(
        &a,
        &b,
        PValueOptions {
            tie_correction: false,
            continuity_correction: false,
        },
    )
    .unwrap();
    assert!((p - 0.2752).abs() <= 1e-3, "p = {p}");

    // Pairwise tournament pool: a = 1.5, b = 0.25, c = 1.25.
    let resp = |first: &str, second: &str, verdict: Verdict| PairwiseResponse {
        subtask: "t".into(),
        pool_id: "p".into(),
        first: first.into(),
        second: second.into(),
        verdict,
    };
    let table = scoring::pairwise_scores(&[
        resp("a", "b", Verdict::First),
        resp("b", "a", Verdict::Second),
        resp("a", "c", Verdict::First),
        resp("c", "a", Verdict::First),
        resp("b", "c", Verdict::Tie),
        resp("c", "b", Verdict::First),
    ])
    .unwrap();
    assert_close("pairwise a", table.entries["a"], 1.5);
    assert_close("pairwise b", table.entries["b"], 0.25);
    assert_close("pairwise c", table.entries["c"], 1.25);

    // Pointwise derived value 0.2/0.6 -> 0.75.
    let pred = rabbi_core::data::PointwisePrediction {
        candidate_id: "x".into(),
        evidence: rabbi_core::data::PredictionEvidence::LabelProbs(
            [("No".to_string(), 0.2), ("Yes".to_string(), 0.6)].into(),
        ),
    };
    assert_close(
        "pointwise",
        scoring::pointwise_score(&pred, &LabelScale::yes_no()).unwrap(),
        0.75,
    );

    // Allocation gaps from the counting fixtures.
    let stats: BTreeMap<String, GroupSelectionStats> = [
        (
            "A".to_string(),
            GroupSelectionStats {
                total: 4,
                selected: 3,
                qualified_total: 4,
                qualified_selected: 2,
            },
        ),
        (
            "B".to_string(),
            GroupSelectionStats {
                total: 4,
                selected: 1,
                qualified_total: 5,
                qualified_selected: 4,
            },
        ),
    ]
    .into();
    assert_close("dp_gap", sim::dp_gap(&stats, "A", "B").unwrap(), 0.5);
    assert_close("eo_gap", sim::eo_gap(&stats, "A", "B").unwrap(), -0.3);

    // JSD of P = (1, 0) vs Q = (0.5, 0.5) in bits.
    let jsd = metrics::jsd(
        &sample("A", &[0.0, 0.0]),
        &sample("B", &[0.0, 1.0]),
        BinningRule::default(),
    )
    .unwrap()
    .value;
    assert_close("jsd", jsd, 0.3113);

    // EMD of {0,1} vs {1,2}.
    let emd = metrics::emd(&sample("A", &[0.0, 1.0]), &sample("B", &[1.0, 2.0]))
        .unwrap()
        .value;
    assert_close("emd", emd, 1.0);

    // Consistent-preference rate 0.25 on the mixed cross-pair fixture.
    let groups: BTreeMap<String, String> = [
        ("a1", "A"),
        ("a2", "A"),
        ("b1", "B"),
        ("b2", "B"),
    ]
    .into_iter()
    .map(|(c, g)| (c.to_string(), g.to_string()))
    .collect();
    let delta_pair = metrics::delta_pairwise(
        &[
            resp("a1", "b1", Verdict::First),
            resp("b1", "a1", Verdict::Second),
            resp("a1", "b2", Verdict::Second),
            resp("b2", "a1", Verdict::First),
            resp("a2", "b1", Verdict::First),
            resp("b1", "a2", Verdict::First),
            resp("a2", "b2", Verdict::Second),
            resp("b2", "a2", Verdict::Second),
        ],
        &groups,
        "A",
        "B",
    )
    .unwrap()
    .value;
    assert_close("delta_pairwise", delta_pair, 0.25);

    // RMS, Pearson, and moments.
    assert_close(
        "rms",
        validity::rms_aggregate(&[0.3, -0.4]).unwrap(),
        0.35355,
    );
    assert_close(
        "pearson",
        validity::pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(),
        0.5,
    );
    let moments = metrics::dist_moments(&[1.0, 2.0, 3.0]).unwrap();
    assert_close("skewness", moments.skewness, 0.0);
    assert_close("excess kurtosis", moments.excess_kurtosis, -1.5);

    println!(
        "acceptance criterion 9: PASS - all hand-derived fixture values agree to 1e-4"
    );
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

fn assert_trees_identical(a: &Path, b: &Path) {
    let mut names: Vec<_> = std::fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut other: Vec<_> = std::fs::read_dir(b)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    other.sort();
    assert_eq!(names, other, "directory listings differ: {a:?} vs {b:?}");
    for name in names {
        let pa = a.join(&name);
        let pb = b.join(&name);
        if pa.is_dir() {
            assert_trees_identical(&pa, &pb);
        } else {
            let ba = std::fs::read(&pa).unwrap();
            let bb = std::fs::read(&pb).unwrap();
            assert_eq!(ba, bb, "file bytes differ: {}", pa.display());
        }
    }
}

#[test]
fn criterion_10_determinism_and_cache_replay() {
    // Part 1: `pipeline` on fixed inputs and seed is byte-identical.
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        format!(
            r#"{{
  "seed": 1234,
  "rounds": 200,
  "quotas": [1, 2],
  "reference": {{"default": "G0"}},
  "output_dir": {:?},
  "jobs": 2,
  "synth": {{"kind": "benchmark", "models": 3, "candidates_per_group": 20}}
}}"#,
            dir.path().join("out").to_str().unwrap()
        ),
    )
    .unwrap();

    let run = || {
        let status = Command::new(env!("CARGO_BIN_EXE_rabbi"))
            .args(["pipeline", "--config"])
            .arg(&config_path)
            .output()
            .expect("pipeline runs");
        assert!(
            status.status.success(),
            "pipeline failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
    };
    run();
    let snapshot = dir.path().join("snapshot");
    copy_tree(&dir.path().join("out"), &snapshot);
    run();
    assert_trees_identical(&dir.path().join("out"), &snapshot);

    // Part 2: warm-cache collection replays with zero network calls.
    let server = rabbi_client::stub::StubServer::start(Arc::new(|request| {
        let user = &request.messages[1].content;
        let p_yes = if user.len() % 2 == 0 { 0.8 } else { 0.3 };
        rabbi_client::stub::StubReply::Ok(rabbi_client::stub::logprob_response(
            "Yes",
            &[("Yes", p_yes), ("No", 1.0 - p_yes)],
        ))
    }))
    .unwrap();

    let items_path = dir.path().join("items.jsonl");
    let items: Vec<rabbi_client::CollectItem> = (0..6)
        .map(|i| rabbi_client::CollectItem {
            candidate_id: format!("c{i}"),
            group: format!("G{}", i % 2),
            subtask: "job".into(),
            qualified: true,
            text: format!("resume body {i}"),
            answer_key: None,
        })
        .collect();
    rabbi_client::write_collect_items(&items_path, &items).unwrap();

    let collect_config_path = dir.path().join("collect.json");
    std::fs::write(
        &collect_config_path,
        format!(
            r#"{{
  "seed": 1,
  "reference": {{"default": "G0"}},
  "output_dir": {:?},
  "collect": {{
    "endpoint": {{"base_url": {:?}, "model": "stub-model", "max_parallel": 2, "retries": 0}},
    "template": "resume_pointwise",
    "mode": "point",
    "items": {:?},
    "cache_dir": {:?},
    "fail_threshold": 0.1,
    "context": {{"job": {{"job_description": "a role"}}}}
  }}
}}"#,
            dir.path().join("collect-out").to_str().unwrap(),
            server.base_url(),
            items_path.to_str().unwrap(),
            dir.path().join("cache").to_str().unwrap()
        ),
    )
    .unwrap();

    let collect = || {
        let output = Command::new(env!("CARGO_BIN_EXE_rabbi"))
            .args(["collect", "--config"])
            .arg(&collect_config_path)
            .output()
            .expect("collect runs");
        assert!(
            output.status.success(),
            "collect failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };

    collect();
    let calls_after_first = server.request_count();
    assert_eq!(calls_after_first, 6);
    let first = std::fs::read(dir.path().join("collect-out/collected/pointwise.jsonl")).unwrap();

    collect();
    assert_eq!(
        server.request_count(),
        calls_after_first,
        "cache replay issued network calls"
    );
    let second = std::fs::read(dir.path().join("collect-out/collected/pointwise.jsonl")).unwrap();
    assert_eq!(first, second, "replayed output differs");

    println!(
        "acceptance criterion 10: PASS - pipeline reports byte-identical across runs; \
         warm-cache collection issued 0 network calls and rewrote identical bytes"
    );
}
