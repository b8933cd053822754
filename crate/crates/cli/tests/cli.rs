//! CLI behavior: exit codes, report shapes, and subcommand contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

fn rabbi(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rabbi"));
    cmd.args(args);
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn config_with_models(dir: &Path, models_json: &str, reference: &str) -> PathBuf {
    let path = dir.join("config.json");
    write(
        &path,
        &format!(
            r#"{{
  "seed": 5,
  "rounds": 100,
  "quotas": [1],
  "reference": {{"default": {reference:?}}},
  "output_dir": {:?},
  "models": {models_json}
}}"#,
            dir.join("out").to_str().unwrap()
        ),
    );
    path
}

fn pointwise_fixture(dir: &Path) -> PathBuf {
    let path = dir.join("pointwise.jsonl");
    let mut lines = String::new();
    for g in 0..3 {
        for c in 0..6 {
            lines.push_str(&format!(
                "{{\"candidate_id\":\"g{g}c{c}\",\"group\":\"G{g}\",\"subtask\":\"t\",\"qualified\":{},\"score\":{}}}\n",
                c % 2,
                0.1 * (g * 6 + c) as f64
            ));
        }
    }
    write(&path, &lines);
    path
}

#[test]
fn help_exits_zero_and_usage_error_exits_one() {
    let output = rabbi(&["--help"], &[]);
    assert_eq!(exit_code(&output), 0);
    assert!(String::from_utf8_lossy(&output.stdout).contains("pipeline"));

    let output = rabbi(&["audit"], &[]);
    assert_eq!(exit_code(&output), 1);

    let output = rabbi(&["audit", "--config", "/nonexistent/config.json"], &[]);
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn validate_exit_codes_follow_issue_and_warning_counts() {
    let dir = tempfile::tempdir().unwrap();
    let pointwise = pointwise_fixture(dir.path());

    // Clean dataset: exit 0.
    let pools = dir.path().join("pools.jsonl");
    write(
        &pools,
        r#"{"pool_id":"p0","subtask":"t","members":["g0c0","g1c0","g2c0"],"k":1}
"#,
    );
    let config = config_with_models(
        dir.path(),
        &format!(
            r#"[{{"model_id":"m0","pointwise":{:?},"pools":{:?}}}]"#,
            pointwise.to_str().unwrap(),
            pools.to_str().unwrap()
        ),
        "G0",
    );
    let output = rabbi(&["validate", "--config"], &[&config]);
    assert_eq!(exit_code(&output), 0, "{output:?}");
    assert!(dir.path().join("out/validation_summary.json").exists());

    // Dangling pool member: exit 1.
    write(
        &pools,
        r#"{"pool_id":"p0","subtask":"t","members":["g0c0","X9"],"k":1}
"#,
    );
    let output = rabbi(&["validate", "--config"], &[&config]);
    assert_eq!(exit_code(&output), 1);
    let summary = std::fs::read_to_string(dir.path().join("out/validation_summary.json")).unwrap();
    assert!(summary.contains("X9"));

    // Warnings only (missing reverse order): exit 0.
    write(
        &pools,
        r#"{"pool_id":"p0","subtask":"t","members":["g0c0","g1c0"],"k":1}
"#,
    );
    let pairwise = dir.path().join("pairwise.jsonl");
    write(
        &pairwise,
        r#"{"subtask":"t","pool_id":"p0","first":"g0c0","second":"g1c0","verdict":"first"}
"#,
    );
    let config = config_with_models(
        dir.path(),
        &format!(
            r#"[{{"model_id":"m0","pointwise":{:?},"pairwise":{:?},"pools":{:?}}}]"#,
            pointwise.to_str().unwrap(),
            pairwise.to_str().unwrap(),
            pools.to_str().unwrap()
        ),
        "G0",
    );
    let output = rabbi(&["validate", "--config"], &[&config]);
    assert_eq!(exit_code(&output), 0, "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("1 warning(s)"), "stdout: {stdout}");
}

#[test]
fn audit_emits_seven_pair_rows_per_metric_for_eight_groups() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    write(
        &config_path,
        &format!(
            r#"{{
  "seed": 31,
  "reference": {{"default": "B"}},
  "output_dir": {:?},
  "synth": {{"kind": "adversarial"}}
}}"#,
            dir.path().join("out").to_str().unwrap()
        ),
    );
    let output = rabbi(&["synth", "--config"], &[&config_path]);
    assert_eq!(exit_code(&output), 0, "{output:?}");

    let config_path = config_with_models(
        dir.path(),
        &format!(
            r#"[{{"model_id":"adversarial","pointwise":{:?}}}]"#,
            dir.path()
                .join("out/data/adversarial.pointwise.jsonl")
                .to_str()
                .unwrap()
        ),
        "B",
    );
    let output = rabbi(&["audit", "--config"], &[&config_path]);
    assert_eq!(exit_code(&output), 0, "{output:?}");

    let report: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("out/bias_report.json")).unwrap(),
    )
    .unwrap();
    let rows = report["body"]["rows"].as_array().unwrap();
    for metric in ["rabbi", "delta_pointwise", "jsd", "emd"] {
        let full_rows: Vec<_> = rows
            .iter()
            .filter(|r| r["metric"] == metric && r["population"] == "full")
            .collect();
        assert_eq!(full_rows.len(), 7, "metric {metric}: {}", full_rows.len());
    }
    // RABBI rows carry the significance approximation.
    assert!(rows
        .iter()
        .filter(|r| r["metric"] == "rabbi" && r["population"] == "full")
        .all(|r| r["p_value"].is_number()));
}

#[test]
fn pairwise_only_input_yields_rabbi_and_preference_rows_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let candidates = dir.path().join("candidates.jsonl");
    write(
        &candidates,
        r#"{"candidate_id":"a1","group":"A","subtask":"t","qualified":1}
{"candidate_id":"a2","group":"A","subtask":"t","qualified":1}
{"candidate_id":"b1","group":"B","subtask":"t","qualified":1}
{"candidate_id":"b2","group":"B","subtask":"t","qualified":0}
"#,
    );
    let pairwise = dir.path().join("pairwise.jsonl");
    let mut lines = String::new();
    for (x, y) in [("a1", "b1"), ("a1", "b2"), ("a2", "b1"), ("a2", "b2"), ("a1", "a2"), ("b1", "b2")] {
        lines.push_str(&format!(
            "{{\"subtask\":\"t\",\"pool_id\":\"p0\",\"first\":{x:?},\"second\":{y:?},\"verdict\":\"first\"}}\n"
        ));
        lines.push_str(&format!(
            "{{\"subtask\":\"t\",\"pool_id\":\"p0\",\"first\":{y:?},\"second\":{x:?},\"verdict\":\"second\"}}\n"
        ));
    }
    write(&pairwise, &lines);
    let pools = dir.path().join("pools.jsonl");
    write(
        &pools,
        r#"{"pool_id":"p0","subtask":"t","members":["a1","a2","b1","b2"],"k":1}
"#,
    );

    let config = config_with_models(
        dir.path(),
        &format!(
            r#"[{{"model_id":"m0","pairwise":{:?},"pools":{:?},"candidates":{:?}}}]"#,
            pairwise.to_str().unwrap(),
            pools.to_str().unwrap(),
            candidates.to_str().unwrap()
        ),
        "B",
    );
    let output = rabbi(&["audit", "--config"], &[&config]);
    assert_eq!(exit_code(&output), 0, "{output:?}");

    let report: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("out/bias_report.json")).unwrap(),
    )
    .unwrap();
    let rows = report["body"]["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows
        .iter()
        .all(|r| r["metric"] == "rabbi" || r["metric"] == "delta_pairwise"));
    let notices = report["body"]["notices"].as_array().unwrap();
    assert!(notices
        .iter()
        .any(|n| n.as_str().unwrap().contains("jsd and emd omitted")));

    // Simulation over the given pools works for pairwise-only inputs.
    let output = rabbi(&["simulate", "--config"], &[&config]);
    assert_eq!(exit_code(&output), 0, "{output:?}");
    let gaps: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/gaps.json")).unwrap()).unwrap();
    let gap_rows = gaps["body"].as_array().unwrap();
    // One protected group (A vs B), two gap kinds, one quota.
    assert_eq!(gap_rows.len(), 2);
}

#[test]
fn evaluate_single_model_ranking_is_trivially_ideal() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    write(
        &config_path,
        &format!(
            r#"{{
  "seed": 77,
  "rounds": 150,
  "quotas": [1],
  "reference": {{"default": "G0"}},
  "output_dir": {:?},
  "synth": {{"kind": "benchmark", "models": 1, "candidates_per_group": 15}}
}}"#,
            dir.path().join("out").to_str().unwrap()
        ),
    );
    let output = rabbi(&["pipeline", "--config"], &[&config_path]);
    assert_eq!(exit_code(&output), 0, "{output:?}");

    let validity: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("out/validity.json")).unwrap(),
    )
    .unwrap();
    let rankings = validity["body"]["rankings"].as_array().unwrap();
    assert!(!rankings.is_empty());
    for ranking in rankings {
        let order = ranking["metric_ranking"]["order"].as_array().unwrap();
        assert_eq!(order.len(), 1);
        let ndcg = ranking["ndcg"].as_array().unwrap();
        assert!((ndcg[0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn collect_over_threshold_exits_two() {
    let server = rabbi_client::stub::StubServer::start(Arc::new(|_| {
        rabbi_client::stub::StubReply::Error(500, "down".into())
    }))
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let items_path = dir.path().join("items.jsonl");
    let items: Vec<rabbi_client::CollectItem> = (0..3)
        .map(|i| rabbi_client::CollectItem {
            candidate_id: format!("c{i}"),
            group: "G".into(),
            subtask: "job".into(),
            qualified: true,
            text: format!("resume {i}"),
            answer_key: None,
        })
        .collect();
    rabbi_client::write_collect_items(&items_path, &items).unwrap();

    let config_path = dir.path().join("config.json");
    write(
        &config_path,
        &format!(
            r#"{{
  "seed": 1,
  "reference": {{"default": "G"}},
  "output_dir": {:?},
  "collect": {{
    "endpoint": {{"base_url": {:?}, "model": "stub", "retries": 0, "retry_backoff_ms": 1}},
    "template": "resume_pointwise",
    "mode": "point",
    "items": {:?},
    "cache_dir": {:?},
    "fail_threshold": 0.1,
    "context": {{"job": {{"job_description": "role"}}}}
  }}
}}"#,
            dir.path().join("out").to_str().unwrap(),
            server.base_url(),
            items_path.to_str().unwrap(),
            dir.path().join("cache").to_str().unwrap()
        ),
    );
    let output = rabbi(&["collect", "--config"], &[&config_path]);
    assert_eq!(exit_code(&output), 2, "{output:?}");
}
