//! End-to-end tests of the `memlink` binary against the bundled fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn memlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memlink"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let snapshot = dir.path().join("index.json");
    let candidates = dir.path().join("retrieve.json");

    // ingest
    let out = memlink(&[
        "ingest",
        fixture("toy_history.json").to_str().unwrap(),
    ]);
    let canonical = stdout_of(&out);
    assert!(canonical.contains("\"msg_id\": \"D1:1\""));

    // build (twice: snapshots must be byte-identical)
    let config = fixture("toy_config.json");
    for _ in 0..2 {
        let out = memlink(&[
            "build",
            fixture("toy_history.json").to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            snapshot.to_str().unwrap(),
        ]);
        stdout_of(&out);
    }
    let snapshot_a = std::fs::read_to_string(&snapshot).unwrap();
    let out = memlink(&[
        "build",
        fixture("toy_history.json").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        snapshot.to_str().unwrap(),
    ]);
    stdout_of(&out);
    assert_eq!(snapshot_a, std::fs::read_to_string(&snapshot).unwrap());

    // retrieve
    let out = memlink(&[
        "retrieve",
        snapshot.to_str().unwrap(),
        "--queries",
        fixture("toy_queries.json").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        candidates.to_str().unwrap(),
    ]);
    let report = stdout_of(&out);
    assert!(report.contains("\"recall\": 1.0"));

    // reward, consuming the retrieve report as the candidates file
    let out = memlink(&[
        "reward",
        "--completions",
        fixture("toy_completions.json").to_str().unwrap(),
        "--candidates",
        candidates.to_str().unwrap(),
        "--gold",
        fixture("toy_gold.json").to_str().unwrap(),
        "--judge-mode",
        "oracle",
    ]);
    let report = stdout_of(&out);
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    let spans: Vec<(f64, f64)> = parsed["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["breakdown"]["r_sel"].as_f64().unwrap(),
                r["breakdown"]["r_evd"].as_f64().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        spans,
        vec![(5.0, 6.0), (3.0, 3.0), (0.5, 0.5), (-2.0, -2.0), (5.0, 6.0)]
    );

    // advantage with the bundled logprobs
    let out = memlink(&["advantage", fixture("toy_group.json").to_str().unwrap()]);
    let report = stdout_of(&out);
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(parsed["surrogate"].is_number());
    let a0 = parsed["rows"][0]["a_sel"].as_f64().unwrap();
    assert!((a0 - 1.41407).abs() < 1e-4);
}

#[test]
fn sweep_emits_sorted_rows() {
    let out = memlink(&[
        "sweep",
        fixture("toy_history.json").to_str().unwrap(),
        "--queries",
        fixture("toy_queries.json").to_str().unwrap(),
        "--tau1-list",
        "0.6,0.4",
        "--tau2-list",
        "0.9,0.7",
        "--k",
        "10",
    ]);
    let report = stdout_of(&out);
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    let rows = parsed["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["tau1"].as_f64().unwrap(), 0.4);
    assert!(parsed["reference_note"].as_str().unwrap().contains("97.20"));
}

#[test]
fn exit_codes_follow_the_contract() {
    // Missing input file: input error, exit 1.
    let out = memlink(&["build", "does_not_exist.json", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(1));

    // Unknown flag: input error, exit 1.
    let out = memlink(&["build", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(1));

    // Remote judge mode without an endpoint: provider error, exit 2.
    let dir = tempfile::tempdir().unwrap();
    let context = dir.path().join("context.json");
    std::fs::write(
        &context,
        r#"{"query":{"text":"q"},"segments":[{"segment_id":"s1/g1","messages":[{"msg_id":"D1:1","content":"hello there"}]}]}"#,
    )
    .unwrap();
    let gold = dir.path().join("gold.json");
    std::fs::write(
        &gold,
        r#"{"gold_msg_ids":["D1:1"],"gold_answer":"x","question_type":"single-hop"}"#,
    )
    .unwrap();
    let completions = dir.path().join("completions.json");
    std::fs::write(
        &completions,
        r#"{"completions":[{"text":"{\"useful_msg\":[],\"distilled_info\":[]}"}]}"#,
    )
    .unwrap();
    let out = memlink(&[
        "reward",
        "--completions",
        completions.to_str().unwrap(),
        "--candidates",
        context.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--judge-mode",
        "remote",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // --help is a success.
    let out = memlink(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}
