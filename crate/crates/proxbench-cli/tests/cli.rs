//! End-to-end tests for the `proxbench` binary: exit codes, artifact
//! files, determinism, and the bundled presets.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proxbench"))
}

fn repo_root() -> PathBuf {
    // crates/proxbench-cli -> workspace root
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn proxbench");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn bench_runs_bundled_srcloc_preset_with_zero_cp_failures() {
    let dir = tempfile::tempdir().unwrap();
    let preset = repo_root().join("presets/srcloc10_noiseless.json");
    // 100 trials x 10 algorithms is slow in debug builds; trim via a copy
    let mut config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&preset).unwrap()).unwrap();
    config["trials"] = 10.into();
    let small = dir.path().join("preset.json");
    std::fs::write(&small, serde_json::to_vec(&config).unwrap()).unwrap();

    let out = run_ok(
        bin()
            .args(["bench", "--config"])
            .arg(&small)
            .arg("--out")
            .arg(dir.path()),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    let cp_row = stdout
        .lines()
        .find(|l| l.starts_with("CP,"))
        .expect("CP row in summary CSV");
    let failures: usize = cp_row.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(failures, 0, "CP row: {cp_row}");
    for artifact in ["summary.csv", "summary.json", "records.json", "config.json"] {
        assert!(dir.path().join(artifact).exists(), "missing {artifact}");
    }
    // the resolved config written next to the tables round-trips losslessly
    let resolved: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(resolved["trials"], config["trials"]);
    assert_eq!(resolved["problem"], config["problem"]);
}

#[test]
fn bench_rejects_invalid_lambda_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "problem": { "family": "toy" },
        "algorithms": [ { "name": "CDRL", "lambda": 1.5 } ],
        "trials": 1
    });
    let path = dir.path().join("bad.json");
    std::fs::write(&path, serde_json::to_vec(&config).unwrap()).unwrap();
    let out = bin()
        .args(["bench", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("lambda"), "stderr: {stderr}");
}

#[test]
fn bench_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "problem": { "family": "toy" },
        "algorithms": [ { "name": "CP" } ],
        "trails": 3
    });
    let path = dir.path().join("typo.json");
    std::fs::write(&path, serde_json::to_vec(&config).unwrap()).unwrap();
    let out = bin()
        .args(["bench", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));
}

#[test]
fn bench_seed_flag_is_deterministic() {
    let preset = repo_root().join("presets/toy_smoke.json");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        run_ok(
            bin()
                .args(["bench", "--seed", "7", "--config"])
                .arg(&preset)
                .arg("--out")
                .arg(dir.path()),
        );
        outputs.push((
            std::fs::read(dir.path().join("summary.csv")).unwrap(),
            std::fs::read(dir.path().join("records.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn run_cp_on_toy_converges_quickly() {
    let out = run_ok(bin().args(["run", "--problem", "toy", "--algo", "CP", "--tol", "1e-11"]));
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(metrics["converged"], true);
    assert!(metrics["iterations"].as_u64().unwrap() < 100);
}

#[test]
fn run_unknown_algorithm_lists_valid_names() {
    let out = bin()
        .args(["run", "--problem", "toy", "--algo", "FOO"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for name in ["CP", "CDR", "CDRL", "AVP", "WF", "DRAP"] {
        assert!(stderr.contains(name), "stderr should list {name}: {stderr}");
    }
}

#[test]
fn run_trace_row_count_matches_reported_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = run_ok(
        bin()
            .args(["run", "--problem", "toy", "--algo", "AVP", "--tol", "1e-9", "--trace"])
            .arg(&trace),
    );
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let iters = metrics["iterations"].as_u64().unwrap() as usize;
    let text = std::fs::read_to_string(&trace).unwrap();
    let rows = text.lines().count() - 1; // header
    assert_eq!(rows, iters);
}

#[test]
fn dataset_gen_inspect_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cdp.prb1");
    run_ok(
        bin()
            .args(["dataset", "gen", "--problem", "cdp1d:16:3", "--seed", "5", "--out"])
            .arg(&file),
    );
    let out = run_ok(bin().args(["dataset", "inspect"]).arg(&file));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("family: CDP1D"), "{text}");
    assert!(text.contains("shape: 16"), "{text}");
    assert!(text.contains("m: 3"), "{text}");

    // same seed, same checksum; different seed, different checksum
    let file2 = dir.path().join("cdp2.prb1");
    run_ok(
        bin()
            .args(["dataset", "gen", "--problem", "cdp1d:16:3", "--seed", "5", "--out"])
            .arg(&file2),
    );
    let checksum = |t: &str| {
        t.lines()
            .find(|l| l.starts_with("checksum:"))
            .unwrap()
            .to_string()
    };
    let out2 = run_ok(bin().args(["dataset", "inspect"]).arg(&file2));
    assert_eq!(
        checksum(&text),
        checksum(&String::from_utf8_lossy(&out2.stdout))
    );
}

#[test]
fn dataset_inspect_truncated_file_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cdp.prb1");
    run_ok(
        bin()
            .args(["dataset", "gen", "--problem", "cdp1d:16:3", "--out"])
            .arg(&file),
    );
    let bytes = std::fs::read(&file).unwrap();
    std::fs::write(&file, &bytes[..bytes.len() / 2]).unwrap();
    let out = bin().args(["dataset", "inspect"]).arg(&file).output().unwrap();
    assert!(!out.status.success());
}
