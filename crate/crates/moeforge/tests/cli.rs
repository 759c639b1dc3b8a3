//! Black-box CLI contract tests: exit codes, report shapes, determinism.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moeforge"))
}

fn run_json(args: &[&str]) -> serde_json::Value {
    let out = bin().args(args).arg("--deterministic").output().unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn certify_emits_certificate_schema() {
    let v = run_json(&[
        "certify", "--k", "185", "--t", "1/10", "--n", "1e52",
    ]);
    assert_eq!(v["command"], "certify");
    assert!(v.get("timestamp").is_none());
    let r = &v["result"];
    assert_eq!(r["k"], 185);
    assert_eq!(r["t"], serde_json::json!([1, 10]));
    assert_eq!(r["n"]["exp10"], 52);
    assert_eq!(r["valid"], true);
    assert!(r["reasons"].as_array().unwrap().is_empty());
    for key in [
        "epsilon",
        "delta",
        "entropy_loss",
        "log_prob_bound",
        "target",
    ] {
        assert!(r[key].is_f64(), "missing numeric field {key}");
    }
    assert!(r["n_threshold"]["significand"].is_f64());
}

#[test]
fn certify_includes_timestamp_by_default() {
    let out = bin()
        .args(["certify", "--k", "185", "--t", "1/10", "--n", "1e52"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["timestamp"].is_u64());
}

#[test]
fn strict_invalid_certificate_exits_one() {
    let out = bin()
        .args([
            "certify", "--k", "183", "--t", "1/10", "--n", "1e60", "--strict",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    // without --strict the same run reports but exits 0
    let out = bin()
        .args(["certify", "--k", "183", "--t", "1/10", "--n", "1e60"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["valid"], false);
    assert!(v["result"]["reasons"]
        .as_array()
        .unwrap()
        .contains(&serde_json::json!("no-gap")));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["certify", "--k", "185"],              // missing required args
        vec!["certify", "--k", "185", "--t", "0.1", "--n", "1e52"], // bad ratio
        vec!["frobnicate"],                         // unknown subcommand
        vec!["certify", "--k", "185", "--t", "1/10", "--n", "bogus"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
    }
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn seed_env_fallback_matches_flag() {
    let args = [
        "simulate-norm", "--k", "2", "--n", "8", "--t", "1/2", "--trials", "4", "--deterministic",
    ];
    let with_flag = bin().args(args).args(["--seed", "31"]).output().unwrap();
    let with_env = bin()
        .args(args)
        .env("MOEFORGE_SEED", "31")
        .output()
        .unwrap();
    let default = bin().args(args).output().unwrap();
    assert_eq!(with_flag.stdout, with_env.stdout);
    assert_ne!(with_flag.stdout, default.stdout);
}

#[test]
fn csv_format_for_trial_reports() {
    let out = bin()
        .args([
            "simulate-norm", "--k", "2", "--n", "8", "--t", "1/2", "--trials", "3", "--seed",
            "1", "--format", "csv", "--deterministic",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial_index,observable"));
    assert_eq!(lines.clone().count(), 3);
    assert!(lines.all(|l| l.split(',').count() == 2));
    // csv is refused for commands without a tabular form
    let out = bin()
        .args(["scan", "--t", "1/10", "--k-max", "5", "--format", "csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join("moeforge-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("scan.json");
    let out = bin()
        .args([
            "scan", "--t", "1/10", "--k-min", "183", "--k-max", "185", "--deterministic",
            "--out",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["result"]["least_violating_k"], 184);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn observable_file_errors_name_the_field() {
    let dir = std::env::temp_dir().join("moeforge-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad_matrix.json");
    std::fs::write(&path, r#"{"dim": 2, "entries": [[1.0, 0.0]]}"#).unwrap();
    let out = bin()
        .args([
            "simulate-norm", "--k", "2", "--n", "8", "--t", "1/2", "--trials", "1",
            "--observable",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("entries"), "stderr: {err}");
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn bell_report_shape() {
    let v = run_json(&["simulate-bell", "--k", "2", "--n", "8", "--t", "1/2", "--seed", "3"]);
    let r = &v["result"];
    assert_eq!(r["k"], 2);
    assert_eq!(r["d"], 8);
    assert_eq!(r["spectrum"].as_array().unwrap().len(), 4);
    let lambda = r["lambda_max"].as_f64().unwrap();
    assert!(lambda >= 0.5 - 1e-10);
}

#[test]
fn explain_prints_inequality_chain() {
    let out = bin()
        .args([
            "explain", "--k", "185", "--t", "1/10", "--n", "1e52", "--format", "csv",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["violation gap", "epsilon", "n threshold", "verdict: VALID"] {
        assert!(text.contains(needle), "missing '{needle}' in:\n{text}");
    }
}

#[test]
fn bump_report_shape() {
    let v = run_json(&["bump"]);
    let r = &v["result"];
    assert_eq!(r["scale_log2"], 21);
    let pieces = r["pieces"].as_array().unwrap();
    assert!(!pieces.is_empty());
    assert_eq!(pieces[0]["lo"], "0");
    assert_eq!(pieces.last().unwrap()["hi"], "1");
    assert_eq!(r["supnorms"].as_array().unwrap().len(), 6);
}
