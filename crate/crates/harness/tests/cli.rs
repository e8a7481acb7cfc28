use std::path::Path;
use std::process::{Command, Output};

fn maxent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxent")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL: &str = r#"
[experiment]
name = "small"
seeds = 2
budget = 400
output = "results"
save_policies = true

[env]
name = "double-chain"
length = 5
horizon = 4

[[algorithm]]
name = "entgame"

[[algorithm]]
name = "optimal-mtee"
"#;

#[test]
fn run_eval_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = maxent(&["validate", &cfg]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("entgame, optimal-mtee"));

    let out = maxent(&["run", &cfg, "--workers", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("results");
    for f in ["counts.csv", "curves.csv", "metrics.csv", "summary.csv", "manifest.json"] {
        assert!(results.join(f).is_file(), "{f}");
    }

    let policy = results.join("replicates/optimal-mtee/seed-0/policy.json");
    let out = maxent(&["eval", "--env", &cfg, "--policy", policy.to_str().unwrap(), "--metrics", "te,mtee_gap"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "metric,value");
    assert!(lines[1].starts_with("te,"));
    let gap: f64 = lines[2].strip_prefix("mtee_gap,").unwrap().parse().unwrap();
    assert!(gap.abs() < 1e-10);

    let fig = dir.path().join("fig.csv");
    let out = maxent(&["export", "--figure", "fig1", "--results", results.to_str().unwrap(), "--output", fig.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&fig).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 5);
}

#[test]
fn exit_codes_separate_config_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), &SMALL.replace("seeds = 2", "seeds = 0"));
    assert_eq!(code(&maxent(&["validate", &bad])), 2);
    assert_eq!(code(&maxent(&["run", &bad])), 2);
    assert_eq!(code(&maxent(&["validate", "/nonexistent/exp.toml"])), 2);
    assert_eq!(code(&maxent(&["frobnicate"])), 2);
    assert_eq!(code(&maxent(&["export", "--figure", "fig9", "--results", "."])), 2);
    assert_eq!(code(&maxent(&["--help"])), 0);

    // Missing results directory is a runtime failure.
    let empty = dir.path().join("empty");
    assert_eq!(code(&maxent(&["export", "--figure", "curves", "--results", empty.to_str().unwrap()])), 1);

    // A policy whose shape does not fit the environment.
    let cfg = write_config(dir.path(), SMALL);
    let policy = dir.path().join("p.json");
    std::fs::write(&policy, r#"{"kind":"markov","policy":{"dims":{"states":1,"actions":1,"horizon":1},"probs":[1.0]}}"#)
        .unwrap();
    let out = maxent(&["eval", "--env", &cfg, "--policy", policy.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}
