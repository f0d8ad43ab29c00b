use std::path::Path;
use std::process::{Command, Output};

fn qwass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwass")).args(args).output().expect("binary runs")
}

fn run_key_example(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "key-example-norms", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    qwass(&args)
}

fn strip_runtime(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

#[test]
fn list_names_every_experiment() {
    let out = qwass(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["key-example-norms", "duality", "heat-contraction", "meanfield", "classical-ot"] {
        assert!(text.contains(name), "{name} missing from list");
    }
    assert_eq!(text.lines().count(), 16);
}

#[test]
fn list_params_shows_ranges() {
    let out = qwass(&["list", "--params"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("n_modes") && text.contains("range ["));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_key_example(dir.path(), &["--set", "no_such_key=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_of_range_value_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_key_example(dir.path(), &["--set", "hbar=-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("key-example-norms.csv").exists());
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qwass(&["run", "no-such-experiment", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_sections_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "experiment = key-example-norms\n[key-example-norms]\nhbar = 0.5\n[duality]\npairs = -3\n").unwrap();
    let out = qwass(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# stock pair at a larger hbar\nexperiment = key-example-norms\n[key-example-norms]\nhbar = 0.5\n").unwrap();
    let out = qwass(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("key-example-norms.csv")).unwrap();
    assert!(csv.contains("hbar=0.5"));
}

#[test]
fn run_writes_records_that_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_key_example(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("key-example-norms.csv");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("key-example-norms.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["passed"], true);
    assert_eq!(json["checks"].as_array().unwrap().len(), 3);
    assert_eq!(qwass(&["verify", csv.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn tampered_records_fail_verification() {
    let dir = tempfile::tempdir().unwrap();
    run_key_example(dir.path(), &[]);
    let csv = dir.path().join("key-example-norms.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let fields: Vec<&str> = lines[1].split(',').collect();
    // push the value far from its bound while keeping passed=true
    let mut tampered: Vec<String> = fields.iter().map(|s| s.to_string()).collect();
    tampered[3] = "100".into();
    lines[1] = tampered.join(",");
    std::fs::write(&csv, lines.join("\n") + "\n").unwrap();
    assert_eq!(qwass(&["verify", csv.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn unreadable_records_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(qwass(&["verify", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_records() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = qwass(&["run", "classical-ot", "--seed", "7", "--set", "replicates=4", "--set", "triples=5", "--out", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |d: &tempfile::TempDir| strip_runtime(&std::fs::read_to_string(d.path().join("classical-ot.csv")).unwrap());
    assert_eq!(read(&a), read(&b));
}

#[test]
fn failing_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // at hbar = 0.4 the deviation is far above the default threshold
    let out = qwass(&["run", "classical-limit", "--set", "hbars=0.4", "--set", "final_tol=0.1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
