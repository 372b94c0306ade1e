use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const K1: &str = r#"{"p":3,"f":1,"N":16,"D":12,"weights":[5],"case":"induced","ell":[0,5],"samples_a":2,"samples_A":1}"#;

fn run(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wach-forge"));
    cmd.args(args)
        .arg("--out")
        .arg(dir.join("runs"))
        .env_remove("WACHFORGE_JOBS");
    if let Some(text) = config {
        let path = dir.join("config.json");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn run_dir(dir: &Path) -> PathBuf {
    let mut entries: Vec<_> = fs::read_dir(dir.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(entries.len(), 1);
    entries.pop().unwrap()
}

#[test]
fn build_succeeds() {
    let t = tempfile::tempdir().unwrap();
    let out = run(t.path(), &["build"], Some(K1));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = run_dir(t.path());
    assert!(dir.join("build.json").exists());
    assert!(dir.join("config.json").exists());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("wach-forge build p=3"));
}

#[test]
fn bad_ell_is_a_validation_error() {
    let t = tempfile::tempdir().unwrap();
    let cfg = K1.replace("[0,5]", "[1,4]");
    assert_eq!(run(t.path(), &["build"], Some(&cfg)).status.code(), Some(2));
}

#[test]
fn weight_below_p_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let cfg = K1
        .replace("\"weights\":[5]", "\"weights\":[2]")
        .replace("[0,5]", "[0,2]");
    assert_eq!(run(t.path(), &["build"], Some(&cfg)).status.code(), Some(2));
}

#[test]
fn unknown_field_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let cfg = K1.replace("\"p\":3", "\"p\":3,\"colour\":1");
    let out = run(t.path(), &["build"], Some(&cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn missing_config_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run(t.path(), &["verify"], None).status.code(), Some(2));
}

#[test]
fn zero_budget_reports_obstruction() {
    let t = tempfile::tempdir().unwrap();
    let cfg = K1.replace("\"p\":3", "\"p\":3,\"z_search_budget\":0");
    let out = run(t.path(), &["solve"], Some(&cfg));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn corrupted_baseline_fails_integrity() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run(t.path(), &["verify"], Some(K1)).status.code(), Some(0));
    let base = run_dir(t.path()).join("baseline.json");
    let mut text = fs::read_to_string(&base).unwrap();
    let pos = text.find(['1', '2']).unwrap();
    text.replace_range(pos..pos + 1, "0");
    fs::write(&base, text).unwrap();
    let out = run(t.path(), &["verify"], Some(K1));
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integrity"));
}

#[test]
fn json_only_prints_the_report() {
    let t = tempfile::tempdir().unwrap();
    let out = run(t.path(), &["verify", "--json-only"], Some(K1));
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], "wach-forge-report/1");
    assert_eq!(v["command"], "verify");
    assert_eq!(v["verdict"], true);
    let stored = fs::read(run_dir(t.path()).join("verify.json")).unwrap();
    assert_eq!(stored, out.stdout);
}

#[test]
fn job_count_does_not_change_the_report() {
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    let a = run(
        t1.path(),
        &["verify", "--json-only", "--jobs", "1"],
        Some(K1),
    );
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wach-forge"));
    let path = t2.path().join("config.json");
    fs::write(&path, K1).unwrap();
    let b = cmd
        .args(["verify", "--json-only", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(t2.path().join("runs"))
        .env("WACHFORGE_JOBS", "4")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_flag_overrides_config() {
    let t = tempfile::tempdir().unwrap();
    let out = run(t.path(), &["build", "--json-only", "--seed", "7"], Some(K1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 7);
}

#[test]
fn selftest_passes() {
    let t = tempfile::tempdir().unwrap();
    let out = run(t.path(), &["selftest"], None);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}
