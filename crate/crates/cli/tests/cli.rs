use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const STUDY: &str = r#"
model_id = "bounded_kernel"
N_list = [8, 16, 32]
t_checkpoints = [0.5, 1.0]
trials = 30
master_seed = 3

[grid]
T = 1.0
h = 0.05

[coupling]
kind = "shift"
c = 1.0
a = 0.5

[flow]
support = 300
"#;

fn chaoslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaoslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("study.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn study_is_reproducible_and_reportable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), STUDY);
    let runs: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = tmp.path().join(name);
            let o = chaoslab(&["study", "--config", &cfg, "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            fs::read(out.join("study.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert!(runs[0].starts_with(b"N,t,metric,estimate,stderr,flag\n"));

    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("a/study.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert!(meta["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(meta["version"].is_string());

    let o = chaoslab(&["report", "--in", tmp.path().join("a").to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("## strong_gap"));
    assert!(text.contains("## Rates"));
}

#[test]
fn simulate_writes_states() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), STUDY);
    let out = tmp.path().join("sim");
    let o = chaoslab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("simulation.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(out.join("simulation.json").exists());
}

#[test]
fn output_path_from_config_is_used() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("from_config");
    let text = format!("output_path = {:?}\n{STUDY}", out.to_str().unwrap());
    let cfg = write_config(tmp.path(), &text);
    let o = chaoslab(&["study", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("study.csv").exists());
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    for bad in [
        STUDY.replace("trials = 30", "trials = 3"),
        STUDY.replace("N_list = [8, 16, 32]", "N_list = [16, 8]"),
        STUDY.replace("model_id = \"bounded_kernel\"", "model_id = \"nope\""),
        format!("unknown_key = 1\n{STUDY}"),
        format!("{STUDY}\nsuport = 10\n"),
        "not toml at all [".to_string(),
    ] {
        let cfg = write_config(tmp.path(), &bad);
        let o = chaoslab(&["study", "--config", &cfg, "--out", out]);
        assert_eq!(o.status.code(), Some(1), "{bad}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
    let o = chaoslab(&["study", "--config", "/nonexistent/study.toml", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    let cfg = write_config(tmp.path(), STUDY);
    assert_eq!(chaoslab(&["study", "--config", &cfg]).status.code(), Some(1));
}

#[test]
fn check_reports_json_and_exit_code() {
    let o = chaoslab(&["check", "--suite", "lemma22", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["suite"], "lemma22");
    assert_eq!(report["seed"], 5);
    assert_eq!(report["passed"], true);

    assert_eq!(chaoslab(&["check", "--suite", "nope"]).status.code(), Some(1));
}

#[test]
fn report_on_missing_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = chaoslab(&["report", "--in", tmp.path().join("missing").to_str().unwrap()]);
    assert!(!o.status.success());
}
