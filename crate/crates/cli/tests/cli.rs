use std::fs;
use std::process::Command;

fn uavnet() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uavnet"))
}

#[test]
fn runs_baselines_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(&cfg, r#"{"cells_sweep":[2],"eval_episodes":2,"seeds":[1],"methods":["dqn_global"]}"#).unwrap();
    let out = dir.path().join("out");
    let status = uavnet()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--methods", "brute_force,mrt,random", "--seed-offset", "10"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().skip(1).all(|l| l.split(',').nth(2) == Some("11")));
    let echo: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("config_echo.json")).unwrap()).unwrap();
    assert_eq!(echo["seeds"], serde_json::json!([11]));
    assert_eq!(echo["methods"], serde_json::json!(["brute_force", "mrt", "random"]));
}

fn error_line(args: &[&str], config: &str) -> serde_json::Value {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(&cfg, config).unwrap();
    let out = uavnet().args(["run", "--config"]).arg(&cfg).args(args).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

#[test]
fn bad_inputs_give_machine_readable_errors() {
    assert_eq!(error_line(&[], r#"{"seeds":[]}"#)["error"], "invalid_config");
    assert_eq!(error_line(&[], r#"{"seedz":[1]}"#)["error"], "config_parse");
    assert_eq!(error_line(&["--methods", "oracle"], "{}")["error"], "invalid_config");
    let missing = uavnet().args(["run", "--config", "/nonexistent/exp.json"]).output().unwrap();
    assert!(!missing.status.success());
    let v: serde_json::Value = serde_json::from_slice(missing.stderr.trim_ascii()).unwrap();
    assert_eq!(v["error"], "io");
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = uavnet::harness::ExperimentConfig::load(&path).unwrap();
        cfg.validate().unwrap();
        n += 1;
    }
    assert!(n >= 3);
}
