use std::path::PathBuf;
use std::process::Command;

fn qhm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qhm"))
}

fn default_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json")
}

#[test]
fn verify_conventions_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let status = qhm()
        .args(["verify", "--suite", "conventions", "--config"])
        .arg(default_config())
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["calibrationConstant"].as_f64().is_some());
    assert_eq!(report["suites"][0]["suite"], "conventions");
}

#[test]
fn configuration_errors_exit_with_two() {
    let missing = qhm()
        .args(["verify", "--suite", "all", "--config", "/nonexistent/qhm.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("not found"));

    let unknown = qhm()
        .args(["verify", "--suite", "everything", "--config"])
        .arg(default_config())
        .output()
        .unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    let check = qhm()
        .args(["converge", "--check", "nonsense", "--config"])
        .arg(default_config())
        .output()
        .unwrap();
    assert_eq!(check.status.code(), Some(2));
}

#[test]
fn minimize_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let history = dir.path().join("history.csv");
    let output = qhm()
        .args(["minimize", "--seed", "7", "--samples", "8", "--starts", "1", "--max-iter", "5", "--config"])
        .arg(default_config())
        .arg("--out")
        .arg(&out)
        .arg("--history")
        .arg(&history)
        .output()
        .unwrap();
    // five iterations cannot reach the descent tolerance, so only the
    // artifacts are checked here
    assert!(matches!(output.status.code(), Some(0 | 1)), "{output:?}");

    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "gap"));
    assert_eq!(rdr.records().count(), 8);

    let hist = std::fs::read_to_string(&history).unwrap();
    assert!(hist.starts_with("start,iteration,ym"));
    assert_eq!(hist.lines().count(), 1 + 6);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["samples"], 8);
    assert_eq!(summary["descents"].as_array().unwrap().len(), 1);
    let worst_gap = summary["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["check"] == "minimality.gap_nonnegative")
        .unwrap();
    assert_eq!(worst_gap["pass"], true);
}

#[test]
fn converge_reports_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("coarse.json");
    // a coarser grid keeps the three-level study quick
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(default_config()).unwrap()).unwrap();
    v["xStep"] = serde_json::json!(1.0 / 32.0);
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = dir.path().join("table.json");
    let status = qhm()
        .args(["converge", "--check", "calibration", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    let table: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 3);
    assert_eq!(status.code(), Some(if table["pass"] == true { 0 } else { 1 }));
}
