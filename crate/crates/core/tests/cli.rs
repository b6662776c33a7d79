use std::path::Path;
use std::process::Command;

fn nonclass(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_nonclass"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stderr).into_owned())
}

#[test]
fn fig5_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = nonclass(&["fig5", "--grid", "21"], dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("fig5.csv")).unwrap();
    assert!(csv.starts_with("b,a,d15,d23,d123,d123_detects\n"));
    assert_eq!(csv.lines().count(), 22);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig5.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["target"], "fig5");
    let x = summary["data"]["d123_crossing"].as_f64().unwrap();
    assert!((x - 0.5f64.sqrt()).abs() < 1e-9, "{x}");
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let (code, err) = nonclass(&["fig6", "--grid", "90"], d.path());
        assert_eq!(code, 0, "{err}");
    }
    for f in ["fig6.csv", "fig6.summary.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nonclass(&["table7"], dir.path()).0, 2);
    assert_eq!(nonclass(&["fig5", "--tol", "-3"], dir.path()).0, 2);
    assert_eq!(nonclass(&[], dir.path()).0, 2);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"battery": {"fock": [1], "colour": 3}}"#).unwrap();
    assert_eq!(nonclass(&["table1", "--config", cfg.to_str().unwrap()], dir.path()).0, 2);
    std::fs::write(&cfg, "not json").unwrap();
    assert_eq!(nonclass(&["table1", "--config", cfg.to_str().unwrap()], dir.path()).0, 2);
}

#[test]
fn tolerance_failure_exits_1() {
    // a threshold far tighter than the crossing can meet
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = nonclass(&["fig5", "--grid", "11", "--tol", "1e-6"], dir.path());
    assert_eq!(code, 1);
    let summary = std::fs::read_to_string(dir.path().join("fig5.summary.json")).unwrap();
    assert!(summary.contains("\"pass\": false"));
}

#[test]
fn config_file_narrows_the_battery() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"battery": {"fock": [2], "squeezed": [0.3], "cats": [[0.7, 0.0]]}}"#).unwrap();
    let (code, err) = nonclass(&["table1", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    // four states: |2>, one squeezed, even and odd cat
    let subsets: usize = nonclass_core::minors::TABLE_I_ROWS.iter().map(|r| r.len()).sum();
    assert_eq!(csv.lines().count(), 1 + 4 * subsets);
    assert!(csv.contains("fock,n=2,"));
}
