use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bessel-snake"))
}

#[test]
fn unknown_check_exits_with_error() {
    let out = bin().args(["check", "no-such-check"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown check"));
}

#[test]
fn zero_replicates_is_rejected() {
    let out = bin()
        .args(["check", "law-wstar", "--n", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn passing_check_writes_report_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "check",
            "super-joint",
            "--n",
            "20000",
            "--seed",
            "7",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let line = String::from_utf8(out.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(report["check_id"], "super-joint");
    assert_eq!(report["master_seed"], 7);
    assert_eq!(report["pass"], true);
    let saved = std::fs::read_to_string(dir.path().join("super-joint.json")).unwrap();
    assert_eq!(saved.trim(), line.trim());
    let csv = std::fs::read_to_string(dir.path().join("super-joint.csv")).unwrap();
    assert!(csv.starts_with("series,index,value\n"));
    assert!(csv.lines().count() > 1000);
}

#[test]
fn failing_check_exits_with_one() {
    // a tiny sample cannot meet the sup-distance tolerance
    let out = bin()
        .args(["check", "super-min-cdf", "--n", "50"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_is_merged_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 11, "n": 5000, "format": "csv"}"#).unwrap();
    let out = bin()
        .args(["check", "super-joint", "--n", "6000", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("check_id,"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "super-joint");
    assert_eq!(row[4], "6000");
    assert_eq!(row[5], "11");
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"sed": 1}"#).unwrap();
    let out = bin()
        .args(["check", "super-joint", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dumps_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, file, header) in [
        ("bessel-paths", "bessel_paths.csv", "replicate,t,value"),
        ("super-samples", "super_samples.csv", "m_x,w0,duration"),
        ("snake-trajectory", "snake_trajectory.csv", "s,zeta,tip"),
    ] {
        let out = bin()
            .args(["dump", kind, "--n", "3", "--dt", "1e-3", "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{kind}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        assert_eq!(text.lines().next().unwrap(), header);
    }
    let json = std::fs::read_to_string(dir.path().join("snake_trajectory.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v["wstar"].as_f64().unwrap() <= 0.0);
}

#[test]
fn spine_dump_is_valid_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["dump", "spine-sample", "--trunc-eps", "0.05", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json = std::fs::read_to_string(dir.path().join("spine_sample.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v["a"].as_f64().unwrap() >= 1.0);
}
