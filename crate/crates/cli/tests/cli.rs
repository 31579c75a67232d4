use std::path::Path;
use std::process::{Command, Output};

fn critfluct(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critfluct"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn exact_at_degenerate_tilt_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = critfluct(&["exact", "--n", "8", "--theta", "2.828427", "--a", "0.1", "--json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["command"], "exact");
    let flags = report["flags"].as_array().unwrap();
    assert!(!flags.is_empty());
    assert!(flags.iter().all(|f| f["passed"] == true && f["criterion"] == 2));
    assert!(dir.path().join("exact.json").exists());
}

#[test]
fn birthdeath_detailed_balance_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = critfluct(&["birthdeath", "--n", "1024", "--theta", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS [ 3]"));
    assert!(dir.path().join("bd.csv").exists());
}

#[test]
fn negative_theta_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = critfluct(&["limit", "--theta", "-1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failing_flags_give_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // Far too few samples for the exact-law check at n = 10.
    let out = critfluct(
        &["simulate", "--n", "10", "--samples", "20", "--replicas", "1", "--sample-interval", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn errors_give_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = critfluct(&["simulate", "--n", "15"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("even"));
    let out = critfluct(&["exact", "--n", "8", "--theta", "9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_refuses_mixed_hashes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(critfluct(&["limit"], dir.path()).status.code(), Some(0));
    assert_eq!(critfluct(&["limit", "--seed", "7"], dir.path()).status.code(), Some(0));
    // Same file names: the second run overwrote the first.
    assert_eq!(critfluct(&["report"], dir.path()).status.code(), Some(0));
    assert_eq!(
        critfluct(&["birthdeath", "--n", "64"], dir.path()).status.code(),
        Some(0)
    );
    let out = critfluct(&["report"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different config hashes"));
    let out = critfluct(&["report", "--force", "--json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config_hash"], "mixed");
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = critfluct(&["simulate", "--n", "16", "--samples", "200", "--replicas", "2", "--seed", "3"], d.path());
        assert!(out.status.success());
    }
    for name in ["series_n16_r0.csv", "series_n16_r1.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap()
        );
    }
}
