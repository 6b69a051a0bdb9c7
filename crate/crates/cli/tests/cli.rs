use std::process::Command;

fn kostlan() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kostlan"))
}

#[test]
fn mean_root_counts_json() {
    let out = kostlan()
        .args(["mean", "--m", "1", "--r", "1", "--d", "25", "--reps", "200", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["degrees"][0]["theoretical_mean"], 10.0);
    assert_eq!(v["replicates"].as_array().unwrap().len(), 200);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"d": 12, "replicates": 3, "mesh_level": 5}"#).unwrap();
    let out_path = dir.path().join("out.csv");
    let out = kostlan()
        .args(["mean", "--config", cfg.to_str().unwrap(), "--reps", "5", "--format", "csv", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.code() == Some(0) || out.status.code() == Some(2));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().skip(1).all(|l| l.starts_with("12,")));
}

#[test]
fn coarse_mesh_is_refused_with_exit_one() {
    let out = kostlan().args(["mean", "--d", "100", "--mesh-level", "3", "--reps", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("level 6"), "{err}");
}

#[test]
fn covdump_csv() {
    let out = kostlan().args(["covdump", "--d", "10", "--format", "csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("theta,d,A,B,C,D,sigma2,rho,psi"));
}

#[test]
fn bad_flags_fail() {
    assert_ne!(kostlan().args(["mean", "--method", "bogus"]).output().unwrap().status.code(), Some(0));
    assert_eq!(kostlan().args(["clt", "--m", "3"]).output().unwrap().status.code(), Some(1));
}
