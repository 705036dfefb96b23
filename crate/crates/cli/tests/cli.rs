use std::process::Command;

fn charmix() -> Command {
    Command::new(env!("CARGO_BIN_EXE_charmix"))
}

#[test]
fn single_run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = charmix()
        .args(["single", "--problem", "paper2d", "--M", "8", "--tau", "1/16", "--T", "0.25", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("M=8") && stdout.contains("divergence_identity=ok"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("single.csv")).unwrap();
    assert!(csv.starts_with("M,tau,err_c_L2"), "{csv}");
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nproblem = tensor_smoke\nM = 4\ntau = 1/8\nT = 0.25\n").unwrap();
    let out = charmix()
        .args(["single", "--M", "6", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("M=6 tau=0.125"));
}

#[test]
fn unknown_problem_fails_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = charmix()
        .args(["single", "--problem", "nope", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("nope"), "{err}");
    assert!(dir.path().join("failure.json").exists());
}

#[test]
fn convergence_rejects_non_dyadic_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let out = charmix()
        .args(["convergence", "--M", "8,12", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(dir.path().join("failure.json").exists());
}
