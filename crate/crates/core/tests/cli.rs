use std::process::Command;

fn swkrr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swkrr"))
}

#[test]
fn invalid_configuration_exits_with_2() {
    let out = swkrr().args(["gmm", "--repeats", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = swkrr().args(["gmm", "--methods", "sw3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = swkrr().args(["gmm", "--methods", "rbf"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_is_a_trial_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = swkrr()
        .args(["mnist", "--images", "/nonexistent/img.gz", "--labels", "/nonexistent/lbl.gz", "--repeats", "1"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "T = 12\nn = 8\nC = 2\nr = 2\nval = 6\ntest = 6\nrepeats = 3\nseed = 4\nmethods = [\"SW2\"]\nM = 8\nN = 8\n\
         [grids]\nlambda = { lo = 1e-4, hi = 1.0, k = 3 }\nsw_gamma = { lo = 1e-2, hi = 1.0, k = 3 }\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = swkrr()
        .arg("gmm")
        .arg("--config")
        .arg(&cfg)
        .args(["--repeats", "1"])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "flag should override repeats = 3");
    assert!(csv.lines().nth(1).unwrap().starts_with("SW2,0,"));
}

#[test]
fn unknown_config_key_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "lambda = 3\n").unwrap();
    let out = swkrr().arg("gmm").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
