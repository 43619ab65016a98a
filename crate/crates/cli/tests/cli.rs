use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
name = "tiny"
kind = "denoise2d"
manifold = "Sphere2"
targets = [1e-2]

[dataset]
kind = "image"
sizes = [3]

[model]
alpha = 1.5
beta = 1e-6
sigma = 0.35
tau = 0.35
q = 2

[solver]
max_iters = 30
eps_rel_stop = 1e-8

[lrcpa]
max_iters = 200
eps_rel_stop = 1e-3
"#;

fn pdrssn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdrssn")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let r = pdrssn(&["run", "--config", &cfg, "--out", out_s, "--seed", "3"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8(r.stdout).unwrap();
    assert!(stdout.contains("n3_presteps_exact") && stdout.contains("n3_lrcpa"));
    assert!(out.join("summary.json").is_file());
    assert!(out.join("traces/n3_lrcpa.csv").is_file());
    let saved = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(saved.contains("seed = 3"));

    let rep = pdrssn(&["report", "--out", out_s]);
    assert_eq!(rep.status.code(), Some(0));
    assert!(String::from_utf8(rep.stdout).unwrap().contains("n3_presteps_exact"));
}

#[test]
fn gen_writes_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("data");
    let r = pdrssn(&["gen", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let file = out.join("tiny_n3.json");
    assert!(file.is_file());
    assert!(String::from_utf8(r.stdout).unwrap().contains("tiny_n3.json"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &TINY.replace("alpha = 1.5", "alpha = -1.0"));
    let r = pdrssn(&["run", "--config", &cfg]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8(r.stderr).unwrap().contains("alpha"));
    let cfg = write_config(dir.path(), &TINY.replace("[dataset]", "bogus = 1\n[dataset]"));
    assert_eq!(pdrssn(&["gen", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn missing_files_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let r = pdrssn(&["report", "--out", missing.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(pdrssn(&["run"]).status.code(), Some(2));
    assert_eq!(pdrssn(&["report", "--out", "a", "--config", "b"]).status.code(), Some(2));
}
