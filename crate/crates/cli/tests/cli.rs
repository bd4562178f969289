use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn phasens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasens")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn short_config(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(config("small-offset.toml")).unwrap().replace("t_end = 1000.0", "t_end = 20.0");
    let path = dir.join("short.toml");
    fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_configs_validate() {
    for name in ["small-offset.toml", "quick-scan.toml", "monte-carlo.toml"] {
        let out = phasens(&["validate", config(name).to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", stderr(&out));
        assert!(stdout(&out).contains("ok (hash "));
    }
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("small-offset.toml"))
        .unwrap()
        .replace("kernel = \"spiked:100\"", "kernel = \"spiked:0.5\"")
        .replace("dt = 0.001", "dt = -1.0")
        .replace("rho = 0.16", "rho = 0.5");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let out = phasens(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("kernel:"), "{text}");
    assert!(text.contains("integrator:"), "{text}");
    assert!(text.contains("entries:"), "{text}");
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = phasens(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["trajectory.csv", "report.json", "manifest.json"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn model_and_seed_overrides_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let hash = |extra: &[&str]| {
        let out_dir = dir.path().join(format!("o{}", extra.len()));
        let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = phasens(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        let m: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
        (m["config_hash"].as_str().unwrap().to_string(), m["config"]["model"].as_str().unwrap().to_string())
    };
    let (h0, m0) = hash(&[]);
    let (h1, m1) = hash(&["--model", "b"]);
    assert_eq!((m0.as_str(), m1.as_str()), ("a", "b"));
    assert_ne!(h0, h1);
}

#[test]
fn scan_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = phasens(&["scan", config("quick-scan.toml").to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--jobs", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("c,dphi0,classification,n_at_horizon"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| !r.contains("error")));
}

#[test]
fn missing_config_is_a_config_error() {
    let out = phasens(&["run", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn unknown_preset_is_rejected_by_the_parser() {
    let out = phasens(&["reproduce", "table2"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("table1"), "{}", stderr(&out));
}

#[test]
fn table1_preset_reports_each_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let out = phasens(&["reproduce", "table1", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("table1-flat: diverged"), "{text}");
    assert!(text.contains("table1-cosine: converged (decay Exponential"), "{text}");
    assert!(text.contains("table1-spiked100: converged (decay PowerLaw"), "{text}");
}
