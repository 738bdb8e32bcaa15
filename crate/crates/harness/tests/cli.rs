use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use d2dsec::{Manifest, Scenario};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn d2dsec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d2dsec")).args(args).output().unwrap()
}

fn manifest_in(dir: &Path) -> Manifest {
    let path = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("manifest-"))
        .expect("manifest written");
    Manifest::load(&path).unwrap()
}

#[test]
fn every_example_scenario_parses() {
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn ne_subcommand_writes_bundle() {
    let out = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("ne.json");
    let o = d2dsec(&["ne", "--scenario", scenario.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest_in(out.path());
    assert_eq!(m.outputs.len(), 2);
    for f in &m.outputs {
        let bytes = std::fs::read(out.path().join(&f.file)).unwrap();
        assert!(bytes.windows(2).any(|w| w == b"\r\n"));
        assert!(f.file.contains(&m.scenario_hash[..16]));
    }
}

#[test]
fn seed_override_changes_hash() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let scenario = scenarios().join("best_response.json");
    let s = scenario.to_str().unwrap();
    assert!(d2dsec(&["solve-br", "--scenario", s, "--out", a.path().to_str().unwrap()]).status.success());
    assert!(d2dsec(&["solve-br", "--scenario", s, "--seed", "99", "--out", b.path().to_str().unwrap()])
        .status
        .success());
    let (ma, mb) = (manifest_in(a.path()), manifest_in(b.path()));
    assert_ne!(ma.scenario_hash, mb.scenario_hash);
    assert_eq!(mb.seed, 99);
}

#[test]
fn bad_field_is_reported_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenarios().join("ne.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["types"][1]["cost"] = serde_json::json!("cheap");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = d2dsec(&["ne", "--scenario", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("types[1].cost"), "{err}");
}

#[test]
fn unknown_field_is_rejected() {
    let text = std::fs::read_to_string(scenarios().join("ne.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["env"]["gamma"] = serde_json::json!(1.0);
    let err = Scenario::from_json(&v.to_string()).unwrap_err().to_string();
    assert!(err.contains("gamma"), "{err}");
}

#[test]
fn invalid_value_is_rejected() {
    let text = std::fs::read_to_string(scenarios().join("ne.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["env"]["beta"] = serde_json::json!(1.5);
    assert!(Scenario::from_json(&v.to_string()).is_err());
}

#[test]
fn rerun_reproduces_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let scenario = scenarios().join("joint.json");
    assert!(d2dsec(&["run", "--scenario", scenario.to_str().unwrap(), "--out", a.path().to_str().unwrap()])
        .status
        .success());
    let manifest = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "json"))
        .unwrap();
    let o = d2dsec(&["rerun", "--manifest", manifest.to_str().unwrap(), "--out", b.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in manifest_in(a.path()).outputs {
        assert_eq!(std::fs::read(a.path().join(&f.file)).unwrap(), std::fs::read(b.path().join(&f.file)).unwrap());
    }
}
