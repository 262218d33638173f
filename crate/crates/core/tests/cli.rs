//! End-to-end runs of the binary against checked-in golden outputs.
//! `UPDATE_GOLDEN=1 cargo test --test cli` rewrites them.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_isopart"));
    c.env_remove("ISOPART_OUT_DIR");
    c
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check_golden(name: &str, actual: &[u8]) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert!(
        expected == actual,
        "{name} differs from golden output:\n{}",
        String::from_utf8_lossy(actual)
    );
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn construct(dir: &TempDir, kind: &str, areas: &[&str]) -> String {
    let path = dir.path().join(format!("{kind}.json"));
    let p = path.to_str().unwrap().to_string();
    let mut args = vec!["construct", kind];
    for a in areas {
        args.extend(["--area", a]);
    }
    args.extend(["--out", &p]);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

#[test]
fn construct_outputs() {
    for (kind, areas) in [
        ("lens", &["1"][..]),
        ("peanut", &["1", "2"]),
        ("reuleaux", &["1"]),
        ("double-bubble", &["1", "2"]),
        ("triple-junction", &[]),
        ("halfplane", &[]),
        ("disk", &["1"]),
    ] {
        let mut args = vec!["construct", kind];
        for a in areas {
            args.extend(["--area", a]);
        }
        let out = run(&args);
        assert!(out.status.success(), "{kind}");
        check_golden(&format!("construct_{kind}.json"), &out.stdout);
    }
}

#[test]
fn construct_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, areas) in [("lens", &["1"][..]), ("peanut", &["1", "2"]), ("reuleaux", &["1"])] {
        let file = construct(&dir, kind, areas);
        let out = run(&["verify", &file]);
        assert_eq!(out.status.code(), Some(0), "{kind}");
        check_golden(&format!("verify_{kind}.json"), &out.stdout);
    }
}

#[test]
fn verify_rejects_a_jittered_network() {
    let dir = tempfile::tempdir().unwrap();
    let file = construct(&dir, "reuleaux", &["1"]);
    let moved = dir.path().join("moved.json");
    let text = std::fs::read_to_string(&file).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let x = &mut v["vertices"][0]["position"][0];
    *x = serde_json::json!(x.as_f64().unwrap() + 0.05);
    std::fs::write(&moved, serde_json::to_string(&v).unwrap()).unwrap();
    let out = run(&["verify", moved.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn measure_output() {
    let dir = tempfile::tempdir().unwrap();
    let file = construct(&dir, "peanut", &["1", "2"]);
    let out = run(&["measure", &file, "--radius", "3"]);
    assert!(out.status.success());
    check_golden("measure_peanut.json", &out.stdout);
}

#[test]
fn minimize_output() {
    let dir = tempfile::tempdir().unwrap();
    let file = construct(&dir, "lens", &["1"]);
    let fixed = dir.path().join("fixed.json");
    let out = run(&["minimize", &file, "--jitter", "0.05", "--seed", "4", "--partition-out", fixed.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    check_golden("minimize_lens.json", &out.stdout);
    assert_eq!(run(&["verify", fixed.to_str().unwrap(), "--tol", "1e-5"]).status.code(), Some(0));
}

#[test]
fn anneal_output() {
    let dir = tempfile::tempdir().unwrap();
    let file = construct(&dir, "lens", &["1"]);
    let raster = dir.path().join("labels.pgm");
    let out = run(&["anneal", &file, "--n", "48", "--sweeps", "30", "--seed", "2", "--raster", raster.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    check_golden("anneal_lens.json", &out.stdout);
    let pgm = std::fs::read_to_string(&raster).unwrap();
    assert!(pgm.starts_with("P2\n48 48\n"));
}

#[test]
fn project_sphere_output() {
    let out = run(&["project-sphere", "--regions", "3", "--samples", "20000", "--seed", "1"]);
    assert!(out.status.success());
    check_golden("project_sphere_3.json", &out.stdout);
}

#[test]
fn bench_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let bubble = construct(&dir, "double-bubble", &["1", "2"]);
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("steiner", vec!["bench", "steiner", "--rho", "0.1"]),
        ("glueing", vec!["bench", "glueing", "--count", "5"]),
        ("growth", vec!["bench", "growth", "--file", &bubble]),
        ("cluster", vec!["bench", "cluster", "--file", &bubble]),
        ("density", vec!["bench", "density", "--file", &bubble]),
        ("volume_fixing", vec!["bench", "volume-fixing", "--count", "5"]),
    ];
    for (name, args) in cases {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stdout));
        check_golden(&format!("bench_{name}.json"), &out.stdout);
    }
}

#[test]
fn render_output() {
    let dir = tempfile::tempdir().unwrap();
    let file = construct(&dir, "reuleaux", &["1"]);
    let out = run(&["render", &file, "--size", "400"]);
    assert!(out.status.success());
    check_golden("render_reuleaux.svg", &out.stdout);
}

#[test]
fn out_is_resolved_against_the_configured_directory() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .env("ISOPART_OUT_DIR", dir.path())
        .args(["construct", "lens", "--area", "1", "--out", "sub/lens.json"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("sub/lens.json").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["construct", "lens", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["construct", "peanut", "--area", "1"]).status.code(), Some(2));
    assert_eq!(run(&["construct", "lens", "--area=-1"]).status.code(), Some(2));
}

#[test]
fn malformed_files_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"schema_version\": 1,\n  \"regions\": [ }").unwrap();
    let out = run(&["verify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let future = dir.path().join("future.json");
    std::fs::write(&future, "{ \"schema_version\": 99 }").unwrap();
    assert_eq!(run(&["verify", future.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["verify", "/nonexistent/file.json"]).status.code(), Some(1));
}
