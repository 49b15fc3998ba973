use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fgraph"))
        .args(args)
        .output()
        .expect("spawn fgraph")
}

fn run_into(config: &Path, dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    fgraph(&args)
}

#[test]
fn malformed_toml_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "pipeline = [\n").unwrap();
    let out = run_into(&bad, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn unknown_key_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "pipeline = \"cantor4-adhoc\"\nepsilon = 0.21\ncolour = 3\n").unwrap();
    assert_eq!(run_into(&bad, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn adhoc_run_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(&configs().join("cantor4_adhoc.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cantor4_adhoc.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], 1);
    assert_eq!(json["pass"], true);
    assert_eq!(json["quantities"]["m"]["value"], 1.0);
    let svg = std::fs::read_to_string(dir.path().join("cantor4_adhoc.svg")).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains("<polyline"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    for name in ["c4_rotfree", "quarter_turn", "cantor4_generic"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = configs().join(format!("{name}.toml"));
        assert!(run_into(&cfg, a.path(), &[]).status.success());
        assert!(run_into(&cfg, b.path(), &[]).status.success());
        for ext in ["json", "svg"] {
            let file = format!("{name}.{ext}");
            assert_eq!(
                std::fs::read(a.path().join(&file)).unwrap(),
                std::fs::read(b.path().join(&file)).unwrap(),
                "{file} differs"
            );
        }
    }
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("cantor4_adhoc.toml");
    let out = run_into(&cfg, dir.path(), &["--epsilon", "0.2", "--depth", "3", "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cantor4_adhoc.json")).unwrap()).unwrap();
    assert_eq!(json["quantities"]["m"]["value"], 2.0);
    assert_eq!(json["seed"], 11);
    let bad = run_into(&cfg, dir.path(), &["--epsilon", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn favard_and_dims_print_json() {
    let cfg = configs().join("c4_rotfree.toml");
    let fav = fgraph(&["favard", "--config", cfg.to_str().unwrap(), "--depth", "2", "--grid", "128"]);
    assert!(fav.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&fav.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    let dims = fgraph(&["dims", "--config", cfg.to_str().unwrap()]);
    let d: serde_json::Value = serde_json::from_slice(&dims.stdout).unwrap();
    assert!((d["similarity_dimension"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn graph_and_render_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("cantor4_adhoc.toml");
    let g = fgraph(&["graph", "--config", cfg.to_str().unwrap()]);
    assert_eq!(g.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&g.stdout).unwrap();
    assert!(v["quantities"]["lipschitz_measured"]["value"].as_f64().unwrap() <= 3.0 + 1e-9);
    let r = fgraph(&["render", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    assert!(dir.path().join("cantor4_adhoc.svg").exists());
    assert!(!dir.path().join("cantor4_adhoc.json").exists());
}
