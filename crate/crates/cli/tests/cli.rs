use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures(kind: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(kind)
}

fn run(args: &[&str], registry_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_leaklint"));
    cmd.args(args).env_remove("LEAKLINT_REGISTRY");
    if let Some(p) = registry_env {
        cmd.env("LEAKLINT_REGISTRY", p);
    }
    cmd.output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn scan_exit_codes() {
    let clean = run(&["scan", "--format", "json", fixtures("clean").to_str().unwrap()], None);
    assert_eq!(clean.status.code(), Some(0));
    assert_eq!(json(&clean)["findings"], Value::Array(vec![]));

    let one = fixtures("buggy").join("MoveToFirstBasic.java");
    let buggy = run(&["scan", "--format", "json", one.to_str().unwrap()], None);
    assert_eq!(buggy.status.code(), Some(1));
    let report = json(&buggy);
    assert_eq!(report["findings"].as_array().unwrap().len(), 1);
    assert_eq!(report["findings"][0]["checker"], "move_to_first");
    assert_eq!(report["summary"]["by_checker"]["move_to_first"], 1);
    assert_eq!(report["summary"]["by_consequence"]["I"], 1);
    assert_eq!(report["registry_digest"].as_str().unwrap().len(), 64);

    let missing = run(&["scan", "--registry", "missing.json", fixtures("clean").to_str().unwrap()], None);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&missing.stderr).lines().count(), 1);

    let no_root = run(&["scan", "/definitely/not/here"], None);
    assert_eq!(no_root.status.code(), Some(2));
}

#[test]
fn registry_env_is_a_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let root = fixtures("clean");
    assert_eq!(run(&["scan", root.to_str().unwrap()], Some(&bad)).status.code(), Some(2));
    let builtin = dir.path().join("empty.json");
    std::fs::write(&builtin, r#"{"specs": []}"#).unwrap();
    let flagged = run(&["scan", "--registry", builtin.to_str().unwrap(), root.to_str().unwrap()], Some(&bad));
    assert_eq!(flagged.status.code(), Some(0), "{}", String::from_utf8_lossy(&flagged.stderr));
}

#[test]
fn checker_selection_and_text_format() {
    let root = fixtures("buggy");
    let o = run(&["scan", "--checkers", "swap_cursor,get_count", root.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[..lines.len() - 1].iter().all(|l| l.contains(": swap_cursor: ") || l.contains(": get_count: ")));
    assert!(lines.last().unwrap().ends_with("file(s)"));
    assert_eq!(run(&["scan", "--checkers", "nope", root.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn json_mode_keeps_diagnostics_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("Broken.java"), "class Broken { void f( { }").unwrap();
    let o = run(&["scan", "--format", "json", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let report = json(&o);
    assert_eq!(report["diagnostics"].as_array().unwrap().len(), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Broken.java"));
}

#[test]
fn bench_with_perfect_findings() {
    let dir = tempfile::tempdir().unwrap();
    let scan = run(&["scan", "--format", "json", fixtures("buggy").to_str().unwrap()], None);
    let report = json(&scan);
    let findings_path = dir.path().join("findings.json");
    std::fs::write(&findings_path, &scan.stdout).unwrap();
    let mut csv = String::from("app,resource_class,file,method,buggy_rev,fix_rev,report_url,extent,consequence\n");
    for f in report["findings"].as_array().unwrap() {
        csv += &format!(
            "demo,{},{},{},r1,r2,,,\n",
            f["resource_class"].as_str().unwrap(),
            f["file"].as_str().unwrap(),
            f["method"].as_str().unwrap()
        );
    }
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(&manifest, csv).unwrap();

    let o = run(&["bench", "--format", "json", findings_path.to_str().unwrap(), manifest.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let m = json(&o);
    assert_eq!(m["overall"]["precision"], 1.0);
    assert_eq!(m["overall"]["recall"], 1.0);
    let text = run(&["bench", findings_path.to_str().unwrap(), manifest.to_str().unwrap()], None);
    assert!(String::from_utf8_lossy(&text.stdout).starts_with("overall: tp=17 fp=0 fn=0 precision=1.0 recall=1.0"));

    let missing = run(&["bench", findings_path.to_str().unwrap(), "nope.csv"], None);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn stats_text_and_load_failure() {
    let m = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/synthetic_manifest_4.csv");
    let o = run(&["stats", m.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.starts_with("total: 4\n"));
    assert!(text.contains("extent split: complete 50.0% / exceptional 25.0% / normal 25.0%"));
    assert_eq!(run(&["stats", "nope.csv"], None).status.code(), Some(2));
}

#[test]
fn mine_export() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("h.jsonl");
    std::fs::write(
        &export,
        "{\"id\":\"a\",\"log\":\"Fix cursor leak\",\"diff\":\"\"}\nnot json\n{\"id\":\"b\",\"log\":\"release v2\",\"diff\":\"\"}\n",
    )
    .unwrap();
    let o = run(&["mine", "--format", "json", export.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let c = json(&o);
    assert_eq!(c.as_array().unwrap().len(), 1);
    assert_eq!(c[0]["commit_id"], "a");
    assert_eq!(c[0]["reason"], "log");
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["mine", "--format", "json", empty.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o), Value::Array(vec![]));

    assert_eq!(run(&["mine", "/no/such/export.jsonl"], None).status.code(), Some(2));
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"removal_patterns": ["("]}"#).unwrap();
    let bad = run(&["mine", "--config", cfg.to_str().unwrap(), export.to_str().unwrap()], None);
    assert_eq!(bad.status.code(), Some(2));
}
