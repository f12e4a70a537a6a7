//! Drives the binary through single stages, a small campaign and the stub shim.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sketchprobe")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn stages_chain_into_a_runnable_program() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sketch = fixtures().join("sketches/06_function_params.js");
    ok(&["fill", "--sketch", p(&sketch), "--seed", "7", "--count", "2", "--out", p(&d.join("f"))]);
    let filled = d.join("f/06_function_params.0.js");
    assert!(filled.exists() && d.join("f/06_function_params.1.json").exists());

    // same seed, same programs
    ok(&["fill", "--sketch", p(&sketch), "--seed", "7", "--count", "2", "--out", p(&d.join("g"))]);
    assert_eq!(
        std::fs::read(&filled).unwrap(),
        std::fs::read(d.join("g/06_function_params.0.js")).unwrap()
    );

    let enhanced = d.join("e.js");
    ok(&["enhance", "--in", p(&filled), "--out", p(&enhanced), "--map", p(&d.join("map.json"))]);
    let map: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("map.json")).unwrap()).unwrap();
    assert!(!map.as_array().unwrap().is_empty());

    let mutated = d.join("m.js");
    ok(&["mr", "--relation", "algebraic:inject", "--seed", "3", "--in", p(&enhanced), "--out", p(&mutated)]);
    let obf = d.join("o.js");
    ok(&["obfuscate", "--tool", "identity", "--in", p(&mutated), "--out", p(&obf)]);

    let base: serde_json::Value = serde_json::from_str(&ok(&["run", "--program", p(&enhanced)])).unwrap();
    let variant: serde_json::Value = serde_json::from_str(&ok(&["run", "--program", p(&obf)])).unwrap();
    assert_eq!(base, variant);
    let lines = base["stdout_lines"].as_array().unwrap();
    assert!(lines.iter().any(|l| l.as_str().unwrap().starts_with("=> Entering function: mix")), "{lines:?}");
}

#[test]
fn validate_flags_invalid_sketches() {
    let good = fixtures().join("sketches/01_figure_one.js");
    assert!(bin(&["validate", p(&good)]).status.success());
    // a repairable violation is reported but does not fail
    let repaired = fixtures().join("violations/unary_op.js");
    let out = bin(&["validate", p(&repaired)]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("unary_op"));
    let bad = fixtures().join("violations/syntax_error.js");
    let out = bin(&["validate", p(&good), p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("parse_error"), "{text}");
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = bin(&["obfuscate", "--tool", "nope", "--in", "x.js", "--out", "y.js"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown tool"));
    let out = bin(&["report", "--dir", "/nonexistent/campaign"]);
    assert!(!out.status.success());
}

#[test]
fn campaign_then_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir(d.join("sketches")).unwrap();
    std::fs::copy(fixtures().join("sketches/01_figure_one.js"), d.join("sketches/01_figure_one.js")).unwrap();
    std::fs::write(
        d.join("campaign.toml"),
        r#"
output_root = "out"
seed = 5
parallelism = 1
mrs = []

[fill]
instances_per_sketch = 2

[engine]
timeout_s = 10.0

[[sources.handwritten]]
path = "sketches"

[[matrix]]
tool = "identity"
preset = "default"

[[matrix]]
tool = "flip_plus"
preset = "default"
"#,
    )
    .unwrap();
    let cfg = d.join("campaign.toml");
    let json = ok(&["campaign", "--config", p(&cfg), "--format", "json"]);
    let summary: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(summary["programs"], 2);
    assert_eq!(summary["variants"], 4);
    assert_eq!(summary["verdicts"], 4);

    let report = ok(&["report", "--dir", p(&d.join("out")), "--format", "json"]);
    let again: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(again["verdicts"], summary["verdicts"]);
    assert_eq!(again["failures"], summary["failures"]);

    let perf = ok(&["perf", "--config", p(&cfg), "--runs", "1"]);
    assert!(perf.starts_with("config"), "{perf}");
    assert!(perf.contains("identity/default"), "{perf}");
}

#[test]
fn shim_stub_speaks_the_protocol() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_sketchprobe"))
        .arg("shim-stub")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    writeln!(stdin, r#"{{"id":4,"source":"a + 1;","config":{{"tool":"flip_plus","preset":"default"}}}}"#).unwrap();
    writeln!(stdin, "not json").unwrap();
    drop(stdin);
    let out = child.wait_with_output().unwrap();
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["id"], 4);
    assert_eq!(lines[0]["obfuscated_source"], "a - 1;\n");
    assert!(lines[1]["id"].is_null());
    assert_eq!(lines[1]["ok"], false);
}
