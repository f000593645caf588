use std::path::Path;
use std::process::{Command, Output};

const E1: &str = r#"{
  "format": "motif/1",
  "vertices": [ { "id": "v", "decoration": { "pre": "x" } } ],
  "edges": [
    { "tail": ["v", 2], "head": ["v", 1], "shift": [1, 0] },
    { "tail": ["v", 3], "head": ["v", 0], "shift": [0, 1] }
  ],
  "classes": [ { "id": "x", "members": ["v"] } ]
}"#;

fn dpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpt"))
        .args(args)
        .output()
        .expect("spawn dpt")
}

fn write_e1(dir: &Path) -> String {
    let p = dir.join("E1.motif");
    std::fs::write(&p, E1).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn validate_and_info() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_e1(dir.path());
    let out = dpt(&["validate", &f]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "valid");
    let out = dpt(&["info", &f]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("crossings 1"));
    assert!(text.contains("classes x"));
}

#[test]
fn resolutions_report_two_elements() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_e1(dir.path());
    let out = dpt(&["resolutions", &f]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.trim().lines().count(), 2);
}

#[test]
fn were_reports_halves() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_e1(dir.path());
    let out = dpt(&["were", &f]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.starts_with("1/2 ")));
}

#[test]
fn twist_rejects_non_unimodular() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_e1(dir.path());
    let out = dpt(&["twist", "2", "0", "0", "1", &f]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: NonUnimodular"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let out = dpt(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cover_minimize_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_e1(dir.path());
    let out = dpt(&["cover", "2", "0", "0", "1", &f]);
    assert!(out.status.success());
    let cov = dir.path().join("cov.motif");
    std::fs::write(&cov, &out.stdout).unwrap();
    let out = dpt(&["minimize", cov.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("sublattice "), "{text}");
    // the motif part parses back and is isomorphic to E1
    let min = dir.path().join("min.motif");
    let body: String = text.lines().skip(1).collect::<Vec<_>>().join("\n");
    std::fs::write(&min, body).unwrap();
    let out = dpt(&["iso", min.to_str().unwrap(), &f, "--modulo", "gauge-basis"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "isomorphic");
}

#[test]
fn regauge_is_gauge_isomorphic_and_equiv_trivially() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_e1(dir.path());
    let out = dpt(&["regauge", &f]);
    assert!(out.status.success());
    let g = dir.path().join("g.motif");
    std::fs::write(&g, &out.stdout).unwrap();
    let out = dpt(&["equiv", &f, g.to_str().unwrap(), "--depth", "1"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "equivalent 0");
}

#[test]
fn render_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_e1(dir.path());
    let svg = dir.path().join("e1.svg");
    let out = dpt(&["render", &f, "--tiles", "2", "2", "--out", svg.to_str().unwrap()]);
    assert!(out.status.success());
    let body = std::fs::read_to_string(&svg).unwrap();
    assert!(body.starts_with("<svg"));
}

#[test]
fn schema_validate_passes_and_json_is_deterministic() {
    let out = dpt(&["schema-validate"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().all(|l| l.ends_with(": pass")), "{text}");
    let a = dpt(&["--json", "schema-validate"]);
    let b = dpt(&["--json", "schema-validate"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn syntax_error_has_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.motif");
    std::fs::write(&p, "{ not json").unwrap();
    let out = dpt(&["validate", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("SyntaxError"), "{err}");
}
