use std::path::Path;
use std::process::{Command, Output};

fn study(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_study")).args(args).current_dir(cwd).env("STUDY_THREADS", "2").output().expect("spawn study")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"
problem = "interface_smooth"
jump_ratio = 100.0
space = "RT"
degree = 0
base_cells = 2
levels = 3
norms = ["flux_l2", "potential", "post"]
postprocess = true
analysis = true
output_dir = "out"
"#;

#[test]
fn run_writes_outputs_and_rates_reads_them_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = study(&["run", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    for f in ["table.csv", "report.json", "analysis.csv", "elements_level0.csv", "elements_level2.csv"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["levels"].as_array().unwrap().len(), 3);
    assert!(report["library_version"].is_string());

    let table = out_dir.join("table.csv");
    let rates = study(&["rates", table.to_str().unwrap()], dir.path());
    assert!(rates.status.success());
    let text = String::from_utf8(rates.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("level,rate_flux_l2,rate_potential,rate_post"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace("output_dir = \"out\"", "output_dir = \"a\"");
    let a = write_config(dir.path(), "a.toml", &body);
    let b = write_config(dir.path(), "b.toml", &body.replace("\"a\"", "\"b\""));
    assert!(study(&["run", &a], dir.path()).status.success());
    assert!(study(&["run", &b], dir.path()).status.success());
    let read = |d: &str, f: &str| std::fs::read(dir.path().join(d).join(f)).unwrap();
    assert_eq!(read("a", "table.csv"), read("b", "table.csv"));
    assert_eq!(read("a", "elements_level2.csv"), read("b", "elements_level2.csv"));
}

#[test]
fn unstable_pair_is_rejected_with_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "space = \"RT\"\ndegree = 0\npot_degree = 1\n");
    let out = study(&["run", &cfg], dir.path());
    assert!(!out.status.success());
    let record: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(record["kind"], "UnstablePair");
}

#[test]
fn mesh_info_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("square.mesh");
    std::fs::write(&mesh, "4 2\n0 0\n1 0\n1 1\n0 1\n0 1 2 0\n0 2 3 1\n").unwrap();
    let out = study(&["mesh-info", mesh.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let field = |name: &str| text.lines().find(|l| l.starts_with(name)).unwrap().split_whitespace().last().unwrap().to_string();
    assert_eq!(field("vertices"), "4");
    assert_eq!(field("triangles"), "2");
    assert_eq!(field("edges"), "5");
    assert_eq!(field("  interface"), "1");

    std::fs::write(&mesh, "3 1\n0 0\n1 0\n").unwrap();
    let out = study(&["mesh-info", mesh.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    let record: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(record["kind"], "Parse");
}
