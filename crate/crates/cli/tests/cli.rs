use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use setree::tree::TreeRecord;
use setree::KernelMatrix64;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_setree"))
}

fn mutag() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two triangles whose vertex categories give leaf labels {a, a, b} and
/// {a, b, b}.
fn toy_dataset(dir: &Path) {
    let edges = [(1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (4, 6)];
    let a: String = edges
        .iter()
        .flat_map(|&(u, v)| [format!("{u}, {v}\n"), format!("{v}, {u}\n")])
        .collect();
    fs::write(dir.join("TOY_A.txt"), a).unwrap();
    fs::write(dir.join("TOY_graph_indicator.txt"), "1\n1\n1\n2\n2\n2\n").unwrap();
    fs::write(dir.join("TOY_graph_labels.txt"), "1\n-1\n").unwrap();
    fs::write(dir.join("TOY_node_labels.txt"), "0\n0\n1\n0\n1\n1\n").unwrap();
}

#[test]
fn missing_directory_exits_2_and_names_the_path() {
    let out = run(&["optimize", "/no/such/place", "MUTAG", "--height", "2", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/place"));
}

#[test]
fn empty_directory_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["gram", s(tmp.path()), "X", "--height", "2", "--out", s(&tmp.path().join("g.txt"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: parse"));
}

#[test]
fn bad_flags_exit_2() {
    let out = run(&["classify", s(&mutag()), "MUTAG", "--kernel", "poly"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["classify", s(&mutag()), "MUTAG", "--c-grid", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn toy_gram_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    toy_dataset(tmp.path());
    let g = tmp.path().join("toy.gram");
    let out = run(&[
        "gram", s(tmp.path()), "TOY", "--height", "1", "--labels", "degree-category", "--out", s(&g),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&g).unwrap();
    assert_eq!(text, "N=2 dataset=TOY kernel=linear\n6 4\n4 6\n");
    assert!(tmp.path().join("toy.gram.manifest.json").is_file());
}

#[test]
fn mutag_optimize_writes_188_trees_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.jsonl");
    let b = tmp.path().join("b.jsonl");
    for out in [&a, &b] {
        let o = run(&["optimize", s(&mutag()), "MUTAG", "--height", "2", "--out", s(out)]);
        assert!(o.status.success());
        assert!(String::from_utf8_lossy(&o.stdout).contains("mean entropy"));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let records: Vec<TreeRecord<f64>> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 188);
    assert!(records.iter().all(|r| r.height == 2));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "optimize");
    assert_eq!(manifest["graphs"], 188);
    assert!(manifest["timings_ms"]["optimize"].as_u64().is_some());
}

#[test]
fn mutag_gram_is_square_and_symmetric() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("m.gram");
    let f = tmp.path().join("m.features");
    let o = run(&[
        "gram", s(&mutag()), "MUTAG", "--height", "2", "--out", s(&g), "--features", s(&f),
    ]);
    assert!(o.status.success());
    let (k, name, mode) = KernelMatrix64::from_text(&fs::read_to_string(&g).unwrap()).unwrap();
    assert_eq!((k.size(), name.as_str(), mode.as_str()), (188, "MUTAG", "linear"));
    assert!(k.is_symmetric());
    let feats = fs::read_to_string(&f).unwrap();
    assert_eq!(feats.lines().count(), 188);
    let first = feats.lines().next().unwrap();
    assert!(first.split(' ').all(|t| t.split(':').count() == 3));
}

#[test]
fn classify_restricted_grid_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cv.json");
    let o = run(&[
        "classify", s(&mutag()), "MUTAG", "--heights", "2", "--c-grid", "1,10", "--out", s(&out),
        "--threads", "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let row = String::from_utf8_lossy(&o.stdout);
    assert!(row.starts_with("MUTAG") && row.contains('±'));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["heights"], serde_json::json!([2]));
    assert_eq!(report["grid"].as_array().unwrap().len(), 2);
    assert_eq!(report["fold_accuracies"].as_array().unwrap().len(), 10);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("cv.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["heights"], serde_json::json!([2]));
    assert_eq!(manifest["config"]["c_grid"], serde_json::json!([1.0, 10.0]));
    assert_eq!(manifest["config"]["seed"], 0);
}

#[test]
fn export_writes_trees_and_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t.jsonl");
    let o = run(&["export", s(&mutag()), "MUTAG", "--height", "3", "--out", s(&out)]);
    assert!(o.status.success());
    let trees = fs::read_to_string(&out).unwrap();
    let side = fs::read_to_string(tmp.path().join("t.jsonl.features")).unwrap();
    assert_eq!(trees.lines().count(), 188);
    assert_eq!(side.lines().count(), 188);
    let rec: TreeRecord<f64> = serde_json::from_str(trees.lines().next().unwrap()).unwrap();
    let first: Vec<&str> = side.lines().next().unwrap().split(' ').collect();
    assert_eq!(first.len(), rec.vertex_count);
    assert_eq!(first[0].split(':').count(), 3);
    assert!(first[0].starts_with("0:"));
}
