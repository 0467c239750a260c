use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use pnsx::export::ExplanationRecord;
use pnsx::gcn::GcnParams;
use pnsx::graph::TaskKind;
use serde_json::Value;
use tempfile::TempDir;

fn pnsx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnsx")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = pnsx(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

/// Runs a command that must fail and returns its stderr.
fn fails(args: &[&str]) -> String {
    let out = pnsx(args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Tree-Cycles data and a briefly trained model, shared by the tests.
struct Fixture {
    _dir: TempDir,
    data: PathBuf,
    truth: PathBuf,
    model: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("data");
        ok(&["generate", "--dataset", "tree-cycles", "--seed", "0", "--out", s(&out)]);
        let model = dir.path().join("model.json");
        ok(&["train", "--data", s(&out.join("graph.json")), "--preset", "tree-cycles", "--epochs", "50", "--restarts", "1", "--out", s(&model)]);
        Fixture { data: out.join("graph.json"), truth: out.join("ground_truth.json"), model, _dir: dir }
    })
}

fn explain_into(dir: &Path, extra: &[&str]) {
    let f = fixture();
    let mut args = vec!["explain", "--model", s(&f.model), "--data", s(&f.data), "--preset", "tree-cycles", "--epochs", "30", "--threads", "2", "--out", s(dir)];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn generate_writes_the_published_size_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["generate", "--dataset", "tree-cycles", "--seed", "4", "--out", s(&a)]);
    ok(&["generate", "--dataset", "tree-cycles", "--seed", "4", "--out", s(&b)]);
    for file in ["graph.json", "ground_truth.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let graph = json(&a.join("graph.json"));
    assert_eq!(graph["graphs"][0]["num_nodes"], 871);
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["results"]["nodes"], 871);
}

#[test]
fn bad_inputs_give_one_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let err = fails(&["generate", "--dataset", "karate", "--out", s(dir.path())]);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: ") && err.contains("karate"));
    assert!(fails(&["generate", "--dataset", "mutagenicity", "--out", s(dir.path())]).contains("--tu-dir"));

    let f = fixture();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[train]\nepochs = \"many\"\n").unwrap();
    fails(&["train", "--data", s(&f.data), "--config", s(&cfg), "--out", s(&dir.path().join("m.json"))]);

    let out = s(&dir.path().join("exp")).to_string();
    let base = ["explain", "--model", s(&f.model), "--data", s(&f.data), "--out", &out];
    let err = fails(&[&base[..], &["--nodes", "3", "--objective", "pns-x"]].concat());
    assert!(err.contains("unknown objective"), "{err}");
    fails(&[&base[..], &["--graphs", "0"]].concat());
    fails(&[&base[..], &["--motif-nodes"]].concat());
    fails(&base);
}

#[test]
fn zero_epochs_persist_the_initial_weights() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    ok(&["train", "--data", s(&f.data), "--epochs", "0", "--seed", "9", "--out", s(&model)]);
    let saved = GcnParams::from_json(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(saved, GcnParams::init(10, 2, TaskKind::Node, 9));
    let manifest = json(&dir.path().join("m.manifest.json"));
    assert!(manifest["results"]["test_acc"].as_f64().is_some());
    assert_eq!(manifest["config"]["epochs"], 0);
    assert_eq!(fs::read_to_string(dir.path().join("m.curve.csv")).unwrap(), "epoch,loss,train_acc,test_acc\n");
}

#[test]
fn explain_is_deterministic_and_writes_one_file_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    explain_into(&a, &["--nodes", "520,600,700"]);
    explain_into(&b, &["--nodes", "520,600,700"]);
    let outputs = |d: &Path| json(&d.join("manifest.json"))["outputs"].as_array().unwrap().iter().map(|o| o["sha256"].clone()).collect::<Vec<_>>();
    assert_eq!(outputs(&a).len(), 6);
    assert_eq!(outputs(&a), outputs(&b));
    let rec = ExplanationRecord::read(&a.join("g0_n600_pns-e_s0.json")).unwrap();
    assert_eq!(rec.instance_id.node, Some(600));
    assert_eq!(rec.extracted_edges.len(), 6);
    assert!(rec.node_mask.is_none());
}

#[test]
fn feature_objectives_export_node_masks() {
    let dir = tempfile::tempdir().unwrap();
    explain_into(dir.path(), &["--nodes", "600", "--objective", "ps-ef", "--seed", "2"]);
    let rec = ExplanationRecord::read(&dir.path().join("g0_n600_ps-ef_s2.json")).unwrap();
    assert_eq!(rec.objective, "ps-ef");
    assert_eq!(rec.node_mask.as_ref().map(Vec::len), rec.nodes.as_ref().map(Vec::len));
    assert!(rec.pns_lb.is_some());
}

#[test]
fn imported_masks_score_like_native_ones() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let native = dir.path().join("native");
    explain_into(&native, &["--motif-nodes", "--ground-truth", s(&f.truth)]);
    // The same masks written by another tool: edges reversed and listed in
    // another order, without the optional fields.
    let imported = dir.path().join("imported");
    fs::create_dir(&imported).unwrap();
    for entry in fs::read_dir(&native).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") && !path.ends_with("manifest.json") {
            let mut r = ExplanationRecord::read(&path).unwrap();
            r.edges.reverse();
            r.edge_mask.reverse();
            r.edges.iter_mut().for_each(|e| e.swap(0, 1));
            r.extracted_edges.clear();
            r.extracted_nodes.clear();
            r.pns_lb = None;
            fs::write(imported.join(path.file_name().unwrap()), r.to_json().unwrap()).unwrap();
        }
    }
    let report = |d: &Path| {
        let out = dir.path().join(format!("{}.csv", d.file_name().unwrap().to_str().unwrap()));
        ok(&["evaluate", "--explanations", s(d), "--model", s(&f.model), "--data", s(&f.data), "--ground-truth", s(&f.truth), "--method", "m", "--out", s(&out)]);
        fs::read_to_string(out).unwrap()
    };
    let a = report(&native);
    assert_eq!(a, report(&imported));
    assert_eq!(a.lines().count(), 9);
    assert!(a.contains("tree-cycles,m,topk_accuracy,"));
    assert!(a.lines().nth(1).unwrap().ends_with(",1,360"), "{a}");
}

#[test]
fn seeds_are_summarised_with_half_widths() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    for seed in ["0", "1"] {
        explain_into(&dir.path().join("e"), &["--nodes", "520,600", "--seed", seed]);
    }
    let out = dir.path().join("r.csv");
    ok(&["evaluate", "--explanations", s(&dir.path().join("e")), "--model", s(&f.model), "--data", s(&f.data), "--out", s(&out)]);
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| &r[1] == "pns-e" && &r[5] == "2" && &r[6] == "2"));
    let empty = dir.path().join("none");
    fs::create_dir(&empty).unwrap();
    assert!(fails(&["evaluate", "--explanations", s(&empty), "--model", s(&f.model), "--data", s(&f.data), "--out", s(&out)]).contains("no explanation files"));
}

#[test]
fn export_dot_draws_a_record() {
    let dir = tempfile::tempdir().unwrap();
    explain_into(&dir.path().join("e"), &["--nodes", "600"]);
    let dot = dir.path().join("x.dot");
    ok(&["export-dot", "--explanation", s(&dir.path().join("e/g0_n600_pns-e_s0.json")), "--out", s(&dot)]);
    let text = fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("graph explanation {"));
    assert_eq!(text, fs::read_to_string(dir.path().join("e/g0_n600_pns-e_s0.dot")).unwrap());
    assert!(dir.path().join("x.manifest.json").exists());
}

#[test]
fn config_files_layer_over_presets() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "preset = \"tree-cycles\"\n[explain]\nepochs = 3\nobjective = \"pn-e\"\nextraction = { mode = \"threshold\", t = 0.5 }\n").unwrap();
    let out = dir.path().join("e");
    ok(&["explain", "--model", s(&f.model), "--data", s(&f.data), "--config", s(&cfg), "--nodes", "600", "--alpha-e", "0.5", "--out", s(&out)]);
    let config = &json(&out.join("manifest.json"))["config"];
    assert_eq!(config["epochs"], 3);
    assert_eq!(config["objective"], "pn-e");
    assert_eq!(config["alpha_e"], 0.5);
    assert_eq!(config["extraction"]["mode"], "threshold");
    assert!(out.join("g0_n600_pn-e_s0.json").exists());
}
