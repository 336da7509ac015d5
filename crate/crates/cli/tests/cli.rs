use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use actrules_core::{Components, GcnModel, GraphDataset};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run(sub: &str, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actrules"))
        .arg(sub)
        .arg("--dataset")
        .arg(fixture("toy_dataset.json"))
        .arg("--model")
        .arg(fixture("toy_model.json"))
        .arg("--out")
        .arg(out)
        .args(extra)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(sub: &str, out: &Path, extra: &[&str]) -> Output {
    let o = run(sub, out, extra);
    assert!(o.status.success(), "{sub} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn usage_error(o: &Output) -> Value {
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    let line = stderr.lines().last().unwrap();
    let v: Value = serde_json::from_str(line).unwrap();
    assert_eq!(v["error"], "usage");
    v
}

fn mine_rules(dir: &Path) -> PathBuf {
    ok("mine", dir, &["--min-si", "0", "--nb-patt", "1"]);
    dir.join("rules.json")
}

#[test]
fn activations_writes_one_csv_per_layer_and_is_repeatable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok("activations", a.path(), &[]);
    ok("activations", b.path(), &["--threads", "1"]);
    for name in ["activations_layer1.csv", "activations_layer2.csv", "activations_layer3.csv", "decisions.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    assert!(!a.path().join("activations_layer4.csv").exists());
    let decisions: Vec<String> = fs::read_to_string(a.path().join("decisions.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(decisions, ["1", "1", "0", "0"]);
    let header = fs::read_to_string(a.path().join("activations_layer1.csv")).unwrap();
    assert!(header.starts_with("graph,node,c1,c2,c3,c4,c5,c6,decision\n"));
}

#[test]
fn missing_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_actrules"))
        .args(["activations", "--dataset"])
        .arg(fixture("toy_dataset.json"))
        .args(["--model", "/nonexistent/model.json", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let v = usage_error(&o);
    assert!(v["message"].as_str().unwrap().contains("model"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    usage_error(&run("mine", dir.path(), &["--bogus"]));
}

#[test]
fn mine_respects_count_bound_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let rules = mine_rules(a.path());
    mine_rules(b.path());
    let text = fs::read(&rules).unwrap();
    assert_eq!(text, fs::read(b.path().join("rules.json")).unwrap());
    let v: Value = serde_json::from_slice(&text).unwrap();
    let n = v.as_array().unwrap().len();
    assert!((1..=6).contains(&n));
    let log = read_json(a.path().join("mine_log.json"));
    assert!(log.as_array().unwrap().iter().all(|e| e["visited"].as_u64().is_some()));
}

#[test]
fn explain_node_policy_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let rules = mine_rules(dir.path());
    ok("explain", dir.path(), &["--rules", rules.to_str().unwrap(), "--policies", "node"]);
    let report = read_json(dir.path().join("metrics_node.json"));
    assert_eq!(report["N"], 4);
    let s = report["Sparsity"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&s));
    let csv = fs::read_to_string(dir.path().join("metrics_node.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn empty_rule_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("rules.json");
    fs::write(&rules, "[]").unwrap();
    for sub in ["explain", "characterize", "mimic"] {
        usage_error(&run(sub, dir.path(), &["--rules", rules.to_str().unwrap()]));
    }
}

#[test]
fn external_masks_score_like_internal_ones() {
    let dir = tempfile::tempdir().unwrap();
    let rules = mine_rules(dir.path());
    ok(
        "explain",
        dir.path(),
        &["--rules", rules.to_str().unwrap(), "--policies", "decay", "--k", "3"],
    );
    for slug in ["topk3", "decay"] {
        let masks = dir.path().join(format!("masks_{slug}.json"));
        ok("explain", dir.path(), &["--external-masks", masks.to_str().unwrap()]);
        assert_eq!(
            read_json(dir.path().join("metrics_external.json")),
            read_json(dir.path().join(format!("metrics_{slug}.json"))),
            "{slug}"
        );
    }
}

#[test]
fn characterize_skips_rules_without_activating_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let ds = GraphDataset::load(fixture("toy_dataset.json")).unwrap();
    let model = GcnModel::load(fixture("toy_model.json")).unwrap();
    let acts = model.activation_matrices(&ds).unwrap();
    // an active rule and one that never fires
    let rows = acts[2].rows();
    let live = rows.iter().copied().find(|r| !r.is_empty()).unwrap();
    let dead = (0..6)
        .map(|k| Components::from_indices([k]))
        .chain([Components::full(6)])
        .find(|c| rows.iter().all(|r| !c.is_subset(*r)))
        .expect("some component set never activates");
    let rule = |c: Components| {
        serde_json::json!({
            "layer": 3, "class": 1, "components": c.indices(), "si_sg": 1.0,
            "support_pos": [], "support_neg": [], "activating_nodes": {}
        })
    };
    let rules = dir.path().join("rules.json");
    fs::write(&rules, serde_json::to_string(&[rule(live), rule(dead)]).unwrap()).unwrap();
    let args = ["--rules", rules.to_str().unwrap(), "--min-sup", "2", "--max-edges", "3"];
    let o = ok("characterize", dir.path(), &args);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rule 1 has no activating node"));
    let summary = read_json(dir.path().join("characterize.json"));
    let listed: Vec<u64> = summary.as_array().unwrap().iter().map(|s| s["rule"].as_u64().unwrap()).collect();
    assert_eq!(listed, [0]);
    assert!(dir.path().join("rule0_subgraph.json").exists());
    assert!(dir.path().join("rule0_numeric.txt").exists());
    assert!(!dir.path().join("rule1_subgraph.json").exists());

    let first = fs::read(dir.path().join("rule0_numeric.json")).unwrap();
    ok("characterize", dir.path(), &args);
    assert_eq!(first, fs::read(dir.path().join("rule0_numeric.json")).unwrap());
}

#[test]
fn mimic_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let rules = mine_rules(dir.path());
    let args = ["--rules", rules.to_str().unwrap(), "--seed", "5", "--train-fraction", "0.5"];
    ok("mimic", dir.path(), &args);
    let first = fs::read(dir.path().join("mimic.json")).unwrap();
    ok("mimic", dir.path(), &args);
    assert_eq!(first, fs::read(dir.path().join("mimic.json")).unwrap());
    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["train_size"].as_u64().unwrap() + v["test_size"].as_u64().unwrap(), 4);
}

#[test]
fn env_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_actrules"))
        .arg("mine")
        .env("ACTRULES_DATASET", fixture("toy_dataset.json"))
        .env("ACTRULES_MODEL", fixture("toy_model.json"))
        .env("ACTRULES_OUT", dir.path())
        .env("ACTRULES_MIN_SI", "0")
        .env("ACTRULES_NB_PATT", "1")
        .env("ACTRULES_LAYERS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rules = read_json(dir.path().join("rules.json"));
    assert!(rules.as_array().unwrap().iter().all(|r| r["layer"] == 2));
}
