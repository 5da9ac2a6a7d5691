use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nask::dataset::write_tu_dataset;
use nask::{
    graph_kernel_ks, import_gram, AttributeSchema, AttributeValue, AttributeVector, AttributedGraph, Dataset,
    DimensionSpec, EdgeElements, KernelContext, SimilarityParams,
};

fn nask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nask"))
        .args(args)
        .env_remove("NASK_THREADS")
        .output()
        .expect("binary runs")
}

fn mutag() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Two classes of one-edge graphs that differ only in their node label.
fn toy_dataset(dir: &Path) {
    let schema = AttributeSchema {
        node_dims: vec![DimensionSpec::categorical("c", vec!["0".into(), "1".into()])],
        edge_dims: vec![],
    };
    let graphs = (0..8)
        .map(|i| {
            let attrs = vec![AttributeVector::new(vec![AttributeValue::Symbol((i % 2) as u32)]); 2];
            AttributedGraph::new(i, i % 2, attrs, &[(0, 1)], None).unwrap()
        })
        .collect();
    write_tu_dataset(&Dataset::from_graphs("TOY", graphs, schema), dir, "TOY").unwrap();
}

#[test]
fn info_reports_counts() {
    let out = nask(&["info", "--data", s(&mutag())]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("MUTAG: 188 graphs, 2 classes"));
    let json = nask(&["info", "--data", s(&mutag()), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["num_graphs"], 188);
}

#[test]
fn usage_and_missing_data_exit_2() {
    assert_eq!(nask(&["info", "--data", "/definitely/missing"]).status.code(), Some(2));
    assert_eq!(nask(&["gram"]).status.code(), Some(2));
    assert_eq!(nask(&["bogus"]).status.code(), Some(2));
    assert_eq!(nask(&["--help"]).status.code(), Some(0));
}

#[test]
fn gram_is_reproducible_and_reduces_to_star_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.gram"), dir.path().join("b.gram"), dir.path().join("c.gram"));
    for (path, threads) in [(&a, "1"), (&b, "1"), (&c, "4")] {
        let out = nask(&["gram", "--data", s(&mutag()), "--depth", "1", "--out", s(path), "--threads", threads]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(bytes, std::fs::read(&c).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.gram.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "gram");
    assert_eq!(manifest["flags"]["depth"], 1);
    assert_eq!(manifest["outputs"][0], s(&a));

    let ds = nask::compute_ranges(nask::load_tu_dataset(mutag(), "MUTAG").unwrap());
    let ctx = KernelContext::new(&ds.schema, SimilarityParams::default(), EdgeElements::Auto).unwrap();
    let gram = import_gram(&a).unwrap();
    assert_eq!(gram.meta.dataset_digest, ds.digest);
    for i in (0..ds.len()).step_by(17) {
        for j in (0..ds.len()).step_by(13) {
            // Entries are computed for i <= j and mirrored.
            let (a, b) = (i.min(j), i.max(j));
            let ks = graph_kernel_ks(&ds.graphs[a], &ds.graphs[b], &ctx).unwrap();
            assert_eq!(gram.get(i, j).to_bits(), ks.to_bits());
        }
    }
}

#[test]
fn pruned_gram_is_bounded_by_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (exact, pruned) = (dir.path().join("e.gram"), dir.path().join("p.gram"));
    nask(&["gram", "--data", s(&mutag()), "--depth", "2", "--out", s(&exact)]);
    let out = nask(&["gram", "--data", s(&mutag()), "--depth", "2", "--tau", "0.99", "--out", s(&pruned)]);
    assert_eq!(out.status.code(), Some(0));
    let (e, p) = (import_gram(&exact).unwrap(), import_gram(&pruned).unwrap());
    assert!(p.values().iter().zip(e.values()).all(|(p, e)| p <= e));
    assert_eq!(nask(&["gram", "--data", s(&mutag()), "--tau", "2", "--out", s(&pruned)]).status.code(), Some(2));
}

#[test]
fn psd_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, rows: &str| {
        let path = dir.path().join(name);
        let meta = r#"{"dataset_digest":"x","gamma":1.0,"H":1,"tau":0.0,"normalize":false,"edge_elements":"auto","version":"0.1.0"}"#;
        std::fs::write(&path, format!("NASK-GRAM v1\n{meta}\n2\n{rows}")).unwrap();
        path
    };
    let identity = write("id.gram", "1 0\n0 1\n");
    // Eigenvalues 3 and -1.
    let indefinite = write("bad.gram", "1 2\n2 1\n");
    let malformed = write("broken.gram", "1 0\n");
    assert_eq!(nask(&["psd", "--gram", s(&identity)]).status.code(), Some(0));
    let out = nask(&["psd", "--gram", s(&indefinite)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("-1.0"));
    assert_eq!(nask(&["psd", "--gram", s(&malformed)]).status.code(), Some(2));
    assert_eq!(nask(&["psd", "--gram", s(&dir.path().join("none"))]).status.code(), Some(2));
}

#[test]
fn cv_writes_reports_and_rejects_too_many_folds() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_path = dir.path().join(name);
        let out = nask(&[
            "cv", "--data", s(&mutag()), "--folds", "3", "--repeats", "1", "--inner-folds", "2", "--seed", "7",
            "--grid", "gamma=1;depth=1,2;normalize=on;C=10,1000", "--out", s(&out_path),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let mut report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
        report["wall_times"] = serde_json::Value::Null;
        report
    };
    let a = run("a.json");
    assert_eq!(a, run("b.json"));
    assert_eq!(a["fold_results"].as_array().unwrap().len(), 3);
    let mean = a["mean_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mean));
    assert!(dir.path().join("a.txt").exists());
    assert!(dir.path().join("a.json.manifest.json").exists());

    let out = nask(&["cv", "--data", s(&mutag()), "--folds", "200", "--grid", "gamma=1;depth=1;normalize=on;C=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("200 folds"));
    assert_eq!(nask(&["cv", "--data", s(&mutag()), "--grid", "depth=0"]).status.code(), Some(2));
}

#[test]
fn classify_toy_and_hygiene() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("TOY");
    toy_dataset(&data);
    let gram = dir.path().join("toy.gram");
    let out = nask(&["gram", "--data", s(&data), "--depth", "2", "--normalize", "--out", s(&gram)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let train = dir.path().join("train.txt");
    let test = dir.path().join("test.txt");
    std::fs::write(&train, "0 1 2 3\n4 5\n").unwrap();
    std::fs::write(&test, "6,7").unwrap();
    let preds = dir.path().join("pred.json");
    let out = nask(&[
        "classify", "--gram", s(&gram), "--labels-from", s(&data), "--train-idx", s(&train), "--test-idx", s(&test),
        "--C", "10", "--out", s(&preds),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("accuracy: 1.0000"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&preds).unwrap()).unwrap();
    assert_eq!(report["predictions"].as_array().unwrap().len(), 2);

    std::fs::write(&test, "5 6").unwrap();
    let out = nask(&[
        "classify", "--gram", s(&gram), "--labels-from", s(&data), "--train-idx", s(&train), "--test-idx", s(&test),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("5"));

    // A Gram from another dataset is refused.
    std::fs::write(&test, "6 7").unwrap();
    let other = dir.path().join("mutag.gram");
    nask(&["gram", "--data", s(&mutag()), "--depth", "1", "--out", s(&other)]);
    let out = nask(&[
        "classify", "--gram", s(&other), "--labels-from", s(&data), "--train-idx", s(&train), "--test-idx", s(&test),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_mutag_beats_majority() {
    let dir = tempfile::tempdir().unwrap();
    let gram = dir.path().join("m.gram");
    nask(&["gram", "--data", s(&mutag()), "--depth", "3", "--gamma", "1", "--out", s(&gram)]);
    let folds = nask::stratified_folds(&nask::load_tu_dataset(mutag(), "MUTAG").unwrap().labels, 10, 0).unwrap();
    let test: Vec<String> = folds[0].iter().map(usize::to_string).collect();
    let train: Vec<String> = folds[1..].concat().iter().map(usize::to_string).collect();
    std::fs::write(dir.path().join("train"), train.join("\n")).unwrap();
    std::fs::write(dir.path().join("test"), test.join("\n")).unwrap();
    let preds = dir.path().join("p.json");
    let out = nask(&[
        "classify", "--gram", s(&gram), "--labels-from", s(&mutag()), "--train-idx", s(&dir.path().join("train")),
        "--test-idx", s(&dir.path().join("test")), "--C", "0.1", "--out", s(&preds),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&preds).unwrap()).unwrap();
    let accuracy = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&accuracy));
    assert!(accuracy >= report["majority_baseline"].as_f64().unwrap());
}

#[test]
fn replay_and_run_file_reproduce_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.gram");
    nask(&["gram", "--data", s(&mutag()), "--depth", "2", "--gamma", "0.1", "--out", s(&first)]);
    let replayed = dir.path().join("replayed.gram");
    let manifest = dir.path().join("first.gram.manifest.json");
    let out = nask(&["replay", "--manifest", s(&manifest), "--out", s(&replayed)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&replayed).unwrap());

    let from_file = dir.path().join("from_file.gram");
    let run = dir.path().join("run.toml");
    std::fs::write(
        &run,
        format!(
            "command = \"gram\"\n[args]\ndata = {:?}\ndepth = 2\ngamma = 0.1\nout = {:?}\n",
            s(&mutag()),
            s(&from_file)
        ),
    )
    .unwrap();
    let out = nask(&["run", "--file", s(&run)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&from_file).unwrap());
    assert_eq!(nask(&["replay", "--manifest", s(&run)]).status.code(), Some(2));
}
