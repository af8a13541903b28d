//! End-to-end CLI behavior: subcommands, exit codes, and byte-level report
//! determinism.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use graphaug::io::{load_graph, GraphFormat};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphaug"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

const SBM_CONFIG: &str = r#"{"n": 40, "classes": 2, "p_in": 0.5, "p_out": 0.05,
    "feat_dim": 4, "noise": 0.3, "seed": 7}"#;

fn train_config() -> String {
    r#"{
      "dataset": {"synthetic": {"n": 40, "classes": 2, "p_in": 0.5, "p_out": 0.05,
                                "feat_dim": 4, "noise": 0.3, "seed": 7}},
      "model": {"arch": "gcn", "layer_dims": [4, 8, 2], "dropout": 0.2},
      "augmentation": {"kind": "fana", "p": 0.5, "mode": "stochastic", "seed": 0},
      "train": {"epochs": 12, "patience": 12},
      "num_seeds": 2,
      "base_seed": 0
    }"#
    .to_string()
}

#[test]
fn gen_synthetic_then_augment_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("sbm.json"), SBM_CONFIG);
    let out = run(
        &[
            "--config",
            "sbm.json",
            "--out",
            "work",
            "gen-synthetic",
            "--out",
            "g.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let g = load_graph(dir.path().join("g.json"), GraphFormat::GraphJson)
        .unwrap()
        .graph;
    assert_eq!(g.num_nodes(), 40);

    write(
        &dir.path().join("spec.json"),
        r#"{"kind": "fdm", "alpha": 1.0}"#,
    );
    let out = run(
        &[
            "--out",
            "work",
            "augment",
            "--in",
            "g.json",
            "--spec",
            "spec.json",
            "--out",
            "g_aug.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let aug = load_graph(dir.path().join("g_aug.json"), GraphFormat::GraphJson)
        .unwrap()
        .graph;
    assert_eq!(aug.num_nodes(), g.num_nodes());
    assert_eq!(aug.edges(), g.edges());
    assert_ne!(aug.features(), g.features());
}

#[test]
fn train_reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("cfg.json"), &train_config());

    let report_rel = "reports/GCN_FANA_sbm_n40_c2.json";
    let out = run(
        &["--config", "cfg.json", "--out", "run1", "train"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(
        &["--config", "cfg.json", "--out", "run2", "train"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let a = fs::read_to_string(dir.path().join("run1").join(report_rel)).unwrap();
    let b = fs::read_to_string(dir.path().join("run2").join(report_rel)).unwrap();
    assert_eq!(
        common::normalize_report_json(&a),
        common::normalize_report_json(&b),
        "reports differ beyond wall-time metadata"
    );

    // Per-seed traces and a checkpoint land next to the report.
    assert!(dir.path().join("run1/traces/trace_seed_0.csv").exists());
    assert!(dir.path().join("run1/traces/trace_seed_1.csv").exists());
    assert!(dir.path().join("run1/traces/model_seed_0.json").exists());
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("bad.json"),
        r#"{"dataset": {"synthetic": {"n": 10, "classes": 2, "p_in": 0.5, "p_out": 0.1}},
            "model": {"arch": "gcn"}, "algha": 1.0}"#,
    );
    let out = run(&["--config", "bad.json", "train"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("algha"), "stderr should name the key: {stderr}");
}

#[test]
fn missing_data_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("cfg.json"),
        r#"{"dataset": {"file": {"path": "nope.json", "format": "graph-json"}},
            "model": {"arch": "gcn"}, "num_seeds": 1}"#,
    );
    let out = run(&["--config", "cfg.json", "train"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn benchmark_grid_emits_tables_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("grid.json"),
        r#"{
          "models": [{"arch": "gcn", "layer_dims": [4, 8, 2], "dropout": 0.2}],
          "augmentations": [{"kind": "identity"}, {"kind": "fdm", "alpha": 1.0}],
          "datasets": [{"synthetic": {"n": 40, "classes": 2, "p_in": 0.5, "p_out": 0.05,
                                       "feat_dim": 4, "noise": 0.3, "seed": 7}}],
          "train": {"epochs": 10, "patience": 10},
          "num_seeds": 1,
          "base_seed": 0
        }"#,
    );
    let out = run(
        &["--config", "grid.json", "--out", "bench", "benchmark"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["table.md", "table.csv", "table.json"] {
        assert!(dir.path().join("bench").join(file).exists(), "{file} missing");
    }
    let reports: Vec<_> = fs::read_dir(dir.path().join("bench/reports"))
        .unwrap()
        .collect();
    assert_eq!(reports.len(), 2);

    // Re-render via the report subcommand.
    let out = run(
        &[
            "--out",
            "rendered",
            "report",
            "--in",
            "bench/reports",
            "--format",
            "csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("rendered/table.csv")).unwrap();
    assert!(table.starts_with("model,method"));
    assert!(table.contains("GCN,I") && table.contains("GCN,FDM"));
}

#[test]
fn contrastive_cli_emits_trace_and_result() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("ccfg.json"),
        r#"{
          "dataset": {"synthetic": {"num_graphs": 24, "nodes_min": 6, "nodes_max": 10,
                                     "class_p_in": [0.2, 0.55], "p_out": 0.05,
                                     "feat_dim": 3, "noise": 0.1, "seed": 5}},
          "pipeline": {"pool": [{"kind": "edge_remove", "p": 0.2, "seed": 0},
                                 {"kind": "feature_mask", "p": 0.2, "seed": 0}],
                        "temperature": 0.5,
                        "encoder": {"layers": 2, "hidden": 8},
                        "projection_dim": 8,
                        "epochs": 4,
                        "batch_size": 8,
                        "seed": 3}
        }"#,
    );
    let out = run(
        &["--config", "ccfg.json", "--out", "cres", "contrastive"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let trace = fs::read_to_string(dir.path().join("cres/contrastive_loss.csv")).unwrap();
    assert!(trace.starts_with("epoch,loss\n"));
    assert_eq!(trace.lines().count(), 5);

    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cres/contrastive_result.json")).unwrap())
            .unwrap();
    assert!(result["f1"].as_f64().unwrap() >= 0.0);
    assert_eq!(result["pair"][0], "edge_remove");
    assert_eq!(result["pair"][1], "feature_mask");
    assert_eq!(result["seed"], 3);
}

#[test]
fn contrastive_cli_reads_graph_directories() {
    let dir = tempfile::tempdir().unwrap();
    // Generate a dataset directory first.
    write(
        &dir.path().join("gset.json"),
        r#"{"num_graphs": 12, "nodes_min": 6, "nodes_max": 9,
            "class_p_in": [0.2, 0.55], "p_out": 0.05, "feat_dim": 3,
            "noise": 0.1, "seed": 2}"#,
    );
    let out = run(
        &[
            "--config",
            "gset.json",
            "gen-synthetic",
            "--kind",
            "graphs",
            "--out",
            "graphs",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(dir.path().join("graphs")).unwrap().count(), 12);

    write(
        &dir.path().join("ccfg.json"),
        r#"{
          "dataset": {"dir": "graphs"},
          "pipeline": {"pool": [{"kind": "identity"}],
                        "encoder": {"layers": 1, "hidden": 6},
                        "projection_dim": 6,
                        "epochs": 2,
                        "batch_size": 6,
                        "seed": 1}
        }"#,
    );
    let out = run(
        &["--config", "ccfg.json", "--out", "cdir", "contrastive"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seed_flag_overrides_base_seed() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("cfg.json"), &train_config());
    let out = run(
        &["--config", "cfg.json", "--out", "s9", "--seed", "9", "train"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text =
        fs::read_to_string(dir.path().join("s9/reports/GCN_FANA_sbm_n40_c2.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["per_seed"][0]["seed"], 9);
    assert_eq!(report["per_seed"][1]["seed"], 10);
}
