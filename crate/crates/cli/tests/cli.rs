use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gvt::graph::save_dataset;
use gvt::synthetic::{csbm, path_fixture, CsbmParams};

fn gvt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gvt"))
        .args(args)
        .output()
        .expect("spawn gvt")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_csbm(dir: &Path) {
    let p = CsbmParams {
        num_nodes: 90,
        num_features: 6,
        num_classes: 3,
        train_per_class: 8,
        num_val: 30,
        ..CsbmParams::default()
    };
    save_dataset(&csbm(&p, 5).unwrap(), dir).unwrap();
}

const QUICK: &[&str] = &[
    "--K",
    "1",
    "--L",
    "3",
    "--epochs",
    "25",
    "--patience",
    "10",
    "--hidden",
    "8",
];

fn pretrain_into(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--deterministic", "pretrain", "--data", s(data), "--out", s(out)];
    args.extend_from_slice(QUICK);
    args.extend_from_slice(extra);
    gvt(&args)
}

#[test]
fn missing_dataset_dir_is_a_usage_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("no_such_dataset");
    let out = gvt(&[
        "pretrain",
        "--data",
        s(&missing),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(s(&missing)), "{}", stderr(&out));
}

#[test]
fn zero_depth_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    save_dataset(&path_fixture(), &data).unwrap();
    let out = gvt(&[
        "pretrain",
        "--data",
        s(&data),
        "--L",
        "0",
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&gvt(&["pretrain", "--bogus"])), 2);
}

#[test]
fn bad_checkpoint_magic_is_a_format_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    save_dataset(&path_fixture(), &data).unwrap();
    let ckpt = tmp.path().join("bad.gvtc");
    let mut bytes = b"NOPE".to_vec();
    bytes.extend_from_slice(&[0u8; 64]);
    fs::write(&ckpt, bytes).unwrap();
    let out = gvt(&[
        "adapt",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&data),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn corrupt_features_file_is_a_format_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    save_dataset(&path_fixture(), &data).unwrap();
    fs::write(data.join("features.bin"), b"GVTF").unwrap();
    let out = gvt(&["stack", "--data", s(&data), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn stack_matches_hand_computed_views_on_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    save_dataset(&path_fixture(), &data).unwrap();
    let out_dir = tmp.path().join("o");
    let out = gvt(&["stack", "--data", s(&data), "--K", "1", "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // Path 0-1-2 with x = (1, 0, 2). Random walk at node 1 averages its
    // neighbours; the symmetric view divides each term by sqrt(1 * 2).
    let half_sqrt2 = 3.0 / 2f64.sqrt();
    let expected = [[1.0, 0.0, 0.0], [0.0, 1.5, half_sqrt2], [2.0, 0.0, 0.0]];
    let mut r = csv::Reader::from_path(out_dir.join("stack.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["node", "feature", "I", "rw^1", "sym^1"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for (n, row) in rows.iter().enumerate() {
        assert_eq!(row[0].parse::<usize>().unwrap(), n);
        for c in 0..3 {
            let v: f64 = row[2 + c].parse().unwrap();
            assert!((v - expected[n][c]).abs() <= 1e-12, "node {n} view {c}: {v}");
        }
    }
}

#[test]
fn pretrain_adapt_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    small_csbm(&data);
    let run = tmp.path().join("run");
    let out = pretrain_into(&data, &run, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["encoder.gvtc", "metrics.json", "manifest.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let metrics: serde_json::Value =
        serde_json::from_slice(&fs::read(run.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics.get("wall_seconds").is_none());
    assert!(!metrics["history"].as_array().unwrap().is_empty());

    let ad = tmp.path().join("adapt");
    let ckpt = run.join("encoder.gvtc");
    let out = gvt(&[
        "adapt",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&data),
        "--epochs",
        "25",
        "--out",
        s(&ad),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let depths: serde_json::Value =
        serde_json::from_slice(&fs::read(ad.join("depths.json")).unwrap()).unwrap();
    let rows = depths["depths"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row["depth"].as_u64().unwrap(), i as u64 + 1);
        let v = row["val_accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    let chosen = depths["chosen_depth"].as_u64().unwrap() as usize;
    let best = rows
        .iter()
        .map(|r| r["val_accuracy"].as_f64().unwrap())
        .fold(f64::MIN, f64::max);
    assert_eq!(rows[chosen - 1]["val_accuracy"].as_f64().unwrap(), best);

    let out = gvt(&[
        "evaluate",
        "--checkpoint",
        s(&ckpt),
        "--predictor-file",
        s(&ad.join("predictor.gvtp")),
        "--data",
        s(&data),
        "--split",
        "test",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let printed: f64 = stdout(&out).split_whitespace().last().unwrap().parse().unwrap();
    let expected = rows[chosen - 1]["test_accuracy"].as_f64().unwrap();
    assert!((printed - expected).abs() <= 1e-12, "{printed} vs {expected}");
}

#[test]
fn linear_predictor_is_recorded_in_depth_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    small_csbm(&data);
    let run = tmp.path().join("run");
    assert_eq!(code(&pretrain_into(&data, &run, &[])), 0);
    let ad = tmp.path().join("adapt");
    let out = gvt(&[
        "adapt",
        "--checkpoint",
        s(&run.join("encoder.gvtc")),
        "--data",
        s(&data),
        "--predictor",
        "linear",
        "--epochs",
        "20",
        "--out",
        s(&ad),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let depths: serde_json::Value =
        serde_json::from_slice(&fs::read(ad.join("depths.json")).unwrap()).unwrap();
    assert_eq!(depths["predictor"], "linear");
}

#[test]
fn deterministic_reruns_are_byte_identical_and_replay_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    small_csbm(&data);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&pretrain_into(&data, &a, &["--seed", "3"])), 0);
    assert_eq!(code(&pretrain_into(&data, &b, &["--seed", "3"])), 0);
    for f in ["encoder.gvtc", "metrics.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let c = tmp.path().join("c");
    let out = gvt(&[
        "replay",
        "--manifest",
        s(&a.join("manifest.json")),
        "--out",
        s(&c),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["encoder.gvtc", "metrics.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    small_csbm(&data);
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"hops": 2, "depth": 5, "seed": 9}"#).unwrap();
    let run = tmp.path().join("run");
    let out = pretrain_into(&data, &run, &["--config", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["hops"], 1);
    assert_eq!(manifest["config"]["depth"], 3);
    assert_eq!(manifest["config"]["seed"], 9);
}

#[test]
fn heatmap_writes_one_csv_per_view() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    small_csbm(&data);
    let run = tmp.path().join("run");
    assert_eq!(code(&pretrain_into(&data, &run, &[])), 0);
    let hm = tmp.path().join("hm");
    let out = gvt(&[
        "heatmap",
        "--checkpoint",
        s(&run.join("encoder.gvtc")),
        "--data",
        s(&data),
        "--depth",
        "2",
        "--nodes",
        "5",
        "--features",
        "4",
        "--out",
        s(&hm),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for v in 0..3 {
        let text = fs::read_to_string(hm.join(format!("heatmap_d2_v{v}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 6);
    }
    let out = gvt(&[
        "heatmap",
        "--checkpoint",
        s(&run.join("encoder.gvtc")),
        "--data",
        s(&data),
        "--depth",
        "4",
        "--out",
        s(&hm),
    ]);
    assert_eq!(code(&out), 2, "depth beyond pretraining must be rejected");
}

#[test]
fn check_recovery_prints_one_line_per_method() {
    let out = gvt(&["check", "--suite", "recovery"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7, "{text}");
    assert!(lines.iter().all(|l| l.starts_with("PASS recovery")));
}

#[test]
fn check_negative_control_fails() {
    let out = gvt(&[
        "check",
        "--suite",
        "equivariance",
        "--negative-control",
        "--trials",
        "3",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).starts_with("FAIL"));
}

#[test]
fn check_equivariance_passes() {
    let out = gvt(&["check", "--suite", "equivariance", "--trials", "10"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn wilcoxon_reads_pairs_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let pairs = tmp.path().join("pairs.csv");
    fs::write(
        &pairs,
        "dataset,gvt,baseline\na,0.9,0.8\nb,0.8,0.7\nc,0.7,0.6\nd,0.85,0.8\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("w");
    let out = gvt(&["wilcoxon", "--pairs", s(&pairs), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("wilcoxon.json")).unwrap()).unwrap();
    assert!((v["result"]["p_value"].as_f64().unwrap() - 0.125).abs() <= 1e-12);
}

#[test]
fn synth_output_loads() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("hc");
    let out = gvt(&[
        "synth",
        "--kind",
        "hop-chain",
        "--nodes",
        "12",
        "--distance",
        "2",
        "--out",
        s(&dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let ds = gvt::graph::load_dataset(&dir).unwrap();
    assert_eq!(ds.graph.num_nodes(), 36);
}

#[test]
fn committed_path_fixture_matches_the_generator() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../datasets/path_fixture");
    let ds = gvt::graph::load_dataset(&dir).unwrap();
    let fresh = path_fixture();
    assert_eq!(ds.features.values(), fresh.features.values());
    assert_eq!(
        ds.graph.edges().collect::<Vec<_>>(),
        fresh.graph.edges().collect::<Vec<_>>()
    );
    assert_eq!(ds.labels.as_slice(), fresh.labels.as_slice());
}

#[test]
fn check_all_passes_on_seed_zero() {
    let out = gvt(&["check", "--suite", "all", "--seed", "0"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1 + 7 + 2 + 1, "{text}");
}
