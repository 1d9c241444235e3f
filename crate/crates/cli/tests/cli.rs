use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crosspers::geometry::PointCloud;
use crosspers::io;
use crosspers::persistence::PersistenceDiagram;
use crosspers::synth::{chirp_dataset, sample_shape, ChirpConfig, Shape};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_crosspers"));
    c.env_remove("CROSSPERS_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn crosspers")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn cloud_file(dir: &Path, name: &str, cloud: &PointCloud) -> PathBuf {
    let p = dir.join(name);
    io::write_point_cloud(&p, cloud).unwrap();
    p
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn two_points_give_one_finite_h0_pair() {
    let dir = tempfile::tempdir().unwrap();
    let c = cloud_file(dir.path(), "c.csv", &PointCloud::new(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap());
    let out = dir.path().join("dg.csv");
    ok(&["barcode", s(&c), "--dim", "0", "--out", s(&out)]);
    let d = io::read_diagrams(&out).unwrap();
    assert_eq!(d.len(), 1);
    let finite: Vec<_> = d[0].pairs.iter().filter(|p| !p.is_essential()).collect();
    assert_eq!(finite.len(), 1);
    assert_eq!((finite[0].birth, finite[0].death), (0.0, 5.0));
}

#[test]
fn cross_barcode_of_identical_files_is_all_zero_length() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = sample_shape(Shape::TwoCircles, 40, 0.05, 1).unwrap();
    let a = cloud_file(dir.path(), "a.csv", &cloud);
    let b = cloud_file(dir.path(), "b.csv", &cloud);
    let out = dir.path().join("dg.csv");
    let filt = dir.path().join("filt.csv");
    ok(&["barcode", "--cross", s(&a), s(&b), "--dim", "1", "--out", s(&out), "--filtration", s(&filt)]);
    let d = io::read_diagrams(&out).unwrap();
    assert_eq!(d.len(), 2);
    // only the one essential component survives
    assert_eq!(d[0].essential_count(), 1);
    assert_eq!(d[1].essential_count(), 0);
    for dg in &d {
        assert!(dg.pairs.iter().all(|p| p.is_essential() || p.death == p.birth), "{dg:?}");
    }
    assert!(fs::read_to_string(&filt).unwrap().starts_with("dim,value,vertices\n0,"));
}

#[test]
fn circle_has_one_long_loop() {
    let dir = tempfile::tempdir().unwrap();
    let c = cloud_file(dir.path(), "c.csv", &sample_shape(Shape::Circle, 60, 0.02, 5).unwrap());
    let out = dir.path().join("dg.csv");
    ok(&["barcode", s(&c), "--dim", "1", "--out", s(&out)]);
    let h1: Vec<PersistenceDiagram> = io::read_diagrams(&out).unwrap().into_iter().filter(|d| d.dim == 1).collect();
    let mut lifetimes: Vec<f64> = h1[0].pairs.iter().map(|p| p.lifetime()).collect();
    lifetimes.sort_by(|a, b| b.total_cmp(a));
    assert!(lifetimes[0] > 1.0, "{lifetimes:?}");
    assert!(lifetimes.get(1).map_or(true, |&l| l < 0.2 * lifetimes[0]));
}

#[test]
fn malformed_csv_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    fs::write(&p, "0,0\n1,1\n2,oops\n").unwrap();
    let out = run(&["barcode", s(&p), "--out", s(&dir.path().join("dg.csv"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":3:"), "{err}");
    assert!(!dir.path().join("dg.csv").exists());
}

#[test]
fn cross_needs_two_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let c = cloud_file(dir.path(), "c.csv", &sample_shape(Shape::Circle, 10, 0.0, 0).unwrap());
    assert!(!run(&["barcode", "--cross", s(&c), "--out", s(&dir.path().join("x.csv"))]).status.success());
}

struct Shapes {
    _dir: tempfile::TempDir,
    root: PathBuf,
    circle_a: PathBuf,
    circle_b: PathBuf,
    two: PathBuf,
}

fn shapes() -> Shapes {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    Shapes {
        circle_a: cloud_file(&root, "circle_a.csv", &sample_shape(Shape::Circle, 200, 0.02, 11).unwrap()),
        circle_b: cloud_file(&root, "circle_b.csv", &sample_shape(Shape::Circle, 200, 0.02, 12).unwrap()),
        two: cloud_file(&root, "two.csv", &sample_shape(Shape::TwoCircles, 200, 0.02, 13).unwrap()),
        root,
        _dir: dir,
    }
}

const SMALL: [&str; 4] = ["--n-pairs", "30", "--subsample-size", "64"];

fn distinguish(core: &Path, cand: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["distinguish", s(core), s(cand), "--out-dir", s(out)];
    args.extend(SMALL);
    args.extend(extra);
    ok(&args);
    json(&out.join("report.json"))
}

#[test]
fn distinguish_decisions() {
    let sh = shapes();
    let same = distinguish(&sh.circle_a, &sh.circle_b, &sh.root.join("same"), &["--seed", "1", "--pgm"]);
    assert_eq!(same["result"]["decision"], "same", "{}", same["result"]["overlap"]);
    assert!(sh.root.join("same/densities.pgm").exists());
    let head = fs::read_to_string(sh.root.join("same/core_density.csv")).unwrap();
    assert!(head.starts_with("z,density\n"));
    assert_eq!(head.lines().count(), 513);

    let diff = distinguish(&sh.circle_a, &sh.two, &sh.root.join("diff"), &["--seed", "1"]);
    assert_eq!(diff["result"]["decision"], "different", "{}", diff["result"]["overlap"]);

    let strict = distinguish(&sh.circle_a, &sh.circle_b, &sh.root.join("strict"), &["--seed", "1", "--threshold", "1.0"]);
    assert_eq!(strict["result"]["decision"], "different");
}

#[test]
fn reports_embed_config_and_version() {
    let sh = shapes();
    let cfg = sh.root.join("cfg.json");
    fs::write(&cfg, r#"{"n_pairs": 10, "hom_dim": 0, "seed": 7}"#).unwrap();
    let out = sh.root.join("r");
    ok(&["distinguish", s(&sh.circle_a), s(&sh.two), "--config", s(&cfg), "--n-pairs", "12", "--subsample-size", "32", "--out-dir", s(&out)]);
    let r = json(&out.join("report.json"));
    assert!(r["version"].as_str().unwrap().starts_with("crosspers "));
    assert_eq!(r["command"], "distinguish");
    assert_eq!(r["config"]["n_pairs"], 12);
    assert_eq!(r["config"]["hom_dim"], 0);
    assert_eq!(r["config"]["seed"], 7);
    assert_eq!(r["result"]["core_samples"].as_array().unwrap().len(), 12);
}

#[test]
fn seed_falls_back_to_environment() {
    let sh = shapes();
    let args = |out: &Path| {
        vec![
            "distinguish".to_string(),
            s(&sh.circle_a).into(),
            s(&sh.two).into(),
            "--n-pairs".into(),
            "8".into(),
            "--subsample-size".into(),
            "32".into(),
            "--out-dir".into(),
            s(out).into(),
        ]
    };
    let env_out = sh.root.join("env");
    assert!(bin().args(args(&env_out)).env("CROSSPERS_SEED", "5").output().unwrap().status.success());
    let flag_out = sh.root.join("flag");
    let mut a = args(&flag_out);
    a.extend(["--seed".into(), "5".into()]);
    assert!(bin().args(&a).env("CROSSPERS_SEED", "9").output().unwrap().status.success());
    assert_eq!(json(&env_out.join("report.json"))["config"]["seed"], 5);
    assert_eq!(fs::read(env_out.join("report.json")).unwrap(), fs::read(flag_out.join("report.json")).unwrap());

    let bad = bin().args(args(&sh.root.join("bad"))).env("CROSSPERS_SEED", "x").output().unwrap();
    assert!(!bad.status.success());
}

#[test]
fn seeded_runs_are_bytewise_reproducible_across_job_counts() {
    let sh = shapes();
    let mut reports = Vec::new();
    for (k, jobs) in [None, Some("1"), Some("3")].into_iter().enumerate() {
        let out = sh.root.join(format!("run{k}"));
        let mut args = vec![];
        if let Some(j) = jobs {
            args.extend(["--jobs", j]);
        }
        args.extend(["distinguish", s(&sh.circle_a), s(&sh.two), "--seed", "3", "--out-dir", s(&out)]);
        args.extend(["--n-pairs", "16", "--subsample-size", "32"]);
        ok(&args);
        reports.push((fs::read(out.join("report.json")).unwrap(), fs::read(out.join("core_density.csv")).unwrap()));
    }
    assert!(reports.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn sweep_at_level_zero_matches_distinguish() {
    let sh = shapes();
    let data = sh.root.join("data");
    fs::create_dir(&data).unwrap();
    fs::copy(&sh.circle_a, data.join("0_circle.csv")).unwrap();
    fs::copy(&sh.two, data.join("1_two.csv")).unwrap();
    let out = sh.root.join("sweep");
    let mut args = vec!["sweep", s(&data), "--levels", "0", "--seed", "4", "--out-dir", s(&out)];
    args.extend(SMALL);
    ok(&args);
    let table = json(&out.join("sweep.json"));
    let mean = table["result"]["tables"][0]["rows"][0]["mean_overlap"].as_f64().unwrap();

    let a = distinguish(&data.join("0_circle.csv"), &data.join("1_two.csv"), &sh.root.join("d01"), &["--seed", "4"]);
    let b = distinguish(&data.join("1_two.csv"), &data.join("0_circle.csv"), &sh.root.join("d10"), &["--seed", "4"]);
    let expect = (a["result"]["overlap"].as_f64().unwrap() + b["result"]["overlap"].as_f64().unwrap()) / 2.0;
    assert_eq!(mean, expect);
}

#[test]
fn sweep_regimes_give_labelled_curves() {
    let sh = shapes();
    let data = sh.root.join("data");
    fs::create_dir(&data).unwrap();
    fs::copy(&sh.circle_a, data.join("a.csv")).unwrap();
    fs::copy(&sh.two, data.join("b.csv")).unwrap();
    let out = sh.root.join("sweep");
    ok(&["sweep", s(&data), "--regime", "all", "--n-pairs", "10", "--subsample-size", "32", "--out-dir", s(&out)]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,right_only,both");
    // default levels
    assert_eq!(lines.len(), 5);
    let cfg = json(&out.join("sweep.json"))["config"].clone();
    assert_eq!(cfg["levels"], serde_json::json!([0.0, 0.25, 0.5, 0.75]));
}

fn small_train_config(dir: &Path, n_pairs: usize, epochs: usize, lr: f64) -> PathBuf {
    let p = dir.join("train.json");
    let cfg = serde_json::json!({
        "architecture": {"phi1": [8, 8], "phi2": [8], "head_hidden": [16]},
        "k": 6,
        "training": {"epochs": epochs, "learning_rate": lr, "batch_size": 4},
        "circles": {"n_pairs": n_pairs, "points": 16, "subsamples": 2, "subsample_size": 10, "nx": 4, "ny": 4}
    });
    fs::write(&p, cfg.to_string()).unwrap();
    p
}

#[test]
fn train_export_and_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = small_train_config(root, 10, 4, 0.01);
    let data = root.join("data");
    let model_dir = root.join("model");
    ok(&["train", "--circles", "--config", s(&cfg), "--seed", "2", "--export", s(&data), "--out-dir", s(&model_dir)]);
    let rep = json(&model_dir.join("train_report.json"));
    assert_eq!(rep["config"]["train_fraction"], 0.8);
    assert_eq!(rep["result"]["train_indices"].as_array().unwrap().len(), 8);
    assert_eq!(rep["result"]["loss_history"].as_array().unwrap().len(), 4);

    // training from the exported manifest reproduces the model exactly
    let again = root.join("again");
    ok(&["train", "--manifest", s(&data.join("manifest.json")), "--config", s(&cfg), "--seed", "2", "--out-dir", s(&again)]);
    assert_eq!(fs::read(model_dir.join("model.json")).unwrap(), fs::read(again.join("model.json")).unwrap());

    let pred = root.join("pred");
    let model = model_dir.join("model.json");
    ok(&["predict", "--model", s(&model), "--manifest", s(&data.join("manifest.json")), "--out-dir", s(&pred), "--pgm"]);
    let pr = json(&pred.join("predict_report.json"));
    assert_eq!(pr["result"]["pairs"].as_array().unwrap().len(), 10);
    assert!(pr["result"]["mean_sym_kl"].as_f64().unwrap() >= 0.0);
    let g = io::read_grid(pred.join("prediction_0003.csv")).unwrap();
    assert!((g.sum() - 1.0).abs() < 1e-9);
    assert!(pred.join("prediction_0003.pgm").exists());
}

#[test]
fn overfit_pair_predicts_its_target() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = small_train_config(root, 1, 300, 0.01);
    let data = root.join("data");
    let model_dir = root.join("model");
    ok(&["train", "--circles", "--config", s(&cfg), "--train-fraction", "1.0", "--export", s(&data), "--out-dir", s(&model_dir)]);
    let pred = root.join("pred");
    ok(&[
        "predict",
        "--model",
        s(&model_dir.join("model.json")),
        "--left",
        s(&data.join("left_0000.csv")),
        "--right",
        s(&data.join("right_0000.csv")),
        "--target",
        s(&data.join("target_0000.csv")),
        "--out-dir",
        s(&pred),
    ]);
    let kl = json(&pred.join("predict_report.json"))["result"]["mean_sym_kl"].as_f64().unwrap();
    assert!(kl < 0.01, "{kl}");
}

#[test]
fn missing_model_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = cloud_file(dir.path(), "c.csv", &sample_shape(Shape::Circle, 10, 0.0, 0).unwrap());
    let out = run(&["predict", "--model", "/nonexistent/model.json", "--left", s(&c), "--right", s(&c), "--out-dir", s(dir.path())]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: /nonexistent/model.json"), "{err}");
}

fn chirp_files(dir: &Path) -> (PathBuf, PathBuf, usize) {
    let cfg = ChirpConfig { len: 96, ..Default::default() };
    let data = chirp_dataset(80, &cfg, 3).unwrap();
    let series = dir.join("series.csv");
    io::write_labelled_series(&series, &data).unwrap();
    // the third reference is also row 5 of the series file
    let refs = vec![data[0].clone(), data[1].clone(), data[5].clone()];
    let rp = dir.join("refs.csv");
    io::write_labelled_series(&rp, &refs).unwrap();
    (series, rp, 5)
}

#[test]
fn topgen_schema_and_duplicate_reference_block() {
    let dir = tempfile::tempdir().unwrap();
    let (series, refs, dup) = chirp_files(dir.path());
    let out = dir.path().join("features.csv");
    ok(&["topgen", "--series", s(&series), "--references", s(&refs), "--embedding-dim", "24", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0].len(), 13);
    assert_eq!(rows[0][0], "label");
    assert_eq!(rows.len(), 81);
    // reference 2 occupies feature columns 8..12
    let block: Vec<f64> = rows[dup + 1][9..13].iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(block, vec![0.0; 4]);
    let rep = json(&out.with_extension("json"));
    assert_eq!(rep["config"]["embedding_dim"], 24);
    assert_eq!(rep["result"]["schema"].as_array().unwrap().len(), 12);
}

#[test]
fn classify_chirps_beats_chance() {
    let dir = tempfile::tempdir().unwrap();
    let (series, _, _) = chirp_files(dir.path());
    let out = dir.path().join("features.csv");
    ok(&["topgen", "--series", s(&series), "--embedding-dim", "24", "--seed", "1", "--out", s(&out)]);
    let metrics = dir.path().join("metrics.json");
    ok(&["classify", "--features", s(&out), "--seed", "1", "--out", s(&metrics)]);
    let m = json(&metrics);
    assert!(m["result"]["roc_auc"].as_f64().unwrap() > 0.5, "{m}");
    assert_eq!(m["result"]["n_test"], 16);

    let ent = dir.path().join("entropy.json");
    ok(&["classify", "--features", s(&out), "--columns", "entropy", "--out", s(&ent)]);
    let cols = json(&ent)["result"]["columns"].clone();
    assert!(cols.as_array().unwrap().iter().all(|c| c.as_str().unwrap().starts_with("entropy_")));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("selftest.json");
    let stdout = ok(&["selftest", "--trials", "50", "--out", s(&out)]);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
    assert_eq!(json(&out)["result"].as_array().unwrap().len(), 5);
}
