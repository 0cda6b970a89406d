mod common;

use std::path::Path;
use std::process::{Command, Output};

fn tacbench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tacbench"))
        .args(args)
        .current_dir(cwd)
        .env_remove("TB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn dataset_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::write_dataset(&common::structured(60, 6, 4, 0.8, 3), dir.path());
    dir
}

#[test]
fn version_reports_schema() {
    let o = tacbench(&["--version"], Path::new("."));
    assert!(o.status.success());
    assert!(stdout(&o).contains("0.1.0") && stdout(&o).contains("schema 1"));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(tacbench(&["frobnicate"], tmp.path()).status.code(), Some(2));
    assert_eq!(tacbench(&["stats", "--bogus"], tmp.path()).status.code(), Some(2));
    assert_eq!(
        tacbench(&["evaluate", "--mvc-scope", "everyone"], tmp.path()).status.code(),
        Some(2)
    );
}

#[test]
fn baselines_chicken() {
    let o = tacbench(&["baselines", "--game", "chicken", "--props", "156,115"], Path::new("."));
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let erg_speed: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("ERG,f1:Speed,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((erg_speed - 53.5).abs() < 0.1, "{erg_speed}");
    // proportions and counts give the same table
    let o2 = tacbench(
        &["baselines", "--game", "chicken", "--props", "0.5756457564575646,0.4243542435424354"],
        Path::new("."),
    );
    assert_eq!(stdout(&o2), out);
    let bad = tacbench(&["baselines", "--game", "door", "--props", "1,2"], Path::new("."));
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn ingest_names_missing_column() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("participants.csv"),
        "id,gender,age,text_file,chicken,door\np1,male,22,t.txt,Speed,A\n",
    )
    .unwrap();
    let o = tacbench(&["ingest", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("box"), "{}", stderr(&o));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn ingest_writes_canonical_files() {
    let dir = dataset_dir();
    let o = tacbench(&["ingest", "--out", "canon"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["participants.csv", "attributes.csv", "games.json"] {
        assert!(dir.path().join("canon").join(f).exists(), "{f}");
    }
    // canonical files load again unchanged
    let again = tacbench(&["ingest", "--data", "canon", "--out", "canon2"], dir.path());
    assert!(again.status.success(), "{}", stderr(&again));
    let read = |d: &str| std::fs::read(dir.path().join(d).join("participants.csv")).unwrap();
    assert_eq!(read("canon"), read("canon2"));
}

#[test]
fn out_dir_from_environment() {
    let dir = dataset_dir();
    let o = Command::new(env!("CARGO_BIN_EXE_tacbench"))
        .args(["stats"])
        .current_dir(dir.path())
        .env("TB_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("from_env/summary.json")).unwrap()).unwrap();
    assert_eq!(json["participants"], 60);
}

#[test]
fn cluster_writes_dendrogram_and_partition() {
    let dir = dataset_dir();
    let o = tacbench(&["cluster", "--k", "4", "--out", "c"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let den = std::fs::read_to_string(dir.path().join("c/dendrogram_ours24.csv")).unwrap();
    assert_eq!(den.lines().count(), 60);
    let parts = std::fs::read_to_string(dir.path().join("c/clusters_ours24_k4.csv")).unwrap();
    let clusters: std::collections::BTreeSet<&str> =
        parts.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(clusters.len(), 4);
}

#[test]
fn evaluate_then_report_round_trip() {
    let dir = dataset_dir();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"repetitions": 50, "k_range": {"start": 2, "end": 6}, "games": ["chicken", "door"]}"#,
    )
    .unwrap();
    let o = tacbench(&["evaluate", "--config", "cfg.json", "--seed", "3", "--out", "e"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("e/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 3);
    assert_eq!(manifest["config"]["repetitions"], 50);
    assert!(manifest["files"]["results.csv"].as_str().unwrap().len() == 64);
    assert!(!dir.path().join("e/curves_box.csv").exists());

    let r = tacbench(&["report", "--results", "e/results.csv", "--out", "r"], dir.path());
    assert!(r.status.success(), "{}", stderr(&r));
    for f in ["table2.csv", "table3_best.csv", "table3_median.csv", "curves_chicken.csv", "curves_door.csv"] {
        let a = std::fs::read(dir.path().join("e").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("r").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn evaluate_missing_feature_set_is_config_error() {
    let dir = dataset_dir();
    std::fs::write(dir.path().join("cfg.json"), r#"{"repetitions": 5, "feature_sets": ["ibm13"]}"#).unwrap();
    let o = tacbench(&["evaluate", "--config", "cfg.json", "--out", "e"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ibm13"));
}

#[test]
fn evaluate_combined_and_external_feature_sets() {
    let dir = dataset_dir();
    let ext = common::structured(60, 3, 2, 0.5, 9);
    ext.attributes
        .as_ref()
        .unwrap()
        .write_csv(std::fs::File::create(dir.path().join("ext.csv")).unwrap())
        .unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"repetitions": 10, "k_range": {"start": 2, "end": 3}, "classifiers": ["tac"],
            "feature_sets": ["ext", "ours24+ext"]}"#,
    )
    .unwrap();
    let o = tacbench(
        &["evaluate", "--config", "cfg.json", "--features", "ext=ext.csv", "--out", "e"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let results = std::fs::read_to_string(dir.path().join("e/results.csv")).unwrap();
    assert!(results.contains("TAC,ext,") && results.contains("TAC,ours24+ext,"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("e/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["dendrograms"].as_object().unwrap().len(), 2);
}

#[test]
fn match_pays_within_segment() {
    let dir = dataset_dir();
    let o = tacbench(&["match", "--seed", "4", "--out", "m"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = std::fs::read_to_string(dir.path().join("m/match.csv")).unwrap();
    let pay: Vec<f64> = rows.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(pay.len(), 60);
    assert!(pay.iter().all(|&p| (10.5..=15.0).contains(&p)));
    assert!(pay.contains(&10.5) && pay.contains(&15.0));
    let again = tacbench(&["match", "--seed", "4", "--out", "m2"], dir.path());
    assert!(again.status.success());
    assert_eq!(rows, std::fs::read_to_string(dir.path().join("m2/match.csv")).unwrap());
}

#[test]
fn aggregate_judgments_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("worker_id,text_id,attribute,score,is_test,lo,hi\n");
    csv += "w1,t1,kind,4,false,,\nw1,t2,kind,2,false,,\nw1,t9,kind,1,true,0,2\n";
    csv += "w2,t1,kind,2,false,,\nw2,t2,kind,0,false,,\nw2,t9,kind,5,true,0,2\n";
    std::fs::write(tmp.path().join("j.csv"), csv).unwrap();
    let o = tacbench(&["aggregate", "--judgments", "j.csv", "--required", "1", "--out", "a"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let attrs = std::fs::read_to_string(tmp.path().join("a/attributes.csv")).unwrap();
    // w2 failed its only test question
    assert_eq!(attrs.lines().collect::<Vec<_>>(), ["id,kind", "t1,0.8", "t2,0.4"]);
    let workers = std::fs::read_to_string(tmp.path().join("a/workers.csv")).unwrap();
    assert!(workers.contains("w2,1,0,0.000000,false"));
}
