use std::path::Path;
use std::process::{Command, Output};

use chowliu_core::chowliu::learn_tree_distribution;
use chowliu_core::io;
use chowliu_core::model::{Alphabet, TreeModel};
use chowliu_core::seed;

fn chowliu(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chowliu"))
        .args(args)
        .current_dir(dir)
        .env_remove("CHOWLIU_SEED")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn structure_of_two_columns_is_one_edge() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.csv"), "0,1\n1,0\n1,1\n0,0\n1,1\n").unwrap();
    let o = chowliu(dir.path(), &["learn", "--samples", "s.csv", "--mode", "structure", "--out", "t.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = io::tree_from_json(&std::fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
    assert_eq!(t.edges(), &[(0, 1)]);
    let report = stderr(&o);
    assert!(report.contains("N=5") && report.contains("n=2") && report.contains("k=2"), "{report}");
}

#[test]
fn params_on_all_zero_rows_are_add_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.csv"), "0,0,0\n".repeat(8)).unwrap();
    std::fs::write(dir.path().join("t.json"), r#"{"n":3,"edges":[[0,1],[1,2]]}"#).unwrap();
    let o = chowliu(
        dir.path(),
        &["learn", "--samples", "s.csv", "--mode", "params", "--tree", "t.json", "--out", "m.json"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = io::tree_model_from_json(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(m.root_marginal(), &[0.9, 0.1]);
    for v in 1..3 {
        assert_eq!(m.cpt_row(v, 0), &[0.9, 0.1]);
        assert_eq!(m.cpt_row(v, 1), &[0.5, 0.5]);
    }
}

#[test]
fn full_mode_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = TreeModel::<f64>::random(6, Alphabet::new(3).unwrap(), 0.05, &mut seed::rng(3)).unwrap();
    std::fs::write(d.join("m.json"), io::tree_model_to_json(&model).unwrap()).unwrap();
    for (file, binary) in [("s.csv", false), ("s.bin", true)] {
        let mut args = vec!["sample", "--model", "m.json", "--count", "3000", "--seed", "8", "--out", file];
        if binary {
            args.push("--binary");
        }
        let o = chowliu(d, &args);
        assert!(o.status.success(), "{}", stderr(&o));
        let o = chowliu(d, &["learn", "--samples", file, "--mode", "full", "--out", "learned.json"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let written = std::fs::read_to_string(d.join("learned.json")).unwrap();
        let expected = learn_tree_distribution::<f64>(&model.sample(3000, 8)).unwrap();
        assert_eq!(written, io::tree_model_to_json(&expected).unwrap());
    }
}

#[test]
fn malformed_samples_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.csv"), "0,1\n1,0\n1,q\n").unwrap();
    let o = chowliu(dir.path(), &["learn", "--samples", "s.csv", "--mode", "structure", "--out", "t.json"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn verify_facts_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = chowliu(dir.path(), &["verify-facts", "--regime", "realizable", "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((report["hellinger_sq"].as_f64().unwrap() - 0.05).abs() < 1e-12);

    let o = chowliu(dir.path(), &["verify-facts", "--regime", "nonrealizable", "--epsilon", "0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["mi_gap"].as_f64().unwrap() >= 0.02);

    let o = chowliu(dir.path(), &["verify-facts", "--regime", "nonrealizable", "--epsilon", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = chowliu(dir.path(), &["verify-facts", "--regime", "sideways", "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn citest_prints_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.csv"), "0,0,1\n1,1,0\n".repeat(500)).unwrap();
    let o = chowliu(dir.path(), &["citest", "--samples", "s.csv", "--epsilon", "0.1", "--columns", "0,1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "dependent");
    assert_eq!(v["n_samples"], 1000);
}

#[test]
fn experiment_csv_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("e.json"),
        r#"{"kind":"add1_risk","grid":{"k":[3],"epsilon":[0.01],"samples":[50,500]},"trials":20,"master_seed":1}"#,
    )
    .unwrap();
    let o = chowliu(d, &["experiment", "--config", "e.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,k,epsilon,N,trials,success_rate,mean_excess,p95_excess,seconds");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,3,0.01,50,20,") && lines[1].ends_with(','));

    let again = Command::new(env!("CARGO_BIN_EXE_chowliu"))
        .args(["experiment", "--config", "e.json"])
        .current_dir(d)
        .env("CHOWLIU_SEED", "1")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), csv);
    let other = Command::new(env!("CARGO_BIN_EXE_chowliu"))
        .args(["experiment", "--config", "e.json"])
        .current_dir(d)
        .env("CHOWLIU_SEED", "2")
        .output()
        .unwrap();
    assert_ne!(String::from_utf8(other.stdout).unwrap(), csv);
}
