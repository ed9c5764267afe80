use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn autkc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autkc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

/// Two samples of five classes, both labelled 0: ranks 1 and 2.
fn fig2_fixture(dir: &Path) {
    fs::write(
        dir.join("scores.csv"),
        "s0,s1,s2,s3,s4,label\n5,4,3,2,1,0\n4,3,2,5,1,0\n",
    )
    .unwrap();
    fs::write(dir.join("only_scores.csv"), "5,4,3,2,1\n4,3,2,5,1\n").unwrap();
    fs::write(dir.join("labels.csv"), "0\n0\n").unwrap();
}

#[test]
fn eval_fig2_fixture() {
    let tmp = TempDir::new().unwrap();
    fig2_fixture(tmp.path());
    let out = autkc(tmp.path(), &["eval", "scores.csv", "--K", "1,3", "--out", "e"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(tmp.path().join("e/report.json"));
    assert_eq!(num(&report["autkc_up"]["3"]), 5.0 / 6.0);
    assert_eq!(num(&report["autkc_up"]["1"]), 0.5);
    assert_eq!(report["C"], 5);
    let curve = fs::read_to_string(tmp.path().join("e/topk_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 6);
    assert!(curve.starts_with("k,topk_acc\n1,0.5\n2,1.0\n"));
    let manifest = json(tmp.path().join("e/manifest.json"));
    assert_eq!(manifest["command"], "eval");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);

    let out = autkc(
        tmp.path(),
        &["eval", "only_scores.csv", "--labels", "labels.csv", "--K", "3", "--out", "e2"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(num(&json(tmp.path().join("e2/report.json"))["autkc_up"]["3"]), 5.0 / 6.0);
}

#[test]
fn eval_usage_and_parse_errors() {
    let tmp = TempDir::new().unwrap();
    fig2_fixture(tmp.path());
    let out = autkc(tmp.path(), &["eval", "scores.csv", "--K", "0"]);
    assert_eq!(code(&out), 2);
    let out = autkc(tmp.path(), &["eval", "scores.csv", "--K", "2", "--kmax", "6"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("C = 5"), "{}", stderr(&out));

    fs::write(tmp.path().join("bad.csv"), "1,2,0\n3,x,1\n").unwrap();
    let out = autkc(tmp.path(), &["eval", "bad.csv", "--K", "1"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("bad.csv:2"), "{}", stderr(&out));
    let out = autkc(tmp.path(), &["eval", "missing.csv", "--K", "1"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn train_default_synthetic_exp() {
    let tmp = TempDir::new().unwrap();
    let out = autkc(tmp.path(), &["train", "--loss", "autkc-exp@5", "--out", "t"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(tmp.path().join("t/report.json"));
    for k in ["1", "3", "5"] {
        let v = num(&report["test"]["autkc_up"][k]);
        assert!((0.0..=1.0).contains(&v));
    }
    assert_eq!(report["data"]["source"], "synthetic");
    let history = fs::read_to_string(tmp.path().join("t/history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 90);
    assert!(history.lines().nth(9).unwrap().contains("\"loss_family\":\"ce\""));
    assert!(history.lines().nth(10).unwrap().contains("\"loss_family\":\"autkc-exp@5\""));
    let manifest = json(tmp.path().join("t/manifest.json"));
    assert_eq!(manifest["config"]["train"]["loss"], "autkc-exp@5");
    assert_eq!(manifest["seeds"], serde_json::json!([0]));
}

#[test]
fn full_warmup_matches_pure_ce() {
    let tmp = TempDir::new().unwrap();
    let common = ["train", "--loss", "ce", "--epochs", "90", "--n-train", "800", "--n-test", "200"];
    let a = autkc(tmp.path(), &[&common[..], &["--warmup", "90", "--out", "a"]].concat());
    let b = autkc(tmp.path(), &[&common[..], &["--warmup", "0", "--out", "b"]].concat());
    assert_eq!((code(&a), code(&b)), (0, 0));
    let ha = fs::read(tmp.path().join("a/history.jsonl")).unwrap();
    let hb = fs::read(tmp.path().join("b/history.jsonl")).unwrap();
    assert_eq!(ha, hb);
    let (ra, rb) = (json(tmp.path().join("a/report.json")), json(tmp.path().join("b/report.json")));
    assert_eq!(ra["test"], rb["test"]);
}

#[test]
fn train_baseline_loss_and_bad_loss() {
    let tmp = TempDir::new().unwrap();
    let out = autkc(
        tmp.path(),
        &["train", "--loss", "l5@3", "--epochs", "4", "--warmup", "1", "--n-train", "400", "--n-test", "100", "--out", "l5"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(json(tmp.path().join("l5/report.json"))["test"]["autkc_up"]["5"].is_number());

    let out = autkc(tmp.path(), &["train", "--loss", "focal@2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("autkc-logit@K"), "{}", stderr(&out));
}

#[test]
fn config_file_layers_under_flags() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "[data]\nclasses = 6\ndim = 3\nn_train = 300\nn_test = 60\n\n[train]\nepochs = 2\nwarmup_epochs = 1\nK_eval = [1, 2]\nloss = \"autkc-sq@2\"\n",
    )
    .unwrap();
    let out = autkc(tmp.path(), &["train", "--config", "run.toml", "--epochs", "3", "--out", "r"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let history = fs::read_to_string(tmp.path().join("r/history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 3);
    let m = json(tmp.path().join("r/manifest.json"));
    assert_eq!(m["config"]["train"]["epochs"], 3);
    assert_eq!(m["config"]["data"]["classes"], 6);
    assert_eq!(m["config"]["train"]["loss"], "autkc-sq@2");

    fs::write(tmp.path().join("bad.toml"), "[train]\nepoch = 3\n").unwrap();
    let out = autkc(tmp.path(), &["train", "--config", "bad.toml"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("bad.toml:2"), "{}", stderr(&out));
}

fn sweep_args(out: &str, jobs: &str) -> Vec<String> {
    [
        "train", "--loss", "ce,autkc-exp", "--K", "1,3", "--seed", "0,1", "--lr", "0.01,0.05", "--epochs", "3",
        "--warmup", "1", "--C", "6", "--dim", "4", "--n-train", "300", "--n-test", "100", "--jobs", jobs, "--out", out,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                files.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn sweep_outputs_are_reproducible_across_job_counts() {
    let tmp = TempDir::new().unwrap();
    let a: Vec<String> = sweep_args("a", "1");
    let b: Vec<String> = sweep_args("b", "3");
    let ra = autkc(tmp.path(), &a.iter().map(String::as_str).collect::<Vec<_>>());
    let rb = autkc(tmp.path(), &b.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&ra), 0, "{}", stderr(&ra));
    assert_eq!(code(&rb), 0, "{}", stderr(&rb));
    let (ta, tb) = (tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
    // 8 points x 3 files + summary + two csvs
    assert_eq!(ta.len(), 27);
    assert_eq!(ta, tb);

    let summary = json(tmp.path().join("a/summary.json"));
    assert_eq!(summary["select_k"], 3);
    assert_eq!(summary["methods"].as_array().unwrap().len(), 2);
    assert_eq!(summary["methods"][1]["loss"], "autkc-exp@3");
    let gains = fs::read_to_string(tmp.path().join("a/normalized_gains.csv")).unwrap();
    assert!(gains.starts_with("k,autkc-exp@3,ce\n1,"), "{gains}");
    assert!(tmp.path().join("a/ce_seed1_lr0.05/history.jsonl").exists());
}

#[test]
fn consistency_hinge_and_infeasible() {
    let tmp = TempDir::new().unwrap();
    let out = autkc(tmp.path(), &["consistency", "--family", "hinge", "--C", "23", "--K", "1", "--trials", "2", "--out", "h"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(tmp.path().join("h/consistency.json"));
    assert!(num(&report["worst_risk_gap"]) > 0.0);
    assert!(num(&report["counterexample"]["risk_gap"]) > 0.0);
    assert_eq!(num(&report["rp_success_rate"]), 0.0);

    let out = autkc(tmp.path(), &["consistency", "--family", "hinge", "--C", "9", "--K", "2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("condition unsatisfiable"), "{}", stderr(&out));
    let out = autkc(tmp.path(), &["consistency", "--family", "ce", "--C", "4", "--K", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn consistency_exit_code_follows_rp_rate() {
    let tmp = TempDir::new().unwrap();
    let out = autkc(tmp.path(), &["consistency", "--family", "square", "--C", "4", "--K", "2", "--trials", "50", "--out", "s"]);
    let report = json(tmp.path().join("s/consistency.json"));
    let rate = num(&report["rp_success_rate"]);
    let expected = if rate >= 0.95 { 0 } else { 1 };
    assert_eq!(code(&out), expected, "rate {rate}: {}", stderr(&out));
    assert_eq!(report["records"].as_array().unwrap().len(), 50);
    // every failing trial on C <= 4 carries a grid cross-check
    for r in report["records"].as_array().unwrap() {
        if r["rp"] == false {
            assert!(r["grid"].is_object());
        }
    }
}

#[test]
fn compare_metrics_single_and_sweep() {
    let tmp = TempDir::new().unwrap();
    let out = autkc(tmp.path(), &["compare-metrics", "--C", "5", "--k", "2", "--K", "3", "--out", "c"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let e = &json(tmp.path().join("c/comparison.json"))[0];
    assert_eq!((e["counts"]["R"].as_u64(), e["counts"]["S"].as_u64(), e["counts"]["Q"].as_u64()), (Some(6), Some(0), Some(0)));
    assert_eq!(e["degree_of_discriminancy"], "inf");

    let out = autkc(tmp.path(), &["compare-metrics", "--C", "5", "--k", "3", "--K", "3"]);
    assert_eq!(code(&out), 2);
    let out = autkc(tmp.path(), &["compare-metrics", "--C", "12", "--out", "all"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let all = json(tmp.path().join("all/comparison.json"));
    assert_eq!(all.as_array().unwrap().len(), 66);
    assert!(all.as_array().unwrap().iter().all(|e| e["matches"] == true));
}

#[test]
fn lipschitz_commands() {
    let tmp = TempDir::new().unwrap();
    let out = autkc(tmp.path(), &["lipschitz", "--family", "autkc-sq@2", "--C", "5", "--out", "l"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(tmp.path().join("l/lipschitz.json"));
    assert_eq!(r["pass"], true);
    assert_eq!(r["trials"], 10_000);

    let out = autkc(tmp.path(), &["lipschitz", "--family", "exp", "--K", "1", "--trials", "500", "--out", "l2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = autkc(tmp.path(), &["lipschitz", "--family", "autkc-hinge@2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("exist only for"), "{}", stderr(&out));
    let out = autkc(tmp.path(), &["lipschitz", "--family", "autkc-sq@2", "--trials", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    for out in ["x", "y"] {
        let r = autkc(tmp.path(), &["lipschitz", "--family", "logit", "--K", "2", "--trials", "300", "--out", out]);
        assert!(matches!(code(&r), 0 | 1));
        let r = autkc(tmp.path(), &["consistency", "--family", "hinge", "--C", "10", "--K", "2", "--trials", "1", "--out", out]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
    }
    assert_eq!(tree(&tmp.path().join("x")), tree(&tmp.path().join("y")));
}

#[test]
fn help_and_unknown_subcommand() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&autkc(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&autkc(tmp.path(), &["frobnicate"])), 2);
    assert_eq!(code(&autkc(tmp.path(), &["--jobs", "0", "compare-metrics", "--C", "3"])), 2);
}
