use std::collections::BTreeMap;

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{parse_surrogate, TrainFile};
use super::output::{curves_csv, OutputDir};
use super::{CompareArgs, ConsistencyArgs, EvalArgs, Failure, LipschitzArgs, TrainArgs};
use crate::consistency::{run_consistency, run_hinge_consistency, LabConfig};
use crate::error::{Error, Result};
use crate::losses::{check_lipschitz_pair, LossFamily, LossSpec, Surrogate};
use crate::metrics::{autkc_up, enumerate_comparison, topk_curve, ComparisonCounts, Degree, ScoredSet};
use crate::trainer::sweep::{self, SweepPoint};
use crate::trainer::{
    load_csv, read_labeled_table, read_value_table, run_experiment, run_synthetic, write_history_jsonl, DataSource,
    ExperimentResult,
};

/// Smooth-surrogate consistency runs must reach this RP rate.
pub const MIN_RP_RATE: f64 = 0.95;

#[derive(Serialize)]
struct EvalReport {
    n: usize,
    #[serde(rename = "C")]
    classes: usize,
    autkc_up: BTreeMap<usize, f64>,
    topk_curve: Vec<f64>,
}

fn load_scores(args: &EvalArgs) -> Result<ScoredSet> {
    let rows: Vec<(Vec<f64>, usize)> = match &args.labels {
        None => read_labeled_table(&args.scores)?,
        Some(labels_path) => {
            let scores = read_value_table(&args.scores)?;
            let labels = read_value_table(labels_path)?;
            if scores.len() != labels.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} has {} rows but {} has {}",
                    args.scores.display(),
                    scores.len(),
                    labels_path.display(),
                    labels.len()
                )));
            }
            let mut rows = Vec::with_capacity(scores.len());
            for (i, (s, l)) in scores.into_iter().zip(labels).enumerate() {
                let y = match l[..] {
                    [v] if v >= 0.0 && v.fract() == 0.0 => v as usize,
                    _ => {
                        return Err(Error::Parse {
                            path: labels_path.clone(),
                            line: i + 1,
                            message: format!("expected one non-negative integer label, got {l:?}"),
                        })
                    }
                };
                rows.push((s, y));
            }
            rows
        }
    };
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    ScoredSet::from_rows(rows)
}

pub(super) fn eval(args: &EvalArgs, argv: &[String]) -> Result<(), Failure> {
    let set = load_scores(args)?;
    let c = set.classes();
    if let Some(&bad) = args.big_k.iter().find(|&&k| k == 0 || k > c) {
        return Err(Failure::usage(format!("--K {bad} out of range: need 1 <= K <= C = {c}")));
    }
    let kmax = args.kmax.unwrap_or(c);
    if kmax == 0 || kmax > c {
        return Err(Failure::usage(format!("--kmax {kmax} out of range: need 1 <= kmax <= C = {c}")));
    }
    let curve = topk_curve(&set, kmax)?;
    let autkc = args
        .big_k
        .iter()
        .map(|&k| Ok((k, autkc_up(&set, k)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let report = EvalReport {
        n: set.len(),
        classes: c,
        autkc_up: autkc,
        topk_curve: curve.acc(),
    };
    for (k, v) in &report.autkc_up {
        println!("AUTKC↑@{k} = {v:.6}");
    }
    let mut out = OutputDir::create(&args.out)?;
    out.write_json("report.json", &report)?;
    out.write_text("topk_curve.csv", &curves_csv(&[("topk_acc", &report.topk_curve)]))?;
    let config = serde_json::json!({
        "scores": args.scores.display().to_string(),
        "labels": args.labels.as_ref().map(|p| p.display().to_string()),
        "K": args.big_k,
        "kmax": kmax,
    });
    out.finish("eval", argv, &config, vec![])?;
    Ok(())
}

fn write_run(out: &mut OutputDir, prefix: &str, result: &ExperimentResult) -> Result<()> {
    let mut history = Vec::new();
    write_history_jsonl(&result.history, &mut history)?;
    out.write_text(&format!("{prefix}history.jsonl"), &String::from_utf8(history).expect("utf-8 json"))?;
    out.write_json(&format!("{prefix}report.json"), result)?;
    let test = result.test.topk_curve.acc();
    out.write_text(&format!("{prefix}topk_curve.csv"), &curves_csv(&[("test", &test)]))?;
    Ok(())
}

pub(super) fn train(args: &TrainArgs, argv: &[String]) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => TrainFile::load(path)?,
        None => TrainFile::default(),
    };
    cfg.apply_flags(args)?;
    let losses = cfg.losses()?;
    let points = sweep::grid(&losses, &cfg.seeds(), &cfg.lrs());

    let csv_data = match &args.data {
        Some(path) => {
            let all = load_csv(path)?;
            let n_test = all.len() / 5;
            if n_test == 0 {
                return Err(Error::InvalidArgument(format!("{} has too few rows to hold out a test split", path.display())).into());
            }
            let (train, test) = all.split_tail(n_test);
            let source = DataSource::Csv {
                path: path.display().to_string(),
                classes: train.classes,
                n_train: train.len(),
                n_test: test.len(),
            };
            Some((train, test, source))
        }
        None => None,
    };
    for p in &points {
        let c = csv_data.as_ref().map_or(cfg.data.classes, |(d, _, _)| d.classes);
        p.apply(&cfg.train).validate(c)?;
    }
    let run_point = |p: &SweepPoint| -> Result<ExperimentResult> {
        let config = p.apply(&cfg.train);
        let r = match &csv_data {
            Some((train, test, source)) => run_experiment(train, test, source.clone(), &config),
            None => run_synthetic(&cfg.data, &config),
        };
        if let Ok(r) = &r {
            info!("{}: test AUTKC↑ {:?}", p.label(), r.test.autkc_up);
        }
        r
    };
    let results = points.par_iter().map(run_point).collect::<Result<Vec<_>>>()?;

    let mut out = OutputDir::create(&args.out)?;
    if let [only] = &results[..] {
        write_run(&mut out, "", only)?;
        for (k, v) in &only.test.autkc_up {
            println!("{}: test AUTKC↑@{k} = {v:.6}", points[0].loss);
        }
    } else {
        for (p, r) in points.iter().zip(&results) {
            write_run(&mut out, &format!("{}/", p.label()), r)?;
        }
        let select_k = cfg.train.k_eval.iter().copied().max().expect("validated non-empty");
        let summary = sweep::summarize(&points, &results, select_k, Some("ce"))?;
        out.write_json("summary.json", &summary)?;
        let curves: Vec<(&str, &[f64])> = summary
            .methods
            .iter()
            .map(|m| (m.loss.as_str(), m.mean_test_topk.as_slice()))
            .collect();
        out.write_text("topk_curves.csv", &curves_csv(&curves))?;
        if let Some(g) = &summary.gains {
            let cols: Vec<(&str, &[f64])> = g.gains.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
            out.write_text("normalized_gains.csv", &curves_csv(&cols))?;
        }
        for m in &summary.methods {
            println!("{}: mean test AUTKC↑@{select_k} = {:.6}", m.loss, m.mean_test_autkc[&select_k]);
        }
    }
    out.finish("train", argv, &cfg, cfg.seeds())?;
    Ok(())
}

pub(super) fn consistency(args: &ConsistencyArgs, argv: &[String]) -> Result<(), Failure> {
    let family = parse_surrogate(&args.family)?;
    let lab = LabConfig::default();
    let report = match family {
        Surrogate::Hinge => run_hinge_consistency(args.classes, args.big_k, args.trials, args.seed, &lab),
        smooth => run_consistency(smooth, args.classes, args.big_k, args.trials, args.seed, &lab),
    };
    let report = match report {
        Err(e @ Error::Infeasible { .. }) => return Err(Failure::usage(e.to_string())),
        r => r?,
    };
    let mut out = OutputDir::create(&args.out)?;
    out.write_json("consistency.json", &report)?;
    out.finish("consistency", argv, &serde_json::json!({
        "family": family.name(),
        "C": args.classes,
        "K": args.big_k,
        "trials": args.trials,
        "seed": args.seed,
        "lab": {
            "pgd": lab.pgd,
            "gap_tol": lab.gap_tol,
            "grid_max_classes": lab.grid_max_classes,
            "grid_resolution": lab.grid_resolution,
        },
    }), vec![args.seed])?;

    println!("{} C={} K={}: RP rate {:.3} over {} trials", family.name(), args.classes, args.big_k, report.rp_success_rate, args.trials);
    match family {
        Surrogate::Hinge => {
            let gap = report.worst_risk_gap.expect("hinge reports a gap");
            println!("hinge risk_gap (RP minus tied, worst case) = {gap:.6e}");
            if gap <= 0.0 {
                return Err(Failure::check(format!("hinge risk_gap {gap} is not positive")));
            }
        }
        _ => {
            if report.rp_success_rate < MIN_RP_RATE {
                return Err(Failure::check(format!(
                    "RP success rate {:.3} below {MIN_RP_RATE} ({} failures)",
                    report.rp_success_rate,
                    report.rp_failures().count()
                )));
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ComparisonEntry {
    k: usize,
    #[serde(rename = "K")]
    big_k: usize,
    counts: ComparisonCounts,
    closed_form: ComparisonCounts,
    matches: bool,
    degree_of_consistency: Option<f64>,
    degree_of_discriminancy: Degree,
}

pub(super) fn compare_metrics(args: &CompareArgs, argv: &[String]) -> Result<(), Failure> {
    let c = args.classes;
    let pairs: Vec<(usize, usize)> = match (args.k, args.big_k) {
        (Some(k), Some(big_k)) => {
            if k >= big_k {
                return Err(Failure::usage(format!("need k < K, got k={k}, K={big_k}")));
            }
            vec![(k, big_k)]
        }
        (None, None) => (1..c).flat_map(|k| (k + 1..=c).map(move |big_k| (k, big_k))).collect(),
        _ => return Err(Failure::usage("give both --k and --K, or neither to sweep all pairs")),
    };
    if c < 2 {
        return Err(Error::TooFewClasses(c).into());
    }
    let entries = pairs
        .par_iter()
        .map(|&(k, big_k)| {
            let counts = enumerate_comparison(c, k, big_k)?;
            let closed_form = ComparisonCounts::closed_form(c, k, big_k)?;
            Ok(ComparisonEntry {
                k,
                big_k,
                counts,
                closed_form,
                matches: counts == closed_form,
                degree_of_consistency: counts.degree_of_consistency(),
                degree_of_discriminancy: counts.degree_of_discriminancy(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = OutputDir::create(&args.out)?;
    out.write_json("comparison.json", &entries)?;
    out.finish("compare-metrics", argv, &serde_json::json!({"C": c, "k": args.k, "K": args.big_k}), vec![])?;
    if let [e] = &entries[..] {
        let ComparisonCounts { r, s, p, q } = e.counts;
        println!("C={c} k={} K={}: R={r} S={s} P={p} Q={q}", e.k, e.big_k);
    }
    let bad: Vec<_> = entries.iter().filter(|e| !e.matches).map(|e| (e.k, e.big_k)).collect();
    println!("{} of {} (k, K) pairs match the closed forms", entries.len() - bad.len(), entries.len());
    if !bad.is_empty() {
        return Err(Failure::check(format!("closed forms disagree with enumeration at (k, K) = {bad:?}")));
    }
    Ok(())
}

fn lipschitz_spec(args: &LipschitzArgs) -> Result<LossSpec> {
    if args.family.contains('@') {
        let spec: LossSpec = args.family.parse()?;
        return match args.big_k {
            Some(k) => LossSpec::new(spec.family, k),
            None => Ok(spec),
        };
    }
    let surrogate = parse_surrogate(&args.family)?;
    let k = args
        .big_k
        .ok_or_else(|| Error::InvalidArgument(format!("--family {} needs --K (or write it as autkc-...@K)", args.family)))?;
    LossSpec::new(LossFamily::Autkc(surrogate), k)
}

pub(super) fn lipschitz(args: &LipschitzArgs, argv: &[String]) -> Result<(), Failure> {
    if args.trials == 0 {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    let spec = lipschitz_spec(args)?;
    let report = check_lipschitz_pair(&spec, args.classes, args.trials, args.seed)?;
    let mut out = OutputDir::create(&args.out)?;
    out.write_json("lipschitz.json", &report)?;
    out.finish("lipschitz", argv, &serde_json::json!({
        "family": spec.to_string(),
        "C": args.classes,
        "trials": args.trials,
        "seed": args.seed,
    }), vec![args.seed])?;
    println!("{spec} C={}: max ratio {:.6} (bound pair {:?})", args.classes, report.max_ratio, report.bound_pair);
    if !report.pass {
        return Err(Failure::check(format!("observed ratio {} exceeds the bound", report.max_ratio)));
    }
    Ok(())
}
