//! Grids of training runs over loss, seed and learning rate, with the
//! learning rate picked per (loss, seed) on held-out AUTKC.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{ExperimentConfig, ExperimentResult};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::metrics::{normalized_gain, NormalizedGains};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub loss: LossSpec,
    pub seed: u64,
    pub lr: f64,
}

impl SweepPoint {
    /// Directory-friendly name, e.g. `autkc-exp@5_seed0_lr0.01`.
    pub fn label(&self) -> String {
        format!("{}_seed{}_lr{}", self.loss, self.seed, self.lr)
    }

    pub fn apply(&self, base: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            loss: self.loss,
            seed: self.seed,
            lr: self.lr,
            ..base.clone()
        }
    }
}

/// Cartesian product in loss-major, then seed, then lr order.
pub fn grid(losses: &[LossSpec], seeds: &[u64], lrs: &[f64]) -> Vec<SweepPoint> {
    let mut points = Vec::with_capacity(losses.len() * seeds.len() * lrs.len());
    for &loss in losses {
        for &seed in seeds {
            for &lr in lrs {
                points.push(SweepPoint { loss, seed, lr });
            }
        }
    }
    points
}

#[derive(Debug, Clone, Serialize)]
pub struct Selected {
    pub seed: u64,
    pub lr: f64,
    pub validation_autkc: f64,
    pub test_autkc: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub loss: String,
    pub selected: Vec<Selected>,
    /// Test AUTKC↑ averaged over seeds, per evaluated `K`.
    pub mean_test_autkc: BTreeMap<usize, f64>,
    pub mean_test_topk: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    /// Selection metric: validation AUTKC↑ at this `K`.
    pub select_k: usize,
    pub methods: Vec<MethodSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<NormalizedGains>,
}

impl SweepSummary {
    pub fn method(&self, loss: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.loss == loss)
    }
}

/// For every (loss, seed) keeps the run with the best validation AUTKC↑ at
/// `select_k` (first in grid order on ties), then averages the selected
/// test metrics over seeds. Gains are against `baseline` when it was run.
pub fn summarize(
    points: &[SweepPoint],
    results: &[ExperimentResult],
    select_k: usize,
    baseline: Option<&str>,
) -> Result<SweepSummary> {
    if points.len() != results.len() || points.is_empty() {
        return Err(Error::InvalidArgument("sweep needs one result per point".into()));
    }
    let val_at = |r: &ExperimentResult| {
        r.validation.autkc_up.get(&select_k).copied().ok_or_else(|| {
            Error::InvalidArgument(format!("K={select_k} is not among the evaluated cutoffs"))
        })
    };
    let mut best: BTreeMap<(String, u64), (usize, f64)> = BTreeMap::new();
    let mut loss_order: Vec<String> = Vec::new();
    for (i, (p, r)) in points.iter().zip(results).enumerate() {
        let name = p.loss.to_string();
        if !loss_order.contains(&name) {
            loss_order.push(name.clone());
        }
        let v = val_at(r)?;
        let entry = best.entry((name, p.seed)).or_insert((i, v));
        if v > entry.1 {
            *entry = (i, v);
        }
    }
    let mut methods = Vec::new();
    for name in loss_order {
        let chosen: Vec<(usize, f64)> = best
            .iter()
            .filter(|((n, _), _)| *n == name)
            .map(|(_, &pick)| pick)
            .collect();
        let n = chosen.len() as f64;
        let mut mean_test_autkc: BTreeMap<usize, f64> = BTreeMap::new();
        let mut mean_test_topk: Vec<f64> = Vec::new();
        let mut selected = Vec::new();
        for &(i, v) in &chosen {
            let test = &results[i].test;
            for (&k, &a) in &test.autkc_up {
                *mean_test_autkc.entry(k).or_default() += a / n;
            }
            let acc = test.topk_curve.acc();
            mean_test_topk.resize(acc.len(), 0.0);
            mean_test_topk.iter_mut().zip(&acc).for_each(|(m, a)| *m += a / n);
            selected.push(Selected {
                seed: points[i].seed,
                lr: points[i].lr,
                validation_autkc: v,
                test_autkc: test.autkc_up.clone(),
            });
        }
        methods.push(MethodSummary {
            loss: name,
            selected,
            mean_test_autkc,
            mean_test_topk,
        });
    }
    let gains = match baseline {
        Some(b) if methods.len() > 1 && methods.iter().any(|m| m.loss == b) => {
            let curves = methods
                .iter()
                .map(|m| (m.loss.clone(), m.mean_test_topk.clone()))
                .collect();
            Some(normalized_gain(&curves, b)?)
        }
        _ => None,
    };
    Ok(SweepSummary {
        select_k,
        baseline: gains.as_ref().and(baseline.map(str::to_string)),
        methods,
        gains,
    })
}
