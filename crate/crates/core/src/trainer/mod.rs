//! Mini-batch training on small dense models, with a cross-entropy warm-up
//! phase and per-epoch evaluation on a held-out split.

mod data;
mod model;
pub mod sweep;

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use data::{generate_synthetic, load_csv, save_csv, Dataset, LabeledSample, SyntheticConfig, ETA_TIE_GAP};
pub(crate) use data::{read_labeled_table, read_value_table};
pub use model::{Model, ModelKind};

use crate::consistency::{is_rp, DEFAULT_GAP_TOL};
use crate::error::{check_range, Error, Result};
use crate::losses::LossSpec;
use crate::metrics::{autkc_up, topk_curve, ScoredSet, TopKCurve};
use crate::ranking::CondDist;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrDecay {
    pub ratio: f64,
    /// Epochs between decays.
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub loss: LossSpec,
    #[serde(rename = "K_eval")]
    pub k_eval: Vec<usize>,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: LrDecay,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub model: ModelKind,
    /// Fraction of the shuffled training set held out for evaluation.
    pub holdout: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            loss: LossSpec::ce(),
            k_eval: vec![1, 3, 5],
            epochs: 90,
            warmup_epochs: 10,
            batch_size: 128,
            lr: 1e-2,
            lr_decay: LrDecay { ratio: 0.1, period: 30 },
            momentum: 0.9,
            weight_decay: 1e-4,
            seed: 0,
            model: ModelKind::default(),
            holdout: 0.2,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, classes: usize) -> Result<()> {
        self.loss.validate(classes)?;
        if self.k_eval.is_empty() {
            return Err(Error::InvalidArgument("K_eval is empty".into()));
        }
        for &k in &self.k_eval {
            check_range("K_eval", k, 1, classes - 1)?;
        }
        if self.warmup_epochs > self.epochs {
            return Err(Error::InvalidArgument(format!(
                "warm-up ({}) exceeds epochs ({})",
                self.warmup_epochs, self.epochs
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be non-negative", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if self.lr_decay.period == 0 || self.lr_decay.ratio.is_nan() || self.lr_decay.ratio <= 0.0 {
            return Err(Error::InvalidArgument("lr decay needs period >= 1 and ratio > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::InvalidArgument("momentum must be in [0, 1), weight decay >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(Error::InvalidArgument(format!("holdout {} not in [0, 1)", self.holdout)));
        }
        Ok(())
    }

    /// Step schedule on one clock shared by warm-up and main phase.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.ratio.powi((epoch / self.lr_decay.period) as i32)
    }

    pub fn loss_at(&self, epoch: usize) -> LossSpec {
        if epoch < self.warmup_epochs {
            LossSpec::ce()
        } else {
            self.loss
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub autkc_up: BTreeMap<usize, f64>,
    pub topk_curve: TopKCurve,
    /// Per `K`: fraction of samples whose scores are top-K ranking
    /// preserving for the sample's true η.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rp_agreement: Option<BTreeMap<usize, f64>>,
}

/// Metrics of precomputed scores. `etas`, when given, must align with the
/// rows of `set`.
pub fn evaluate_scores(set: &ScoredSet, etas: Option<&[&CondDist]>, k_list: &[usize]) -> Result<EvalReport> {
    if set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let autkc = k_list
        .iter()
        .map(|&k| Ok((k, autkc_up(set, k)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let rp_agreement = etas.map(|etas| {
        k_list
            .iter()
            .map(|&k| {
                let hits = set
                    .rows()
                    .zip(etas)
                    .filter(|((s, _), eta)| is_rp(s, eta, k, DEFAULT_GAP_TOL))
                    .count();
                (k, hits as f64 / set.len() as f64)
            })
            .collect()
    });
    Ok(EvalReport {
        n: set.len(),
        autkc_up: autkc,
        topk_curve: topk_curve(set, set.classes())?,
        rp_agreement,
    })
}

pub fn score_dataset(model: &Model, data: &Dataset) -> Result<ScoredSet> {
    if model.input_dim() != data.dim || model.classes() != data.classes {
        return Err(Error::ClassMismatch {
            expected: data.classes,
            got: model.classes(),
        });
    }
    let mut set = ScoredSet::new(data.classes)?;
    for s in &data.samples {
        set.push(&model.scores(&s.x), s.y)?;
    }
    Ok(set)
}

pub fn evaluate(model: &Model, data: &Dataset, k_list: &[usize]) -> Result<EvalReport> {
    let set = score_dataset(model, data)?;
    let etas: Option<Vec<&CondDist>> = data.samples.iter().map(|s| s.eta_true.as_ref()).collect();
    evaluate_scores(&set, etas.as_deref(), k_list)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRecord {
    pub epoch: usize,
    pub loss_family: String,
    pub train_loss: f64,
    pub autkc_up: BTreeMap<usize, f64>,
    pub topk: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<HistoryRecord>,
    /// Held-out metrics after the last epoch.
    pub validation: EvalReport,
}

/// Mini-batch SGD with Nesterov momentum and L2 weight decay:
/// `v <- μ v + g`, `w <- w - lr (g + μ v)` with `g` the batch-mean gradient
/// plus `λ w`.
///
/// The last `holdout` fraction of the seed-shuffled data is held out and
/// evaluated after every epoch.
pub fn sgd_train(mut model: Model, data: &Dataset, config: &ExperimentConfig) -> Result<TrainOutcome> {
    config.validate(data.classes)?;
    let (train, heldout) = data.clone().holdout_split(config.holdout, config.seed);
    if train.is_empty() || heldout.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_params = model.params().len();
    let mut velocity = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut acts = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut validation = evaluate(&model, &heldout, &config.k_eval)?;

    for epoch in 0..config.epochs {
        let loss = config.loss_at(epoch);
        let lr = config.lr_at(epoch);
        order.sort_unstable();
        order.shuffle(&mut rng::child(config.seed, Stream::Shuffle, &[epoch as u64]));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                let sample = &train.samples[i];
                model.forward(&sample.x, &mut acts);
                let out = loss.evaluate(acts.last().expect("output"), sample.y)?;
                if !out.value.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                total += out.value;
                model.backward(&acts, &out.grad, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            let params = model.params_mut();
            for ((w, g), v) in params.iter_mut().zip(&grad).zip(&mut velocity) {
                let g = g * scale + config.weight_decay * *w;
                *v = config.momentum * *v + g;
                *w -= lr * (g + config.momentum * *v);
            }
        }
        if model.params().iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        validation = evaluate(&model, &heldout, &config.k_eval)?;
        history.push(HistoryRecord {
            epoch,
            loss_family: loss.to_string(),
            train_loss: total / train.len() as f64,
            autkc_up: validation.autkc_up.clone(),
            topk: validation.topk_curve.acc(),
        });
    }
    Ok(TrainOutcome {
        model,
        history,
        validation,
    })
}

pub fn write_history_jsonl<W: Write>(history: &[HistoryRecord], mut out: W) -> Result<()> {
    for record in history {
        writeln!(out, "{}", crate::json::to_string(record)?)?;
    }
    Ok(())
}

/// Where the training and test samples came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Csv {
        path: String,
        #[serde(rename = "C")]
        classes: usize,
        n_train: usize,
        n_test: usize,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub data: DataSource,
    pub validation: EvalReport,
    pub test: EvalReport,
    #[serde(skip)]
    pub history: Vec<HistoryRecord>,
}

/// Trains a fresh model (seeded by `config.seed`) and evaluates it on `test`.
pub fn run_experiment(train: &Dataset, test: &Dataset, source: DataSource, config: &ExperimentConfig) -> Result<ExperimentResult> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if test.dim != train.dim || test.classes != train.classes {
        return Err(Error::ClassMismatch {
            expected: train.classes,
            got: test.classes,
        });
    }
    let model = Model::new(config.model.clone(), train.dim, train.classes, config.seed)?;
    let outcome = sgd_train(model, train, config)?;
    let test = evaluate(&outcome.model, test, &config.k_eval)?;
    Ok(ExperimentResult {
        config: config.clone(),
        data: source,
        validation: outcome.validation,
        test,
        history: outcome.history,
    })
}

/// Generates train and test data from one teacher (both from `config.seed`),
/// trains and evaluates on the test part.
pub fn run_synthetic(data_config: &SyntheticConfig, config: &ExperimentConfig) -> Result<ExperimentResult> {
    let SyntheticConfig {
        classes,
        dim,
        n_train,
        n_test,
        tau,
    } = *data_config;
    if n_test == 0 {
        return Err(Error::InvalidArgument("n_test must be at least 1".into()));
    }
    let all = generate_synthetic(classes, dim, n_train + n_test, tau, config.seed)?;
    let (train, test) = all.split_tail(n_test);
    run_experiment(&train, &test, DataSource::Synthetic(data_config.clone()), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::Surrogate;
    use crate::metrics::topk_up;

    fn small() -> (SyntheticConfig, ExperimentConfig) {
        let data = SyntheticConfig {
            classes: 6,
            dim: 4,
            n_train: 300,
            n_test: 100,
            tau: 1.0,
        };
        let cfg = ExperimentConfig {
            k_eval: vec![1, 2, 3],
            epochs: 6,
            warmup_epochs: 2,
            batch_size: 32,
            lr: 0.05,
            loss: LossSpec::autkc(Surrogate::Exp, 3).unwrap(),
            ..Default::default()
        };
        (data, cfg)
    }

    #[test]
    fn lr_schedule_and_warmup() {
        let cfg = ExperimentConfig {
            loss: "autkc-sq@3".parse().unwrap(),
            ..Default::default()
        };
        assert_eq!(cfg.lr_at(0), 1e-2);
        assert_eq!(cfg.lr_at(29), 1e-2);
        assert!((cfg.lr_at(30) - 1e-3).abs() < 1e-18);
        assert!((cfg.lr_at(89) - 1e-4).abs() < 1e-18);
        assert_eq!(cfg.loss_at(9), LossSpec::ce());
        assert_eq!(cfg.loss_at(10).to_string(), "autkc-sq@3");
    }

    #[test]
    fn history_follows_schedule_and_is_deterministic() {
        let (data, cfg) = small();
        let a = run_synthetic(&data, &cfg).unwrap();
        let b = run_synthetic(&data, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        let families: Vec<&str> = a.history.iter().map(|h| h.loss_family.as_str()).collect();
        assert_eq!(families, ["ce", "ce", "autkc-exp@3", "autkc-exp@3", "autkc-exp@3", "autkc-exp@3"]);
        assert!(a.test.rp_agreement.is_some());
    }

    #[test]
    fn zero_lr_leaves_weights_unchanged() {
        let (data, mut cfg) = small();
        cfg.lr = 0.0;
        let d = generate_synthetic(data.classes, data.dim, 200, 1.0, 0).unwrap();
        let m = Model::new(ModelKind::Linear, data.dim, data.classes, 3).unwrap();
        let out = sgd_train(m.clone(), &d, &cfg).unwrap();
        assert_eq!(out.model, m);
        assert!(out.history.windows(2).all(|w| w[0].autkc_up == w[1].autkc_up));
    }

    #[test]
    fn full_warmup_equals_pure_ce() {
        let (data, mut cfg) = small();
        cfg.warmup_epochs = cfg.epochs;
        let warm = run_synthetic(&data, &cfg).unwrap();
        cfg.loss = LossSpec::ce();
        let ce = run_synthetic(&data, &cfg).unwrap();
        assert_eq!(warm.history, ce.history);
    }

    #[test]
    fn separable_two_class_reaches_full_accuracy() {
        let samples: Vec<LabeledSample> = (0..200)
            .map(|i| {
                let t = i as f64 / 200.0 * std::f64::consts::TAU;
                let y = i % 2;
                let r = if y == 0 { 1.0 } else { -1.0 };
                LabeledSample {
                    x: vec![r + 0.3 * t.cos(), 0.5 * t.sin()],
                    y,
                    eta_true: None,
                }
            })
            .collect();
        let d = Dataset::new(2, 2, samples).unwrap();
        let cfg = ExperimentConfig {
            k_eval: vec![1],
            epochs: 50,
            warmup_epochs: 0,
            batch_size: 16,
            lr: 0.1,
            model: ModelKind::Linear,
            holdout: 0.1,
            ..Default::default()
        };
        let out = sgd_train(Model::new(ModelKind::Linear, 2, 2, 0).unwrap(), &d, &cfg).unwrap();
        let full = Dataset { samples: d.samples.clone(), ..d };
        let set = score_dataset(&out.model, &full).unwrap();
        assert_eq!(topk_up(&set, 1).unwrap(), 1.0);
    }

    #[test]
    fn constant_scorer_has_zero_autkc() {
        let d = generate_synthetic(5, 3, 50, 1.0, 0).unwrap();
        let mut set = ScoredSet::new(5).unwrap();
        for s in &d.samples {
            set.push(&[0.25; 5], s.y).unwrap();
        }
        let r = evaluate_scores(&set, None, &[1, 2, 4]).unwrap();
        assert!(r.autkc_up.values().all(|&v| v == 0.0));
    }

    #[test]
    fn bayes_scorer_matches_direct_rank_computation() {
        let d = generate_synthetic(8, 4, 400, 1.5, 5).unwrap();
        let mut set = ScoredSet::new(8).unwrap();
        let etas: Vec<&CondDist> = d.samples.iter().map(|s| s.eta_true.as_ref().unwrap()).collect();
        for (s, eta) in d.samples.iter().zip(&etas) {
            set.push(eta, s.y).unwrap();
        }
        let r = evaluate_scores(&set, Some(&etas), &[1, 3, 7]).unwrap();
        for k in [1usize, 3, 7] {
            // position of y in η's descending order, independently of the metrics code
            let direct: f64 = d
                .samples
                .iter()
                .map(|s| {
                    let eta = s.eta_true.as_ref().unwrap();
                    let pos = eta.descending_order().iter().position(|&c| c == s.y).unwrap();
                    (k as f64 - pos as f64).max(0.0) / k as f64
                })
                .sum::<f64>()
                / d.len() as f64;
            assert!((r.autkc_up[&k] - direct).abs() < 1e-12);
            assert_eq!(r.rp_agreement.as_ref().unwrap()[&k], 1.0);
        }
    }

    #[test]
    fn reported_autkc_matches_curve() {
        let (data, cfg) = small();
        let res = run_synthetic(&data, &cfg).unwrap();
        for (k, v) in &res.test.autkc_up {
            assert_eq!(*v, res.test.topk_curve.autkc_up(*k).unwrap());
        }
    }

    #[test]
    fn config_validation() {
        let base = ExperimentConfig::default();
        assert!(base.validate(20).is_ok());
        for bad in [
            ExperimentConfig { warmup_epochs: 91, ..base.clone() },
            ExperimentConfig { batch_size: 0, ..base.clone() },
            ExperimentConfig { lr: -1.0, ..base.clone() },
            ExperimentConfig { k_eval: vec![20], ..base.clone() },
            ExperimentConfig { loss: "l1@20".parse().unwrap(), ..base.clone() },
        ] {
            assert!(bad.validate(20).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn history_jsonl_shape() {
        let rec = HistoryRecord {
            epoch: 3,
            loss_family: "ce".into(),
            train_loss: 0.5,
            autkc_up: BTreeMap::from([(5, 0.75)]),
            topk: vec![0.5, 1.0],
        };
        let mut buf = Vec::new();
        write_history_jsonl(&[rec], &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(
            line,
            "{\"epoch\":3,\"loss_family\":\"ce\",\"train_loss\":5.0000000000000000e-1,\
\"autkc_up\":{\"5\":7.5000000000000000e-1},\"topk\":[5.0000000000000000e-1,1.0000000000000000e0]}\n"
        );
    }
}
