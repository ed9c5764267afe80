use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainArgs;
use crate::error::{Error, Result};
use crate::losses::{LossFamily, LossSpec};
use crate::trainer::{ExperimentConfig, ModelKind, SyntheticConfig};

/// Lists that turn one training run into a sweep. Empty lists fall back to
/// the single value in `[train]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub losses: Vec<String>,
    pub seeds: Vec<u64>,
    pub lrs: Vec<f64>,
}

/// Layout of the `--config` TOML file. Every table and key is optional.
///
/// ```toml
/// [data]
/// classes = 20
/// tau = 2.0
///
/// [train]
/// epochs = 90
/// K_eval = [1, 3, 5]
///
/// [sweep]
/// losses = ["ce", "autkc-exp"]
/// seeds = [0, 1, 2]
/// lrs = [0.01, 0.001]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainFile {
    pub data: SyntheticConfig,
    pub train: ExperimentConfig,
    pub sweep: SweepConfig,
}

impl TrainFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })
    }

    /// Overlays the command-line flags that were given.
    pub fn apply_flags(&mut self, args: &TrainArgs) -> Result<()> {
        let (d, t) = (&mut self.data, &mut self.train);
        if !args.k_eval.is_empty() {
            t.k_eval = args.k_eval.clone();
        }
        if let Some(v) = args.warmup {
            t.warmup_epochs = v;
        }
        if let Some(v) = args.epochs {
            t.epochs = v;
        }
        if let Some(v) = args.weight_decay {
            t.weight_decay = v;
        }
        if let Some(v) = args.batch_size {
            t.batch_size = v;
        }
        if !args.hidden.is_empty() {
            t.model = if args.hidden == [0] {
                ModelKind::Linear
            } else {
                ModelKind::Mlp {
                    hidden: args.hidden.clone(),
                }
            };
        }
        if let Some(v) = args.classes {
            d.classes = v;
        }
        if let Some(v) = args.dim {
            d.dim = v;
        }
        if let Some(v) = args.n_train {
            d.n_train = v;
        }
        if let Some(v) = args.n_test {
            d.n_test = v;
        }
        if let Some(v) = args.tau {
            d.tau = v;
        }
        if !args.loss.is_empty() {
            self.sweep.losses = args.loss.clone();
        }
        if !args.seed.is_empty() {
            self.sweep.seeds = args.seed.clone();
        }
        if !args.lr.is_empty() {
            self.sweep.lrs = args.lr.clone();
        }
        // a single value also lands in [train] so the echoed config reads naturally
        let losses = self.losses()?;
        if let [only] = losses[..] {
            self.train.loss = only;
        }
        if let [only] = self.sweep.seeds[..] {
            self.train.seed = only;
        }
        if let [only] = self.sweep.lrs[..] {
            self.train.lr = only;
        }
        Ok(())
    }

    pub fn losses(&self) -> Result<Vec<LossSpec>> {
        if self.sweep.losses.is_empty() {
            return Ok(vec![self.train.loss]);
        }
        let default_k = self.train.k_eval.iter().copied().max().unwrap_or(1);
        self.sweep.losses.iter().map(|s| parse_loss(s, default_k)).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.sweep.seeds.is_empty() {
            vec![self.train.seed]
        } else {
            self.sweep.seeds.clone()
        }
    }

    pub fn lrs(&self) -> Vec<f64> {
        if self.sweep.lrs.is_empty() {
            vec![self.train.lr]
        } else {
            self.sweep.lrs.clone()
        }
    }
}

/// Parses a loss spec; a cutoff-taking family written without `@K` gets
/// `default_k`.
pub fn parse_loss(s: &str, default_k: usize) -> Result<LossSpec> {
    match s.parse::<LossSpec>() {
        Ok(spec) => Ok(spec),
        Err(e) if !s.contains('@') => {
            match format!("{}@{default_k}", s.trim()).parse::<LossSpec>() {
                Ok(spec) if spec.family.takes_cutoff() => Ok(spec),
                _ => Err(e),
            }
        }
        Err(e) => Err(e),
    }
}

/// `square`, `exp`, `logit`, `hinge` and their `autkc-` spellings.
pub fn parse_surrogate(s: &str) -> Result<crate::losses::Surrogate> {
    let name = s.trim().to_ascii_lowercase();
    let name = name.strip_prefix("autkc-").unwrap_or(&name);
    match format!("autkc-{name}@1").parse::<LossSpec>() {
        Ok(LossSpec {
            family: LossFamily::Autkc(sur),
            ..
        }) => Ok(sur),
        _ => Err(Error::InvalidArgument(format!(
            "unknown surrogate {s:?}; expected square, exp, logit or hinge"
        ))),
    }
}
