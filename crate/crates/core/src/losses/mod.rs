//! Trainable objectives with hand-derived gradients.
//!
//! Every loss returns its value and the gradient with respect to the raw
//! scores. Where the loss selects entries by rank (top-k sums, hinge kinks),
//! the selection is fixed at the evaluation point with the deterministic
//! tie-breaking of [`top_m_indices`](crate::ranking::top_m_indices), which
//! yields one valid subgradient at non-differentiable points.

mod autkc;
mod baselines;
mod lipschitz;
mod surrogate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use autkc::{autkc_loss, autkc_value_grad};
pub use baselines::baseline_loss;
pub use lipschitz::{check_lipschitz_pair, lipschitz_constants, LipschitzReport};
pub use surrogate::{scalar_surrogate, Surrogate};

use crate::error::{check_range, Error, Result};
use crate::ranking::check_label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossFamily {
    /// Softmax cross-entropy.
    Ce,
    /// Multiclass hinge `max_{j != y} [1 + s_j - s_y]_+`.
    MultiHinge,
    L1,
    L2,
    L3,
    L4,
    L5,
    /// Truncated cross-entropy.
    Tce,
    Autkc(Surrogate),
}

impl LossFamily {
    pub const ALL: [LossFamily; 12] = [
        LossFamily::Ce,
        LossFamily::MultiHinge,
        LossFamily::L1,
        LossFamily::L2,
        LossFamily::L3,
        LossFamily::L4,
        LossFamily::L5,
        LossFamily::Tce,
        LossFamily::Autkc(Surrogate::Hinge),
        LossFamily::Autkc(Surrogate::Square),
        LossFamily::Autkc(Surrogate::Exp),
        LossFamily::Autkc(Surrogate::Logit),
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossFamily::Ce => "ce",
            LossFamily::MultiHinge => "hinge",
            LossFamily::L1 => "l1",
            LossFamily::L2 => "l2",
            LossFamily::L3 => "l3",
            LossFamily::L4 => "l4",
            LossFamily::L5 => "l5",
            LossFamily::Tce => "tce",
            LossFamily::Autkc(Surrogate::Hinge) => "autkc-hinge",
            LossFamily::Autkc(Surrogate::Square) => "autkc-sq",
            LossFamily::Autkc(Surrogate::Exp) => "autkc-exp",
            LossFamily::Autkc(Surrogate::Logit) => "autkc-logit",
        }
    }

    pub fn takes_cutoff(self) -> bool {
        !matches!(self, LossFamily::Ce | LossFamily::MultiHinge)
    }

    pub fn is_autkc(self) -> bool {
        matches!(self, LossFamily::Autkc(_))
    }

    /// Largest admissible cutoff for `classes` classes.
    pub fn max_cutoff(self, classes: usize) -> usize {
        match self {
            LossFamily::Ce | LossFamily::MultiHinge => 1,
            LossFamily::L2 | LossFamily::L3 | LossFamily::Tce => classes,
            // these read (s_\y)_[k] or s_[k+1] / s_[K+1]
            _ => classes - 1,
        }
    }

    /// Softmax applied before the loss: on for the three consistent AUTKC
    /// surrogates, off everywhere else.
    pub fn default_normalize(self) -> bool {
        matches!(
            self,
            LossFamily::Autkc(Surrogate::Square | Surrogate::Exp | Surrogate::Logit)
        )
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A loss family plus its cutoff (`k` for top-k losses, `K` for AUTKC).
///
/// String grammar (case-insensitive):
///
/// ```text
/// spec    := "ce" | "hinge" | family "@" cutoff
/// family  := "l1" | "l2" | "l3" | "l4" | "l5" | "tce"
///          | "autkc-hinge" | "autkc-sq" | "autkc-exp" | "autkc-logit"
/// cutoff  := positive integer
/// ```
///
/// `mchinge` is accepted as an alias of `hinge`, `autkc-square` of `autkc-sq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LossSpec {
    pub family: LossFamily,
    /// Ignored by `ce` and `hinge`; stored as 1 for them.
    pub cutoff: usize,
    pub normalize: bool,
}

pub const LOSS_GRAMMAR: &str = "ce | hinge | l1@k | l2@k | l3@k | l4@k | l5@k | tce@k | \
autkc-hinge@K | autkc-sq@K | autkc-exp@K | autkc-logit@K";

impl LossSpec {
    pub fn new(family: LossFamily, cutoff: usize) -> Result<Self> {
        let cutoff = if family.takes_cutoff() { cutoff } else { 1 };
        if cutoff == 0 {
            return Err(Error::InvalidLoss {
                spec: format!("{family}@0"),
                reason: "cutoff must be at least 1".into(),
            });
        }
        Ok(Self {
            family,
            cutoff,
            normalize: family.default_normalize(),
        })
    }

    pub fn ce() -> Self {
        Self::new(LossFamily::Ce, 1).expect("ce has no cutoff")
    }

    pub fn autkc(surrogate: Surrogate, big_k: usize) -> Result<Self> {
        Self::new(LossFamily::Autkc(surrogate), big_k)
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if classes < 2 {
            return Err(Error::TooFewClasses(classes));
        }
        if self.family.takes_cutoff() {
            check_range("cutoff", self.cutoff, 1, self.family.max_cutoff(classes)).map_err(|e| {
                Error::InvalidLoss {
                    spec: self.to_string(),
                    reason: format!("{e} for {classes} classes"),
                }
            })?;
        }
        Ok(())
    }

    pub fn evaluate(&self, scores: &[f64], y: usize) -> Result<LossValueGrad> {
        if self.family.is_autkc() {
            autkc_loss(self, scores, y)
        } else {
            baseline_loss(self, scores, y)
        }
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.family.takes_cutoff() {
            write!(f, "{}@{}", self.family, self.cutoff)
        } else {
            write!(f, "{}", self.family)
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let invalid = |reason: String| Error::InvalidLoss {
            spec: s.to_string(),
            reason,
        };
        let (name, cutoff) = match lower.split_once('@') {
            Some((name, k)) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| invalid(format!("cutoff {k:?} is not a positive integer")))?;
                (name, Some(k))
            }
            None => (lower.as_str(), None),
        };
        let family = match name {
            "ce" => LossFamily::Ce,
            "hinge" | "mchinge" => LossFamily::MultiHinge,
            "l1" => LossFamily::L1,
            "l2" => LossFamily::L2,
            "l3" => LossFamily::L3,
            "l4" => LossFamily::L4,
            "l5" => LossFamily::L5,
            "tce" => LossFamily::Tce,
            "autkc-hinge" => LossFamily::Autkc(Surrogate::Hinge),
            "autkc-sq" | "autkc-square" => LossFamily::Autkc(Surrogate::Square),
            "autkc-exp" => LossFamily::Autkc(Surrogate::Exp),
            "autkc-logit" => LossFamily::Autkc(Surrogate::Logit),
            other => {
                return Err(invalid(format!(
                    "unknown family {other:?}; expected one of: {LOSS_GRAMMAR}"
                )))
            }
        };
        match (family.takes_cutoff(), cutoff) {
            (true, None) => Err(invalid(format!("{family} needs a cutoff, e.g. {family}@5"))),
            (false, Some(_)) => Err(invalid(format!("{family} takes no cutoff"))),
            (true, Some(0)) => Err(invalid("cutoff must be at least 1".into())),
            (_, k) => LossSpec::new(family, k.unwrap_or(1)),
        }
    }
}

impl Serialize for LossSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LossSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValueGrad {
    pub value: f64,
    /// Gradient with respect to the raw scores.
    pub grad: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// `log(sum_j exp(s_j))` without overflow.
pub(crate) fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln()
}

/// Pulls a gradient with respect to `u = softmax(s)` back to `s`:
/// `g_s = u ⊙ (g_u - <u, g_u>)`.
pub fn softmax_backward(u: &[f64], grad_u: &[f64]) -> Vec<f64> {
    let dot: f64 = u.iter().zip(grad_u).map(|(a, b)| a * b).sum();
    u.iter().zip(grad_u).map(|(ui, gi)| ui * (gi - dot)).collect()
}

pub(crate) fn check_inputs(spec: &LossSpec, scores: &[f64], y: usize) -> Result<()> {
    spec.validate(scores.len())?;
    check_label(scores, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parse_and_display() {
        for (text, family, cutoff) in [
            ("autkc-exp@5", LossFamily::Autkc(Surrogate::Exp), 5),
            ("l5@3", LossFamily::L5, 3),
            ("ce", LossFamily::Ce, 1),
            ("HINGE", LossFamily::MultiHinge, 1),
            ("tce@2", LossFamily::Tce, 2),
            ("autkc-square@4", LossFamily::Autkc(Surrogate::Square), 4),
        ] {
            let spec: LossSpec = text.parse().unwrap();
            assert_eq!((spec.family, spec.cutoff), (family, cutoff), "{text}");
            assert_eq!(spec.to_string().parse::<LossSpec>().unwrap(), spec);
        }
        assert!("autkc-exp@5".parse::<LossSpec>().unwrap().normalize);
        assert!(!"autkc-hinge@5".parse::<LossSpec>().unwrap().normalize);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "foo", "l5", "ce@3", "l5@0", "l5@x", "autkc-exp@-1"] {
            let err = bad.parse::<LossSpec>().unwrap_err();
            assert!(matches!(err, Error::InvalidLoss { .. }), "{bad}");
        }
        let msg = "nope@2".parse::<LossSpec>().unwrap_err().to_string();
        assert!(msg.contains("autkc-exp@K"), "{msg}");
    }

    #[test]
    fn cutoff_bounds() {
        let c = 5;
        assert!("l5@4".parse::<LossSpec>().unwrap().validate(c).is_ok());
        assert!("l5@5".parse::<LossSpec>().unwrap().validate(c).is_err());
        assert!("l1@5".parse::<LossSpec>().unwrap().validate(c).is_err());
        assert!("l2@5".parse::<LossSpec>().unwrap().validate(c).is_ok());
        assert!("autkc-sq@4".parse::<LossSpec>().unwrap().validate(c).is_ok());
        assert!("autkc-sq@5".parse::<LossSpec>().unwrap().validate(c).is_err());
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&[0., 0., 0.]);
        u.iter().for_each(|&v| assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15));
        let u = softmax(&[1., 0., 0.]);
        let e = std::f64::consts::E;
        let oracle = [e / (e + 2.0), 1.0 / (e + 2.0), 1.0 / (e + 2.0)];
        for (a, b) in u.iter().zip(oracle) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(u[0], 0.57612, epsilon = 1e-5);
        assert_abs_diff_eq!(u[1], 0.21194, epsilon = 1e-5);
        let u = softmax(&[3.0, 1003.0]);
        assert!(u.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(u[1], 1.0, epsilon = 1e-300);
        assert_abs_diff_eq!(u.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&[0.3, -1.2, 2.5, 0.0]);
        let b = softmax(&[100.3, 98.8, 102.5, 100.0]);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-13);
        }
    }

    #[test]
    fn serde_as_string() {
        let spec: LossSpec = "l3@2".parse().unwrap();
        assert_eq!(serde_json::to_string(&spec).unwrap(), "\"l3@2\"");
        let back: LossSpec = serde_json::from_str("\"autkc-logit@3\"").unwrap();
        assert_eq!(back.family, LossFamily::Autkc(Surrogate::Logit));
    }
}
