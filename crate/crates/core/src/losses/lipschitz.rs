//! Empirical check of the Lipschitz constant pairs of the softmax-normalized
//! AUTKC losses:
//!
//! `|L_K(u, y) - L_K(u', y)| <= L1 * ||u - u'||_2 + L2 * |u_y - u'_y|`
//! with `u = softmax(s)`.

use rand::Rng as _;
use serde::Serialize;

use super::{autkc_value_grad, softmax, LossFamily, LossSpec, Surrogate};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// `(L1, L2)` for the three consistent surrogates; `None` for hinge.
pub fn lipschitz_constants(surrogate: Surrogate, big_k: usize) -> Option<(f64, f64)> {
    let k = big_k as f64;
    let root = (2.0 * (k + 1.0)).sqrt();
    let tail = std::f64::consts::SQRT_2 * (k + 1.0);
    let e = std::f64::consts::E;
    let ln2 = std::f64::consts::LN_2;
    match surrogate {
        Surrogate::Square => Some((2.0 * root / k, 2.0 * tail / k)),
        Surrogate::Exp => Some((e * root / (2.0 * k), e * tail / (2.0 * k))),
        Surrogate::Logit => Some((root / (2.0 * e * k * ln2), tail / (2.0 * e * k * ln2))),
        Surrogate::Hinge => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub family: String,
    #[serde(rename = "C")]
    pub classes: usize,
    #[serde(rename = "K")]
    pub big_k: usize,
    pub trials: usize,
    pub seed: u64,
    /// Largest observed `|ΔL| / (L1 ||Δu|| + L2 |Δu_y|)`, with `|ΔL|` reduced
    /// by a few ulps of rounding; pairs with a zero right-hand side count as 0.
    pub max_ratio: f64,
    pub bound_pair: [f64; 2],
    pub pass: bool,
}

const ROUNDING_ULPS: f64 = 16.0;

/// Ratio of the loss change to the bound for one pair of score vectors.
pub(crate) fn pair_ratio(
    surrogate: Surrogate,
    big_k: usize,
    constants: (f64, f64),
    s: &[f64],
    s2: &[f64],
    y: usize,
) -> f64 {
    let (u, u2) = (softmax(s), softmax(s2));
    let (a, b) = (autkc_value_grad(surrogate, big_k, &u, y).0, autkc_value_grad(surrogate, big_k, &u2, y).0);
    // Differences within a few ulps of the loss are rounding, not slope.
    let rounding = ROUNDING_ULPS * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
    let lhs = ((a - b).abs() - rounding).max(0.0);
    let du = u.iter().zip(&u2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let rhs = constants.0 * du + constants.1 * (u[y] - u2[y]).abs();
    if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    }
}

/// Samples `trials` random pairs and reports the worst ratio.
///
/// Half of the pairs are independent draws at a random scale; the other half
/// are small perturbations, which probe the local slope where the bound is
/// tightest.
pub fn check_lipschitz_pair(
    spec: &LossSpec,
    classes: usize,
    trials: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    let unsupported = || Error::InvalidLoss {
        spec: spec.to_string(),
        reason: "Lipschitz constant pairs exist only for autkc-sq, autkc-exp and autkc-logit".into(),
    };
    let LossFamily::Autkc(surrogate) = spec.family else {
        return Err(unsupported());
    };
    let constants = lipschitz_constants(surrogate, spec.cutoff).ok_or_else(unsupported)?;
    spec.validate(classes)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut rng = rng::child(seed, Stream::Lipschitz, &[classes as u64, spec.cutoff as u64]);
    let mut max_ratio = 0.0f64;
    for t in 0..trials {
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let s: Vec<f64> = (0..classes)
            .map(|_| scale * rng::normal(&mut rng))
            .collect();
        let s2: Vec<f64> = if t % 2 == 0 {
            (0..classes)
                .map(|_| scale * rng::normal(&mut rng))
                .collect()
        } else {
            let eps = 10f64.powf(rng.random_range(-6.0..-1.0));
            s.iter()
                .map(|v| v + eps * rng::normal(&mut rng))
                .collect()
        };
        let y = rng.random_range(0..classes);
        max_ratio = max_ratio.max(pair_ratio(surrogate, spec.cutoff, constants, &s, &s2, y));
    }
    Ok(LipschitzReport {
        family: spec.to_string(),
        classes,
        big_k: spec.cutoff,
        trials,
        seed,
        max_ratio,
        bound_pair: [constants.0, constants.1],
        pass: max_ratio <= 1.0,
    })
}
