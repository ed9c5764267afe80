//! The hinge-loss counterexample: when the tail mass
//! `sum_{k >= K+2} η_[k]` exceeds `K/(K+1)`, tying the top `K + 1` classes
//! beats every ranking-preserving score vector.

use rand::Rng as _;
use serde::Serialize;

use super::surrogate_risk::surrogate_conditional_risk;
use crate::error::{Error, Result};
use crate::losses::Surrogate;
use crate::ranking::CondDist;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Serialize)]
pub struct HingeCounterexample {
    pub eta: CondDist,
    pub s_tied: Vec<f64>,
    pub s_rp: Vec<f64>,
    pub risk_gap: f64,
}

/// Mass of η outside its top `K + 1` entries.
pub fn tail_mass(eta: &CondDist, big_k: usize) -> f64 {
    let order = eta.descending_order();
    order[big_k + 1..].iter().map(|&c| eta[c]).sum()
}

/// Sets η's top `K + 1` classes to `s_rp`'s `(K+1)`-th largest value and
/// keeps every other coordinate.
pub fn tie_top(eta: &CondDist, big_k: usize, s_rp: &[f64]) -> Vec<f64> {
    let order = eta.descending_order();
    let level = s_rp[order[big_k]];
    let mut tied = s_rp.to_vec();
    for &c in &order[..=big_k] {
        tied[c] = level;
    }
    tied
}

fn check_condition(eta: &CondDist, big_k: usize) -> Result<()> {
    let c = eta.classes();
    let infeasible = |reason: String| Error::Infeasible {
        classes: c,
        k: big_k,
        reason,
    };
    if big_k == 0 || c < big_k + 3 {
        return Err(infeasible("need C >= K + 3".into()));
    }
    let bound = big_k as f64 / (big_k as f64 + 1.0);
    let mass = tail_mass(eta, big_k);
    if mass <= bound {
        return Err(infeasible(format!("tail mass {mass} does not exceed K/(K+1) = {bound}")));
    }
    Ok(())
}

/// Evaluates the counterexample for a given η and ranking-preserving `s_rp`.
pub fn hinge_counterexample_for(eta: &CondDist, big_k: usize, s_rp: &[f64]) -> Result<HingeCounterexample> {
    check_condition(eta, big_k)?;
    if s_rp.len() != eta.classes() {
        return Err(Error::ClassMismatch {
            expected: eta.classes(),
            got: s_rp.len(),
        });
    }
    let s_tied = tie_top(eta, big_k, s_rp);
    let (r_rp, _) = surrogate_conditional_risk(Surrogate::Hinge, eta, big_k, s_rp)?;
    let (r_tied, _) = surrogate_conditional_risk(Surrogate::Hinge, eta, big_k, &s_tied)?;
    Ok(HingeCounterexample {
        eta: eta.clone(),
        s_tied,
        s_rp: s_rp.to_vec(),
        risk_gap: r_rp - r_tied,
    })
}

/// Scores that follow η's order with a constant spacing `delta`.
pub fn spaced_scores(eta: &CondDist, delta: f64) -> Vec<f64> {
    let c = eta.classes();
    let mut s = vec![0.0; c];
    for (pos, &cls) in eta.descending_order().iter().enumerate() {
        s[cls] = (c - 1 - pos) as f64 * delta;
    }
    s
}

/// Builds a strictly ordered η whose tail mass sits halfway between
/// `K/(K+1)` and the largest value a strict ordering allows, then evaluates
/// the counterexample with `s_rp` spaced by 0.5.
///
/// A strictly ordered η with tail mass `m` exists iff
/// `m/(C-K-1) < (1-m)/(K+1)`, so the condition is satisfiable iff
/// `C > (K+1)^2`.
pub fn hinge_counterexample(classes: usize, big_k: usize) -> Result<HingeCounterexample> {
    let infeasible = |reason: &str| Error::Infeasible {
        classes,
        k: big_k,
        reason: reason.into(),
    };
    if big_k == 0 || classes < big_k + 3 {
        return Err(infeasible("need C >= K + 3"));
    }
    if classes <= (big_k + 1) * (big_k + 1) {
        return Err(infeasible("a strictly ordered η needs C > (K+1)^2"));
    }
    let head_n = big_k + 1;
    let tail_n = classes - head_n;
    let lo = big_k as f64 / head_n as f64;
    let hi = tail_n as f64 / (tail_n + head_n) as f64;
    let mass = 0.5 * (lo + hi);
    let head = (1.0 - mass) / head_n as f64;
    let tail = mass / tail_n as f64;
    let gh = (head - tail) / (4.0 * head_n as f64);
    let gt = (head - tail) / (4.0 * tail_n as f64);
    let centered = |i: usize, n: usize| (n as f64 - 1.0) / 2.0 - i as f64;
    let weights: Vec<f64> = (0..head_n)
        .map(|i| head + gh * centered(i, head_n))
        .chain((0..tail_n).map(|i| tail + gt * centered(i, tail_n)))
        .collect();
    let eta = CondDist::from_weights(&weights)?;
    let s_rp = spaced_scores(&eta, 0.5);
    hinge_counterexample_for(&eta, big_k, &s_rp)
}

/// A strictly η-ordered score vector with consecutive gaps drawn
/// log-uniformly from `[1e-3, 3]`.
pub fn sample_rp_scores(eta: &CondDist, rng: &mut rng::Rng) -> Vec<f64> {
    let order = eta.descending_order();
    let mut s = vec![0.0; eta.classes()];
    let mut level = 0.0;
    for &c in order.iter().rev() {
        s[c] = level;
        level += 10f64.powf(rng.random_range(-3.0..0.5));
    }
    s
}

/// Top `K` classes sit `eps, 2 eps, ...` above the `(K+1)`-th; the rest
/// keep unit spacing below it. As `eps -> 0` the risk gap closes.
pub fn near_limit_scores(eta: &CondDist, big_k: usize, eps: f64) -> Vec<f64> {
    let order = eta.descending_order();
    let c = eta.classes();
    let mut s = vec![0.0; c];
    for (pos, &cls) in order.iter().enumerate() {
        s[cls] = if pos <= big_k {
            (big_k - pos) as f64 * eps
        } else {
            -((pos - big_k) as f64)
        };
    }
    s
}

pub const NEAR_LIMIT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct MarginSweep {
    pub samples: usize,
    /// Smallest `R(s_rp) - R(tie_top(s_rp))` over the samples and the
    /// near-limit point.
    pub min_gap: f64,
    pub near_limit_gap: f64,
}

pub fn hinge_margin_sweep(eta: &CondDist, big_k: usize, samples: usize, seed: u64) -> Result<MarginSweep> {
    let mut rng = rng::child(seed, Stream::Trial, &[u64::MAX, big_k as u64]);
    let near = near_limit_scores(eta, big_k, NEAR_LIMIT_EPS);
    let near_limit_gap = hinge_counterexample_for(eta, big_k, &near)?.risk_gap;
    let mut min_gap = near_limit_gap;
    for _ in 0..samples {
        let s = sample_rp_scores(eta, &mut rng);
        min_gap = min_gap.min(hinge_counterexample_for(eta, big_k, &s)?.risk_gap);
    }
    Ok(MarginSweep {
        samples,
        min_gap,
        near_limit_gap,
    })
}
