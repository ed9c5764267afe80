//! Oracles for the theory: exact conditional 0-1 risk and its Bayes-optimal
//! orders, the top-K ranking-preserving check, numerical minimization of the
//! conditional surrogate risk, and the hinge-loss counterexample.

mod hinge;
mod surrogate_risk;

use itertools::Itertools;
use rand::Rng as _;
use serde::Serialize;

pub use hinge::{
    hinge_counterexample, hinge_counterexample_for, hinge_margin_sweep, near_limit_scores, sample_rp_scores, spaced_scores,
    tail_mass, tie_top, HingeCounterexample, MarginSweep,
};
pub use surrogate_risk::{
    grid_search, minimize_surrogate_conditional_risk, surrogate_conditional_risk, GridResult,
    PgdConfig, PgdResult,
};

use crate::error::{check_range, Error, Result};
use crate::ranking::{min_pairwise_gap, CondDist};
use crate::rng::{self, Rng, Stream};

/// Largest class count for factorial enumeration (8! = 40320 orders).
pub const MAX_ENUMERATION_CLASSES: usize = 8;
pub const DEFAULT_GAP_TOL: f64 = 1e-6;
/// Random draws of η are rejected when two entries are closer than this.
pub const ETA_MIN_GAP: f64 = 1e-4;

/// A strict total order of classes: `perm[0]` is ranked first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct RankOrder {
    perm: Vec<usize>,
}

impl RankOrder {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &c in &perm {
            if c >= perm.len() || std::mem::replace(&mut seen[c], true) {
                return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
            }
        }
        Ok(Self { perm })
    }

    pub fn identity(classes: usize) -> Self {
        Self {
            perm: (0..classes).collect(),
        }
    }

    pub fn classes(&self) -> usize {
        self.perm.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    /// 1-based rank of every class.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.perm.len()];
        for (pos, &c) in self.perm.iter().enumerate() {
            r[c] = pos + 1;
        }
        r
    }

    /// True iff the first `K` positions hold η's top-`K` classes in η order.
    pub fn is_rp(&self, eta: &CondDist, big_k: usize) -> bool {
        self.perm[..big_k] == eta.descending_order()[..big_k]
    }
}

/// `(1/K) * sum_y η_y * min(rank(y) - 1, K)`.
pub fn conditional_risk_01(order: &RankOrder, eta: &CondDist, big_k: usize) -> Result<f64> {
    if order.classes() != eta.classes() {
        return Err(Error::ClassMismatch {
            expected: eta.classes(),
            got: order.classes(),
        });
    }
    check_range("K", big_k, 1, eta.classes() - 1)?;
    let weighted: f64 = order
        .perm
        .iter()
        .enumerate()
        .map(|(pos, &c)| eta[c] * pos.min(big_k) as f64)
        .sum();
    Ok(weighted / big_k as f64)
}

/// The smallest achievable conditional 0-1 risk:
/// `(1/K) * sum_j η_[j] * P_j` with `P = [0, 1, ..., K-1, K, ..., K]`.
pub fn bayes_risk_closed_form(eta: &CondDist, big_k: usize) -> Result<f64> {
    check_range("K", big_k, 1, eta.classes() - 1)?;
    let mut sorted = eta.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted
        .iter()
        .enumerate()
        .map(|(j, p)| p * j.min(big_k) as f64)
        .sum();
    Ok(total / big_k as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct BayesSet {
    pub min_risk: f64,
    pub orders: Vec<RankOrder>,
}

/// Relative slack for treating two enumerated risks as equal. Distinct risks
/// of a valid η differ by far more; equal risks differ only by summation order.
const RISK_EQ_TOL: f64 = 1e-12;

/// Exact argmin of [`conditional_risk_01`] over all `C!` orders.
pub fn brute_force_bayes(eta: &CondDist, big_k: usize) -> Result<BayesSet> {
    let c = eta.classes();
    if c > MAX_ENUMERATION_CLASSES {
        return Err(Error::InvalidArgument(format!(
            "brute-force enumeration supports C <= {MAX_ENUMERATION_CLASSES}, got {c}"
        )));
    }
    check_range("K", big_k, 1, c - 1)?;
    let scored: Vec<(f64, RankOrder)> = (0..c)
        .permutations(c)
        .map(|perm| {
            let order = RankOrder { perm };
            let risk = conditional_risk_01(&order, eta, big_k).expect("shapes match");
            (risk, order)
        })
        .collect();
    let min_risk = scored.iter().map(|(r, _)| *r).fold(f64::INFINITY, f64::min);
    let orders = scored
        .into_iter()
        .filter(|(r, _)| *r <= min_risk + RISK_EQ_TOL)
        .map(|(_, o)| o)
        .collect();
    Ok(BayesSet { min_risk, orders })
}

/// Top-K ranking preservation with a strict gap: every class in η's top `K`
/// must beat every class of lower η by more than `gap_tol`.
///
/// Equivalently, positions `1..=K` of `s` hold η's top-`K` classes in η order
/// and no tie touches them.
pub fn is_rp(scores: &[f64], eta: &CondDist, big_k: usize, gap_tol: f64) -> bool {
    if scores.len() != eta.classes() || big_k == 0 || big_k > eta.classes() {
        return false;
    }
    let order = eta.descending_order();
    order[..big_k].iter().enumerate().all(|(pos, &a)| {
        order[pos + 1..]
            .iter()
            .all(|&b| scores[a] > scores[b] + gap_tol)
    })
}

/// Draws a strictly distinct η: exponential weights normalized to the simplex,
/// redrawn until every pairwise gap is at least [`ETA_MIN_GAP`].
pub fn random_eta(classes: usize, rng: &mut Rng) -> CondDist {
    loop {
        let w: Vec<f64> = (0..classes)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|v| v / total).collect();
        if min_pairwise_gap(&p) >= ETA_MIN_GAP {
            if let Ok(eta) = CondDist::new(p) {
                return eta;
            }
        }
    }
}

/// Which surrogate a consistency run exercises.
pub use crate::losses::Surrogate as LabFamily;

#[derive(Debug, Clone, Serialize)]
pub struct GridCheck {
    pub risk: f64,
    pub minimizer: Vec<f64>,
    pub rp: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub eta: Vec<f64>,
    pub minimizer: Vec<f64>,
    pub risk: f64,
    pub rp: bool,
    /// Grid-search cross-check, run for RP failures when `C` is small.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub family: String,
    #[serde(rename = "C")]
    pub classes: usize,
    #[serde(rename = "K")]
    pub big_k: usize,
    pub trials: usize,
    pub seed: u64,
    pub gap_tol: f64,
    pub rp_success_rate: f64,
    /// Smooth losses: largest `R(PGD) - R(grid)` over grid-checked trials.
    /// Hinge: smallest `R(s_rp) - R(s_tied)` of the counterexample sweep.
    pub worst_risk_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<HingeCounterexample>,
    pub records: Vec<TrialRecord>,
}

impl ConsistencyReport {
    pub fn rp_failures(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(|r| !r.rp)
    }
}

#[derive(Debug, Clone)]
pub struct LabConfig {
    pub pgd: PgdConfig,
    pub gap_tol: f64,
    /// Grid cross-check of RP failures runs only up to this many classes.
    pub grid_max_classes: usize,
    pub grid_resolution: f64,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            pgd: PgdConfig::default(),
            gap_tol: DEFAULT_GAP_TOL,
            grid_max_classes: 4,
            grid_resolution: 0.02,
        }
    }
}

/// Runs PGD on the conditional surrogate risk for `trials` random η and
/// checks each minimizer for top-K ranking preservation.
pub fn run_consistency(
    family: LabFamily,
    classes: usize,
    big_k: usize,
    trials: usize,
    seed: u64,
    config: &LabConfig,
) -> Result<ConsistencyReport> {
    use rayon::prelude::*;

    check_range("K", big_k, 1, classes.saturating_sub(1))?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialRecord> {
            let mut rng = rng::child(seed, Stream::Trial, &[classes as u64, big_k as u64, trial as u64]);
            let eta = random_eta(classes, &mut rng);
            let trial_seed = rng::derive_key(seed, Stream::Trial, &[trial as u64]);
            let pgd = minimize_surrogate_conditional_risk(family, &eta, big_k, trial_seed, &config.pgd)?;
            let rp = is_rp(&pgd.minimizer, &eta, big_k, config.gap_tol);
            let grid = (!rp && classes <= config.grid_max_classes)
                .then(|| grid_search(family, &eta, big_k, config.grid_resolution))
                .transpose()?
                .map(|g| GridCheck {
                    rp: is_rp(&g.minimizer, &eta, big_k, config.gap_tol),
                    risk: g.risk,
                    minimizer: g.minimizer,
                });
            Ok(TrialRecord {
                trial,
                eta: eta.to_vec(),
                minimizer: pgd.minimizer,
                risk: pgd.risk,
                rp,
                grid,
            })
        })
        .collect::<Result<_>>()?;
    let successes = records.iter().filter(|r| r.rp).count();
    let worst_risk_gap = records
        .iter()
        .filter_map(|r| r.grid.as_ref().map(|g| r.risk - g.risk))
        .reduce(f64::max);
    Ok(ConsistencyReport {
        family: family.name().to_string(),
        classes,
        big_k,
        trials,
        seed,
        gap_tol: config.gap_tol,
        rp_success_rate: successes as f64 / trials as f64,
        worst_risk_gap,
        counterexample: None,
        records,
    })
}

/// Number of random ranking-preserving score vectors compared against their
/// tied counterpart in a hinge run, besides the near-limit point.
pub const HINGE_RP_SAMPLES: usize = 1000;

/// Builds the hinge counterexample for `(C, K)`, sweeps random RP score
/// vectors against their tied versions, and runs PGD on the constructed η
/// once per trial (seeded per trial).
pub fn run_hinge_consistency(
    classes: usize,
    big_k: usize,
    trials: usize,
    seed: u64,
    config: &LabConfig,
) -> Result<ConsistencyReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let ce = hinge_counterexample(classes, big_k)?;
    let sweep = hinge_margin_sweep(&ce.eta, big_k, HINGE_RP_SAMPLES, seed)?;
    let records = (0..trials)
        .map(|trial| {
            let trial_seed = rng::derive_key(seed, Stream::Trial, &[trial as u64]);
            let pgd = minimize_surrogate_conditional_risk(LabFamily::Hinge, &ce.eta, big_k, trial_seed, &config.pgd)?;
            Ok(TrialRecord {
                trial,
                eta: ce.eta.to_vec(),
                rp: is_rp(&pgd.minimizer, &ce.eta, big_k, config.gap_tol),
                minimizer: pgd.minimizer,
                risk: pgd.risk,
                grid: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let successes = records.iter().filter(|r| r.rp).count();
    Ok(ConsistencyReport {
        family: LabFamily::Hinge.name().to_string(),
        classes,
        big_k,
        trials,
        seed,
        gap_tol: config.gap_tol,
        rp_success_rate: successes as f64 / trials as f64,
        worst_risk_gap: Some(sweep.min_gap.min(ce.risk_gap)),
        counterexample: Some(ce),
        records,
    })
}
